"""
Boundary tilting on the two-Gaussian toy problem
================================================

Train a plain two-layer ReLU net and two adversarially trained ones, attack
class-2 points with an l2 budget of 1, and see how far the successful
adversarial points sit from the one-dimensional PCA "manifold" of the data.
Decision-region rasters are written next to this script as PPM files.
"""
import os


from gradlens.adversary import AttackConfig, pgd_attack
from gradlens.advtrain import AdvTrainConfig, adversarial_train
from gradlens.data import gen_toy, split
from gradlens.experiments import decision_raster, raster_bounds, render_raster
from gradlens.imageio import write_ppm
from gradlens.manifold import d_pi, fit_pca
from gradlens.models import TrainConfig, evaluate, toy_spec

out = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(out, exist_ok=True)

train, test = split(gen_toy(), 0.2, seed=0)
print("train", train.x.shape, "test", test.x.shape)

# the data lies along one long axis, so one principal component is the manifold
proj = fit_pca(train, k=1)
print("variance on the first component: %.4f" % proj.explained_variance_ratio[0])

class2 = test.subset(test.y == 1)
bounds = raster_bounds(train.x)

for eps in (0.0, 0.25, 0.5):
    cfg = AdvTrainConfig(TrainConfig(epochs=10, seed=0), AttackConfig(norm="L2", epsilon=eps))
    model = adversarial_train(toy_spec(), train, cfg)

    res = pgd_attack(model, class2.x, class2.y, AttackConfig(norm="L2", epsilon=1.0))
    ok = res.successful()
    dist = d_pi(proj, ok.x_adv)
    print("eps=%.2f  test acc %.3f  attacks flipped %3d/%d  mean d_pi %.3f"
          % (eps, evaluate(model, test), len(ok), len(class2), dist.mean()))

    img = render_raster(decision_raster(model, bounds, 400), bounds, train.x[::4], train.y[::4], ok.x_adv)
    write_ppm(os.path.join(out, "toy_boundary_eps%g.ppm" % eps), img)

# the robust models push adversarial points back toward the data axis:
# smaller d_pi means the perturbation follows the manifold instead of cutting across it
