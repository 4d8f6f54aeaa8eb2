"""
Distance of adversarial digits to a PCA manifold
================================================

Small CNNs on the 8x8 scikit-learn digits, one standard and two trained
against l2 adversaries. Each is attacked with a budget three times the
largest training budget; successful attacks are compared with clean test
images by their distance to a 95%-variance PCA subspace.
"""
import numpy as np

from gradlens.adversary import AttackConfig, pgd_attack
from gradlens.advtrain import AdvTrainConfig, adversarial_train
from gradlens.data import load_digits_dataset, split
from gradlens.manifold import d_pi, fit_pca
from gradlens.models import TrainConfig, evaluate, small_cnn_spec

train, test = split(load_digits_dataset(), 0.2, seed=0)
spec = small_cnn_spec(filters=(8, 8), hidden=32)

proj = fit_pca(train)
print("PCA keeps %d of 64 directions" % len(proj.components))

probe = test.subset(np.arange(150))
clean = d_pi(proj, probe.x)
print("clean test images      mean d_pi %.3f" % clean.mean())

for eps in (0.0, 0.4, 0.8):
    model = adversarial_train(spec, train, AdvTrainConfig(TrainConfig(epochs=5), AttackConfig(epsilon=eps)))
    res = pgd_attack(model, probe.x, probe.y, AttackConfig(norm="L2", epsilon=2.4))
    adv = res.successful()
    if len(adv) == 0:
        print("eps=%.1f  no successful attacks" % eps)
        continue
    print("eps=%.1f  acc %.3f  success %.2f  mean d_pi %.3f"
          % (eps, evaluate(model, test), res.success.mean(), d_pi(proj, adv.x_adv).mean()))
