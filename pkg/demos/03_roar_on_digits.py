"""
Remove-and-retrain on the digits
================================

Rank pixels by gradient*input from a standard and an adversarially trained
CNN, blank out the top fraction (ROAR), retrain fresh models on what is
left, and compare the accuracy drop with that of random rankings.
A positive mu_ROAR means the attribution found pixels that matter more than
random ones. Expect a few minutes of CPU time.
"""
from gradlens.adversary import AttackConfig
from gradlens.advtrain import AdvTrainConfig, adversarial_train
from gradlens.attribution import attribute
from gradlens.data import load_digits_dataset, split
from gradlens.models import TrainConfig, small_cnn_spec
from gradlens.occlusion import CurveJob, OcclusionSpec, Retrainer, curve_from_scores, mu_score

train, test = split(load_digits_dataset(), 0.2, seed=0)
spec = small_cnn_spec(filters=(8, 8), hidden=32)
cfg = TrainConfig(epochs=5)

# every point on every curve is a fresh standard model; the baseline is shared
job = CurveJob(train, test, Retrainer(spec, cfg), seeds=(0, 1))
roar = OcclusionSpec("ROAR", fractions=(0.1, 0.5, 0.9), retrains=2)

rand = curve_from_scores(job, attribute("Rand", None, train.x, train.y, seed=0).scores,
                         attribute("Rand", None, test.x, test.y, seed=1).scores, roar, "Rand")
print("baseline %.3f  random curve %s" % (rand.baseline, rand.accuracy.round(3)))

for eps in (0.0, 1.6):
    model = adversarial_train(spec, train, AdvTrainConfig(cfg, AttackConfig(epsilon=eps)))
    c = curve_from_scores(job, attribute("GX", model, train.x, train.y).scores,
                          attribute("GX", model, test.x, test.y).scores, roar, "GX")
    print("eps=%.1f  GX curve %s  mu_ROAR %+.3f" % (eps, c.accuracy.round(3), mu_score(c, rand, "ROAR").mu))

# on these tiny images the occlusion pattern itself leaks the digit shape,
# which is why retrained accuracy can stay high even with 90% of pixels gone
