"""
Input gradients as heatmaps
===========================

Loss gradients of a standard and a robust digit classifier, rendered with
percentile capping and tiled into PGM images. Robust models tend to give
smoother, more stroke-like gradients.
"""
import os

import numpy as np

from gradlens.adversary import AttackConfig
from gradlens.advtrain import AdvTrainConfig, adversarial_train
from gradlens.attribution import attr_gradient
from gradlens.data import load_digits_dataset, split
from gradlens.imageio import render_heatmap, tile, to_uint8, write_pgm
from gradlens.models import TrainConfig, small_cnn_spec

out = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(out, exist_ok=True)

train, test = split(load_digits_dataset(), 0.2, seed=0)
spec = small_cnn_spec(filters=(8, 8), hidden=32)
x, y = test.x[:16], test.y[:16]
write_pgm(os.path.join(out, "digits.pgm"), tile([to_uint8(a[0]) for a in x], 8))

for eps in (0.0, 0.8):
    model = adversarial_train(spec, train, AdvTrainConfig(TrainConfig(epochs=5), AttackConfig(epsilon=eps)))
    g = attr_gradient(model, x, y).scores.reshape(x.shape)
    maps = [render_heatmap(gi) for gi in g]
    write_pgm(os.path.join(out, "gradients_eps%g.pgm" % eps), tile(maps, 8))
    # correlation between |gradient| and the ink of the digit itself
    r = np.corrcoef(np.abs(g).ravel(), (x > -0.5).ravel())[0, 1]
    print("eps=%.1f  corr(|grad|, ink) %.3f" % (eps, r))
