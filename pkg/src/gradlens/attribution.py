"""Attribution methods: loss gradient, gradient*input, random scores."""
import csv
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, Tape

METHODS = ("G", "GX", "Rand")


@dataclass
class Attribution:
    """Signed scores, one row of length d per example (a single row for one input)."""
    scores: np.ndarray
    method: str
    model_id: str = ""
    example_ids: np.ndarray = None

    @property
    def d(self):
        return self.scores.shape[-1]


def _loss_gradient(model, x, y):
    x = np.asarray(x, dtype=np.float64)
    single = x.shape == tuple(model.spec.input_shape)
    xb = x[None] if single else x
    yb = np.atleast_1d(np.asarray(y, dtype=np.int64))
    xt = Tensor(xb, requires_grad=True)
    with Tape() as tape:
        loss = ad.softmax_cross_entropy(model.forward(xt), yb, reduction="sum")
    ad.backward(tape, loss, wrt=[xt])
    g = xt.grad.reshape(len(xb), -1)
    if not np.all(np.isfinite(g)):
        raise ad.NonFiniteError("attribution: non-finite input gradient")
    return g, xb.reshape(len(xb), -1), single


def attr_gradient(model, x, y_true, model_id=""):
    """Gradient of the true-label cross-entropy with respect to the input."""
    g, _, single = _loss_gradient(model, x, y_true)
    return Attribution(g[0] if single else g, "G", model_id)


def attr_grad_times_input(model, x, y_true, model_id=""):
    g, xf, single = _loss_gradient(model, x, y_true)
    s = xf * g
    return Attribution(s[0] if single else s, "GX", model_id)


def attr_random(seed, d, n=None):
    """i.i.d. standard normal scores; ``n`` rows use independent child seeds."""
    if d < 1:
        raise ValueError("attr_random: d must be >= 1")
    if n is None:
        return Attribution(np.random.default_rng(seed).standard_normal(d), "Rand")
    rows = [np.random.default_rng([seed, i]).standard_normal(d) for i in range(n)]
    return Attribution(np.array(rows).reshape(n, d), "Rand")


def attribute(method, model, x, y, seed=0, model_id=""):
    if method == "G":
        return attr_gradient(model, x, y, model_id)
    if method == "GX":
        return attr_grad_times_input(model, x, y, model_id)
    if method == "Rand":
        x = np.asarray(x)
        return attr_random(seed, int(np.prod(x.shape[1:])), len(x))
    raise ValueError(f"unknown attribution method {method!r}")


def pixel_importance(scores, channels, absolute=False):
    """Channel-summed importance, shape (..., P); inputs are channel-major."""
    scores = np.asarray(scores, dtype=np.float64)
    d = scores.shape[-1]
    if d % channels:
        raise ValueError(f"rank_pixels: d={d} is not divisible by {channels} channels")
    per = scores.reshape(scores.shape[:-1] + (channels, d // channels))
    if absolute:
        per = np.abs(per)
    return per.sum(axis=-2)


def rank_pixels(a, channels=1, absolute=False):
    """Pixel indices by descending importance; ties keep ascending index."""
    scores = a.scores if isinstance(a, Attribution) else a
    imp = pixel_importance(scores, channels, absolute)
    return np.argsort(-imp, axis=-1, kind="stable")


def write_attributions(path, attributions):
    """CSV rows ``example_id, method, s0, s1, ...``."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        d = attributions[0].d
        w.writerow(["example_id", "method"] + [f"s{i}" for i in range(d)])
        for att in attributions:
            rows = np.atleast_2d(att.scores)
            ids = att.example_ids if att.example_ids is not None else np.arange(len(rows))
            for i, row in zip(ids, rows):
                w.writerow([int(i), att.method] + [repr(float(v)) for v in row])
