"""Remove-and-retrain (ROAR) / keep-and-retrain (KAR) evaluation."""
import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .attribution import attribute, rank_pixels
from .models import build, evaluate, train

MODES = ("ROAR", "KAR")


@dataclass
class OcclusionSpec:
    mode: str = "ROAR"
    fractions: tuple = (0.1, 0.3, 0.5, 0.7, 0.9)
    fill: str = "mean"  # "mean" (per-channel train mean) or a number
    retrains: int = 3
    absolute: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        fr = list(self.fractions)
        if not fr or any(not 0 < f <= 1 for f in fr) or fr != sorted(set(fr)):
            raise ValueError("fractions must be strictly ascending values in (0, 1]")
        if self.retrains < 1:
            raise ValueError("retrains must be >= 1")


@dataclass
class EvalCurve:
    fractions: np.ndarray
    accuracy: np.ndarray
    per_seed: np.ndarray  # (len(fractions), retrains)
    baseline: float
    baseline_per_seed: np.ndarray = None
    method: str = ""
    mode: str = ""

    def __post_init__(self):
        self.fractions = np.asarray(self.fractions, dtype=np.float64)
        self.accuracy = np.asarray(self.accuracy, dtype=np.float64)


@dataclass
class InterpretabilityScore:
    mu: float
    metric: str
    method: str
    model_id: str = ""


def n_occluded(fraction, pixels):
    # tolerance keeps e.g. 0.3 * 10 from rounding up to 4
    return min(pixels, math.ceil(fraction * pixels - 1e-9))


def occlusion_mask(ranks, fraction, mode):
    """Boolean (n, P) mask of pixels to replace, from per-example rankings."""
    ranks = np.atleast_2d(ranks)
    n, P = ranks.shape
    k = n_occluded(fraction, P)
    chosen = ranks[:, :k] if mode == "ROAR" else ranks[:, P - k:]
    mask = np.zeros((n, P), dtype=bool)
    np.put_along_axis(mask, chosen, True, axis=1)
    return mask


def fill_values(ds, fill):
    channels = ds.x.shape[1] if ds.x.ndim == 4 else 1
    if fill == "mean":
        if ds.x.ndim == 4:
            return ds.x.mean(axis=(0, 2, 3))
        return np.full(1, ds.x.mean())
    return np.full(channels, float(fill))


def occlude_dataset(ds, scores, fraction, mode, fill, absolute=False):
    """Replace all channels of the top (ROAR) or bottom (KAR) ranked pixels by ``fill``."""
    scores = np.atleast_2d(scores)
    if len(scores) != len(ds):
        raise ValueError(f"occlude_dataset: {len(scores)} attributions for {len(ds)} examples")
    if not 0 <= fraction <= 1:
        raise ValueError("occlude_dataset: fraction must lie in [0, 1]")
    x = ds.x
    if x.ndim == 4:
        n, C, H, W = x.shape
    else:
        n, C, H, W = x.shape[0], 1, 1, int(np.prod(x.shape[1:]))
    fill = np.broadcast_to(np.asarray(fill, dtype=np.float64).reshape(-1), (C,))
    ranks = rank_pixels(scores, C, absolute)
    mask = occlusion_mask(ranks, fraction, mode)
    out = x.reshape(n, C, H * W).copy()
    for c in range(C):
        out[:, c][mask] = fill[c]
    return ds.with_inputs(out.reshape(x.shape))


class Retrainer:
    """Builds and naturally trains a fresh model for a (dataset, seed) pair."""

    def __init__(self, spec, cfg):
        self.spec = spec
        self.cfg = cfg

    def __call__(self, train_ds, test_ds, seed):
        from dataclasses import replace
        model = build(self.spec, seed)
        train(model, train_ds, replace(self.cfg, seed=seed))
        return evaluate(model, test_ds)


def attributions_for(model, method, ds, seed=0):
    return attribute(method, model, ds.x, ds.y, seed=seed).scores


@dataclass
class CurveJob:
    """Inputs shared by every curve computed for one (train, test) split."""
    train: object
    test: object
    retrainer: object
    seeds: tuple = (0, 1, 2)
    fill: str = "mean"
    _baseline: tuple = field(default=None, repr=False)

    def baseline(self):
        if self._baseline is None:
            accs = np.array([self.retrainer(self.train, self.test, s) for s in self.seeds])
            self._baseline = (float(accs.mean()), accs)
        return self._baseline


def roar_kar_curve(model, method, spec, job, seed=0):
    """ROAR/KAR curve of ``method`` applied to the model under test.

    Attributions come from ``model``; every point (baseline included) is the
    mean accuracy of freshly retrained models on the occluded test split.
    """
    train_scores = attributions_for(model, method, job.train, seed=2 * seed)
    test_scores = attributions_for(model, method, job.test, seed=2 * seed + 1)
    return curve_from_scores(job, train_scores, test_scores, spec, method)


def curve_from_scores(job, train_scores, test_scores, spec, method=""):
    seeds = tuple(job.seeds)[: spec.retrains]
    if len(seeds) < spec.retrains:
        seeds = tuple(range(spec.retrains))
    fill = fill_values(job.train, spec.fill)
    base, base_seeds = job.baseline()
    rows = []
    for f in spec.fractions:
        tr = occlude_dataset(job.train, train_scores, f, spec.mode, fill, spec.absolute)
        te = occlude_dataset(job.test, test_scores, f, spec.mode, fill, spec.absolute)
        rows.append([job.retrainer(tr, te, s) for s in seeds])
    per_seed = np.array(rows)
    return EvalCurve(spec.fractions, per_seed.mean(axis=1), per_seed, base, base_seeds, method, spec.mode)


def _points(curve):
    f = np.asarray(curve.fractions, dtype=np.float64)
    a = np.asarray(curve.accuracy, dtype=np.float64)
    if f.size == 0:
        raise ValueError("curve is empty")
    if np.any(np.diff(f) < 0):
        raise ValueError("curve fractions are not sorted")
    if f[0] > 0:
        f = np.concatenate([[0.0], f])
        a = np.concatenate([[curve.baseline], a])
    return f, a


def auc(curve):
    """Trapezoidal area under accuracy vs. fraction, baseline prepended at 0."""
    f, a = _points(curve)
    return float(np.sum((f[1:] - f[:-1]) * (a[1:] + a[:-1]) / 2))


def aoc(curve):
    f, _ = _points(curve)
    return float(curve.baseline * f[-1] - auc(curve))


def mu_score(curve_g, curve_rand, metric, method="", model_id=""):
    """ROAR: AOC(g) - AOC(rand). KAR: AUC(g) - AUC(rand)."""
    if len(curve_g.fractions) != len(curve_rand.fractions) or \
            np.any(np.asarray(curve_g.fractions) != np.asarray(curve_rand.fractions)):
        raise ValueError("mu_score: curves have different fractions")
    if metric == "ROAR":
        mu = aoc(curve_g) - aoc(curve_rand)
    elif metric == "KAR":
        mu = auc(curve_g) - auc(curve_rand)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return InterpretabilityScore(mu, metric, method or curve_g.method, model_id)


class UndefinedCorrelationError(ValueError):
    pass


def _check_pair(xs, ys):
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1 or len(xs) < 2:
        raise ValueError("correlation needs two equal-length vectors of length >= 2")
    return xs, ys


def pearson(xs, ys):
    xs, ys = _check_pair(xs, ys)
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    sx = np.sqrt(dx @ dx)
    sy = np.sqrt(dy @ dy)
    if sx == 0 or sy == 0:
        raise UndefinedCorrelationError("correlation undefined for a constant input")
    return float(np.clip((dx @ dy) / (sx * sy), -1.0, 1.0))


def spearman(xs, ys):
    """Pearson correlation of average ranks."""
    xs, ys = _check_pair(xs, ys)
    return pearson(rankdata(xs), rankdata(ys))


def write_curve(path, curves):
    """CSV rows ``method, mode, fraction, seed, accuracy`` (fraction 0 = baseline)."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["method", "mode", "fraction", "seed", "accuracy"])
        for c in curves:
            if c.baseline_per_seed is not None:
                for s, acc in enumerate(c.baseline_per_seed):
                    w.writerow([c.method, c.mode, "0.0", s, f"{acc:.6f}"])
            for fr, row in zip(c.fractions, c.per_seed):
                for s, acc in enumerate(row):
                    w.writerow([c.method, c.mode, repr(float(fr)), s, f"{acc:.6f}"])
