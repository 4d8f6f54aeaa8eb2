"""PGD attacks under l2 / linf budgets on the XEnt loss or the CW margin."""
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, Tape

NORMS = ("L2", "Linf")
OBJECTIVES = ("XEnt", "CW")


@dataclass
class AttackConfig:
    norm: str = "L2"
    epsilon: float = 1.0
    steps: int = 40
    step_size: float = None
    objective: str = "XEnt"
    random_start: bool = False
    seed: int = 0
    lower: float = -1.0
    upper: float = 1.0

    def __post_init__(self):
        if self.norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}, got {self.norm!r}")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be >= 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.step_size is None:
            self.step_size = 2.5 * self.epsilon / self.steps
        elif not self.step_size > 0:
            raise ValueError("step_size must be positive")


@dataclass
class AttackResult:
    """A batch of attacks; indexing yields single-example results."""
    x_adv: np.ndarray
    success: np.ndarray
    norm: np.ndarray
    objective: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return len(self.success)

    def __getitem__(self, i):
        obj = None if self.objective is None else self.objective[i]
        return AttackResult(self.x_adv[i], self.success[i], self.norm[i], obj)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def successful(self):
        keep = np.asarray(self.success, dtype=bool)
        obj = None if self.objective is None else self.objective[keep]
        return AttackResult(self.x_adv[keep], self.success[keep], self.norm[keep], obj)


def _flat_norms(d, norm):
    flat = d.reshape(len(d), -1)
    if norm == "L2":
        return np.sqrt(np.einsum("ij,ij->i", flat, flat))
    return np.abs(flat).max(axis=1) if flat.shape[1] else np.zeros(len(d))


def project_l2(delta, eps):
    """Radially shrink ``delta`` into the l2 ball of radius ``eps``."""
    delta = np.asarray(delta, dtype=np.float64)
    n = np.linalg.norm(delta)
    if n <= eps or n == 0:
        return delta.copy()
    return delta * (eps / n)


def project_linf(delta, eps):
    return np.clip(np.asarray(delta, dtype=np.float64), -eps, eps)


def _project_batch(delta, eps, norm):
    if norm == "Linf":
        return np.clip(delta, -eps, eps)
    n = _flat_norms(delta, "L2")
    factor = np.where(n > eps, eps / np.where(n > 0, n, 1.0), 1.0)
    return delta * factor.reshape((-1,) + (1,) * (delta.ndim - 1))


def cw_objective(logits, y_true):
    """Untargeted Carlini-Wagner margin ``max_{i != y} z_i - z_y`` (kappa = 0)."""
    logits = np.asarray(logits, dtype=np.float64)
    single = logits.ndim == 1
    out = ad.cw_margin(logits[None] if single else logits, np.atleast_1d(y_true)).data
    return float(out[0]) if single else out


def _objective(model, x, y, objective):
    """Per-example objective values and their input gradients."""
    xt = Tensor(x, requires_grad=True)
    with Tape() as tape:
        logits = model.forward(xt)
        if objective == "XEnt":
            per = ad.softmax_cross_entropy(logits, y, reduction="none")
        else:
            per = ad.cw_margin(logits, y)
        total = ad.reduce_sum(per)
    ad.backward(tape, total, wrt=[xt])
    return per.data, logits.data, xt.grad


def _random_start(x, cfg, rng):
    n = len(x)
    d = x[0].size
    if cfg.norm == "Linf":
        delta = rng.uniform(-cfg.epsilon, cfg.epsilon, size=x.shape)
    else:
        u = rng.standard_normal((n, d))
        u /= np.maximum(np.linalg.norm(u, axis=1, keepdims=True), 1e-300)
        r = cfg.epsilon * rng.uniform(size=(n, 1)) ** (1.0 / d)
        delta = (u * r).reshape(x.shape)
    return delta


def pgd_attack(model, x, y_true, cfg):
    """Projected gradient ascent on the attack objective.

    Steps along sign(grad) for linf and grad/||grad||_2 for l2, then projects
    onto the epsilon ball and clamps to the data range. The iterate with the
    highest objective (the start point included) is returned. Examples whose
    gradient turns non-finite are returned unperturbed and flagged failed.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.shape == tuple(model.spec.input_shape)
    if single:
        x = x[None]
    y = np.atleast_1d(np.asarray(y_true, dtype=np.int64))
    n = len(x)
    lo, hi = cfg.lower, cfg.upper
    clean_pred = model.forward(Tensor(x)).data.argmax(axis=1)

    if cfg.epsilon == 0 or n == 0:
        res = AttackResult(x.copy(), np.zeros(n, dtype=bool), np.zeros(n))
        return res[0] if single else res

    rng = np.random.default_rng(cfg.seed)
    delta = _random_start(x, cfg, rng) if cfg.random_start else np.zeros_like(x)
    x_cur = np.clip(x + _project_batch(delta, cfg.epsilon, cfg.norm), lo, hi)

    best_x = x_cur.copy()
    best_obj = np.full(n, -np.inf)
    best_pred = clean_pred.copy()
    broken = np.zeros(n, dtype=bool)
    bshape = (-1,) + (1,) * (x.ndim - 1)

    for step in range(cfg.steps + 1):
        with np.errstate(all="ignore"):
            obj, logits, g = _objective(model, x_cur, y, cfg.objective)
        bad = ~np.isfinite(obj) | ~np.all(np.isfinite(g.reshape(n, -1)), axis=1)
        broken |= bad
        better = (obj > best_obj) & ~broken
        best_obj = np.where(better, obj, best_obj)
        best_x[better] = x_cur[better]
        best_pred = np.where(better, logits.argmax(axis=1), best_pred)
        if step == cfg.steps:
            break
        g = np.where(bad.reshape(bshape), 0.0, g)
        if cfg.norm == "Linf":
            direction = np.sign(g)
        else:
            gn = _flat_norms(g, "L2")
            direction = g / np.where(gn > 0, gn, 1.0).reshape(bshape)
        delta = _project_batch(x_cur + cfg.step_size * direction - x, cfg.epsilon, cfg.norm)
        x_cur = np.clip(x + delta, lo, hi)

    best_x[broken] = x[broken]
    delta = best_x - x
    norms = _flat_norms(delta, cfg.norm)
    success = (best_pred != clean_pred) & ~broken
    best_obj = np.where(broken, np.nan, best_obj)
    res = AttackResult(best_x, success, norms, best_obj)
    return res[0] if single else res


def attack_success_filter(results):
    """Keep only attacks that changed the prediction, preserving order."""
    return [r for r in results if bool(r.success)]
