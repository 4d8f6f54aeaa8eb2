"""Adversarial training on adversarial images only, and epsilon sweeps."""
import csv
import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .adversary import AttackConfig, pgd_attack
from .models import Adam, TrainConfig, build, check_dataset, evaluate, loss_and_grads, minibatches


@dataclass
class AdvTrainConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    attack: AttackConfig = field(default_factory=lambda: AttackConfig(epsilon=0.0))
    # test examples used for the per-epoch robust accuracy (None = all)
    robust_eval_size: int = None


def batch_seed(seed, epoch, batch):
    return int(np.random.SeedSequence([seed, epoch, batch]).generate_state(1)[0])


def robust_accuracy(model, ds, attack, limit=None):
    """Accuracy on PGD examples built against ``model`` itself."""
    if limit is not None:
        ds = ds.subset(np.arange(min(limit, len(ds))))
    res = pgd_attack(model, ds.x, ds.y, attack)
    preds = model.forward(ad.Tensor(res.x_adv)).data.argmax(axis=1)
    return float(np.mean(preds == ds.y))


def adversarial_train(spec, ds, cfg, test=None, model=None):
    """Train ``spec`` on PGD examples regenerated against the current weights
    each minibatch. With epsilon 0 this is exactly :func:`models.train`.
    """
    tc, atk = cfg.train, cfg.attack
    model = model if model is not None else build(spec, tc.seed)
    check_dataset(model, ds)
    rng = np.random.default_rng(tc.seed)
    opt = Adam(model.params, tc)
    model.history.setdefault("robust_accuracy", [])
    for epoch in range(tc.epochs):
        total = 0.0
        for b, idx in enumerate(minibatches(len(ds), tc.batch_size, rng)):
            xb, yb = ds.x[idx], ds.y[idx]
            if atk.epsilon > 0:
                batch_atk = dataclasses.replace(atk, seed=batch_seed(atk.seed, epoch, b))
                res = pgd_attack(model, xb, yb, batch_atk)
                xb = res.x_adv
                assert np.all(res.norm <= atk.epsilon + 1e-9)
                assert xb.min() >= atk.lower and xb.max() <= atk.upper
            loss, grads = loss_and_grads(model, xb, yb)
            if not np.isfinite(loss):
                raise ad.NonFiniteError(f"adversarial_train: non-finite loss at epoch {epoch}, batch {b}")
            opt.step(grads)
            total += loss * len(idx)
        model.history["train_loss"].append(total / len(ds))
        if test is not None:
            model.history["test_accuracy"].append(evaluate(model, test))
            if atk.epsilon > 0:
                model.history["robust_accuracy"].append(robust_accuracy(model, test, atk, cfg.robust_eval_size))
            else:
                model.history["robust_accuracy"].append(model.history["test_accuracy"][-1])
    return model


@dataclass
class SweepPoint:
    epsilon: float
    norm: str
    objective: str
    model: object
    natural_accuracy: float
    robust_accuracy: float
    seed: int


def epsilon_sweep(spec, ds, norm, objective, eps_grid, base, test=None, attack_overrides=None,
                  robust_eval_size=None, workers=1):
    """One adversarially trained model per epsilon, all from ``base.seed``."""
    grid = [float(e) for e in eps_grid]
    if any(e < 0 for e in grid) or grid != sorted(grid):
        raise ValueError("epsilon grid must be non-negative and ascending")
    test = test if test is not None else ds
    overrides = dict(attack_overrides or {})

    def run(eps):
        atk = AttackConfig(norm=norm, epsilon=eps, objective=objective, seed=base.seed, **overrides)
        cfg = AdvTrainConfig(train=base, attack=atk, robust_eval_size=robust_eval_size)
        model = adversarial_train(spec, ds, cfg)
        nat = evaluate(model, test)
        rob = robust_accuracy(model, test, atk, robust_eval_size) if eps > 0 else nat
        return SweepPoint(eps, norm, objective, model, nat, rob, base.seed)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(run, grid))
    return [run(e) for e in grid]


MANIFEST_HEADER = ["epsilon", "norm", "objective", "natural_accuracy", "robust_accuracy", "seed"]


def write_manifest(points, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        for p in points:
            w.writerow([repr(p.epsilon), p.norm, p.objective, f"{p.natural_accuracy:.6f}",
                        f"{p.robust_accuracy:.6f}", p.seed])
