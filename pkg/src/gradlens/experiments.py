"""Config-driven desk-scale runs of the four experiments.

Each ``exp_*`` function takes an :class:`ExperimentConfig`, writes CSV and
PGM/PPM artifacts under ``config.out`` and returns a dict with the in-memory
results (used by the acceptance tests) and the written paths.
"""
import csv
import dataclasses
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import data as data_mod
from .adversary import AttackConfig, pgd_attack
from .advtrain import AdvTrainConfig, adversarial_train, epsilon_sweep
from .attribution import attr_gradient, attribute
from .imageio import render_heatmap, tile, to_uint8, write_pgm, write_ppm
from .manifold import AllAttacksFailedError, d_pi, distance_distribution, fit_pca, train_autoencoder
from .models import (ModelSpec, TrainConfig, evaluate, layer_from_dict, mnist_cnn_spec, predict,
                     save_checkpoint, small_cnn_spec, toy_spec)
from .occlusion import CurveJob, OcclusionSpec, Retrainer, UndefinedCorrelationError, \
    curve_from_scores, mu_score, pearson, spearman

EXPERIMENTS = ("boundary-tilting", "manifold-distance", "roar-kar", "tradeoff")


class ConfigError(ValueError):
    pass


@dataclass
class DataConfig:
    source: str = "toy"  # toy | idx | digits | synthetic
    images: str = None
    labels: str = None
    test_images: str = None
    test_labels: str = None
    limit_train: int = 5000
    limit_test: int = 1000
    downsample: bool = False
    test_fraction: float = 0.2
    samples_per_class: int = 3000
    synthetic_n: int = 2000


@dataclass
class ModelConfig:
    arch: str = "auto"  # auto | toy | small-cnn | mnist-cnn
    filters: tuple = (8, 8)
    hidden: int = 32
    layers: list = None  # explicit layer dicts override arch


@dataclass
class ProjectorConfig:
    kind: str = "pca"  # pca | autoencoder
    k: int = None
    variance: float = 0.95
    zdim: int = 10
    hidden: tuple = (128,)
    epochs: int = 20
    latent_steps: int = 0
    latent_lr: float = 0.01


@dataclass
class ExperimentConfig:
    experiment: str
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    projector: ProjectorConfig = field(default_factory=ProjectorConfig)
    train: dict = field(default_factory=dict)
    attack: dict = field(default_factory=dict)
    # boundary-tilting
    toy_epsilons: list = field(default_factory=lambda: [0.0, 0.25, 0.5])
    visual_epsilon: float = 1.0
    resolution: int = 400
    # manifold-distance
    manifold_norm: str = "L2"
    manifold_epsilons: list = field(default_factory=lambda: [0.2, 0.4, 0.8])
    analysis_epsilon: float = None  # default: 3x the largest training epsilon
    analysis_size: int = 200
    # roar-kar / tradeoff
    norms: list = field(default_factory=lambda: ["L2"])
    objectives: list = field(default_factory=lambda: ["XEnt"])
    grids: dict = field(default_factory=lambda: {"L2": [0.0, 0.2, 0.4, 0.8, 1.6],
                                                 "Linf": [0.0, 0.025, 0.05, 0.1, 0.2]})
    methods: list = field(default_factory=lambda: ["G", "GX"])
    metrics: list = field(default_factory=lambda: ["ROAR", "KAR"])
    fractions: list = field(default_factory=lambda: [0.1, 0.3, 0.5, 0.7, 0.9])
    retrains: int = 3
    fill: object = "mean"
    absolute: bool = False
    robust_eval_size: int = 200
    save_checkpoints: bool = True
    # common
    seeds: list = field(default_factory=lambda: [0])
    out: str = "runs"
    workers: int = 1
    full: bool = False

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        d = self.data
        if d.source not in ("toy", "idx", "digits", "synthetic"):
            raise ConfigError(f"unknown data source {d.source!r}")
        if d.source == "idx":
            for key in ("images", "labels"):
                if not getattr(d, key):
                    raise ConfigError(f"data.{key} is required for idx input")
            for key in ("images", "labels", "test_images", "test_labels"):
                path = getattr(d, key)
                if path and not os.path.exists(path):
                    raise ConfigError(f"data.{key}: file not found: {path}")
        if self.experiment != "boundary-tilting" and d.source == "toy":
            raise ConfigError(f"{self.experiment} needs an image dataset (idx, digits or synthetic)")
        for norm in self.norms:
            if norm not in self.grids:
                raise ConfigError(f"no epsilon grid for norm {norm}")
        return self


_SECTIONS = {"data": DataConfig, "model": ModelConfig, "projector": ProjectorConfig}


def config_from_dict(d, **overrides):
    d = dict(d)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key, cls in _SECTIONS.items():
        if key in d:
            sub = dict(d[key] or {})
            fields = {f.name for f in dataclasses.fields(cls)}
            bad = set(sub) - fields
            if bad:
                raise ConfigError(f"unknown keys in {key}: {sorted(bad)}")
            d[key] = cls(**sub)
    d.update({k: v for k, v in overrides.items() if v is not None})
    cfg = ExperimentConfig(**d)
    if cfg.full:
        apply_full(cfg)
    return cfg.validate()


def load_config(path, **overrides):
    import yaml

    with open(path) as f:
        raw = yaml.safe_load(f) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(raw, **overrides)


def linear_grid(stop, step):
    n = int(round(stop / step))
    return [round(i * step, 10) for i in range(n + 1)]


def apply_full(cfg):
    """Switch to the published grids and architectures (hours of compute)."""
    cfg.grids = {"L2": linear_grid(1.6, 0.08), "Linf": linear_grid(0.4, 0.002)}
    cfg.norms = ["L2", "Linf"]
    cfg.objectives = ["XEnt", "CW"]
    cfg.manifold_epsilons = [1.0, 2.0, 4.0]
    cfg.analysis_epsilon = 12.0
    cfg.data.limit_train = None
    cfg.data.limit_test = None
    if cfg.model.arch in ("auto", "small-cnn") and cfg.model.layers is None:
        cfg.model.arch = "mnist-cnn"
    cfg.train.setdefault("epochs", 5)


# ---------------------------------------------------------------- datasets

def load_data(cfg, seed):
    """(train, test) for the configured source; splits depend on ``seed``."""
    d = cfg.data
    if d.source == "toy":
        ds = data_mod.gen_toy(data_mod.ToySpec(samples_per_class=d.samples_per_class, seed=seed))
        return data_mod.split(ds, d.test_fraction, seed)
    if d.source == "idx":
        train = data_mod.load_idx(d.images, d.labels, d.limit_train, d.downsample, seed)
        if d.test_images:
            test = data_mod.load_idx(d.test_images, d.test_labels, d.limit_test, d.downsample, seed)
            return train, test
        return data_mod.split(train, d.test_fraction, seed)
    if d.source == "digits":
        ds = data_mod.load_digits_dataset()
    else:
        ds = data_mod.synthetic_images(d.synthetic_n, seed=0)
    train, test = data_mod.split(ds, d.test_fraction, seed)
    return data_mod.subsample(train, d.limit_train, seed), data_mod.subsample(test, d.limit_test, seed)


def model_spec(cfg, ds):
    m = cfg.model
    if m.layers:
        return ModelSpec(tuple(layer_from_dict(l) for l in m.layers), ds.input_shape, ds.num_classes)
    arch = m.arch
    if arch == "auto":
        arch = "toy" if len(ds.input_shape) == 1 else "small-cnn"
    if arch == "toy":
        return toy_spec()
    if arch == "mnist-cnn":
        return mnist_cnn_spec(ds.input_shape)
    if arch == "small-cnn":
        return small_cnn_spec(ds.input_shape, ds.num_classes, tuple(m.filters), m.hidden)
    raise ConfigError(f"unknown model arch {arch!r}")


def train_config(cfg, seed, default_epochs):
    kw = {"epochs": default_epochs, **cfg.train, "seed": seed}
    return TrainConfig(**kw)


def attack_config(cfg, **kw):
    extra = {k: v for k, v in cfg.attack.items() if k in ("steps", "step_size", "random_start")}
    return AttackConfig(**{**extra, **kw})


# ---------------------------------------------------------------- output

class Writer:
    """Accumulates rows per CSV and writes each file once, in order."""

    def __init__(self, out):
        self.out = out
        self.tables = {}
        self.files = {}
        os.makedirs(out, exist_ok=True)

    def path(self, name):
        p = os.path.join(self.out, name)
        self.files[name] = p
        return p

    def table(self, name, header):
        self.tables.setdefault(name, (header, []))
        return self.tables[name][1]

    def flush(self):
        paths = dict(self.files)
        for name, (header, rows) in self.tables.items():
            p = self.path(name)
            with open(p, "w", newline="") as f:
                w = csv.writer(f, lineterminator="\n")
                w.writerow(header)
                w.writerows(rows)
            paths[name] = p
        return paths


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def row(*values):
    return [fmt(v) for v in values]


# ---------------------------------------------------------------- boundary tilting

def decision_raster(model, bounds, resolution):
    """Predicted class on a ``resolution`` x ``resolution`` grid of pixel centres.

    Row 0 is the top (largest second coordinate).
    """
    (x0, x1), (y0, y1) = bounds
    xs = x0 + (np.arange(resolution) + 0.5) * (x1 - x0) / resolution
    ys = y1 - (np.arange(resolution) + 0.5) * (y1 - y0) / resolution
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    return predict(model, pts).reshape(resolution, resolution)


def raster_bounds(x, pad=0.2):
    lo, hi = x.min(axis=0), x.max(axis=0)
    span = hi - lo
    return (lo[0] - pad * span[0], hi[0] + pad * span[0]), (lo[1] - pad * span[1], hi[1] + pad * span[1])


def raster_index(points, bounds, resolution):
    (x0, x1), (y0, y1) = bounds
    col = np.floor((points[:, 0] - x0) / (x1 - x0) * resolution).astype(int)
    rw = np.floor((y1 - points[:, 1]) / (y1 - y0) * resolution).astype(int)
    return np.clip(rw, 0, resolution - 1), np.clip(col, 0, resolution - 1)


_REGION = np.array([[170, 190, 255], [255, 180, 170]], dtype=np.uint8)
_POINT = np.array([[20, 40, 200], [200, 30, 20]], dtype=np.uint8)


def render_raster(raster, bounds, points=None, labels=None, marks=None):
    img = _REGION[raster]
    res = raster.shape[0]
    if points is not None:
        r, c = raster_index(points, bounds, res)
        img[r, c] = _POINT[labels]
    if marks is not None and len(marks):
        r, c = raster_index(marks, bounds, res)
        img[r, c] = 0
    return img


def boundary_crossing(model, start, end, tol=1e-9):
    """Bisection for the first class change on the segment start -> end.

    Returns the fraction t in [0, 1], or nan when both ends agree.
    """
    p0 = predict(model, start[None])[0]
    if predict(model, end[None])[0] == p0:
        return float("nan")
    lo, hi = 0.0, 1.0
    # a coarse scan first so bisection brackets the first crossing
    ts = np.linspace(0, 1, 1001)
    preds = predict(model, start + ts[:, None] * (end - start))
    first = int(np.flatnonzero(preds != p0)[0])
    lo, hi = ts[first - 1], ts[first]
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if predict(model, (start + mid * (end - start))[None])[0] == p0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def exp_boundary_tilting(cfg):
    w = Writer(cfg.out)
    acc_rows = w.table("accuracy.csv", ["seed", "model", "epsilon", "natural_accuracy", "robust_accuracy"])
    att_rows = w.table("attacks.csv", ["seed", "model", "example_id", "x0", "x1", "adv0", "adv1",
                                       "success", "norm", "d_pi"])
    dist_rows = w.table("distances.csv", ["seed", "model", "cohort", "count", "mean", "median"])
    tilt_rows = w.table("tilt.csv", ["seed", "model", "epsilon", "crossing_t", "distance_to_class2_centroid"])
    results = []
    names = {0.0: "standard"}
    for seed in cfg.seeds:
        train, test = load_data(cfg, seed)
        spec = model_spec(cfg, train)
        proj = fit_pca(train, k=cfg.projector.k or 1)
        bounds = raster_bounds(train.x)
        c1 = train.x[train.y == 0].mean(axis=0)
        c2 = train.x[train.y == 1].mean(axis=0)
        targets = test.subset(np.flatnonzero(test.y == 1))
        seed_res = {"seed": seed, "models": {}, "test_d_pi": distance_distribution(proj, test.x)}
        dist_rows.append(row(seed, "-", "test", len(test), seed_res["test_d_pi"].mean, seed_res["test_d_pi"].median))
        for eps in cfg.toy_epsilons:
            name = names.get(float(eps), f"l2_{eps:g}")
            atk = attack_config(cfg, norm="L2", epsilon=float(eps), seed=seed)
            model = adversarial_train(spec, train, AdvTrainConfig(train_config(cfg, seed, 10), atk))
            nat = evaluate(model, test)
            eval_atk = attack_config(cfg, norm="L2", epsilon=float(eps) if eps > 0 else 0.5, seed=seed)
            rob_res = pgd_attack(model, test.x, test.y, eval_atk)
            rob = float(np.mean(predict(model, rob_res.x_adv) == test.y))
            acc_rows.append(row(seed, name, float(eps), nat, rob))

            vis = attack_config(cfg, norm="L2", epsilon=cfg.visual_epsilon, objective="XEnt", seed=seed)
            res = pgd_attack(model, targets.x, targets.y, vis)
            dists = d_pi(proj, res.x_adv)
            for i in range(len(targets)):
                att_rows.append(row(seed, name, i, *targets.x[i], *res.x_adv[i], res.success[i], res.norm[i], dists[i]))
            ok = res.successful()
            try:
                stats = distance_distribution(proj, ok.x_adv)
                dist_rows.append(row(seed, name, "adversarial", len(ok), stats.mean, stats.median))
            except AllAttacksFailedError:
                stats = None
                dist_rows.append(row(seed, name, "adversarial", 0, float("nan"), float("nan")))

            t = boundary_crossing(model, c1, c2)
            tilt_rows.append(row(seed, name, float(eps), t, (1 - t) * np.linalg.norm(c2 - c1)))

            raster = decision_raster(model, bounds, cfg.resolution)
            pts = train.subset(np.arange(0, len(train), 4))
            img = render_raster(raster, bounds, pts.x, pts.y, ok.x_adv)
            write_ppm(w.path(f"boundary_{name}_seed{seed}.ppm"), img)
            seed_res["models"][name] = {"model": model, "epsilon": float(eps), "natural_accuracy": nat,
                                        "robust_accuracy": rob, "attack": res, "distances": stats,
                                        "crossing_t": t, "raster": raster, "bounds": bounds}
        seed_res["train"], seed_res["test"], seed_res["projector"] = train, test, proj
        results.append(seed_res)
    return {"results": results, "paths": w.flush()}


# ---------------------------------------------------------------- manifold distance

def build_projector(cfg, train, seed):
    p = cfg.projector
    if p.kind == "pca":
        return fit_pca(train, k=p.k, variance=p.variance)
    if p.kind == "autoencoder":
        tc = TrainConfig(epochs=p.epochs, seed=seed)
        return train_autoencoder(train, p.zdim, tc, hidden=p.hidden)
    raise ConfigError(f"unknown projector kind {p.kind!r}")


def exp_manifold_distance(cfg):
    w = Writer(cfg.out)
    d_rows = w.table("distances.csv", ["seed", "model", "cohort", "example_id", "d_pi"])
    s_rows = w.table("distance_summary.csv", ["seed", "model", "epsilon", "cohort", "count", "mean", "median", "status"])
    h_rows = w.table("distance_hist.csv", ["seed", "model", "cohort", "bin_lo", "bin_hi", "count"])
    results = []
    train_eps = [float(e) for e in cfg.manifold_epsilons]
    analysis_eps = cfg.analysis_epsilon or 3.0 * max(train_eps)
    for seed in cfg.seeds:
        train, test = load_data(cfg, seed)
        spec = model_spec(cfg, train)
        proj = build_projector(cfg, train, seed)
        ana = test.subset(np.arange(min(cfg.analysis_size, len(test))))
        test_d = d_pi(proj, ana.x, cfg.projector.latent_steps, cfg.projector.latent_lr)
        seed_res = {"seed": seed, "projector": proj, "models": {}, "test_d_pi": test_d}
        models = [("standard", 0.0)] + [(f"{cfg.manifold_norm.lower()}_{e:g}", e) for e in train_eps]
        cohorts = {}
        for name, eps in models:
            atk = attack_config(cfg, norm=cfg.manifold_norm, epsilon=eps, seed=seed)
            model = adversarial_train(spec, train, AdvTrainConfig(train_config(cfg, seed, 5), atk))
            res = pgd_attack(model, ana.x, ana.y, attack_config(cfg, norm="L2", epsilon=analysis_eps, seed=seed))
            ok_idx = np.flatnonzero(res.success)
            adv_d = d_pi(proj, res.x_adv[ok_idx], cfg.projector.latent_steps, cfg.projector.latent_lr) \
                if len(ok_idx) else np.zeros(0)
            cohorts[name] = (eps, test_d, adv_d, ok_idx, res)
            seed_res["models"][name] = {"model": model, "epsilon": eps, "natural_accuracy": evaluate(model, test),
                                        "adv_d_pi": adv_d, "success_rate": float(res.success.mean()),
                                        "attack": res}
            if cfg.save_checkpoints:
                save_checkpoint(model, w.path(f"model_{name}_seed{seed}.npz"))
            grads = attr_gradient(model, ana.x[:16], ana.y[:16]).scores.reshape((-1,) + ana.input_shape)
            write_pgm(w.path(f"gradients_{name}_seed{seed}.pgm"), tile([render_heatmap(g) for g in grads], 8))
            if len(ok_idx):
                # paired tiles: the same successful examples before and after the attack
                for kind, imgs in (("adversarial", res.x_adv[ok_idx[:16]]), ("clean", ana.x[ok_idx[:16]])):
                    write_pgm(w.path(f"{kind}_{name}_seed{seed}.pgm"),
                              tile([to_uint8(a.mean(axis=0)) for a in imgs], 8))
        all_d = np.concatenate([test_d] + [c[2] for c in cohorts.values()])
        edges = np.histogram_bin_edges(all_d, bins=30)
        for name, (eps, td, ad_, ok_idx, res) in cohorts.items():
            for cohort, values, ids in (("test", td, np.arange(len(td))), ("adversarial", ad_, ok_idx)):
                for i, v in zip(ids, values):
                    d_rows.append(row(seed, name, cohort, i, v))
                if len(values):
                    s_rows.append(row(seed, name, eps, cohort, len(values), values.mean(), np.median(values), "ok"))
                else:
                    s_rows.append(row(seed, name, eps, cohort, 0, float("nan"), float("nan"), "all_attacks_failed"))
                counts, _ = np.histogram(values, bins=edges)
                for lo, hi, c in zip(edges[:-1], edges[1:], counts):
                    h_rows.append(row(seed, name, cohort, lo, hi, c))
        results.append(seed_res)
    return {"results": results, "analysis_epsilon": analysis_eps, "paths": w.flush()}


# ---------------------------------------------------------------- ROAR / KAR and trade-off

def _corr(fn, xs, ys):
    try:
        return fn(xs, ys)
    except UndefinedCorrelationError:
        return float("nan")


def exp_roar_kar(cfg):
    w = Writer(cfg.out)
    score_rows = w.table("scores.csv", ["seed", "norm", "objective", "epsilon", "epsilon_scaled",
                                        "natural_accuracy", "robust_accuracy", "method", "metric", "mu"])
    curve_rows = w.table("curves.csv", ["seed", "norm", "objective", "epsilon", "method", "mode",
                                        "fraction", "retrain", "accuracy"])
    corr_rows = w.table("correlations.csv", ["seed", "norm", "objective", "method", "metric", "x",
                                             "pearson", "spearman"])
    trade_rows = w.table("tradeoff.csv", ["seed", "norm", "objective", "epsilon", "natural_accuracy",
                                          "method", "metric", "mu"])
    manifest_rows = w.table("manifest.csv", ["seed", "epsilon", "norm", "objective", "natural_accuracy",
                                             "robust_accuracy"])
    results = []
    for seed in cfg.seeds:
        train, test = load_data(cfg, seed)
        spec = model_spec(cfg, train)
        base = train_config(cfg, seed, 5)
        job = CurveJob(train, test, Retrainer(spec, base), seeds=tuple(range(cfg.retrains)))
        occ = {m: OcclusionSpec(m, tuple(cfg.fractions), cfg.fill, cfg.retrains, cfg.absolute) for m in cfg.metrics}
        rand_scores = (attribute("Rand", None, train.x, train.y, seed=2 * seed).scores,
                       attribute("Rand", None, test.x, test.y, seed=2 * seed + 1).scores)
        rand = {m: curve_from_scores(job, *rand_scores, occ[m], "Rand") for m in cfg.metrics}
        cache = {}
        seed_res = {"seed": seed, "random_curves": rand, "sweeps": {}}
        for norm in cfg.norms:
            for objective in cfg.objectives:
                overrides = {k: v for k, v in cfg.attack.items() if k in ("steps", "step_size", "random_start")}
                points = epsilon_sweep(spec, train, norm, objective, cfg.grids[norm], base, test=test,
                                       attack_overrides=overrides, robust_eval_size=cfg.robust_eval_size,
                                       workers=cfg.workers)
                emax = max(cfg.grids[norm]) or 1.0
                rows = []
                for p in points:
                    manifest_rows.append(row(seed, p.epsilon, norm, objective, p.natural_accuracy, p.robust_accuracy))
                    if cfg.save_checkpoints:
                        save_checkpoint(p.model, w.path(f"model_{norm}_{objective}_eps{p.epsilon:g}_seed{seed}.npz"))
                    for method in cfg.methods:
                        key = (method, p.epsilon == 0)
                        if p.epsilon == 0 and key in cache:
                            curves = cache[key]
                        else:
                            tr_s = attribute(method, p.model, train.x, train.y).scores
                            te_s = attribute(method, p.model, test.x, test.y).scores
                            curves = {m: curve_from_scores(job, tr_s, te_s, occ[m], method) for m in cfg.metrics}
                            if p.epsilon == 0:
                                cache[key] = curves
                        for metric in cfg.metrics:
                            c = curves[metric]
                            mu = mu_score(c, rand[metric], metric, method).mu
                            rows.append((p, method, metric, mu, c))
                            score_rows.append(row(seed, norm, objective, p.epsilon, p.epsilon / emax,
                                                  p.natural_accuracy, p.robust_accuracy, method, metric, mu))
                            trade_rows.append(row(seed, norm, objective, p.epsilon, p.natural_accuracy,
                                                  method, metric, mu))
                            for fr, accs in zip(c.fractions, c.per_seed):
                                for r, a in enumerate(accs):
                                    curve_rows.append(row(seed, norm, objective, p.epsilon, method, metric, fr, r, a))
                corr = {}
                for method in cfg.methods:
                    for metric in cfg.metrics:
                        sel = [r for r in rows if r[1] == method and r[2] == metric]
                        eps = [r[0].epsilon for r in sel]
                        accs = [r[0].natural_accuracy for r in sel]
                        mus = [r[3] for r in sel]
                        ce = (_corr(pearson, eps, mus), _corr(spearman, eps, mus))
                        ca = (_corr(pearson, accs, mus), _corr(spearman, accs, mus))
                        corr_rows.append(row(seed, norm, objective, method, metric, "epsilon", *ce))
                        corr_rows.append(row(seed, norm, objective, method, metric, "natural_accuracy", *ca))
                        corr[(method, metric)] = {"epsilon": ce, "accuracy": ca, "mu": mus, "eps": eps, "acc": accs}
                seed_res["sweeps"][(norm, objective)] = {"points": points, "correlations": corr}
        for metric, c in rand.items():
            for fr, accs in zip(c.fractions, c.per_seed):
                for r, a in enumerate(accs):
                    curve_rows.append(row(seed, "-", "-", float("nan"), "Rand", metric, fr, r, a))
        for r, a in enumerate(job.baseline()[1]):
            curve_rows.append(row(seed, "-", "-", float("nan"), "baseline", "-", 0.0, r, a))
        results.append(seed_res)
    return {"results": results, "paths": w.flush()}


def exp_tradeoff(cfg):
    """Same pipeline as :func:`exp_roar_kar`; ``tradeoff.csv`` is the table of interest."""
    return exp_roar_kar(cfg)


RUNNERS = {"boundary-tilting": exp_boundary_tilting, "manifold-distance": exp_manifold_distance,
           "roar-kar": exp_roar_kar, "tradeoff": exp_tradeoff}


def run(cfg):
    return RUNNERS[cfg.experiment](cfg)
