"""Manifold projectors (PCA, l1 autoencoder) and the distance to them."""
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, Tape
from .models import Adam, Dense, TrainConfig, TrainedModel, minibatches

PROJECTOR_FORMAT = "gradlens-projector"
PROJECTOR_VERSION = 1


class AllAttacksFailedError(ValueError):
    """Raised when an adversarial cohort is empty after success filtering."""


@dataclass
class Projector:
    kind: str
    input_shape: tuple
    # PCA
    mean: np.ndarray = None
    components: np.ndarray = None  # (k, d), orthonormal rows
    explained_variance_ratio: np.ndarray = None
    # Autoencoder
    zdim: int = None
    encoder: TrainedModel = None
    decoder: TrainedModel = None
    history: list = field(default_factory=list)

    @property
    def dim(self):
        return int(np.prod(self.input_shape))


class _Net(TrainedModel):
    """A TrainedModel used as a plain dense network (no class-count check)."""


@dataclass(frozen=True)
class _NetSpec:
    layers: tuple
    input_shape: tuple
    num_classes: int


def _dense_net(sizes, activations, seed):
    rng = np.random.default_rng(seed)
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / fan_in)
        params.append(Tensor(rng.uniform(-limit, limit, (fan_in, fan_out)), requires_grad=True))
        params.append(Tensor(np.zeros(fan_out), requires_grad=True))
    layers = tuple(Dense(o, a) for o, a in zip(sizes[1:], activations))
    spec = _NetSpec(layers, (sizes[0],), sizes[-1])
    return _Net(spec, params, {"train_loss": []})


def fit_pca(ds, k=None, variance=0.95):
    """Top-``k`` principal components of the training inputs.

    With ``k=None`` the smallest k explaining ``variance`` of the total is used.
    Each component's largest-magnitude entry is made positive.
    """
    x = np.asarray(ds.x if hasattr(ds, "x") else ds, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("fit_pca: empty dataset")
    shape = x.shape[1:]
    flat = x.reshape(len(x), -1)
    d = flat.shape[1]
    if k is not None and not 1 <= k <= d:
        raise ValueError(f"fit_pca: k={k} must lie in [1, {d}]")
    mean = flat.mean(axis=0)
    centered = flat - mean
    cov = centered.T @ centered / max(len(x) - 1, 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    total = evals.sum()
    if total <= 0:
        raise ValueError("fit_pca: degenerate dataset (all inputs identical)")
    ratio = evals / total
    if k is None:
        k = int(np.searchsorted(np.cumsum(ratio), variance - 1e-12) + 1)
        k = min(k, d)
    comps = evecs[:, :k].T.copy()
    pivot = np.abs(comps).argmax(axis=1)
    signs = np.sign(comps[np.arange(k), pivot])
    comps *= signs[:, None]
    return Projector("PCA", tuple(shape), mean=mean, components=comps,
                     explained_variance_ratio=ratio[:k])


def train_autoencoder(ds, zdim=10, cfg=None, hidden=(128,), test=None):
    """Dense autoencoder trained on mean l1 reconstruction, tanh output."""
    if zdim < 1:
        raise ValueError("train_autoencoder: zdim must be >= 1")
    cfg = cfg or TrainConfig()
    x = np.asarray(ds.x, dtype=np.float64)
    shape = x.shape[1:]
    flat = x.reshape(len(x), -1)
    d = flat.shape[1]
    hidden = tuple(hidden)
    enc = _dense_net((d,) + hidden + (zdim,), ("relu",) * len(hidden) + ("none",), cfg.seed)
    dec = _dense_net((zdim,) + hidden[::-1] + (d,), ("relu",) * len(hidden) + ("tanh",), cfg.seed + 1)
    params = enc.params + dec.params
    opt = Adam(params, cfg)
    rng = np.random.default_rng(cfg.seed)
    history = []
    for epoch in range(cfg.epochs):
        total = 0.0
        for idx in minibatches(len(flat), cfg.batch_size, rng):
            xb = flat[idx]
            with Tape() as tape:
                rec = dec.forward(enc.forward(Tensor(xb)))
                loss = ad.scale(ad.reduce_sum(ad.absolute(ad.sub(rec, Tensor(xb)))), 1.0 / xb.size)
            for p in params:
                p.grad = None
            ad.backward(tape, loss, wrt=params)
            if not np.isfinite(loss.data):
                raise ad.NonFiniteError(f"train_autoencoder: diverged at epoch {epoch}")
            opt.step([p.grad for p in params])
            total += float(loss.data) * len(idx)
        history.append(total / len(flat))
    return Projector("Autoencoder", tuple(shape), zdim=zdim, encoder=enc, decoder=dec, history=history)


def _flat(projector, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape == projector.input_shape:
        return x.reshape(1, -1), True
    if x.shape[1:] != projector.input_shape:
        raise ad.ShapeError(f"input shape {x.shape} does not match projector input {projector.input_shape}")
    return x.reshape(len(x), -1), False


def _out(projector, flat, single):
    out = flat.reshape((len(flat),) + projector.input_shape)
    return out[0] if single else out


def encode(projector, x):
    flat, _ = _flat(projector, x)
    return projector.encoder.forward(Tensor(flat)).data


def decode(projector, z):
    return projector.decoder.forward(Tensor(np.atleast_2d(z))).data


def project(projector, x):
    """PCA: mean + C^T C (x - mean). Autoencoder: dec(enc(x))."""
    flat, single = _flat(projector, x)
    if projector.kind == "PCA":
        c = projector.components
        r = flat - projector.mean
        out = projector.mean + (r @ c.T) @ c
    else:
        out = decode(projector, encode(projector, flat.reshape((len(flat),) + projector.input_shape)))
    return _out(projector, out, single)


def project_latent_opt(projector, x, steps=50, lr=0.01):
    """dec(z*) with z* found by gradient descent on ||x - dec(z)||^2 from enc(x);
    the best iterate seen is kept, so the result is never worse than project().
    """
    if projector.kind != "Autoencoder":
        raise ValueError("project_latent_opt needs an autoencoder projector")
    flat, single = _flat(projector, x)
    z = encode(projector, flat.reshape((len(flat),) + projector.input_shape))
    best_rec = decode(projector, z)
    best_err = ((flat - best_rec) ** 2).sum(axis=1)
    for _ in range(steps):
        zt = Tensor(z, requires_grad=True)
        with Tape() as tape:
            diff = ad.sub(projector.decoder.forward(zt), Tensor(flat))
            loss = ad.reduce_sum(ad.mul(diff, diff))
        ad.backward(tape, loss, wrt=[zt])
        z = z - lr * zt.grad
        if not np.all(np.isfinite(z)):
            raise ad.NonFiniteError("project_latent_opt: non-finite latent iterate")
        rec = decode(projector, z)
        err = ((flat - rec) ** 2).sum(axis=1)
        better = err < best_err
        best_err = np.where(better, err, best_err)
        best_rec[better] = rec[better]
    return _out(projector, best_rec, single)


def d_pi(projector, x, latent_steps=0, lr=0.01):
    """Euclidean distance from ``x`` to its projection (vector for batches)."""
    flat, single = _flat(projector, x)
    if latent_steps:
        proj = project_latent_opt(projector, x, latent_steps, lr)
    else:
        proj = project(projector, x)
    dist = np.linalg.norm(flat - np.asarray(proj).reshape(len(flat), -1), axis=1)
    return float(dist[0]) if single else dist


@dataclass
class DistanceStats:
    values: np.ndarray
    mean: float
    median: float
    hist_counts: np.ndarray
    bin_edges: np.ndarray


def distance_distribution(projector, examples, bins=30, range_=None):
    x = np.asarray(examples, dtype=np.float64)
    if x.size == 0 or len(x) == 0:
        raise AllAttacksFailedError("distance_distribution: empty example set (all attacks failed?)")
    values = np.atleast_1d(d_pi(projector, x))
    counts, edges = np.histogram(values, bins=bins, range=range_)
    return DistanceStats(values, float(values.mean()), float(np.median(values)), counts, edges)


# A projector checkpoint is an uncompressed .npz with a JSON header and the
# PCA arrays (mean, components, ratio) or the autoencoder weights e0.., d0..

def save_projector(projector, path):
    header = {"format": PROJECTOR_FORMAT, "version": PROJECTOR_VERSION, "kind": projector.kind,
              "input_shape": list(projector.input_shape)}
    arrays = {}
    if projector.kind == "PCA":
        arrays.update(mean=projector.mean, components=projector.components,
                      ratio=projector.explained_variance_ratio)
    else:
        header["zdim"] = projector.zdim
        header["encoder"] = [[l.units, l.activation] for l in projector.encoder.spec.layers]
        header["decoder"] = [[l.units, l.activation] for l in projector.decoder.spec.layers]
        header["history"] = projector.history
        arrays.update({f"e{i}": p.data for i, p in enumerate(projector.encoder.params)})
        arrays.update({f"d{i}": p.data for i, p in enumerate(projector.decoder.params)})
    buf = io.BytesIO()
    np.savez(buf, header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8), **arrays)
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_projector(path):
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(z["header"].tobytes().decode())
        if header.get("format") != PROJECTOR_FORMAT:
            raise ValueError(f"{path}: not a projector checkpoint")
        if header.get("version") != PROJECTOR_VERSION:
            raise ValueError(f"{path}: unsupported projector version {header.get('version')}")
        shape = tuple(header["input_shape"])
        if header["kind"] == "PCA":
            return Projector("PCA", shape, mean=z["mean"].copy(), components=z["components"].copy(),
                             explained_variance_ratio=z["ratio"].copy())
        nets = []
        for prefix, key in (("e", "encoder"), ("d", "decoder")):
            layers = header[key]
            params = [Tensor(z[f"{prefix}{i}"].copy(), requires_grad=True) for i in range(2 * len(layers))]
            d_in = params[0].shape[0]
            spec = _NetSpec(tuple(Dense(u, a) for u, a in layers), (d_in,), layers[-1][0])
            nets.append(_Net(spec, params, {"train_loss": []}))
    return Projector("Autoencoder", shape, zdim=header["zdim"], encoder=nets[0], decoder=nets[1],
                     history=header["history"])
