"""Layer specs, parameter initialisation, Adam training and checkpoints."""
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, Tape

CHECKPOINT_FORMAT = "gradlens-model"
CHECKPOINT_VERSION = 1

ACTIVATIONS = ("relu", "tanh", "none")


@dataclass(frozen=True)
class Dense:
    units: int
    activation: str = "none"


@dataclass(frozen=True)
class Conv2D:
    filter: int
    stride: int
    filters: int
    activation: str = "none"
    padding: str = "valid"


@dataclass(frozen=True)
class MaxPool:
    window: int = 2
    stride: int = 2


@dataclass(frozen=True)
class Flatten:
    pass


_LAYER_TYPES = {"dense": Dense, "conv2d": Conv2D, "maxpool": MaxPool, "flatten": Flatten}


def layer_to_dict(layer):
    kind = next(k for k, v in _LAYER_TYPES.items() if isinstance(layer, v))
    return {"kind": kind, **asdict(layer)}


def layer_from_dict(d):
    d = dict(d)
    return _LAYER_TYPES[d.pop("kind")](**d)


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    """Ordered layers, the input shape, and the number of output logits."""
    layers: tuple
    input_shape: tuple
    num_classes: int

    def output_shapes(self):
        """Shape after each layer; raises SpecError naming the first bad layer."""
        shape = tuple(self.input_shape)
        shapes = []
        for i, layer in enumerate(self.layers):
            if getattr(layer, "activation", "none") not in ACTIVATIONS:
                raise SpecError(f"layer {i}: unknown activation {layer.activation!r}")
            if isinstance(layer, Dense):
                if len(shape) != 1:
                    raise SpecError(f"layer {i}: dense layer needs a flat input, got {shape} (add a flatten layer)")
                shape = (layer.units,)
            elif isinstance(layer, Conv2D):
                if len(shape) != 3:
                    raise SpecError(f"layer {i}: conv2d needs a (C, H, W) input, got {shape}")
                if layer.stride not in (1, 2):
                    raise SpecError(f"layer {i}: conv2d stride must be 1 or 2")
                c, h, w = shape
                if layer.padding == "same":
                    h, w = -(-h // layer.stride), -(-w // layer.stride)
                else:
                    h = (h - layer.filter) // layer.stride + 1
                    w = (w - layer.filter) // layer.stride + 1
                if h < 1 or w < 1:
                    raise SpecError(f"layer {i}: conv2d filter {layer.filter} does not fit input {shape}")
                shape = (layer.filters, h, w)
            elif isinstance(layer, MaxPool):
                if len(shape) != 3:
                    raise SpecError(f"layer {i}: maxpool needs a (C, H, W) input, got {shape}")
                c, h, w = shape
                h = (h - layer.window) // layer.stride + 1
                w = (w - layer.window) // layer.stride + 1
                if h < 1 or w < 1:
                    raise SpecError(f"layer {i}: maxpool window {layer.window} does not fit input {shape}")
                shape = (c, h, w)
            elif isinstance(layer, Flatten):
                shape = (int(np.prod(shape)),)
            else:
                raise SpecError(f"layer {i}: unknown layer {layer!r}")
            shapes.append(shape)
        return shapes

    def validate(self):
        shapes = self.output_shapes()
        if not shapes or shapes[-1] != (self.num_classes,):
            got = shapes[-1] if shapes else tuple(self.input_shape)
            raise SpecError(f"layer {len(self.layers) - 1}: final output {got} is not {self.num_classes} logits")
        return shapes

    def to_dict(self):
        return {"layers": [layer_to_dict(l) for l in self.layers],
                "input_shape": list(self.input_shape), "num_classes": self.num_classes}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(layer_from_dict(l) for l in d["layers"]),
                   tuple(d["input_shape"]), int(d["num_classes"]))


def toy_spec():
    return ModelSpec((Dense(128, "relu"), Dense(2)), (2,), 2)


def mnist_cnn_spec(input_shape=(1, 28, 28)):
    """Full-size MNIST/FMNIST architecture."""
    return ModelSpec((Conv2D(5, 1, 64, "relu"), Conv2D(5, 1, 32, "relu"), MaxPool(2, 2),
                      Flatten(), Dense(1024, "relu"), Dense(10)), tuple(input_shape), 10)


def small_cnn_spec(input_shape=(1, 8, 8), num_classes=10, filters=(16, 16), hidden=64):
    """Desk-scale version of the MNIST CNN: same layer pattern, fewer units, 3x3 filters."""
    f1, f2 = filters
    return ModelSpec((Conv2D(3, 1, f1, "relu", "same"), Conv2D(3, 1, f2, "relu", "same"), MaxPool(2, 2),
                      Flatten(), Dense(hidden, "relu"), Dense(num_classes)), tuple(input_shape), num_classes)


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 10
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class TrainedModel:
    spec: ModelSpec
    params: list
    history: dict = field(default_factory=lambda: {"train_loss": [], "test_accuracy": []})

    def forward(self, x):
        """Logits as a Tensor; records on the active tape, if any."""
        h = x
        it = iter(self.params)
        for layer in self.spec.layers:
            if isinstance(layer, Dense):
                h = ad.add_bias(ad.matmul(h, next(it)), next(it))
            elif isinstance(layer, Conv2D):
                h = ad.add_bias(ad.conv2d(h, next(it), layer.stride, layer.padding), next(it))
            elif isinstance(layer, MaxPool):
                h = ad.maxpool2d(h, layer.window, layer.stride)
            elif isinstance(layer, Flatten):
                h = ad.reshape(h, (h.shape[0], -1))
            act = getattr(layer, "activation", "none")
            if act == "relu":
                h = ad.relu(h)
            elif act == "tanh":
                h = ad.tanh(h)
        return h

    def param_count(self):
        return sum(p.size for p in self.params)

    def copy(self):
        return TrainedModel(self.spec, [Tensor(p.data.copy(), requires_grad=True) for p in self.params],
                            {k: list(v) for k, v in self.history.items()})


def build(spec, seed=0):
    """Fresh model with He-uniform weights (limit sqrt(6 / fan_in)) and zero biases."""
    shapes = spec.validate()
    rng = np.random.default_rng(seed)
    params = []
    in_shape = tuple(spec.input_shape)
    for layer, out_shape in zip(spec.layers, shapes):
        if isinstance(layer, Dense):
            fan_in = in_shape[0]
            wshape = (fan_in, layer.units)
        elif isinstance(layer, Conv2D):
            fan_in = in_shape[0] * layer.filter ** 2
            wshape = (layer.filters, in_shape[0], layer.filter, layer.filter)
        else:
            in_shape = out_shape
            continue
        limit = np.sqrt(6.0 / fan_in)
        params.append(Tensor(rng.uniform(-limit, limit, size=wshape), requires_grad=True))
        params.append(Tensor(np.zeros(wshape[1] if isinstance(layer, Dense) else wshape[0]), requires_grad=True))
        in_shape = out_shape
    return TrainedModel(spec, params)


def _check_input(model, x):
    x = np.asarray(x, dtype=np.float64)
    shape = tuple(model.spec.input_shape)
    if x.shape == shape:
        return x[None], True
    if x.shape[1:] != shape:
        raise ad.ShapeError(f"input shape {x.shape} does not match model input {shape}")
    return x, False


def predict_logits(model, x, batch_size=512):
    """Forward pass without recording; single inputs give a (C,) vector."""
    x, single = _check_input(model, x)
    out = [model.forward(Tensor(x[i:i + batch_size])).data for i in range(0, len(x), batch_size)]
    logits = np.concatenate(out) if out else np.zeros((0, model.spec.num_classes))
    return logits[0] if single else logits


def predict(model, x):
    return predict_logits(model, x).argmax(axis=-1)


def evaluate(model, ds):
    if len(ds) == 0:
        raise ValueError("evaluate: empty dataset")
    return float(np.mean(predict(model, ds.x) == ds.y))


class Adam:
    def __init__(self, params, cfg):
        self.params = params
        self.cfg = cfg
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]
        self.t = 0

    def step(self, grads):
        c = self.cfg
        self.t += 1
        bc1 = 1 - c.beta1 ** self.t
        bc2 = 1 - c.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= c.beta1
            m += (1 - c.beta1) * g
            v *= c.beta2
            v += (1 - c.beta2) * g * g
            p.data -= c.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + c.adam_eps)


def loss_and_grads(model, x, y):
    """Mean XEnt on a batch and the parameter gradients."""
    with Tape() as tape:
        loss = ad.softmax_cross_entropy(model.forward(Tensor(x)), y)
    backward_params(tape, loss, model.params)
    return float(loss.data), [p.grad for p in model.params]


def backward_params(tape, loss, params):
    for p in params:
        p.grad = None
    ad.backward(tape, loss, wrt=params)


def check_dataset(model, ds):
    if len(ds) == 0:
        raise ValueError("train: empty dataset")
    if ds.y.min() < 0 or ds.y.max() >= model.spec.num_classes:
        raise ValueError(f"train: label out of range for {model.spec.num_classes} classes")
    if ds.input_shape != tuple(model.spec.input_shape):
        raise ad.ShapeError(f"train: dataset inputs {ds.input_shape} do not match model input {model.spec.input_shape}")


def minibatches(n, batch_size, rng):
    perm = rng.permutation(n)
    return [perm[i:i + batch_size] for i in range(0, n, batch_size)]


def train(model, ds, cfg, test=None):
    """Minibatch Adam on mean softmax cross-entropy, in place; returns ``model``.

    Shuffling uses ``cfg.seed``; the final short batch is kept.
    """
    check_dataset(model, ds)
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(model.params, cfg)
    for epoch in range(cfg.epochs):
        total = 0.0
        for idx in minibatches(len(ds), cfg.batch_size, rng):
            loss, grads = loss_and_grads(model, ds.x[idx], ds.y[idx])
            if not np.isfinite(loss):
                raise ad.NonFiniteError(f"train: non-finite loss at epoch {epoch}")
            opt.step(grads)
            total += loss * len(idx)
        model.history["train_loss"].append(total / len(ds))
        if test is not None:
            model.history["test_accuracy"].append(evaluate(model, test))
    return model


# ---------------------------------------------------------------- checkpoints
#
# A checkpoint is an uncompressed .npz archive:
#   header  -> utf-8 JSON {"format", "version", "spec", "history", "n_params"}
#   p0..pK  -> float64 parameter arrays in layer order

def save_checkpoint(model, path):
    header = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION,
              "spec": model.spec.to_dict(), "history": model.history, "n_params": len(model.params)}
    arrays = {f"p{i}": p.data for i, p in enumerate(model.params)}
    buf = io.BytesIO()
    np.savez(buf, header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8), **arrays)
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_checkpoint(path):
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(z["header"].tobytes().decode())
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not a model checkpoint")
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
        params = [Tensor(z[f"p{i}"].copy(), requires_grad=True) for i in range(header["n_params"])]
    spec = ModelSpec.from_dict(header["spec"])
    model = TrainedModel(spec, params, header["history"])
    expected = build(spec).params
    for i, (p, e) in enumerate(zip(params, expected)):
        if p.shape != e.shape:
            raise ValueError(f"{path}: parameter {i} has shape {p.shape}, expected {e.shape}")
    return model
