"""Datasets: the two-Gaussian toy problem, IDX (MNIST-format) files, and
small image sets for desk-scale runs. All inputs live in [-1, 1].
"""
import gzip
import math
import struct
from dataclasses import dataclass, field

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class IDXFormatError(ValueError):
    pass


@dataclass
class Dataset:
    """Inputs ``x`` of shape (n, *input_shape) and integer labels ``y``."""
    x: np.ndarray
    y: np.ndarray
    num_classes: int
    value_range: tuple = (-1.0, 1.0)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError(f"{self.x.shape[0]} inputs but {self.y.shape[0]} labels")

    def __len__(self):
        return self.x.shape[0]

    @property
    def input_shape(self):
        return tuple(self.x.shape[1:])

    def subset(self, idx):
        return Dataset(self.x[idx], self.y[idx], self.num_classes, self.value_range, dict(self.meta))

    def with_inputs(self, x):
        return Dataset(x, self.y.copy(), self.num_classes, self.value_range, dict(self.meta))


def split(ds, test_fraction=0.2, seed=0):
    """Shuffle once and cut into (train, test)."""
    perm = np.random.default_rng(seed).permutation(len(ds))
    n_test = int(round(test_fraction * len(ds)))
    return ds.subset(np.sort(perm[n_test:])), ds.subset(np.sort(perm[:n_test]))


def subsample(ds, n, seed=0):
    """Class-stratified subsample of at most ``n`` examples."""
    if n is None or n >= len(ds):
        return ds
    rng = np.random.default_rng(seed)
    classes = np.unique(ds.y)
    idx = []
    for k, c in enumerate(classes):
        members = np.flatnonzero(ds.y == c)
        share = n // len(classes) + (1 if k < n % len(classes) else 0)
        idx.append(rng.permutation(members)[:share])
    return ds.subset(np.sort(np.concatenate(idx)))


def downsample2x(ds):
    """2x2 average pooling of (n, C, H, W) images (odd edges are cropped)."""
    x = ds.x
    n, c, h, w = x.shape
    x = x[:, :, : h // 2 * 2, : w // 2 * 2]
    pooled = x.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))
    return ds.with_inputs(pooled)


# ---------------------------------------------------------------- toy data

# The published class covariance is indefinite (det < 0). Sampling it with
# numpy's SVD-based multivariate_normal effectively draws from the matrix with
# the same eigenvectors and absolute eigenvalues; that repaired matrix is the
# default here.
PUBLISHED_TOY_COVARIANCE = np.array([[0.1, -0.01], [-0.01, 0.0002]])


def spectral_abs(cov):
    w, v = np.linalg.eigh(np.asarray(cov, dtype=np.float64))
    return (v * np.abs(w)) @ v.T


@dataclass
class ToySpec:
    means: tuple = ((1.2, 0.1), (-1.2, -0.1))
    covariances: tuple = None
    samples_per_class: int = 3000
    seed: int = 0

    def __post_init__(self):
        if self.covariances is None:
            cov = spectral_abs(PUBLISHED_TOY_COVARIANCE)
            self.covariances = tuple(cov for _ in self.means)


def gen_toy(spec=None):
    """Sample the bivariate-Gaussian toy problem and scale it into [-1, 1].

    Scaling is one affine map shared by both coordinates (centre, then divide
    by the largest absolute coordinate), so l2 geometry is preserved.
    """
    spec = spec or ToySpec()
    rng = np.random.default_rng(spec.seed)
    xs, ys = [], []
    for label, (mean, cov) in enumerate(zip(spec.means, spec.covariances)):
        cov = np.asarray(cov, dtype=np.float64)
        if cov.shape != (2, 2) or not np.allclose(cov, cov.T):
            raise ValueError(f"class {label}: covariance must be a symmetric 2x2 matrix")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ValueError(f"class {label}: covariance is not positive definite") from None
        z = rng.standard_normal((spec.samples_per_class, 2))
        xs.append(np.asarray(mean) + z @ chol.T)
        ys.append(np.full(spec.samples_per_class, label))
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    center = (x.max(axis=0) + x.min(axis=0)) / 2
    radius = np.abs(x - center).max()
    x = (x - center) / radius
    meta = {"source": "toy", "center": center.tolist(), "scale": float(radius)}
    return Dataset(x, y, num_classes=len(spec.means), meta=meta)


# ---------------------------------------------------------------- IDX files

def _open(path):
    return gzip.open(path, "rb") if str(path).endswith(".gz") else open(path, "rb")


def _read_idx(path, expected_magic, expected_ndim):
    with _open(path) as f:
        raw = f.read()
    if len(raw) < 4:
        raise IDXFormatError(f"{path}: truncated header")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise IDXFormatError(f"{path}: bad magic number 0x{magic:08x}, expected 0x{expected_magic:08x}")
    header = 4 + 4 * expected_ndim
    if len(raw) < header:
        raise IDXFormatError(f"{path}: truncated header")
    dims = struct.unpack(f">{expected_ndim}I", raw[4:header])
    n = math.prod(dims)
    if len(raw) - header < n:
        raise IDXFormatError(f"{path}: truncated file, expected {n} bytes of data, found {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, count=n, offset=header).reshape(dims)


def load_idx(images_path, labels_path, limit=None, downsample=False, seed=0, num_classes=10):
    """Load an IDX image/label pair as (n, 1, H, W) inputs in [-1, 1]."""
    images = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise IDXFormatError(f"count mismatch: {images.shape[0]} images but {labels.shape[0]} labels")
    x = images[:, None, :, :].astype(np.float64) / 127.5 - 1.0
    ds = Dataset(x, labels.astype(np.int64), num_classes=num_classes,
                 meta={"source": "idx", "images": str(images_path)})
    ds = subsample(ds, limit, seed)
    return downsample2x(ds) if downsample else ds


def write_idx(images_path, labels_path, images, labels):
    """Write uint8 images (n, H, W) and labels (n,) in IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, *images.shape))
        f.write(images.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.shape[0]))
        f.write(labels.tobytes())


# ---------------------------------------------------------------- image sets

def load_digits_dataset():
    """The UCI handwritten digits bundled with scikit-learn: 1797 8x8 images."""
    from sklearn.datasets import load_digits

    d = load_digits()
    x = d.images[:, None, :, :] / 8.0 - 1.0
    return Dataset(x, d.target, num_classes=10, meta={"source": "digits"})


def synthetic_images(n=2000, size=12, num_classes=10, noise=0.35, seed=0):
    """Noisy class templates: each class is a fixed random smooth blob pattern."""
    from scipy.ndimage import gaussian_filter

    rng = np.random.default_rng(seed)
    templates = gaussian_filter(rng.standard_normal((num_classes, size, size)), sigma=(0, 1.5, 1.5))
    templates /= np.abs(templates).max(axis=(1, 2), keepdims=True)
    y = np.arange(n) % num_classes
    rng.shuffle(y)
    shift = rng.integers(-1, 2, size=(n, 2))
    x = np.empty((n, size, size))
    for i in range(n):
        x[i] = np.roll(templates[y[i]], tuple(shift[i]), axis=(0, 1))
    x += noise * rng.standard_normal(x.shape)
    x = np.clip(x, -1.0, 1.0)
    return Dataset(x[:, None], y, num_classes=num_classes, meta={"source": "synthetic"})
