"""Binary PGM/PPM writers and readers, and gradient heatmap rendering."""
import numpy as np


def write_pgm(path, img):
    img = np.asarray(img)
    if img.dtype != np.uint8 or img.ndim != 2:
        raise ValueError("write_pgm expects a 2-D uint8 array")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(img.tobytes())


def write_ppm(path, img):
    img = np.asarray(img)
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("write_ppm expects an (H, W, 3) uint8 array")
    h, w, _ = img.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode())
        f.write(img.tobytes())


def read_pnm(path):
    with open(path, "rb") as f:
        raw = f.read()
    fields, pos = [], 0
    while len(fields) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    pos += 1
    magic, w, h, _ = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if magic == b"P5":
        return np.frombuffer(raw, np.uint8, w * h, pos).reshape(h, w)
    if magic == b"P6":
        return np.frombuffer(raw, np.uint8, w * h * 3, pos).reshape(h, w, 3)
    raise ValueError(f"{path}: unsupported image type {magic!r}")


def to_uint8(x, lo=-1.0, hi=1.0):
    """Map values in [lo, hi] to 0..255 by rounding."""
    return np.round((np.clip(x, lo, hi) - lo) / (hi - lo) * 255).astype(np.uint8)


def from_uint8(img, lo=-1.0, hi=1.0):
    return img.astype(np.float64) / 255 * (hi - lo) + lo


def render_heatmap(gradient, channels=None, low=0.5, high=99.5):
    """Grayscale heatmap of an image-shaped gradient.

    Channels are summed, values are capped at the ``low``/``high`` percentiles
    of the image and rescaled linearly to 0..255. A constant map renders as
    mid-gray (128); if only the tails vary, the raw range is used instead.
    """
    g = np.asarray(gradient, dtype=np.float64)
    if g.ndim == 3:
        if channels is not None and g.shape[0] != channels:
            raise ValueError(f"gradient has {g.shape[0]} channels, expected {channels}")
        g = g.sum(axis=0)
    elif g.ndim != 2:
        raise ValueError(f"gradient must be (C, H, W) or (H, W), got {g.shape}")
    lo, hi = np.percentile(g, [low, high])
    if hi <= lo:
        # capping would flatten a map whose spread sits entirely in the tails
        lo, hi = g.min(), g.max()
        if hi <= lo:
            return np.full(g.shape, 128, dtype=np.uint8)
    capped = np.clip(g, lo, hi)
    return np.round((capped - lo) / (hi - lo) * 255).astype(np.uint8)


def tile(images, cols, pad=1, fill=0):
    """Arrange equally sized 2-D uint8 images in a grid."""
    images = list(images)
    h, w = images[0].shape
    rows = -(-len(images) // cols)
    out = np.full((rows * (h + pad) + pad, cols * (w + pad) + pad), fill, dtype=np.uint8)
    for i, img in enumerate(images):
        r, c = divmod(i, cols)
        out[pad + r * (h + pad):pad + r * (h + pad) + h, pad + c * (w + pad):pad + c * (w + pad) + w] = img
    return out
