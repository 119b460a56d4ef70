"""Dense tensor primitives.

Tensors are plain ``numpy.ndarray`` objects of dtype float32, channel-first
(``c x h x w``) for feature maps.  Binary masks are ``h x w`` boolean arrays.
Every function here is pure: inputs are never modified.
"""

import numpy as np

from .errors import DegenerateRowError, DimensionError

REAL = np.float32
MAX_ELEMENTS = 2**62


def element_count(dims):
    """Return the product of ``dims`` after validating every extent is >= 1."""
    count = 1
    for d in dims:
        if int(d) != d or d < 1:
            raise DimensionError(f"invalid extent {d!r} in shape {tuple(dims)}")
        count *= int(d)
        if count > MAX_ELEMENTS:
            raise DimensionError(f"shape {tuple(dims)} overflows element count")
    return count


def as_tensor(x):
    """Coerce ``x`` to a float32 array and validate its shape."""
    arr = np.asarray(x, dtype=REAL)
    element_count(arr.shape)
    return arr


def as_mask(m):
    """Coerce ``m`` to a 2-D boolean mask; only 0/1 values are accepted."""
    arr = np.asarray(m)
    if arr.ndim != 2:
        raise DimensionError(f"mask must be 2-D, got shape {arr.shape}")
    element_count(arr.shape)
    if arr.dtype != np.bool_:
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("mask values must be 0 or 1")
        arr = arr.astype(bool)
    return arr


def _spatial(x):
    return x.shape[-2:]


def elementwise_mul(a, b):
    """Multiply ``a`` (c x h x w) by ``b``; a 2-D ``b`` is broadcast over channels."""
    a = as_tensor(a)
    b = np.asarray(b)
    if a.ndim != 3:
        raise DimensionError(f"expected c x h x w tensor, got shape {a.shape}")
    if b.ndim == 2:
        if b.shape != _spatial(a):
            raise DimensionError(f"shape mismatch: {a.shape} vs mask {b.shape}")
        return a * b.astype(REAL)[None]
    if b.shape != a.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a * b.astype(REAL)


def channel_concat(parts):
    """Concatenate ``c_i x h x w`` tensors along the channel axis, in order."""
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise DimensionError("channel_concat needs at least one part")
    hw = _spatial(parts[0])
    for p in parts:
        if p.ndim != 3 or _spatial(p) != hw:
            raise DimensionError(
                f"spatial mismatch in concat: {[q.shape for q in parts]}")
    return np.concatenate(parts, axis=0)


def conv1x1(x, weights, bias=None):
    """1x1 convolution: ``out[o] = sum_i weights[o, i] * x[i] + bias[o]``."""
    x = as_tensor(x)
    w = np.asarray(weights, dtype=REAL)
    if x.ndim != 3 or w.ndim != 2 or w.shape[1] != x.shape[0]:
        raise DimensionError(
            f"conv1x1 weights {w.shape} incompatible with input {x.shape}")
    c, h, wd = x.shape
    out = (w.astype(np.float64) @ x.reshape(c, -1).astype(np.float64))
    if bias is not None:
        b = np.asarray(bias, dtype=REAL)
        if b.shape != (w.shape[0],):
            raise DimensionError(f"bias shape {b.shape} != ({w.shape[0]},)")
        out += b.astype(np.float64)[:, None]
    return out.reshape(w.shape[0], h, wd).astype(REAL)


def row_softmax(a):
    """Numerically stable softmax over the last axis of a 2-D array.

    ``-inf`` entries map to exactly zero.  A row without any finite entry
    raises :class:`DegenerateRowError`.
    """
    a = np.asarray(a, dtype=REAL)
    if a.ndim != 2:
        raise DimensionError(f"row_softmax expects a 2-D array, got {a.shape}")
    finite = np.isfinite(a)
    dead = ~finite.any(axis=1)
    if dead.any():
        raise DegenerateRowError(
            f"fully masked rows: {np.flatnonzero(dead)[:10].tolist()}")
    a64 = a.astype(np.float64)
    e = np.exp(a64 - a64.max(axis=1, keepdims=True))
    out = e / e.sum(axis=1, keepdims=True)
    return out.astype(REAL)


def _bilinear_axis(n_in, n_out):
    # half-pixel centers (corner alignment off), clamped at the borders
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, src - lo


def resize_bilinear(x, size):
    """Bilinearly resize the trailing two axes of ``x`` to ``size = (h, w)``."""
    x = as_tensor(x)
    h, w = (int(s) for s in size)
    element_count((h, w))
    if x.ndim < 2:
        raise DimensionError(f"resize needs at least 2 axes, got {x.shape}")
    if _spatial(x) == (h, w):
        return x.copy()
    y0, y1, fy = _bilinear_axis(x.shape[-2], h)
    x0, x1, fx = _bilinear_axis(x.shape[-1], w)
    src = x.astype(np.float64)
    top = src[..., y0, :]
    bot = src[..., y1, :]
    rows = top + (bot - top) * fy[:, None]
    left = rows[..., x0]
    right = rows[..., x1]
    return (left + (right - left) * fx).astype(REAL)


def masked_minmax_normalize(values, region):
    """Min-max normalize ``values`` over the active pixels of ``region``.

    Pixels outside the region are 0.  A region whose values are all equal
    maps to 0.5; an empty region yields an all-zero map.
    """
    v = as_tensor(values)
    squeeze = v.ndim == 3
    if squeeze:
        if v.shape[0] != 1:
            raise DimensionError(f"expected 1 x h x w values, got {v.shape}")
        v = v[0]
    region = as_mask(region)
    if v.shape != region.shape:
        raise DimensionError(f"values {v.shape} vs region {region.shape}")
    out = np.zeros(v.shape, dtype=np.float64)
    if region.any():
        sel = v[region].astype(np.float64)
        lo, hi = sel.min(), sel.max()
        if hi > lo:
            out[region] = (sel - lo) / (hi - lo)
        else:
            out[region] = 0.5
    out = out.astype(REAL)
    return out[None] if squeeze else out
