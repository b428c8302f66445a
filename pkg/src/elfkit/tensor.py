"""Dense array kernels: convolution, ReLU and max-pool forward passes with
their input vector-Jacobian products, plus separable Gaussian blurring.

All functions operate on 64-bit float numpy arrays laid out channels-first
(C, H, W) for images and feature maps, and (out_channels, in_channels, kH, kW)
for convolution filters.  Every operation is a pure function of its inputs and
is deterministic: per output element the summation order is fixed, so results
do not depend on thread count.

Only the gradient with respect to the *input* is provided.  The pipeline never
trains, it only backpropagates a feature map to the image, so weight gradients
are dead code here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ShapeError(ValueError):
    """Raised when operand dimensions are inconsistent."""


def _as_chw(x, name="input"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"{name} must be 3-D (C, H, W), got shape {x.shape}")
    if min(x.shape) < 1:
        raise ShapeError(f"{name} has empty extent: {x.shape}")
    return x


# ---------------------------------------------------------------------------
# Convolution
# ---------------------------------------------------------------------------

def conv2d_forward(x, weights, bias, stride=1, pad=0):
    """Cross-correlate a (C, H, W) input with (Co, C, kH, kW) filters.

    Zero padding of ``pad`` pixels is applied on every spatial border and the
    window slides with step ``stride``.  Output extents follow
    ``floor((H + 2*pad - kH) / stride) + 1`` per spatial dimension.  No kernel
    flip is performed (cross-correlation), matching mainstream frameworks.

    Parameters
    ----------
    x : ndarray, shape (C, H, W)
    weights : ndarray, shape (Co, C, kH, kW)
    bias : ndarray, shape (Co,)
    stride : int, >= 1
    pad : int, >= 0

    Returns
    -------
    ndarray, shape (Co, Ho, Wo)
    """
    x = _as_chw(x)
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 4:
        raise ShapeError(f"weights must be 4-D (Co, Ci, kH, kW), got {w.shape}")
    co, ci, kh, kw = w.shape
    c, h, wd = x.shape
    if ci != c:
        raise ShapeError(f"weights expect {ci} input channels, input has {c}")
    b = np.zeros(co) if bias is None else np.asarray(bias, dtype=np.float64)
    if b.shape != (co,):
        raise ShapeError(f"bias must have shape ({co},), got {b.shape}")
    if stride < 1 or pad < 0:
        raise ShapeError(f"invalid stride/pad: {stride}/{pad}")

    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    if h + 2 * pad < kh or wd + 2 * pad < kw:
        raise ShapeError(
            f"kernel {kh}x{kw} exceeds padded input {h + 2 * pad}x{wd + 2 * pad}"
        )

    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad))) if pad else x
    # (C, Ho, Wo, kH, kW) windows; contraction order per output element is
    # fixed by tensordot, independent of threading.
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    out = np.tensordot(w, win, axes=([1, 2, 3], [0, 3, 4]))
    out += b[:, None, None]
    return np.ascontiguousarray(out)


def conv2d_vjp_input(cotangent, weights, stride, pad, input_dims):
    """Gradient of ``<cotangent, conv2d_forward(x, weights, ...)>`` w.r.t. x.

    For the linear convolution this is the transposed convolution of the
    cotangent with the filters: each cotangent element scatters ``weights``
    back onto the window it was computed from.  The Jacobian is never
    materialised; cost is the same order as the forward pass.

    Parameters
    ----------
    cotangent : ndarray, shape (Co, Ho, Wo)
        Must match the forward output dims for ``input_dims``.
    weights : ndarray, shape (Co, Ci, kH, kW)
    input_dims : tuple (Ci, H, W)

    Returns
    -------
    ndarray, shape ``input_dims``
    """
    g = _as_chw(np.asarray(cotangent), "cotangent")
    w = np.asarray(weights, dtype=np.float64)
    co, ci, kh, kw = w.shape
    c, h, wd = input_dims
    if ci != c:
        raise ShapeError(f"weights expect {ci} input channels, input_dims has {c}")
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    if g.shape != (co, ho, wo):
        raise ShapeError(
            f"cotangent shape {g.shape} does not match forward output "
            f"({co}, {ho}, {wo}) for input {input_dims}"
        )

    # (Ci, kH, kW, Ho, Wo): per input-window tap, the weighted cotangent.
    tmp = np.tensordot(w, g, axes=([0], [0]))
    xg = np.zeros((c, h + 2 * pad, wd + 2 * pad))
    for ky in range(kh):
        for kx in range(kw):
            xg[:, ky:ky + stride * ho:stride, kx:kx + stride * wo:stride] += tmp[:, ky, kx]
    if pad:
        xg = xg[:, pad:pad + h, pad:pad + wd]
    return np.ascontiguousarray(xg)


# ---------------------------------------------------------------------------
# ReLU
# ---------------------------------------------------------------------------

def relu_forward(x):
    """Elementwise max(0, x)."""
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def relu_vjp(cotangent, forward_input, mode="mask"):
    """Backward pass through ReLU.

    ``mode='mask'`` is the true derivative: the cotangent passes where the
    forward input was strictly positive and is zeroed elsewhere.
    ``mode='identity'`` passes the whole signal through unchanged regardless
    of sign; this is the rule used when projecting feature maps back to the
    image, where clipping the signal at every non-linearity would discard
    localisation information.
    """
    g = np.asarray(cotangent, dtype=np.float64)
    x = np.asarray(forward_input, dtype=np.float64)
    if g.shape != x.shape:
        raise ShapeError(f"cotangent {g.shape} vs forward input {x.shape}")
    if mode == "mask":
        return np.where(x > 0.0, g, 0.0)
    if mode == "identity":
        return g.copy()
    raise ValueError(f"unknown relu mode {mode!r} (expected 'mask' or 'identity')")


# ---------------------------------------------------------------------------
# Max pooling
# ---------------------------------------------------------------------------

def maxpool_forward(x, k, stride):
    """Per-channel max over k-by-k windows, step ``stride``, no padding.

    Returns
    -------
    out : ndarray, shape (C, Ho, Wo)
    argmax : ndarray of int64, shape (C, Ho, Wo)
        Flat index into ``x`` of the element each window selected.  Ties are
        broken by the lowest flat index, deterministically.
    """
    x = _as_chw(x)
    c, h, w = x.shape
    if k < 1 or stride < 1:
        raise ShapeError(f"invalid pool window/stride: {k}/{stride}")
    if k > h or k > w:
        raise ShapeError(f"pool window {k} exceeds input {h}x{w}")
    ho = (h - k) // stride + 1
    wo = (w - k) // stride + 1

    win = sliding_window_view(x, (k, k), axis=(1, 2))[:, ::stride, ::stride]
    flat = win.reshape(c, ho, wo, k * k)
    # argmax returns the first maximum in window row-major order, which is
    # also the lowest flat index of the input within that window.
    aw = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, aw[..., None], axis=-1)[..., 0]

    ky, kx = aw // k, aw % k
    gy = (np.arange(ho) * stride)[None, :, None] + ky
    gx = (np.arange(wo) * stride)[None, None, :] + kx
    argmax = (np.arange(c)[:, None, None] * (h * w) + gy * w + gx).astype(np.int64)
    return np.ascontiguousarray(out), argmax


def maxpool_vjp(cotangent, argmax, input_dims):
    """Scatter-add each cotangent element to its recorded argmax position."""
    g = np.asarray(cotangent, dtype=np.float64)
    idx = np.asarray(argmax)
    if g.shape != idx.shape:
        raise ShapeError(f"cotangent {g.shape} vs argmax {idx.shape}")
    n = int(np.prod(input_dims))
    flat_idx = idx.ravel()
    if flat_idx.size and (flat_idx.min() < 0 or flat_idx.max() >= n):
        raise IndexError("argmax index out of bounds for input dims")
    grad = np.zeros(n)
    np.add.at(grad, flat_idx, g.ravel())
    return grad.reshape(input_dims)


# ---------------------------------------------------------------------------
# Gaussian blur
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianSpec:
    """Blur parameters: odd kernel width in pixels and standard deviation."""

    size: int
    sigma: float

    def __post_init__(self):
        if self.size < 1 or self.size % 2 == 0:
            raise ValueError(f"kernel size must be odd and >= 1, got {self.size}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")

    def kernel(self):
        """Normalised 1-D kernel, symmetric about the centre, sums to 1."""
        c = (self.size - 1) / 2.0
        i = np.arange(self.size, dtype=np.float64)
        k = np.exp(-((i - c) ** 2) / (2.0 * self.sigma ** 2))
        return k / k.sum()


def _correlate1d_reflect(a, k, axis):
    """Correlate along one axis with reflect borders (edge not repeated)."""
    r = (len(k) - 1) // 2
    if r == 0:
        return a * k[0]
    pad = [(0, 0)] * a.ndim
    pad[axis] = (r, r)
    ap = np.pad(a, pad, mode="reflect")
    win = sliding_window_view(ap, len(k), axis=axis)
    return win @ k


def gaussian_blur(values, spec):
    """Separable Gaussian blur of a single-channel map.

    Accepts (H, W) or (1, H, W); the output matches the input rank.  Border
    handling mirrors the map without repeating the edge pixel, so a constant
    map is unchanged (the kernel sums to 1).
    """
    a = np.asarray(values, dtype=np.float64)
    squeeze = False
    if a.ndim == 3:
        if a.shape[0] != 1:
            raise ShapeError(f"blur expects a single channel, got {a.shape}")
        a = a[0]
        squeeze = True
    if a.ndim != 2:
        raise ShapeError(f"blur expects a 2-D map, got shape {a.shape}")
    k = spec.kernel()
    r = (spec.size - 1) // 2
    if r >= a.shape[0] or r >= a.shape[1]:
        raise ShapeError(
            f"kernel radius {r} too large for map {a.shape} with reflect borders"
        )
    out = _correlate1d_reflect(_correlate1d_reflect(a, k, 0), k, 1)
    return out[None] if squeeze else out
