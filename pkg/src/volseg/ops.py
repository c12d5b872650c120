"""Hand-built 3-D network operators: convolution, normalization, pooling,
strip pooling and trilinear resampling.

All operators are pure functions on (N, C, D, H, W) float32 arrays.
Convolution uses the cross-correlation convention (no kernel flip) with zero
padding.  The heavy lifting is lowered to BLAS matmuls: a KxKxK convolution
is computed as K^3 shift-and-accumulate GEMMs over a zero-padded input, one
per kernel offset, in a fixed offset order so results are run-to-run
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Triple = tuple[int, int, int]


@dataclass(frozen=True)
class ConvParams:
    """Shape parameters of one convolution layer.

    Kernels are odd per axis (the networks use only 1 and 3) and stride-1
    convs use "same" zero padding p = (k - 1) // 2.
    """

    in_channels: int
    out_channels: int
    kernel: Triple = (3, 3, 3)
    stride: Triple = (1, 1, 1)
    padding: Triple | None = None  # None means "same" for the given kernel
    has_bias: bool = False

    def __post_init__(self):
        if any(k < 1 or k % 2 == 0 for k in self.kernel):
            raise ValueError(f"kernel components must be odd, got {self.kernel}")
        if self.padding is None:
            object.__setattr__(self, "padding", tuple((k - 1) // 2 for k in self.kernel))

    @property
    def weight_shape(self) -> tuple[int, int, int, int, int]:
        return (self.out_channels, self.in_channels) + self.kernel


def conv_out_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def conv3d(
    x: np.ndarray,
    weights: np.ndarray,
    bias: np.ndarray | None = None,
    stride: Triple = (1, 1, 1),
    padding: Triple | None = None,
) -> np.ndarray:
    """Cross-correlate ``x`` (N, Cin, D, H, W) with ``weights`` (Cout, Cin, kd, kh, kw).

    Output spatial size per axis is floor((S + 2p - k) / stride) + 1.
    """
    n, cin, d, h, w = x.shape
    cout, cin_w, kd, kh, kw = weights.shape
    if cin != cin_w:
        raise ValueError(f"input has {cin} channels, weights expect {cin_w}")
    if bias is not None and bias.shape != (cout,):
        raise ValueError(f"bias shape {bias.shape} does not match {cout} output channels")
    if padding is None:
        padding = ((kd - 1) // 2, (kh - 1) // 2, (kw - 1) // 2)
    pd, ph, pw = padding
    sd, sh, sw = stride
    do = conv_out_size(d, kd, sd, pd)
    ho = conv_out_size(h, kh, sh, ph)
    wo = conv_out_size(w, kw, sw, pw)
    if min(do, ho, wo) < 1:
        raise ValueError(f"kernel {weights.shape[2:]} does not fit input {x.shape[2:]}")

    if (kd, kh, kw) == (1, 1, 1) and (pd, ph, pw) == (0, 0, 0):
        # pointwise fast path: one GEMM over the (possibly strided) input
        xs = x[:, :, ::sd, ::sh, ::sw]
        out = np.moveaxis(np.tensordot(weights[:, :, 0, 0, 0], xs, axes=([1], [1])), 1, 0)
        out = np.ascontiguousarray(out, dtype=np.float32)
    else:
        xp = np.pad(x, ((0, 0), (0, 0), (pd, pd), (ph, ph), (pw, pw)))
        out = np.zeros((n, cout, do, ho, wo), dtype=np.float32)
        for dz in range(kd):
            for dy in range(kh):
                for dx in range(kw):
                    sl = xp[
                        :,
                        :,
                        dz : dz + sd * do : sd,
                        dy : dy + sh * ho : sh,
                        dx : dx + sw * wo : sw,
                    ]
                    wk = weights[:, :, dz, dy, dx]  # (Cout, Cin)
                    out += np.moveaxis(np.tensordot(wk, sl, axes=([1], [1])), 1, 0)
    if bias is not None:
        out += bias.reshape(1, cout, 1, 1, 1)
    return out


def anisotropic_conv(
    x: np.ndarray,
    w_intra: np.ndarray,
    w_inter: np.ndarray,
    bias: np.ndarray | None = None,
) -> np.ndarray:
    """Separable replacement for a 3x3x3 convolution.

    Axis convention: feature maps are stored (D, H, W) with (H, W) the
    in-plane axes, so the in-plane ("intra-slice", conventionally written
    3x3x1) kernel has shape (Cmid, Cin, 1, 3, 3) and the through-plane
    ("inter-slice", written 1x1x3) kernel has shape (Cout, Cmid, 3, 1, 1).
    Both sub-convolutions run at stride 1 with "same" padding and no
    nonlinearity in between; the bias, if any, lands on the second conv.
    """
    if w_intra.shape[2] != 1:
        raise ValueError(f"intra-slice kernel must have depth extent 1, got {w_intra.shape}")
    if w_inter.shape[3:] != (1, 1):
        raise ValueError(f"inter-slice kernel must be (kd, 1, 1), got {w_inter.shape}")
    mid = conv3d(x, w_intra)
    return conv3d(mid, w_inter, bias=bias)


def instance_norm(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    eps: float = 1e-5,
) -> np.ndarray:
    """Standardize each (n, c) spatial volume (biased variance), then scale/shift.

    Statistics accumulate in float64; the per-voxel math runs in float32 as
    (x - mean_c) * (gamma_c / sqrt(var_c + eps)) + beta_c, which keeps
    constant channels at exactly zero (for beta = 0).
    """
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ValueError(f"gamma/beta must have shape ({c},)")
    mean = x.mean(axis=(2, 3, 4), keepdims=True, dtype=np.float64)
    mean_sq = np.square(x).mean(axis=(2, 3, 4), keepdims=True, dtype=np.float64)
    var = np.maximum(mean_sq - np.square(mean), 0.0)
    scale = (gamma.reshape(1, c, 1, 1, 1) / np.sqrt(var + eps)).astype(np.float32)
    y = x - mean.astype(np.float32)
    y *= scale
    y += beta.reshape(1, c, 1, 1, 1).astype(np.float32)
    return y


def avg_pool3d(x: np.ndarray, factor: Triple) -> np.ndarray:
    """Non-overlapping window mean; spatial dims must divide by ``factor``."""
    n, c, d, h, w = x.shape
    fd, fh, fw = factor
    if d % fd or h % fh or w % fw:
        raise ValueError(f"spatial dims {x.shape[2:]} not divisible by pool factor {factor}")
    r = x.reshape(n, c, d // fd, fd, h // fh, fh, w // fw, fw)
    return r.mean(axis=(3, 5, 7))


_STRIP_AXES = {"D": 2, "H": 3, "W": 4}


def strip_pool(x: np.ndarray, axis_kept: str) -> np.ndarray:
    """Mean over the two spatial axes other than ``axis_kept``, broadcast back.

    Every output voxel holds the mean of its full plane orthogonal to the
    kept axis, so the output shape equals the input shape.
    """
    if axis_kept not in _STRIP_AXES:
        raise ValueError(f"axis_kept must be one of 'D', 'H', 'W', got {axis_kept!r}")
    keep = _STRIP_AXES[axis_kept]
    reduce_axes = tuple(a for a in (2, 3, 4) if a != keep)
    means = x.mean(axis=reduce_axes, keepdims=True)
    return np.broadcast_to(means, x.shape).astype(np.float32, copy=True)


def _source_coords(out_size: int, in_size: int) -> np.ndarray:
    """Continuous source coordinates, align_corners=false, clamped to the grid."""
    t = np.arange(out_size, dtype=np.float64)
    s = (t + 0.5) * (in_size / out_size) - 0.5
    return np.clip(s, 0.0, in_size - 1.0)


def _interp_axis(x: np.ndarray, axis: int, out_size: int) -> np.ndarray:
    in_size = x.shape[axis]
    if out_size == in_size:
        return x
    s = _source_coords(out_size, in_size)
    i0 = np.floor(s).astype(np.int64)
    i0 = np.minimum(i0, max(in_size - 2, 0))
    i1 = np.minimum(i0 + 1, in_size - 1)
    frac = (s - i0).astype(np.float32)
    shape = [1] * x.ndim
    shape[axis] = out_size
    frac = frac.reshape(shape)
    a = np.take(x, i0, axis=axis)
    b = np.take(x, i1, axis=axis)
    # a + (b - a) * frac is exact on constants, unlike the two-weight form
    return a + (b - a) * frac


def resize_trilinear(x: np.ndarray, out_size: Triple) -> np.ndarray:
    """Trilinear resize of the spatial dims to ``out_size``.

    Separable linear interpolation per axis under the align_corners=false
    coordinate map s = (t + 0.5) * (S / S') - 0.5, clamped to [0, S - 1].
    """
    if any(s < 1 for s in out_size):
        raise ValueError(f"output size must be >= 1 per axis, got {out_size}")
    if tuple(x.shape[2:]) == tuple(out_size):
        return x.copy()
    y = x
    for axis, size in zip((2, 3, 4), out_size):
        y = _interp_axis(y, axis, int(size))
    return np.ascontiguousarray(y, dtype=np.float32)


def resize_nearest_labels(m: np.ndarray, out_size: Triple) -> np.ndarray:
    """Nearest-neighbor resize of a (D, H, W) label grid.

    Uses the same coordinate map as resize_trilinear; ties at half-way
    coordinates round toward the higher index.
    """
    if m.ndim != 3:
        raise ValueError(f"label grid must be 3-D, got {m.ndim}-D")
    if any(s < 1 for s in out_size):
        raise ValueError(f"output size must be >= 1 per axis, got {out_size}")
    if tuple(m.shape) == tuple(out_size):
        return m.copy()
    idx = []
    for axis, size in enumerate(out_size):
        s = _source_coords(int(size), m.shape[axis])
        idx.append(np.clip(np.floor(s + 0.5).astype(np.int64), 0, m.shape[axis] - 1))
    return m[np.ix_(idx[0], idx[1], idx[2])]
