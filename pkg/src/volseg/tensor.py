"""5-D float32 tensors and the elementwise ops the networks need.

Tensors are plain numpy arrays of shape (N, C, D, H, W), dtype float32,
C-contiguous with W varying fastest.  They are treated as immutable values:
every op returns a fresh array.
"""

from __future__ import annotations

import numpy as np

Tensor = np.ndarray


def check_tensor(x: np.ndarray) -> np.ndarray:
    """Validate the (N, C, D, H, W) float32 contract."""
    if x.ndim != 5:
        raise ValueError(f"tensor must be 5-D (N, C, D, H, W), got {x.ndim}-D")
    if x.dtype != np.float32:
        raise ValueError(f"tensor dtype must be float32, got {x.dtype}")
    if any(s < 1 for s in x.shape):
        raise ValueError(f"tensor dims must all be >= 1, got {x.shape}")
    return x


def zeros(shape: tuple[int, ...]) -> Tensor:
    return full(shape, 0.0)


def full(shape: tuple[int, ...], value: float) -> Tensor:
    if len(shape) != 5 or any(s < 0 for s in shape):
        raise ValueError(f"bad tensor shape {shape}")
    n = 1
    for s in shape:
        n *= s
    if n > 2**40:
        raise ValueError(f"tensor of {n} elements is unreasonably large")
    return np.full(shape, value, dtype=np.float32)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch in add: {a.shape} vs {b.shape}")
    return a + b


def relu(a: Tensor) -> Tensor:
    return np.maximum(a, np.float32(0.0))


def argmax_channel(a: Tensor) -> np.ndarray:
    """Per-voxel index of the maximal channel, as a (D, H, W) uint8 grid.

    Ties break toward the lowest channel index.  Requires N == 1 and C >= 2.
    """
    check_tensor(a)
    n, c = a.shape[0], a.shape[1]
    if n != 1:
        raise ValueError(f"argmax_channel expects batch size 1, got {n}")
    if c < 2:
        raise ValueError(f"argmax_channel needs at least 2 channels, got {c}")
    return np.argmax(a[0], axis=0).astype(np.uint8)
