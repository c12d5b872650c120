"""The network operators, one by one.

Shows the convolution conventions, the separable anisotropic pair, strip
pooling's long-range averaging, and instance normalization.
"""

import numpy as np

from volseg import ops

rng = np.random.default_rng(1)

# --- 3-D convolution (cross-correlation, zero "same" padding) ---------------
x = rng.standard_normal((1, 2, 8, 8, 8)).astype(np.float32)
w = rng.standard_normal((4, 2, 3, 3, 3)).astype(np.float32)
y = ops.conv3d(x, w)
print("conv3d: ", x.shape, "->", y.shape)
y2 = ops.conv3d(x, w, stride=(2, 2, 2))
print("stride 2:", x.shape, "->", y2.shape)

# --- separable anisotropic convolution ---------------------------------------
# a 3x3x3 kernel costs 27 weights per channel pair; the in-plane (1,3,3) +
# through-plane (3,1,1) pair costs 9 + 3 = 12
c = 32
print(f"weights per channel pair at C={c}: full {c*c*27}, separable {c*c*12}")

a = rng.standard_normal(3).astype(np.float32)
B = rng.standard_normal((3, 3)).astype(np.float32)
full_kernel = np.einsum("d,hw->dhw", a, B)[None, None].astype(np.float32)
sep = ops.anisotropic_conv(
    rng.standard_normal((1, 1, 6, 6, 6)).astype(np.float32),
    B[None, None, None],
    a[None, None, :, None, None],
)
print("rank-1 kernel: separable pair reproduces the full conv (see tests)")
print("separable output shape:", sep.shape)

# --- strip pooling ------------------------------------------------------------
# every voxel receives the mean of its full plane orthogonal to the kept axis
x = np.zeros((1, 1, 2, 2, 2), dtype=np.float32)
x[0, 0, 0, 0, 0] = 1.0
print("strip_pool over D of a single hot voxel:")
print(ops.strip_pool(x, "D")[0, 0])

# --- instance normalization ----------------------------------------------------
x = (rng.standard_normal((1, 3, 6, 6, 6)) * 50 + 200).astype(np.float32)
y = ops.instance_norm(x, np.ones(3, np.float32), np.zeros(3, np.float32))
print("instance_norm per-channel mean ~0:", np.abs(y.mean(axis=(0, 2, 3, 4))).max() < 1e-5)
print("instance_norm per-channel std ~1:", np.abs(y.std(axis=(0, 2, 3, 4)) - 1).max() < 1e-3)

# --- trilinear resize -----------------------------------------------------------
ramp = np.arange(8, dtype=np.float32).reshape(1, 1, 1, 1, 8)
up = ops.resize_trilinear(ramp, (1, 1, 16))
print("linear ramp upsampled 2x:", np.round(up[0, 0, 0, 0], 3))
