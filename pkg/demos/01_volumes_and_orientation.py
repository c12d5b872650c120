"""Volumes, SVF files, and orientation handling.

Creates a small CT-like volume, writes it as an SVF header + raw pair,
reads it back bit-exactly, and walks through axis reorientation.
"""

import tempfile
from pathlib import Path

import numpy as np

from volseg import VoxelVolume, read_volume, reorient, write_volume

rng = np.random.default_rng(0)

# a 4 x 5 x 6 volume, 2 mm slices, stored RAS (axis 0 -> Right, 1 -> Anterior,
# 2 -> Superior)
vol = VoxelVolume(
    data=(rng.standard_normal((4, 5, 6)) * 100).astype(np.float32),
    spacing=(2.0, 1.0, 1.0),
    origin=(10.0, -5.0, 0.0),
    orientation="RAS",
)
print("volume:", vol.shape, vol.dtype_name, vol.orientation, "spacing", vol.spacing)

workdir = Path(tempfile.mkdtemp())
write_volume(vol, workdir / "demo.svf")
print("wrote", workdir / "demo.svf", "and", workdir / "demo.raw")
print("header:", (workdir / "demo.svf").read_text().strip())

back = read_volume(workdir / "demo.svf")
print("round trip bit-exact:", back.data.tobytes() == vol.data.tobytes())

# reorientation only permutes and flips axes; the voxel multiset is untouched
lpi = reorient(vol, "LPI")
print("RAS -> LPI:", lpi.shape, lpi.orientation)
print("values preserved:", sorted(lpi.data.ravel()) == sorted(vol.data.ravel()))

restored = reorient(lpi, "RAS")
print("LPI -> RAS restores voxels:", np.array_equal(restored.data, vol.data))

# a permuting code: PIL reads source axes (1, 2, 0)
pil = reorient(vol, "PIL")
print("RAS -> PIL:", vol.shape, "->", pil.shape, "spacing", pil.spacing)
