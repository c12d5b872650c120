"""Synthetic abdominal CT phantom for smoke tests and demos.

The phantom is a soft-tissue body ellipsoid in air with four bright organ
blobs (one of them paired, like kidneys) at plausible HU levels, plus mild
noise.  Everything is generated from a seeded RNG so runs are reproducible.
"""

from __future__ import annotations

import numpy as np

from .volume import LabelVolume, VoxelVolume

AIR_HU = -1000.0
BODY_HU = 20.0

# (label, center frac, semi-axes frac, HU)
_ORGANS = [
    (1, (0.45, 0.38, 0.35), (0.22, 0.16, 0.18), 90.0),   # liver-like, large
    (2, (0.60, 0.62, 0.28), (0.07, 0.08, 0.07), 130.0),  # kidney-like, left
    (2, (0.60, 0.62, 0.66), (0.07, 0.08, 0.07), 130.0),  # kidney-like, right
    (3, (0.42, 0.40, 0.72), (0.10, 0.09, 0.08), 105.0),  # spleen-like
    (4, (0.52, 0.52, 0.47), (0.05, 0.04, 0.16), 75.0),   # pancreas-like, elongated
]


def _ellipsoid(shape, center_frac, semi_frac) -> np.ndarray:
    grids = np.ogrid[tuple(slice(0, s) for s in shape)]
    acc = np.zeros(shape, dtype=np.float64)
    for g, s, c, a in zip(grids, shape, center_frac, semi_frac):
        acc = acc + ((g - c * s) / (a * s)) ** 2
    return acc <= 1.0


def make_phantom(
    shape: tuple[int, int, int] = (96, 96, 96),
    spacing: tuple[float, float, float] = (2.0, 2.0, 2.0),
    orientation: str = "RAS",
    seed: int = 7,
    noise_hu: float = 8.0,
) -> tuple[VoxelVolume, LabelVolume]:
    """Build (CT volume, ground-truth labels) with deterministic content."""
    rng = np.random.default_rng(seed)
    hu = np.full(shape, AIR_HU, dtype=np.float32)
    body = _ellipsoid(shape, (0.5, 0.5, 0.5), (0.46, 0.42, 0.44))
    hu[body] = BODY_HU
    labels = np.zeros(shape, dtype=np.uint8)
    for label, center, semi, organ_hu in _ORGANS:
        blob = _ellipsoid(shape, center, semi) & body
        hu[blob] = organ_hu
        labels[blob] = label
    hu[body] += rng.normal(0.0, noise_hu, size=int(body.sum())).astype(np.float32)
    vol = VoxelVolume(data=hu, spacing=spacing, orientation=orientation)
    gt = LabelVolume(data=labels, spacing=spacing, orientation=orientation)
    return vol, gt
