"""Voxel volume data model, orientation algebra and SVF file I/O.

A volume is a dense 3-D scalar grid stored in (D, H, W) index order with W
varying fastest, plus physical metadata: per-axis spacing in mm, an origin,
and a three-letter orientation code.

Orientation codes are signed permutations of the three anatomical axes.  Each
letter names the anatomical direction the corresponding storage axis points
toward: L/R (left-right), A/P (anterior-posterior), S/I (superior-inferior).
"LPI" therefore means axis 0 increases toward Left, axis 1 toward Posterior,
axis 2 toward Inferior.  Reorientation is pure axis permutation plus flips;
no interpolation ever happens here.  The origin is carried along as nominal
metadata (permuted with the axes, not relocated by flips).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import FileFormatError

# anatomical axis family (0=LR, 1=AP, 2=SI) and sign within the family
_AXIS_FAMILY = {"L": 0, "R": 0, "A": 1, "P": 1, "S": 2, "I": 2}
_OPPOSITE = {"L": "R", "R": "L", "A": "P", "P": "A", "S": "I", "I": "S"}

_DTYPES = {"f32": np.dtype("<f4"), "i16": np.dtype("<i2"), "u8": np.dtype("u1")}
_DTYPE_NAMES = {v: k for k, v in _DTYPES.items()}

LABEL_NAMES = {0: "background", 1: "liver", 2: "kidney", 3: "spleen", 4: "pancreas"}
NUM_CLASSES = len(LABEL_NAMES)


def validate_orientation(code: str) -> str:
    """Check that ``code`` is a signed permutation of the anatomical axes."""
    if not isinstance(code, str) or len(code) != 3:
        raise ValueError(f"orientation code must be 3 letters, got {code!r}")
    code = code.upper()
    families = []
    for ch in code:
        if ch not in _AXIS_FAMILY:
            raise ValueError(f"unknown axis letter {ch!r} in orientation {code!r}")
        families.append(_AXIS_FAMILY[ch])
    if sorted(families) != [0, 1, 2]:
        raise ValueError(f"orientation {code!r} does not name three distinct axes")
    return code


def orientation_transform(src: str, dst: str) -> tuple[tuple[int, int, int], tuple[bool, bool, bool]]:
    """Axis permutation and per-axis flips taking ``src``-oriented data to ``dst``.

    Returns ``(perm, flip)`` such that output axis ``j`` is source axis
    ``perm[j]``, reversed when ``flip[j]`` is true.
    """
    src = validate_orientation(src)
    dst = validate_orientation(dst)
    perm = []
    flip = []
    for letter in dst:
        fam = _AXIS_FAMILY[letter]
        i = next(k for k in range(3) if _AXIS_FAMILY[src[k]] == fam)
        perm.append(i)
        flip.append(src[i] != letter)
    return tuple(perm), tuple(flip)


@dataclass(frozen=True)
class VoxelVolume:
    """Scalar 3-D grid with physical metadata.

    ``data`` is a C-contiguous numpy array of shape (D, H, W) and dtype
    float32, int16 or uint8.  Instances are treated as immutable.
    """

    data: np.ndarray
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    orientation: str = "LPI"

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ValueError(f"volume data must be 3-D, got {self.data.ndim}-D")
        if self.data.dtype not in _DTYPE_NAMES:
            raise ValueError(f"unsupported dtype {self.data.dtype}")
        if len(self.spacing) != 3 or any(s <= 0 for s in self.spacing):
            raise ValueError(f"spacing must be three positive values, got {self.spacing}")
        validate_orientation(self.orientation)
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "orientation", self.orientation.upper())

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def dtype_name(self) -> str:
        return _DTYPE_NAMES[self.data.dtype]

    def same_geometry(self, other: "VoxelVolume") -> bool:
        return (
            self.shape == other.shape
            and self.spacing == other.spacing
            and self.origin == other.origin
            and self.orientation == other.orientation
        )


@dataclass(frozen=True)
class LabelVolume(VoxelVolume):
    """A VoxelVolume holding u8 organ labels in {0..4}."""

    def __post_init__(self):
        super().__post_init__()
        if self.data.dtype != np.uint8:
            raise ValueError("label volume data must be uint8")
        if self.data.size and self.data.max() >= NUM_CLASSES:
            raise ValueError(
                f"labels must lie in 0..{NUM_CLASSES - 1}, found {int(self.data.max())}"
            )


def _as_volume(data, spacing, origin, orientation) -> VoxelVolume:
    is_labels = data.dtype == np.uint8 and (data.size == 0 or int(data.max()) < NUM_CLASSES)
    cls = LabelVolume if is_labels else VoxelVolume
    return cls(data=np.ascontiguousarray(data), spacing=spacing, origin=origin, orientation=orientation)


def read_volume(path: str | os.PathLike) -> VoxelVolume:
    """Read an SVF volume (JSON header + adjacent raw file).

    The header names the raw file relative to its own directory.  Raw data is
    little-endian with voxel (d, h, w) at element offset d*H*W + h*W + w.
    """
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            header = json.load(fh)
    except OSError:
        raise
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FileFormatError(f"corrupt SVF header {path}: {exc}") from exc
    if not isinstance(header, dict):
        raise FileFormatError(f"corrupt SVF header {path}: not a JSON object")
    for key in ("svf_version", "shape", "spacing", "dtype", "data"):
        if key not in header:
            raise FileFormatError(f"SVF header {path} missing field {key!r}")
    if header["svf_version"] != 1:
        raise FileFormatError(f"unsupported svf_version {header['svf_version']}")
    shape = tuple(int(v) for v in header["shape"])
    if len(shape) != 3 or any(v <= 0 for v in shape):
        raise FileFormatError(f"bad shape {header['shape']} in {path}")
    spacing = tuple(float(v) for v in header["spacing"])
    if any(s <= 0 for s in spacing):
        raise FileFormatError(f"non-positive spacing {spacing} in {path}")
    dtype_name = header["dtype"]
    if dtype_name not in _DTYPES:
        raise FileFormatError(f"unknown dtype {dtype_name!r} in {path}")
    dtype = _DTYPES[dtype_name]
    origin = tuple(float(v) for v in header.get("origin", (0.0, 0.0, 0.0)))
    try:
        orientation = validate_orientation(header.get("orientation", "LPI"))
    except ValueError as exc:
        raise FileFormatError(str(exc)) from exc

    raw_path = os.path.join(os.path.dirname(path) or ".", header["data"])
    try:
        raw = np.fromfile(raw_path, dtype=dtype)
    except OSError:
        raise
    expected = shape[0] * shape[1] * shape[2]
    if raw.size != expected:
        raise FileFormatError(
            f"size mismatch: {raw_path} holds {raw.size} voxels, header says {expected}"
        )
    data = raw.reshape(shape)
    return _as_volume(data, spacing, origin, orientation)


def write_volume(vol: VoxelVolume, path: str | os.PathLike) -> None:
    """Write a volume as an SVF header + raw pair, losslessly.

    The raw file sits next to the header and is named ``<stem>.raw``.
    """
    path = os.fspath(path)
    stem = os.path.splitext(os.path.basename(path))[0]
    raw_name = stem + ".raw"
    header = {
        "svf_version": 1,
        "shape": [int(v) for v in vol.shape],
        "spacing": list(vol.spacing),
        "origin": list(vol.origin),
        "orientation": vol.orientation,
        "dtype": vol.dtype_name,
        "data": raw_name,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(header, fh)
        fh.write("\n")
    raw_path = os.path.join(os.path.dirname(path) or ".", raw_name)
    np.ascontiguousarray(vol.data).tofile(raw_path)


def reorient(vol: VoxelVolume, target: str) -> VoxelVolume:
    """Return the volume expressed in ``target`` orientation.

    Pure axis permutation and flips; voxel values are only rearranged.
    Spacing and origin components are permuted with the axes.
    """
    target = validate_orientation(target)
    if target == vol.orientation:
        return vol
    perm, flip = orientation_transform(vol.orientation, target)
    data = np.transpose(vol.data, perm)
    flip_axes = [j for j in range(3) if flip[j]]
    if flip_axes:
        data = np.flip(data, axis=flip_axes)
    spacing = tuple(vol.spacing[p] for p in perm)
    origin = tuple(vol.origin[p] for p in perm)
    return _as_volume(data.copy(), spacing, origin, target)
