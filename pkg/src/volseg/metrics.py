"""Segmentation quality metrics: volumetric Dice and surface distance overlap.

NSD here is voxel-center based: the boundary of a mask is the set of
foreground voxels with at least one face-adjacent background (or
out-of-bounds) neighbor, and distances are Euclidean millimeters between
voxel centers.  This is a deterministic simplification of mesh-based surface
distance that small masks can be checked against by brute force.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import FileFormatError, GeometryMismatchError
from .volume import LABEL_NAMES, LabelVolume, VoxelVolume, read_volume

ORGAN_CLASSES = {name: cls for cls, name in LABEL_NAMES.items() if cls != 0}

_FACE_STRUCTURE = ndimage.generate_binary_structure(3, 1)


def boundary_mask(fg: np.ndarray) -> np.ndarray:
    """Foreground voxels with a face-adjacent background or out-of-bounds neighbor."""
    if not fg.any():
        return np.zeros_like(fg, dtype=bool)
    interior = ndimage.binary_erosion(fg, structure=_FACE_STRUCTURE, border_value=0)
    return fg & ~interior


def _check_geometry(pred: VoxelVolume, gt: VoxelVolume) -> None:
    if not pred.same_geometry(gt):
        raise GeometryMismatchError(
            "prediction and ground truth disagree on geometry: "
            f"shape {pred.shape} vs {gt.shape}, spacing {pred.spacing} vs {gt.spacing}, "
            f"origin {pred.origin} vs {gt.origin}, "
            f"orientation {pred.orientation} vs {gt.orientation}"
        )


def dsc(pred: LabelVolume, gt: LabelVolume, class_id: int) -> float | None:
    """Dice overlap 2|P&G| / (|P|+|G|); None when both masks are empty."""
    _check_geometry(pred, gt)
    p = pred.data == class_id
    g = gt.data == class_id
    denom = int(np.count_nonzero(p)) + int(np.count_nonzero(g))
    if denom == 0:
        return None
    inter = int(np.count_nonzero(p & g))
    return 2.0 * inter / denom


def nsd(pred: LabelVolume, gt: LabelVolume, class_id: int, tol_mm: float = 1.0) -> float | None:
    """Fraction of both boundaries lying within ``tol_mm`` of the other boundary.

    None when both masks are empty; 0.0 when exactly one is empty.
    """
    _check_geometry(pred, gt)
    p = pred.data == class_id
    g = gt.data == class_id
    p_any, g_any = bool(p.any()), bool(g.any())
    if not p_any and not g_any:
        return None
    if p_any != g_any:
        return 0.0
    bp = boundary_mask(p)
    bg = boundary_mask(g)
    spacing = pred.spacing
    dist_to_bg = ndimage.distance_transform_edt(~bg, sampling=spacing)
    dist_to_bp = ndimage.distance_transform_edt(~bp, sampling=spacing)
    hits = int(np.count_nonzero(dist_to_bg[bp] <= tol_mm))
    hits += int(np.count_nonzero(dist_to_bp[bg] <= tol_mm))
    total = int(np.count_nonzero(bp)) + int(np.count_nonzero(bg))
    return hits / total


@dataclass(frozen=True)
class MetricsReport:
    case: str
    tol_mm: float
    per_class: dict[str, dict[str, float | None]]
    average: dict[str, float | None]

    def to_json(self) -> str:
        return json.dumps(
            {
                "case": self.case,
                "tol_mm": self.tol_mm,
                "per_class": self.per_class,
                "average": self.average,
            },
            indent=2,
        )


def evaluate_volumes(
    pred: LabelVolume, gt: LabelVolume, tol_mm: float = 1.0, case: str = ""
) -> MetricsReport:
    """Per-organ DSC/NSD plus unweighted averages over the defined organs.

    An organ absent from both masks is reported as null and excluded from
    the averages.
    """
    _check_geometry(pred, gt)
    per_class: dict[str, dict[str, float | None]] = {}
    for name, cls in ORGAN_CLASSES.items():
        per_class[name] = {
            "dsc": dsc(pred, gt, cls),
            "nsd": nsd(pred, gt, cls, tol_mm),
        }
    defined = [v for v in per_class.values() if v["dsc"] is not None]
    average: dict[str, float | None]
    if defined:
        average = {
            "dsc": sum(v["dsc"] for v in defined) / len(defined),
            "nsd": sum(v["nsd"] for v in defined) / len(defined),
        }
    else:
        average = {"dsc": None, "nsd": None}
    return MetricsReport(case=case, tol_mm=tol_mm, per_class=per_class, average=average)


def _load_labels(path) -> LabelVolume:
    # read_volume only yields LabelVolume for u8 data whose values are valid
    # labels, so one isinstance check covers dtype and range
    vol = read_volume(path)
    if not isinstance(vol, LabelVolume):
        raise FileFormatError(f"{path}: expected a u8 label volume, got dtype {vol.dtype_name}")
    return vol


def evaluate_case(pred_path, gt_path, tol_mm: float = 1.0) -> MetricsReport:
    pred = _load_labels(pred_path)
    gt = _load_labels(gt_path)
    case = os.path.splitext(os.path.basename(os.fspath(pred_path)))[0]
    return evaluate_volumes(pred, gt, tol_mm=tol_mm, case=case)
