"""End-to-end coarse-to-fine segmentation pipeline.

Stages: reorient the CT volume to the target view, run the coarse network on
a fixed-size downsampled copy to locate foreground, crop an expanded
bounding box (ROI), run the fine network on the resampled crop, restore the
labels to the native grid, and clean both stage outputs with a
connected-component filter.

Intensity normalization clips to a fixed HU window and z-scores with the
mean/std of the clipped resampled volume itself, so inference needs no
dataset-level statistics.
"""

from __future__ import annotations

import contextlib
import json
import time
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import ndimage

from . import ops, tensor
from .errors import SpecError, WeightStoreError
from .network import NetworkSpec, build_coarse_spec, build_fine_spec, forward, weight_entries
from .volume import (
    LABEL_NAMES,
    LabelVolume,
    VoxelVolume,
    orientation_transform,
    read_volume,
    reorient,
    write_volume,
)
from .weights import WeightStore, load_eswt

DEGENERATE_STD = 1e-6
MIN_ROI_SIDE = 8


@dataclass(frozen=True)
class PipelineConfig:
    coarse_size: tuple[int, int, int] = (160, 160, 160)
    fine_size: tuple[int, int, int] = (192, 192, 192)
    clip_range: tuple[float, float] = (-325.0, 325.0)
    roi_margin_frac: float = 0.10
    cc_keep_ratio: float = 0.10
    target_orientation: str = "LPI"
    connectivity: int = 26
    coarse_levels: int = 5
    fine_levels: int = 5
    coarse_base_channels: int = 8
    fine_base_channels: int = 16
    channel_cap: int = 256
    num_classes: int = 5

    def __post_init__(self):
        if self.clip_range[0] >= self.clip_range[1]:
            raise SpecError(f"clip range must be increasing, got {self.clip_range}")
        if not 0.0 <= self.roi_margin_frac <= 0.5:
            raise SpecError(f"roi_margin_frac must be in [0, 0.5], got {self.roi_margin_frac}")
        if not 0.0 < self.cc_keep_ratio <= 1.0:
            raise SpecError(f"cc_keep_ratio must be in (0, 1], got {self.cc_keep_ratio}")
        if self.connectivity not in (6, 26):
            raise SpecError(f"connectivity must be 6 or 26, got {self.connectivity}")
        for size, levels, which in (
            (self.coarse_size, self.coarse_levels, "coarse"),
            (self.fine_size, self.fine_levels, "fine"),
        ):
            div = 2 ** (levels - 1)
            if any(s % div for s in size):
                raise SpecError(f"{which}_size {size} must divide by {div}")
        if any((s // 2 ** (self.fine_levels - 1)) % 4 for s in self.fine_size):
            raise SpecError(
                f"fine_size {self.fine_size} leaves a deepest feature map not divisible by 4"
            )
        object.__setattr__(self, "coarse_size", tuple(int(v) for v in self.coarse_size))
        object.__setattr__(self, "fine_size", tuple(int(v) for v in self.fine_size))
        object.__setattr__(self, "clip_range", tuple(float(v) for v in self.clip_range))

    def coarse_spec(self) -> NetworkSpec:
        return build_coarse_spec(
            base_channels=self.coarse_base_channels, levels=self.coarse_levels,
            cap=self.channel_cap, num_classes=self.num_classes, input_size=self.coarse_size,
        )

    def fine_spec(self) -> NetworkSpec:
        return build_fine_spec(
            base_channels=self.fine_base_channels, levels=self.fine_levels,
            cap=self.channel_cap, num_classes=self.num_classes, input_size=self.fine_size,
        )

    @staticmethod
    def from_json(text: str) -> "PipelineConfig":
        doc = json.loads(text)
        kwargs = {}
        for key in PipelineConfig.__dataclass_fields__:
            if key in doc:
                value = doc[key]
                kwargs[key] = tuple(value) if isinstance(value, list) else value
        unknown = set(doc) - set(PipelineConfig.__dataclass_fields__)
        if unknown:
            raise SpecError(f"unknown config keys: {sorted(unknown)}")
        return PipelineConfig(**kwargs)


@dataclass(frozen=True)
class RoiBox:
    """Half-open voxel index box [lo, hi) per storage axis."""

    lo: tuple[int, int, int]
    hi: tuple[int, int, int]

    def __post_init__(self):
        if any(l >= h for l, h in zip(self.lo, self.hi)):
            raise SpecError(f"empty ROI box lo={self.lo} hi={self.hi}")
        if any(l < 0 for l in self.lo):
            raise SpecError(f"ROI lo {self.lo} out of bounds")

    @property
    def sides(self) -> tuple[int, int, int]:
        return tuple(h - l for l, h in zip(self.lo, self.hi))

    @property
    def slices(self) -> tuple[slice, slice, slice]:
        return tuple(slice(l, h) for l, h in zip(self.lo, self.hi))

    def expand(self, margin_frac: float, bounds: tuple[int, int, int]) -> "RoiBox":
        """Grow by round(margin_frac * side) per axis, clamped to ``bounds``."""
        lo, hi = [], []
        for l, h, s in zip(self.lo, self.hi, bounds):
            m = int(np.floor(margin_frac * (h - l) + 0.5))
            lo.append(max(0, l - m))
            hi.append(min(s, h + m))
        return RoiBox(tuple(lo), tuple(hi))

    def with_min_sides(self, min_side: int, bounds: tuple[int, int, int]) -> "RoiBox":
        """Widen any axis shorter than ``min_side``, staying inside ``bounds``."""
        lo, hi = [], []
        for l, h, s in zip(self.lo, self.hi, bounds):
            want = min(min_side, s)
            while h - l < want:
                if l > 0:
                    l -= 1
                if h - l < want and h < s:
                    h += 1
            lo.append(l)
            hi.append(h)
        return RoiBox(tuple(lo), tuple(hi))


@dataclass(frozen=True)
class LoadedNet:
    spec: NetworkSpec
    weights: WeightStore

    def infer(self, x: np.ndarray) -> np.ndarray:
        return forward(self.spec, self.weights, x)


def check_weights(spec: NetworkSpec, store: WeightStore) -> None:
    """Raise WeightStoreError if the store is missing or mis-shapes any entry."""
    problems = []
    for entry in weight_entries(spec):
        if entry.name not in store:
            problems.append(f"missing {entry.name!r}")
        elif tuple(store[entry.name].shape) != entry.dims:
            problems.append(
                f"{entry.name!r} has dims {tuple(store[entry.name].shape)}, expected {entry.dims}"
            )
        if len(problems) >= 5:
            problems.append("...")
            break
    if problems:
        raise WeightStoreError(f"weights do not match network {spec.name!r}: " + "; ".join(problems))


@dataclass
class PreprocessInfo:
    source_orientation: str
    source_shape: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float]
    mean: float
    std: float
    degenerate_std: bool


def preprocess(
    vol: VoxelVolume, cfg: PipelineConfig, size: tuple[int, int, int]
) -> tuple[np.ndarray, PreprocessInfo]:
    """Reorient -> resample to ``size`` -> clip -> per-volume z-score.

    Returns a (1, 1, D, H, W) float32 tensor plus the geometry/statistics
    needed to invert the mapping.
    """
    source_orientation = vol.orientation
    vol = reorient(vol, cfg.target_orientation)
    t = vol.data.astype(np.float32, copy=True)[None, None]
    t = ops.resize_trilinear(t, size)
    lo, hi = cfg.clip_range
    np.clip(t, np.float32(lo), np.float32(hi), out=t)
    mean = float(t.mean(dtype=np.float64))
    std = float(t.std(dtype=np.float64))
    degenerate = std < DEGENERATE_STD
    if degenerate:
        warnings.warn(
            f"volume has degenerate intensity std {std:.3g}; normalizing with std=1",
            RuntimeWarning,
            stacklevel=2,
        )
        std = 1.0
    t -= np.float32(mean)
    t /= np.float32(std)
    info = PreprocessInfo(
        source_orientation=source_orientation,
        source_shape=vol.shape,
        spacing=vol.spacing,
        origin=vol.origin,
        mean=mean,
        std=std,
        degenerate_std=degenerate,
    )
    return t, info


def connected_component_filter(labels: np.ndarray, keep_ratio: float, connectivity: int = 26) -> np.ndarray:
    """Drop small connected components per foreground class.

    For each class, components with voxel count >= keep_ratio * (largest
    component of that class) survive; everything else becomes background.
    Keeping near-peers matters because one label can cover paired organs.
    """
    structure = ndimage.generate_binary_structure(3, 3 if connectivity == 26 else 1)
    out = labels.copy()
    for cls in np.unique(labels):
        if cls == 0:
            continue
        comp, n = ndimage.label(labels == cls, structure=structure)
        if n <= 1:
            continue
        counts = np.bincount(comp.ravel())
        counts[0] = 0
        threshold = keep_ratio * counts.max()
        drop = np.flatnonzero((counts < threshold) & (counts > 0))
        if drop.size:
            out[np.isin(comp, drop)] = 0
    return out


def postprocess_cc(mask: LabelVolume, keep_ratio: float, connectivity: int = 26) -> LabelVolume:
    data = connected_component_filter(mask.data, keep_ratio, connectivity)
    return LabelVolume(
        data=data, spacing=mask.spacing, origin=mask.origin, orientation=mask.orientation
    )


def map_box_between_grids(
    lo: tuple[int, int, int],
    hi: tuple[int, int, int],
    from_size: tuple[int, int, int],
    to_size: tuple[int, int, int],
) -> tuple[tuple[int, int, int], tuple[int, int, int]]:
    """Map a half-open voxel box through the resize coordinate map.

    Voxel t on the source grid has center (t + 0.5) * (S_to / S_from) - 0.5
    on the target grid; the returned box covers the mapped centers of the
    box's first and last voxels, clamped to the target bounds.
    """
    out_lo, out_hi = [], []
    for l, h, sf, st in zip(lo, hi, from_size, to_size):
        scale = st / sf
        a = (l + 0.5) * scale - 0.5
        b = (h - 0.5) * scale - 0.5
        out_lo.append(max(0, int(np.floor(a))))
        out_hi.append(min(st, int(np.ceil(b)) + 1))
    return tuple(out_lo), tuple(out_hi)


def coarse_locate(
    vol: VoxelVolume, coarse_net: LoadedNet, cfg: PipelineConfig
) -> tuple[RoiBox, LabelVolume]:
    """Locate foreground with the coarse net; return the expanded native-grid ROI.

    The returned LabelVolume is the cleaned coarse mask on the coarse grid
    (spacing scaled accordingly).  An all-background coarse mask falls back
    to the whole volume.
    """
    vol_t = reorient(vol, cfg.target_orientation)
    x, _ = preprocess(vol_t, cfg, cfg.coarse_size)
    scores = coarse_net.infer(x)
    mask = tensor.argmax_channel(scores)
    mask = connected_component_filter(mask, cfg.cc_keep_ratio, cfg.connectivity)

    native_shape = vol_t.shape
    fg = mask > 0
    if not fg.any():
        warnings.warn("coarse stage found no foreground; using whole volume as ROI", RuntimeWarning)
        roi = RoiBox((0, 0, 0), native_shape)
    else:
        idx = np.nonzero(fg)
        lo_c = tuple(int(ix.min()) for ix in idx)
        hi_c = tuple(int(ix.max()) + 1 for ix in idx)
        lo_n, hi_n = map_box_between_grids(lo_c, hi_c, cfg.coarse_size, native_shape)
        roi = RoiBox(lo_n, hi_n).expand(cfg.roi_margin_frac, native_shape)

    coarse_spacing = tuple(
        sp * ns / cs for sp, ns, cs in zip(vol_t.spacing, native_shape, cfg.coarse_size)
    )
    coarse_mask = LabelVolume(
        data=mask.astype(np.uint8),
        spacing=coarse_spacing,
        origin=vol_t.origin,
        orientation=vol_t.orientation,
    )
    return roi, coarse_mask


def fine_segment(
    vol: VoxelVolume, roi: RoiBox, fine_net: LoadedNet, cfg: PipelineConfig
) -> LabelVolume:
    """Segment the ROI crop at fine resolution and restore to the native grid.

    Voxels outside the ROI stay background; the result carries the input
    volume's geometry (shape, spacing, origin, orientation).
    """
    vol_t = reorient(vol, cfg.target_orientation)
    roi = roi.with_min_sides(MIN_ROI_SIDE, vol_t.shape)
    crop = np.ascontiguousarray(vol_t.data[roi.slices])
    crop_origin = tuple(o + l * s for o, l, s in zip(vol_t.origin, roi.lo, vol_t.spacing))
    sub = VoxelVolume(
        data=crop, spacing=vol_t.spacing, origin=crop_origin, orientation=vol_t.orientation
    )
    x, _ = preprocess(sub, cfg, cfg.fine_size)
    scores = fine_net.infer(x)
    mask = tensor.argmax_channel(scores)
    mask = connected_component_filter(mask, cfg.cc_keep_ratio, cfg.connectivity)
    mask_roi = ops.resize_nearest_labels(mask, roi.sides)

    native = np.zeros(vol_t.shape, dtype=np.uint8)
    native[roi.slices] = mask_roi
    out = LabelVolume(
        data=native, spacing=vol_t.spacing, origin=vol_t.origin, orientation=vol_t.orientation
    )
    return reorient(out, vol.orientation)


@dataclass
class SegSummary:
    roi: dict
    per_class_voxels: dict
    timings_ms: dict
    config_echo: dict
    peak_rss_mb: float | None
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def _peak_rss_mb() -> float | None:
    try:
        import resource

        # ru_maxrss is KiB on Linux
        return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0
    except Exception:
        return None


@contextlib.contextmanager
def _stage(name: str):
    """Re-raise engine errors with the failing pipeline stage in the message."""
    from .errors import VolsegError

    try:
        yield
    except VolsegError as exc:
        raise type(exc)(f"[{name}] {exc}") from exc


def run_pipeline(
    input_path,
    coarse_weights_path,
    fine_weights_path,
    cfg: PipelineConfig,
    output_path,
) -> SegSummary:
    """Full segment run: read -> coarse -> fine -> component filter -> write."""
    timings: dict[str, float] = {}
    caught: list[str] = []
    t_total = time.perf_counter()

    with warnings.catch_warnings(record=True) as wlist:
        warnings.simplefilter("always")

        t0 = time.perf_counter()
        with _stage("load"):
            vol = read_volume(input_path)
            coarse_spec, fine_spec = cfg.coarse_spec(), cfg.fine_spec()
            coarse_store = load_eswt(coarse_weights_path)
            fine_store = load_eswt(fine_weights_path)
            check_weights(coarse_spec, coarse_store)
            check_weights(fine_spec, fine_store)
            coarse_net = LoadedNet(coarse_spec, coarse_store)
            fine_net = LoadedNet(fine_spec, fine_store)
        timings["load"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        with _stage("coarse"):
            roi, _coarse_mask = coarse_locate(vol, coarse_net, cfg)
            perm, _ = orientation_transform(vol.orientation, cfg.target_orientation)
            shape_t = tuple(vol.shape[p] for p in perm)
            roi = roi.with_min_sides(MIN_ROI_SIDE, shape_t)
        timings["coarse"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        with _stage("fine"):
            labels = fine_segment(vol, roi, fine_net, cfg)
        timings["fine"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        with _stage("postprocess"):
            labels = postprocess_cc(labels, cfg.cc_keep_ratio, cfg.connectivity)
        timings["postprocess"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        with _stage("write"):
            write_volume(labels, output_path)
        timings["write"] = time.perf_counter() - t0

        caught = [str(w.message) for w in wlist]

    timings["total"] = time.perf_counter() - t_total
    counts = np.bincount(labels.data.ravel(), minlength=cfg.num_classes)
    per_class = {LABEL_NAMES.get(i, f"class{i}"): int(c) for i, c in enumerate(counts)}
    return SegSummary(
        roi={"lo": list(roi.lo), "hi": list(roi.hi)},
        per_class_voxels=per_class,
        timings_ms={k: round(v * 1000.0, 3) for k, v in timings.items()},
        config_echo=json.loads(json.dumps(asdict(cfg))),
        peak_rss_mb=_peak_rss_mb(),
        warnings=caught,
    )
