"""End-to-end coarse-to-fine segmentation of the synthetic phantom.

Uses small nets with deterministic random weights, so the mask quality is
meaningless; the point is the moving parts: preprocessing, coarse ROI
localization, fine segmentation, component filtering, geometry restoration.
"""

import tempfile
from pathlib import Path

from volseg import make_phantom, run_pipeline, write_volume, PipelineConfig
from volseg.weights import kaiming_init, save_eswt

workdir = Path(tempfile.mkdtemp())

cfg = PipelineConfig(
    coarse_size=(32, 32, 32),
    fine_size=(48, 48, 48),
    coarse_levels=3,
    fine_levels=3,
    coarse_base_channels=8,
    fine_base_channels=8,
)

vol, gt = make_phantom(shape=(64, 64, 64), seed=7)
write_volume(vol, workdir / "phantom.svf")
write_volume(gt, workdir / "phantom_gt.svf")
save_eswt(kaiming_init(cfg.coarse_spec(), 42), workdir / "coarse.eswt")
save_eswt(kaiming_init(cfg.fine_spec(), 42), workdir / "fine.eswt")
print("inputs written to", workdir)

summary = run_pipeline(
    workdir / "phantom.svf",
    workdir / "coarse.eswt",
    workdir / "fine.eswt",
    cfg,
    workdir / "mask.svf",
)
print("ROI (target-orientation voxel box):", summary.roi)
print("per-class voxels:", summary.per_class_voxels)
print("stage timings (ms):", summary.timings_ms)
if summary.warnings:
    print("warnings:", summary.warnings)
print("mask written to", workdir / "mask.svf")
