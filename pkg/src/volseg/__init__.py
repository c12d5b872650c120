"""Whole-volume coarse-to-fine CT multi-organ segmentation engine (CPU)."""

from .volume import (
    LabelVolume,
    VoxelVolume,
    read_volume,
    reorient,
    write_volume,
)
from .network import (
    BlockSpec,
    ModelStats,
    NetworkSpec,
    build_coarse_spec,
    build_fine_spec,
    count_flops,
    count_params,
    forward,
    weight_entries,
)
from .weights import WeightStore, kaiming_init, load_eswt, save_eswt
from .pipeline import (
    LoadedNet,
    PipelineConfig,
    RoiBox,
    SegSummary,
    coarse_locate,
    fine_segment,
    postprocess_cc,
    preprocess,
    run_pipeline,
)
from .metrics import MetricsReport, dsc, evaluate_case, evaluate_volumes, nsd
from .phantom import make_phantom

__version__ = "0.1.0"

__all__ = [
    "BlockSpec",
    "LabelVolume",
    "LoadedNet",
    "MetricsReport",
    "ModelStats",
    "NetworkSpec",
    "PipelineConfig",
    "RoiBox",
    "SegSummary",
    "VoxelVolume",
    "WeightStore",
    "build_coarse_spec",
    "build_fine_spec",
    "coarse_locate",
    "count_flops",
    "count_params",
    "dsc",
    "evaluate_case",
    "evaluate_volumes",
    "fine_segment",
    "forward",
    "kaiming_init",
    "load_eswt",
    "make_phantom",
    "nsd",
    "postprocess_cc",
    "preprocess",
    "read_volume",
    "reorient",
    "run_pipeline",
    "save_eswt",
    "weight_entries",
    "write_volume",
]
