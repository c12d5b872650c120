"""Declarative network graphs, a forward executor, and footprint accounting.

Two networks share one topology family: a plain 3-D U-Net used for the
coarse localization stage and a context-aware variant used for the fine
stage.  Layout (levels = number of resolution scales):

  stem      one conv-norm-ReLU at full resolution, 1 -> base channels
  enc{i}    i = 1..levels-1: two residual conv blocks, downsample x2 via a
            stride-2 first conv, channels double per level up to a cap
  context   fine only, at the deepest scale: mixed pyramid pooling block
            (avg-pool 2^3 and 4^3 branches plus three directional strip
            branches, each through a 1x1x1 conv, restored to the deepest
            feature size, fused by addition with the identity, then one
            residual conv block)
  dec{i}    i = levels-2..0: trilinear x2 upsample, 1x1x1 channel
            projection, addition skip from level i, then one residual conv
            block (separable anisotropic convs in the fine decoder,
            standard 3x3x3 convs in the coarse decoder)
  head      1x1x1 conv to class scores

Residual conv block: conv-instnorm-ReLU-conv-instnorm, residual addition,
then the final ReLU.  When the block changes channel count or strides, the
residual path goes through a 1x1x1 projection conv + instnorm.

Weight names follow the structure above (e.g. "enc2.block1.conv1.weight",
"dec0.block.conv2.intra.weight", "context.strip_h.conv.bias"); the full
list for a spec comes from weight_entries().
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import ops, tensor
from .errors import SpecError, WeightStoreError

STEM_CONV = "stem_conv"
ENCODER_RESIDUAL = "encoder_residual"
CONTEXT_MIXED_PYRAMID = "context_mixed_pyramid"
DECODER_RESIDUAL = "decoder_residual"
DECODER_RESIDUAL_ANISO = "decoder_residual_aniso"
HEAD_CONV = "head_conv"

BLOCK_KINDS = (
    STEM_CONV,
    ENCODER_RESIDUAL,
    CONTEXT_MIXED_PYRAMID,
    DECODER_RESIDUAL,
    DECODER_RESIDUAL_ANISO,
    HEAD_CONV,
)

INSTANCE_NORM_EPS = 1e-5


@dataclass(frozen=True)
class BlockSpec:
    name: str
    kind: str
    in_channels: int
    out_channels: int
    scale: int = 1  # downsample factor for encoder blocks, upsample for decoder

    def __post_init__(self):
        if self.kind not in BLOCK_KINDS:
            raise SpecError(f"unknown block kind {self.kind!r}")
        if self.in_channels < 1 or self.out_channels < 1:
            raise SpecError(f"block {self.name}: channel counts must be >= 1")


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    base_channels: int
    levels: int
    channel_cap: int
    num_classes: int
    input_size: tuple[int, int, int]
    blocks: tuple[BlockSpec, ...]

    @property
    def has_context(self) -> bool:
        return any(b.kind == CONTEXT_MIXED_PYRAMID for b in self.blocks)

    def level_channels(self) -> list[int]:
        return [min(self.base_channels * 2**i, self.channel_cap) for i in range(self.levels)]

    def to_json(self) -> str:
        doc = {
            "name": self.name,
            "base_channels": self.base_channels,
            "levels": self.levels,
            "channel_cap": self.channel_cap,
            "num_classes": self.num_classes,
            "input_size": list(self.input_size),
            "blocks": [
                {
                    "name": b.name,
                    "kind": b.kind,
                    "in_channels": b.in_channels,
                    "out_channels": b.out_channels,
                    "scale": b.scale,
                }
                for b in self.blocks
            ],
        }
        return json.dumps(doc, indent=2)

    @staticmethod
    def from_json(text: str) -> "NetworkSpec":
        doc = json.loads(text)
        blocks = tuple(
            BlockSpec(
                name=b["name"],
                kind=b["kind"],
                in_channels=int(b["in_channels"]),
                out_channels=int(b["out_channels"]),
                scale=int(b.get("scale", 1)),
            )
            for b in doc["blocks"]
        )
        return NetworkSpec(
            name=doc["name"],
            base_channels=int(doc["base_channels"]),
            levels=int(doc["levels"]),
            channel_cap=int(doc["channel_cap"]),
            num_classes=int(doc["num_classes"]),
            input_size=tuple(int(v) for v in doc["input_size"]),
            blocks=blocks,
        )


def _build_spec(
    name: str,
    base_channels: int,
    levels: int,
    cap: int,
    num_classes: int,
    input_size: tuple[int, int, int],
    with_context: bool,
    aniso_decoder: bool,
) -> NetworkSpec:
    if levels < 2:
        raise SpecError(f"levels must be >= 2, got {levels}")
    if base_channels < 1 or cap < base_channels:
        raise SpecError(f"bad channel configuration base={base_channels} cap={cap}")
    if num_classes < 2:
        raise SpecError(f"num_classes must be >= 2, got {num_classes}")
    ch = [min(base_channels * 2**i, cap) for i in range(levels)]
    blocks = [BlockSpec("stem", STEM_CONV, 1, ch[0])]
    for i in range(1, levels):
        blocks.append(BlockSpec(f"enc{i}", ENCODER_RESIDUAL, ch[i - 1], ch[i], scale=2))
    if with_context:
        blocks.append(BlockSpec("context", CONTEXT_MIXED_PYRAMID, ch[-1], ch[-1]))
    dec_kind = DECODER_RESIDUAL_ANISO if aniso_decoder else DECODER_RESIDUAL
    for i in range(levels - 2, -1, -1):
        blocks.append(BlockSpec(f"dec{i}", dec_kind, ch[i + 1], ch[i], scale=2))
    blocks.append(BlockSpec("head", HEAD_CONV, ch[0], num_classes))
    return NetworkSpec(
        name=name,
        base_channels=base_channels,
        levels=levels,
        channel_cap=cap,
        num_classes=num_classes,
        input_size=tuple(int(v) for v in input_size),
        blocks=tuple(blocks),
    )


def build_fine_spec(
    base_channels: int = 16,
    levels: int = 5,
    cap: int = 256,
    num_classes: int = 5,
    input_size: tuple[int, int, int] = (192, 192, 192),
) -> NetworkSpec:
    """Context-aware fine network: encoder, slim anisotropic decoder, context block."""
    return _build_spec(
        "fine", base_channels, levels, cap, num_classes, input_size,
        with_context=True, aniso_decoder=True,
    )


def build_coarse_spec(
    base_channels: int = 8,
    levels: int = 5,
    cap: int = 256,
    num_classes: int = 5,
    input_size: tuple[int, int, int] = (160, 160, 160),
) -> NetworkSpec:
    """Plain U-Net for coarse localization: no context block, standard decoder convs."""
    return _build_spec(
        "coarse", base_channels, levels, cap, num_classes, input_size,
        with_context=False, aniso_decoder=False,
    )


# ---------------------------------------------------------------------------
# weight entry enumeration

@dataclass(frozen=True)
class WeightEntry:
    name: str
    dims: tuple[int, ...]
    role: str  # conv | bias | gamma | beta

    @property
    def size(self) -> int:
        return math.prod(self.dims)


def _norm_entries(prefix: str, c: int) -> list[WeightEntry]:
    return [
        WeightEntry(f"{prefix}.gamma", (c,), "gamma"),
        WeightEntry(f"{prefix}.beta", (c,), "beta"),
    ]


def _res_block_entries(prefix: str, cin: int, cout: int, shortcut: bool, aniso: bool) -> list[WeightEntry]:
    entries = []
    for conv_i, ci in (("conv1", cin), ("conv2", cout)):
        if aniso:
            entries.append(WeightEntry(f"{prefix}.{conv_i}.intra.weight", (cout, ci, 1, 3, 3), "conv"))
            entries.append(WeightEntry(f"{prefix}.{conv_i}.inter.weight", (cout, cout, 3, 1, 1), "conv"))
        else:
            entries.append(WeightEntry(f"{prefix}.{conv_i}.weight", (cout, ci, 3, 3, 3), "conv"))
        entries.extend(_norm_entries(f"{prefix}.norm{conv_i[-1]}", cout))
    if shortcut:
        entries.append(WeightEntry(f"{prefix}.shortcut.conv.weight", (cout, cin, 1, 1, 1), "conv"))
        entries.extend(_norm_entries(f"{prefix}.shortcut.norm", cout))
    return entries


def _block_entries(block: BlockSpec) -> list[WeightEntry]:
    a, b = block.in_channels, block.out_channels
    if block.kind == STEM_CONV:
        return [
            WeightEntry(f"{block.name}.conv.weight", (b, a, 3, 3, 3), "conv"),
            *_norm_entries(f"{block.name}.norm", b),
        ]
    if block.kind == ENCODER_RESIDUAL:
        return [
            *_res_block_entries(f"{block.name}.block1", a, b, shortcut=True, aniso=False),
            *_res_block_entries(f"{block.name}.block2", b, b, shortcut=False, aniso=False),
        ]
    if block.kind == CONTEXT_MIXED_PYRAMID:
        entries = []
        for branch in ("avg2", "avg4", "strip_d", "strip_h", "strip_w"):
            entries.append(WeightEntry(f"{block.name}.{branch}.conv.weight", (b, a, 1, 1, 1), "conv"))
            entries.append(WeightEntry(f"{block.name}.{branch}.conv.bias", (b,), "bias"))
        entries.extend(_res_block_entries(f"{block.name}.fuse", b, b, shortcut=False, aniso=False))
        return entries
    if block.kind in (DECODER_RESIDUAL, DECODER_RESIDUAL_ANISO):
        return [
            WeightEntry(f"{block.name}.proj.weight", (b, a, 1, 1, 1), "conv"),
            WeightEntry(f"{block.name}.proj.bias", (b,), "bias"),
            *_res_block_entries(
                f"{block.name}.block", b, b, shortcut=False,
                aniso=block.kind == DECODER_RESIDUAL_ANISO,
            ),
        ]
    if block.kind == HEAD_CONV:
        return [
            WeightEntry(f"{block.name}.conv.weight", (b, a, 1, 1, 1), "conv"),
            WeightEntry(f"{block.name}.conv.bias", (b,), "bias"),
        ]
    raise SpecError(f"unknown block kind {block.kind!r}")


def weight_entries(spec: NetworkSpec) -> list[WeightEntry]:
    """Canonical ordered list of every learned array the network expects."""
    entries = []
    for block in spec.blocks:
        entries.extend(_block_entries(block))
    return entries


# ---------------------------------------------------------------------------
# forward execution

def _get(weights, name: str, dims: tuple[int, ...]) -> np.ndarray:
    try:
        arr = weights[name]
    except KeyError:
        raise WeightStoreError(f"missing weight {name!r}") from None
    if tuple(arr.shape) != dims:
        raise WeightStoreError(f"weight {name!r} has dims {arr.shape}, expected {dims}")
    return arr


def _run_norm(x, weights, prefix: str):
    c = x.shape[1]
    return ops.instance_norm(
        x, _get(weights, f"{prefix}.gamma", (c,)), _get(weights, f"{prefix}.beta", (c,)),
        eps=INSTANCE_NORM_EPS,
    )


def _run_conv_unit(x, weights, prefix: str, cin: int, cout: int, stride, aniso: bool):
    if aniso:
        w_intra = _get(weights, f"{prefix}.intra.weight", (cout, cin, 1, 3, 3))
        w_inter = _get(weights, f"{prefix}.inter.weight", (cout, cout, 3, 1, 1))
        return ops.anisotropic_conv(x, w_intra, w_inter)
    w = _get(weights, f"{prefix}.weight", (cout, cin, 3, 3, 3))
    return ops.conv3d(x, w, stride=stride)


def _run_res_block(x, weights, prefix: str, cin: int, cout: int, stride=(1, 1, 1), aniso: bool = False):
    h = _run_conv_unit(x, weights, f"{prefix}.conv1", cin, cout, stride, aniso)
    h = tensor.relu(_run_norm(h, weights, f"{prefix}.norm1"))
    h = _run_conv_unit(h, weights, f"{prefix}.conv2", cout, cout, (1, 1, 1), aniso)
    h = _run_norm(h, weights, f"{prefix}.norm2")
    if f"{prefix}.shortcut.conv.weight" in weights:
        sc = ops.conv3d(
            x, _get(weights, f"{prefix}.shortcut.conv.weight", (cout, cin, 1, 1, 1)),
            stride=stride,
        )
        sc = _run_norm(sc, weights, f"{prefix}.shortcut.norm")
    else:
        if cin != cout or stride != (1, 1, 1):
            raise WeightStoreError(f"{prefix}: shortcut projection weights required")
        sc = x
    return tensor.relu(tensor.add(h, sc))


def _run_context(x, weights, name: str, c: int):
    size = x.shape[2:]
    if any(s % 4 for s in size):
        raise SpecError(f"context block needs deepest feature dims divisible by 4, got {size}")

    def branch_conv(t, branch):
        w = _get(weights, f"{name}.{branch}.conv.weight", (c, c, 1, 1, 1))
        bias = _get(weights, f"{name}.{branch}.conv.bias", (c,))
        return ops.conv3d(t, w, bias=bias)

    fused = x.copy()
    for factor in (2, 4):
        pooled = ops.avg_pool3d(x, (factor, factor, factor))
        fused += ops.resize_trilinear(branch_conv(pooled, f"avg{factor}"), size)
    for axis, branch in (("D", "strip_d"), ("H", "strip_h"), ("W", "strip_w")):
        fused += branch_conv(ops.strip_pool(x, axis), branch)
    return _run_res_block(fused, weights, f"{name}.fuse", c, c)


def validate_input_shape(spec: NetworkSpec, shape: tuple[int, ...]) -> None:
    if len(shape) != 5:
        raise SpecError(f"input must be 5-D, got shape {shape}")
    if shape[0] != 1:
        raise SpecError(f"batch size must be 1, got {shape[0]}")
    if shape[1] != 1:
        raise SpecError(f"input must have 1 channel, got {shape[1]}")
    div = 2 ** (spec.levels - 1)
    if any(s % div for s in shape[2:]):
        raise SpecError(f"spatial dims {shape[2:]} must divide by {div} for {spec.levels} levels")
    if spec.has_context and any((s // div) % 4 for s in shape[2:]):
        raise SpecError(
            f"deepest feature dims {tuple(s // div for s in shape[2:])} must divide by 4 "
            "(context pyramid pooling)"
        )


def forward(spec: NetworkSpec, weights, x: np.ndarray) -> np.ndarray:
    """Run the network, returning class scores of shape (1, num_classes, D, H, W)."""
    tensor.check_tensor(x)
    validate_input_shape(spec, x.shape)
    skips: dict[int, np.ndarray] = {}
    cur = x
    for block in spec.blocks:
        a, b = block.in_channels, block.out_channels
        if block.kind == STEM_CONV:
            cur = ops.conv3d(cur, _get(weights, f"{block.name}.conv.weight", (b, a, 3, 3, 3)))
            cur = tensor.relu(_run_norm(cur, weights, f"{block.name}.norm"))
            skips[0] = cur
        elif block.kind == ENCODER_RESIDUAL:
            level = int(block.name[3:])
            s = (block.scale,) * 3
            cur = _run_res_block(cur, weights, f"{block.name}.block1", a, b, stride=s)
            cur = _run_res_block(cur, weights, f"{block.name}.block2", b, b)
            if level < spec.levels - 1:
                skips[level] = cur
        elif block.kind == CONTEXT_MIXED_PYRAMID:
            cur = _run_context(cur, weights, block.name, b)
        elif block.kind in (DECODER_RESIDUAL, DECODER_RESIDUAL_ANISO):
            level = int(block.name[3:])
            up_size = tuple(s * block.scale for s in cur.shape[2:])
            cur = ops.resize_trilinear(cur, up_size)
            cur = ops.conv3d(
                cur, _get(weights, f"{block.name}.proj.weight", (b, a, 1, 1, 1)),
                bias=_get(weights, f"{block.name}.proj.bias", (b,)),
            )
            cur = tensor.add(cur, skips[level])
            cur = _run_res_block(
                cur, weights, f"{block.name}.block", b, b,
                aniso=block.kind == DECODER_RESIDUAL_ANISO,
            )
        elif block.kind == HEAD_CONV:
            cur = ops.conv3d(
                cur, _get(weights, f"{block.name}.conv.weight", (b, a, 1, 1, 1)),
                bias=_get(weights, f"{block.name}.conv.bias", (b,)),
            )
        else:  # pragma: no cover - BlockSpec already validates
            raise SpecError(f"unknown block kind {block.kind!r}")
    return cur


# ---------------------------------------------------------------------------
# parameter / FLOP accounting

@dataclass(frozen=True)
class LayerStat:
    name: str
    params: int
    macs: int

    @property
    def flops(self) -> int:
        return 2 * self.macs


@dataclass(frozen=True)
class ModelStats:
    param_count: int
    macs: int
    per_layer: tuple[LayerStat, ...] = field(default_factory=tuple)

    @property
    def flops(self) -> int:
        return 2 * self.macs


def count_params(spec: NetworkSpec) -> ModelStats:
    """Exact parameter count from shape algebra; no arrays are allocated."""
    per_block: dict[str, int] = {}
    for entry in weight_entries(spec):
        block_name = entry.name.split(".", 1)[0]
        per_block[block_name] = per_block.get(block_name, 0) + entry.size
    layers = tuple(LayerStat(name, params, 0) for name, params in per_block.items())
    return ModelStats(sum(per_block.values()), 0, layers)


def _voxels(size) -> int:
    return int(np.prod([int(s) for s in size]))


def _conv_macs(cin: int, cout: int, kernel, out_size) -> int:
    return cout * cin * math.prod(kernel) * _voxels(out_size)


def _res_block_macs(cin: int, cout: int, in_size, stride: int, aniso: bool) -> tuple[int, tuple[int, ...]]:
    out_size = tuple(s // stride for s in in_size)
    macs = 0
    for ci in (cin, cout):
        if aniso:
            macs += _conv_macs(ci, cout, (1, 3, 3), out_size)
            macs += _conv_macs(cout, cout, (3, 1, 1), out_size)
        else:
            macs += _conv_macs(ci, cout, (3, 3, 3), out_size)
        macs += 2 * cout * _voxels(out_size)  # instance norm: stats + affine passes
    if cin != cout or stride != 1:
        macs += _conv_macs(cin, cout, (1, 1, 1), out_size)
        macs += 2 * cout * _voxels(out_size)
    macs += cout * _voxels(out_size)  # residual addition
    return macs, out_size


def count_flops(spec: NetworkSpec, input_size: tuple[int, int, int] | None = None) -> ModelStats:
    """Per-layer MACs from shape algebra; FLOPs are exactly 2 x MACs.

    Convolutions count Cout*Cin*k^3 MACs per output voxel.  Pooling,
    interpolation and elementwise work count one MAC per contributing
    element (instance norm: two per element, one statistics pass plus one
    affine pass); these are a rounding error next to the convolutions.
    """
    size = tuple(int(v) for v in (input_size or spec.input_size))
    validate_input_shape(spec, (1, 1) + size)
    params: dict[str, int] = {}
    for entry in weight_entries(spec):
        block_name = entry.name.split(".", 1)[0]
        params[block_name] = params.get(block_name, 0) + entry.size

    layers: list[LayerStat] = []
    cur = size
    level_sizes: dict[int, tuple[int, ...]] = {}
    for block in spec.blocks:
        a, b = block.in_channels, block.out_channels
        if block.kind == STEM_CONV:
            macs = _conv_macs(a, b, (3, 3, 3), cur) + 2 * b * _voxels(cur)
            level_sizes[0] = cur
        elif block.kind == ENCODER_RESIDUAL:
            level = int(block.name[3:])
            m1, out = _res_block_macs(a, b, cur, block.scale, aniso=False)
            m2, _ = _res_block_macs(b, b, out, 1, aniso=False)
            macs = m1 + m2
            cur = out
            level_sizes[level] = cur
        elif block.kind == CONTEXT_MIXED_PYRAMID:
            macs = 0
            for factor in (2, 4):
                pooled = tuple(s // factor for s in cur)
                macs += b * _voxels(cur)  # pooling: one MAC per input element
                macs += _conv_macs(a, b, (1, 1, 1), pooled)
                macs += 8 * b * _voxels(cur)  # trilinear restore: 8 corners per output
                macs += b * _voxels(cur)  # fusion addition
            for _ in range(3):
                macs += b * _voxels(cur)  # strip pooling: one MAC per element
                macs += _conv_macs(a, b, (1, 1, 1), cur)
                macs += b * _voxels(cur)  # fusion addition
            m_fuse, _ = _res_block_macs(b, b, cur, 1, aniso=False)
            macs += m_fuse
        elif block.kind in (DECODER_RESIDUAL, DECODER_RESIDUAL_ANISO):
            level = int(block.name[3:])
            up = level_sizes[level]
            macs = 8 * a * _voxels(up)  # trilinear upsample
            macs += _conv_macs(a, b, (1, 1, 1), up) + b * _voxels(up)  # proj + bias
            macs += b * _voxels(up)  # skip addition
            m_blk, _ = _res_block_macs(b, b, up, 1, aniso=block.kind == DECODER_RESIDUAL_ANISO)
            macs += m_blk
            cur = up
        elif block.kind == HEAD_CONV:
            macs = _conv_macs(a, b, (1, 1, 1), cur) + b * _voxels(cur)
        else:  # pragma: no cover
            raise SpecError(f"unknown block kind {block.kind!r}")
        layers.append(LayerStat(block.name, params.get(block.name, 0), macs))

    total_params = sum(l.params for l in layers)
    total_macs = sum(l.macs for l in layers)
    return ModelStats(total_params, total_macs, tuple(layers))
