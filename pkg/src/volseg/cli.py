"""Command-line interface.

Subcommands: segment, evaluate, inspect, init-weights, preprocess.

Exit codes: 0 success, 2 bad arguments or geometry mismatch, 3 I/O or file
format error, 4 weight/network mismatch, 5 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_WEIGHTS = 4
EXIT_INTERNAL = 5


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="volseg",
        description="Coarse-to-fine volumetric CT multi-organ segmentation engine (CPU).",
    )
    parser.add_argument(
        "--threads", type=int, default=None, metavar="N",
        help="cap internal operator parallelism (default: hardware parallelism)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="run the full coarse-to-fine pipeline on one volume")
    p.add_argument("--input", required=True, help="input SVF header path")
    p.add_argument("--coarse-weights", required=True, help="ESWT weights for the coarse net")
    p.add_argument("--fine-weights", required=True, help="ESWT weights for the fine net")
    p.add_argument("--output", required=True, help="output SVF header path for the label mask")
    p.add_argument("--config", default=None, help="pipeline config JSON file")
    p.add_argument("--summary", default=None, help="write the run summary JSON here")

    p = sub.add_parser("evaluate", help="compare a predicted mask against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--nsd-tol", type=float, default=1.0, metavar="MM")
    p.add_argument("--report", default=None, help="write the report JSON here")

    p = sub.add_parser("inspect", help="print parameter and FLOP counts for a network")
    p.add_argument("--model", choices=["coarse", "fine"], required=True)
    p.add_argument("--input-size", type=int, nargs=3, default=None, metavar=("D", "H", "W"))
    p.add_argument("--spec", default=None, help="network spec JSON file (overrides --model)")
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--base-channels", type=int, default=None)
    p.add_argument("--json", action="store_true", help="emit machine-readable JSON")
    p.add_argument(
        "--entries", action="store_true",
        help="with --json: include every weight entry (name + dims)",
    )

    p = sub.add_parser("init-weights", help="write deterministically initialized weights")
    p.add_argument("--model", choices=["coarse", "fine"], required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--base-channels", type=int, default=None)
    p.add_argument("--input-size", type=int, nargs=3, default=None, metavar=("D", "H", "W"))

    p = sub.add_parser("preprocess", help="run preprocessing only and write the result as SVF")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--size", type=int, nargs=3, required=True, metavar=("D", "H", "W"))
    p.add_argument("--config", default=None)
    return parser


def _load_config(path: str | None):
    from .pipeline import PipelineConfig

    if path is None:
        return PipelineConfig()
    with open(path, "r", encoding="utf-8") as fh:
        return PipelineConfig.from_json(fh.read())


def _spec_for(args):
    from .network import NetworkSpec, build_coarse_spec, build_fine_spec

    if getattr(args, "spec", None):
        with open(args.spec, "r", encoding="utf-8") as fh:
            return NetworkSpec.from_json(fh.read())
    build = build_fine_spec if args.model == "fine" else build_coarse_spec
    kwargs = {}
    if args.levels is not None:
        kwargs["levels"] = args.levels
    if args.base_channels is not None:
        kwargs["base_channels"] = args.base_channels
    if getattr(args, "input_size", None) is not None:
        kwargs["input_size"] = tuple(args.input_size)
    return build(**kwargs)


def _cmd_segment(args) -> int:
    from dataclasses import asdict

    from .pipeline import run_pipeline

    cfg = _load_config(args.config)
    print("config:", json.dumps(asdict(cfg)))
    summary = run_pipeline(
        args.input, args.coarse_weights, args.fine_weights, cfg, args.output
    )
    text = summary.to_json()
    if args.summary:
        with open(args.summary, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    from .metrics import evaluate_case

    report = evaluate_case(args.pred, args.gt, tol_mm=args.nsd_tol)
    text = report.to_json()
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def _cmd_inspect(args) -> int:
    from .network import count_flops, count_params, weight_entries

    spec = _spec_for(args)
    input_size = tuple(args.input_size) if args.input_size else spec.input_size
    stats = count_flops(spec, input_size)
    params = count_params(spec)
    if args.json:
        doc = {
            "model": spec.name,
            "base_channels": spec.base_channels,
            "levels": spec.levels,
            "input_size": list(input_size),
            "num_classes": spec.num_classes,
            "param_count": params.param_count,
            "macs": stats.macs,
            "flops": stats.flops,
            "per_layer": [
                {"name": l.name, "params": l.params, "macs": l.macs, "flops": l.flops}
                for l in stats.per_layer
            ],
        }
        if args.entries:
            doc["entries"] = [
                {"name": e.name, "dims": list(e.dims)} for e in weight_entries(spec)
            ]
        print(json.dumps(doc, indent=2))
        return EXIT_OK
    print(f"model: {spec.name}")
    print(f"base channels: {spec.base_channels}")
    print(f"levels: {spec.levels}")
    print(f"input size: {'x'.join(str(v) for v in input_size)}")
    print(f"parameters: {params.param_count}")
    print(f"MACs: {stats.macs}")
    print(f"FLOPs: {stats.flops}")
    print()
    print(f"{'layer':<12} {'params':>12} {'MACs':>16} {'FLOPs':>16}")
    for layer in stats.per_layer:
        print(f"{layer.name:<12} {layer.params:>12} {layer.macs:>16} {layer.flops:>16}")
    return EXIT_OK


def _cmd_init_weights(args) -> int:
    from .weights import kaiming_init, save_eswt

    spec = _spec_for(args)
    store = kaiming_init(spec, args.seed)
    save_eswt(store, args.out)
    print(f"wrote {len(store)} arrays ({store.total_elements()} elements) to {args.out}")
    return EXIT_OK


def _cmd_preprocess(args) -> int:
    from .pipeline import preprocess
    from .volume import VoxelVolume, read_volume, write_volume

    cfg = _load_config(args.config)
    vol = read_volume(args.input)
    t, info = preprocess(vol, cfg, tuple(args.size))
    out_spacing = tuple(
        sp * ns / os_ for sp, ns, os_ in zip(info.spacing, info.source_shape, args.size)
    )
    out = VoxelVolume(
        data=t[0, 0], spacing=out_spacing, origin=info.origin,
        orientation=cfg.target_orientation,
    )
    write_volume(out, args.output)
    print(
        json.dumps(
            {
                "source_orientation": info.source_orientation,
                "source_shape": list(info.source_shape),
                "mean": info.mean,
                "std": info.std,
                "degenerate_std": info.degenerate_std,
            }
        )
    )
    return EXIT_OK


_COMMANDS = {
    "segment": _cmd_segment,
    "evaluate": _cmd_evaluate,
    "inspect": _cmd_inspect,
    "init-weights": _cmd_init_weights,
    "preprocess": _cmd_preprocess,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    limiter = None
    if args.threads is not None:
        if args.threads < 1:
            print(f"--threads must be >= 1, got {args.threads}", file=sys.stderr)
            return EXIT_USAGE
        os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
        from threadpoolctl import threadpool_limits

        limiter = threadpool_limits(limits=args.threads)

    from .errors import (
        FileFormatError,
        GeometryMismatchError,
        SpecError,
        VolsegError,
        WeightStoreError,
    )

    try:
        return _COMMANDS[args.command](args)
    except GeometryMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FileFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except WeightStoreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_WEIGHTS
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (VolsegError, ValueError, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    finally:
        if limiter is not None:
            limiter.restore_original_limits()


if __name__ == "__main__":
    sys.exit(main())
