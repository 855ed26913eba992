"""Command-line front end: evaluate, accuracy, bench and depth-scan.

Exit codes: 0 success, 2 bad arguments (usage), 3 unreadable or malformed
input data, 4 internal invariant violation during the run.  Diagnostics go
to stderr, one line each.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from .charges import (
    ChargeSystem,
    DensitySpec,
    ImageSpec,
    from_density,
    from_particles,
    with_images,
)
from .direct import evaluate_direct
from .kernel import DiscKernel
from .metrics import bench, depth_scan, error_report, random_instance, single_cell_errors
from .tree import EvalConfig, build, evaluate_all

EXIT_DATA = 3
EXIT_INTERNAL = 4

TABLE1_PS = (5, 10, 15, 20)
TABLE3_SIZES = (10_000, 50_000, 100_000, 200_000)
TABLE2_CAPACITIES = (781, 391, 196, 98, 49, 25, 13, 7)
# Acceptance ratio for the full-accuracy preset.  At p=10 the truncation
# error scales like (3*theta)^11 relative to the ratio-1/3 level (~1e-8),
# so 0.1 pushes the average relative error to the roundoff floor (~2e-14)
# while the default 1/3 stays the right speed/accuracy trade for timing runs.
TABLE4_THETA = 0.1


class DataError(Exception):
    """Unreadable or malformed input; maps to exit code 3."""


def _fmt(value: float) -> str:
    # 17 significant digits round-trip any double exactly
    return format(value, ".17g")


def read_particles_csv(path: str) -> ChargeSystem:
    """Read a particle CSV with header ``x,q``; diagnostics carry line numbers."""
    rows = []
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x", "q"]:
            raise DataError(f"{path}: line 1: expected header 'x,q', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{path}: line {lineno}: expected 2 fields, got {len(row)}")
            try:
                x, q = float(row[0]), float(row[1])
            except ValueError:
                raise DataError(f"{path}: line {lineno}: non-numeric field in {row!r}") from None
            if not (math.isfinite(x) and math.isfinite(q)):
                raise DataError(f"{path}: line {lineno}: non-finite value in {row!r}")
            rows.append((x, q))
    return from_particles(rows)


def read_targets_csv(path: str) -> np.ndarray:
    """Read a target CSV with header ``y``."""
    out = []
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["y"]:
            raise DataError(f"{path}: line 1: expected header 'y', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 1:
                raise DataError(f"{path}: line {lineno}: expected 1 field, got {len(row)}")
            try:
                y = float(row[0])
            except ValueError:
                raise DataError(f"{path}: line {lineno}: non-numeric field {row[0]!r}") from None
            if not math.isfinite(y):
                raise DataError(f"{path}: line {lineno}: non-finite value {row[0]!r}")
            out.append(y)
    return np.asarray(out, dtype=np.float64)


def read_density_json(path: str) -> DensitySpec:
    """Read a density spec JSON mirroring the DensitySpec fields."""
    try:
        with open(path) as handle:
            doc = json.load(handle)
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise DataError(f"{path}: expected a JSON object, got {type(doc).__name__}")
    required = {"domain", "cells", "values", "quadrature_order"}
    missing = required - doc.keys()
    if missing:
        raise DataError(f"{path}: missing fields: {', '.join(sorted(missing))}")
    try:
        spec = DensitySpec(
            domain=tuple(float(v) for v in doc["domain"]),
            cells=int(doc["cells"]),
            values=[float(v) for v in doc["values"]],
            quadrature_order=int(doc["quadrature_order"]),
            **({"eps0": float(doc["eps0"])} if "eps0" in doc else {}),
        )
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    return spec


def _open_out(path: str | None):
    if path is None:
        return sys.stdout, False
    try:
        return open(path, "w", newline=""), True
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc


def _emit_records(records: list[dict], fmt: str, out_path: str | None) -> None:
    stream, close = _open_out(out_path)
    try:
        if fmt == "json":
            json.dump(records, stream, indent=2)
            stream.write("\n")
        else:
            writer = csv.writer(stream)
            writer.writerow(records[0].keys())
            for rec in records:
                writer.writerow(
                    _fmt(v) if isinstance(v, float) else v for v in rec.values()
                )
    finally:
        if close:
            stream.close()


def _flat_record(obj) -> dict:
    flat = {}
    for key, value in dataclasses.asdict(obj).items():
        if isinstance(value, dict):
            for sub, subvalue in value.items():
                flat[f"{key}_{sub}"] = subvalue
        else:
            flat[key] = value
    return flat


def _load_system(args) -> tuple[ChargeSystem, str]:
    sources = [s for s in ("particles", "density", "n") if getattr(args, s, None)]
    if len(sources) != 1:
        raise DataError("exactly one of --particles, --density, --n is required")
    if args.particles:
        return read_particles_csv(args.particles), args.particles
    if args.density:
        return from_density(read_density_json(args.density)), args.density
    return random_instance(args.n, (args.seed, args.n)), f"random(n={args.n}, seed={args.seed})"


def _apply_images(system: ChargeSystem, args) -> ChargeSystem:
    if not args.images:
        return system
    if args.gap is None:
        raise DataError("--images requires --gap")
    spec = ImageSpec(
        gap_length=args.gap,
        lower_electrode=args.electrode,
        reflect_lower=args.images in ("lower", "both"),
        reflect_upper=args.images in ("upper", "both"),
    )
    return with_images(system, spec)


def _config(args, leaf_capacity: int | None = None) -> EvalConfig:
    return EvalConfig(
        p=args.p,
        theta=args.theta,
        leaf_capacity=leaf_capacity if leaf_capacity is not None else args.leaf_capacity,
        adaptive=args.adaptive,
        tolerance=args.tol,
    )


def _cmd_evaluate(args) -> int:
    system, source_desc = _load_system(args)
    system = _apply_images(system, args)
    if len(system) == 0:
        raise DataError(f"{source_desc}: no charges to evaluate")
    targets = read_targets_csv(args.targets) if args.targets else system.xs.copy()
    kernel = DiscKernel(args.rd)
    config = _config(args)
    tree = build(system, kernel, config)
    result = evaluate_all(tree, kernel, config, system, targets, threads=args.threads)
    stream, close = _open_out(args.out)
    try:
        writer = csv.writer(stream)
        writer.writerow(["y", "E"])
        for y, e in zip(targets, result.values):
            writer.writerow([_fmt(y), _fmt(e)])
    finally:
        if close:
            stream.close()
    summary = {
        "source": source_desc,
        "n_charges": len(system),
        "n_targets": int(len(targets)),
        "rd": args.rd,
        "p": config.p,
        "theta": config.theta,
        "leaf_capacity": config.leaf_capacity,
        "adaptive": config.adaptive,
        "depth": tree.depth,
        "build_seconds": result.build_time,
        "eval_seconds": result.eval_time,
        "method": result.method,
    }
    summary_stream = sys.stdout if args.out else sys.stderr
    json.dump(summary, summary_stream)
    summary_stream.write("\n")
    return 0


def _cmd_accuracy(args) -> int:
    kernel = DiscKernel(args.rd)
    if args.table1:
        errors = single_cell_errors(
            n=10_000, kernel=DiscKernel(0.1), y=1.0, ps=TABLE1_PS, seed=args.seed
        )
        records = [{"p": p, "relative_error": err} for p, err in errors]
        _emit_records(records, args.format, args.out)
        return 0
    sizes = [10_000, 200_000] if args.table4 else [args.n]
    if args.table4:
        kernel = DiscKernel(0.1)
    records = []
    for n in sizes:
        config = (
            EvalConfig(p=10, theta=TABLE4_THETA, leaf_capacity=40)
            if args.table4
            else _config(args)
        )
        system = random_instance(n, (args.seed, n))
        targets = system.xs
        tree = build(system, kernel, config)
        tree_result = evaluate_all(tree, kernel, config, system, targets, threads=args.threads)
        direct_result = evaluate_direct(system, kernel, targets, threads=args.threads)
        report = error_report(tree_result.values, direct_result.values)
        records.append(
            {
                "n": n,
                "p": config.p,
                "leaf_capacity": config.leaf_capacity,
                "max_relative": report.max_relative,
                "avg_relative": report.avg_relative,
                "excluded_targets": report.excluded_targets,
                "seed": args.seed,
            }
        )
    _emit_records(records, args.format, args.out)
    return 0


def _cmd_bench(args) -> int:
    sizes = TABLE3_SIZES if args.table3 else tuple(args.sizes)
    config = EvalConfig(p=10, leaf_capacity=40) if args.table3 else _config(args)
    kernel = DiscKernel(0.1) if args.table3 else DiscKernel(args.rd)
    records = bench(
        sizes,
        repeats=args.repeats,
        kernel=kernel,
        config=config,
        seed=args.seed,
        threads=args.threads,
    )
    flat = []
    for rec in records:
        row = _flat_record(rec)
        row["seed"] = args.seed
        flat.append(row)
    _emit_records(flat, args.format, args.out)
    return 0


def _cmd_depth_scan(args) -> int:
    n = 200_000 if args.table2 else args.n
    capacities = TABLE2_CAPACITIES if args.table2 else tuple(args.capacities)
    config = EvalConfig(p=10, leaf_capacity=40) if args.table2 else _config(args)
    kernel = DiscKernel(0.1) if args.table2 else DiscKernel(args.rd)
    records = depth_scan(
        n,
        kernel=kernel,
        config=config,
        leaf_capacities=capacities,
        seed=args.seed,
        repeats=args.repeats,
        threads=args.threads,
    )
    flat = []
    for rec in records:
        row = _flat_record(rec)
        row["total_ms"] = rec.total_ms
        flat.append(row)
    _emit_records(flat, args.format, args.out)
    return 0


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not math.isfinite(value) or value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return value


def _ratio_float(text: str) -> float:
    value = _positive_float(text)
    if value >= 1.0:
        raise argparse.ArgumentTypeError(f"expected a ratio in (0, 1), got {text!r}")
    return value


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--rd", type=_positive_float, default=0.1,
                        help="disc radius r_d (default 0.1)")
    parser.add_argument("--p", type=int, default=10, help="truncation order (default 10)")
    parser.add_argument("--theta", type=_ratio_float, default=1.0 / 3.0,
                        help="separation ratio (default 1/3)")
    parser.add_argument("--leaf-capacity", type=int, default=40,
                        help="max sources per leaf (default 40)")
    parser.add_argument("--adaptive", action="store_true",
                        help="choose p per interaction from the error bound")
    parser.add_argument("--tol", type=_positive_float, default=1e-9,
                        help="global tolerance for --adaptive (default 1e-9)")
    parser.add_argument("--seed", type=int, default=0, help="instance seed (default 0)")
    parser.add_argument("--threads", type=int, default=None,
                        help="evaluation threads (default: machine parallelism)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="record output format (default csv)")
    parser.add_argument("--out", default=None, help="output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="disctree",
        description="Treecode field summation for the 1.5-dimensional disc charge model.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_eval = sub.add_parser("evaluate", help="evaluate the field at targets")
    p_eval.add_argument("--particles", help="particle CSV (header x,q)")
    p_eval.add_argument("--density", help="density spec JSON")
    p_eval.add_argument("--n", type=int, help="generate a random instance of this size")
    p_eval.add_argument("--targets", help="target CSV (header y); default: source positions")
    p_eval.add_argument("--images", choices=("lower", "upper", "both"),
                        help="add mirror charges across electrode planes")
    p_eval.add_argument("--gap", type=_positive_float,
                        help="electrode gap length L (with --images)")
    p_eval.add_argument("--electrode", type=float, default=0.0,
                        help="lower electrode position (default 0)")
    _add_common(p_eval)
    p_eval.set_defaults(func=_cmd_evaluate)

    p_acc = sub.add_parser("accuracy", help="compare tree against direct summation")
    p_acc.add_argument("--n", type=int, default=10_000, help="instance size (default 10000)")
    p_acc.add_argument("--table1", action="store_true",
                       help="preset: single-cell expansion error over p in {5,10,15,20}")
    p_acc.add_argument("--table4", action="store_true",
                       help="preset: full-run errors at N in {1e4, 2e5}, p=10, leaf 40")
    _add_common(p_acc)
    p_acc.set_defaults(func=_cmd_accuracy)

    p_bench = sub.add_parser("bench", help="time tree vs direct over a size sweep")
    p_bench.add_argument("--sizes", type=_int_list, default=[10_000, 50_000],
                         help="comma-separated instance sizes")
    p_bench.add_argument("--repeats", type=int, default=3, help="measured repeats (default 3)")
    p_bench.add_argument("--table3", action="store_true",
                         help="preset: N in {1e4, 5e4, 1e5, 2e5}, p=10, leaf 40")
    _add_common(p_bench)
    p_bench.set_defaults(func=_cmd_bench)

    p_scan = sub.add_parser("depth-scan", help="sweep leaf capacity at fixed N")
    p_scan.add_argument("--n", type=int, default=200_000, help="instance size (default 200000)")
    p_scan.add_argument("--capacities", type=_int_list, default=list(TABLE2_CAPACITIES),
                        help="comma-separated leaf capacities")
    p_scan.add_argument("--repeats", type=int, default=1, help="measured repeats (default 1)")
    p_scan.add_argument("--table2", action="store_true",
                        help="preset: N=2e5, p=10, capacities from ~780 down to ~6 per leaf")
    _add_common(p_scan)
    p_scan.set_defaults(func=_cmd_depth_scan)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - boundary: invariant violations map to exit 4
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
