"""Error metrics and benchmark harnesses for tree-vs-direct comparisons.

The two error measures are

    max_rel = max_i |(E_tree_i - E_dir_i) / E_dir_i|
    avg_rel = sum_i |E_tree_i - E_dir_i| / sum_i |E_dir_i|

with a near-zero guard on the reference for the max (targets whose reference
field nearly cancels are excluded from the max and counted instead of letting
the ratio explode).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .charges import ChargeSystem, from_particles
from .direct import evaluate_direct
from .kernel import DiscKernel, phi, phi_derivatives
from .tree import EvalConfig, build, evaluate_all

# |reference| below this fraction of the largest reference is excluded from
# the max-relative metric (the average metric needs no guard: it is a ratio
# of global sums).
MAX_REL_FLOOR = 1e-12


@dataclass(frozen=True)
class ErrorReport:
    """max/avg relative error plus how many targets the max skipped."""

    max_relative: float
    avg_relative: float
    excluded_targets: int


@dataclass(frozen=True)
class TimingStats:
    """Wall-clock statistics over repeats, in milliseconds."""

    max_ms: float
    min_ms: float
    avg_ms: float

    def __post_init__(self) -> None:
        if not self.min_ms <= self.avg_ms <= self.max_ms:
            raise ValueError(
                f"need min <= avg <= max, got {self.min_ms}, {self.avg_ms}, {self.max_ms}"
            )

    @staticmethod
    def of(seconds: Sequence[float]) -> "TimingStats":
        ms = [1e3 * s for s in seconds]
        return TimingStats(max_ms=max(ms), min_ms=min(ms), avg_ms=sum(ms) / len(ms))


@dataclass(frozen=True)
class BenchRecord:
    """Timing comparison at one instance size."""

    n: int
    repeats: int
    tree_build: TimingStats
    tree_eval: TimingStats
    direct_eval: TimingStats

    @property
    def tree_total_avg_ms(self) -> float:
        return self.tree_build.avg_ms + self.tree_eval.avg_ms


@dataclass(frozen=True)
class DepthScanRecord:
    """Timing at one leaf capacity in a depth sweep."""

    leaf_capacity: int
    depth: int
    mean_leaf_occupancy: float
    build_ms: float
    eval_ms: float

    @property
    def total_ms(self) -> float:
        return self.build_ms + self.eval_ms


def error_report(tree_values, direct_values) -> ErrorReport:
    """Compare tree output against the direct reference."""
    tv = np.asarray(tree_values, dtype=np.float64)
    dv = np.asarray(direct_values, dtype=np.float64)
    if tv.shape != dv.shape or tv.ndim != 1:
        raise ValueError(f"value sequences must match in length, got {tv.shape} vs {dv.shape}")
    if len(tv) == 0:
        raise ValueError("value sequences must be nonempty")
    abs_dv = np.abs(dv)
    scale = float(abs_dv.max())
    if scale == 0.0:
        raise ValueError("all-zero reference: relative errors are undefined")
    diff = np.abs(tv - dv)
    keep = abs_dv >= MAX_REL_FLOOR * scale
    max_relative = float((diff[keep] / abs_dv[keep]).max())
    avg_relative = float(diff.sum() / abs_dv.sum())
    return ErrorReport(
        max_relative=max_relative,
        avg_relative=avg_relative,
        excluded_targets=int(len(tv) - keep.sum()),
    )


def random_instance(n: int, seed, interval: tuple[float, float] = (0.0, 1.0)) -> ChargeSystem:
    """n charges uniform in ``interval`` with strengths uniform in [0, 1]."""
    rng = np.random.default_rng(seed)
    a, b = interval
    xs = rng.uniform(a, b, n)
    qs = rng.uniform(0.0, 1.0, n)
    return from_particles(np.column_stack([xs, qs]))


def bench(
    system_sizes: Sequence[int],
    repeats: int,
    kernel: DiscKernel,
    config: EvalConfig,
    seed: int = 0,
    threads: int | None = 1,
) -> list[BenchRecord]:
    """Time tree and direct evaluation over a size sweep.

    Instances are seeded (reproducible in content, not in times); targets are
    the source positions.  For each size one full warm-up run of both methods
    is discarded before the measured repeats, then methods run sequentially
    to avoid timing interference.
    """
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats!r}")
    _kernels.warm_up()
    records = []
    for n in system_sizes:
        system = random_instance(int(n), (seed, int(n)))
        targets = system.xs
        tree = build(system, kernel, config)
        evaluate_all(tree, kernel, config, system, targets, threads=threads)
        evaluate_direct(system, kernel, targets, threads=threads)
        build_times, eval_times, direct_times = [], [], []
        for _ in range(repeats):
            tree = build(system, kernel, config)
            build_times.append(tree.build_seconds)
            result = evaluate_all(tree, kernel, config, system, targets, threads=threads)
            eval_times.append(result.eval_time)
            ref = evaluate_direct(system, kernel, targets, threads=threads)
            direct_times.append(ref.eval_time)
        records.append(
            BenchRecord(
                n=int(n),
                repeats=repeats,
                tree_build=TimingStats.of(build_times),
                tree_eval=TimingStats.of(eval_times),
                direct_eval=TimingStats.of(direct_times),
            )
        )
    return records


def depth_scan(
    n: int,
    kernel: DiscKernel,
    config: EvalConfig,
    leaf_capacities: Sequence[int],
    seed: int = 0,
    repeats: int = 1,
    threads: int | None = 1,
) -> list[DepthScanRecord]:
    """Sweep the leaf capacity at fixed N and p, timing build plus evaluation.

    Reports achieved depth and mean leaf occupancy alongside the timings so
    the sweep is anchored to observable tree shape, not to a level count
    convention.
    """
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats!r}")
    _kernels.warm_up()
    system = random_instance(int(n), (seed, int(n)))
    targets = system.xs
    records = []
    for capacity in leaf_capacities:
        cfg = EvalConfig(
            p=config.p,
            theta=config.theta,
            leaf_capacity=int(capacity),
            adaptive=config.adaptive,
            tolerance=config.tolerance,
        )
        tree = build(system, kernel, cfg)
        evaluate_all(tree, kernel, cfg, system, targets, threads=threads)
        build_times, eval_times = [], []
        for _ in range(repeats):
            tree = build(system, kernel, cfg)
            build_times.append(tree.build_seconds)
            result = evaluate_all(tree, kernel, cfg, system, targets, threads=threads)
            eval_times.append(result.eval_time)
        records.append(
            DepthScanRecord(
                leaf_capacity=int(capacity),
                depth=tree.depth,
                mean_leaf_occupancy=tree.mean_leaf_occupancy,
                build_ms=1e3 * sum(build_times) / repeats,
                eval_ms=1e3 * sum(eval_times) / repeats,
            )
        )
    return records


def single_cell_errors(
    n: int,
    kernel: DiscKernel,
    y: float,
    ps: Sequence[int],
    seed: int = 0,
    interval: tuple[float, float] = (-0.5, 0.5),
) -> list[tuple[int, float]]:
    """Relative error of the one-cell far-field expansion at one exterior target.

    All n sources form a single cluster whose moments are expanded about the
    cluster center; for each truncation order p the expansion value is
    compared against the exact pairwise kernel sum at ``y``.  This isolates
    the truncation error of the expansion itself (no tree descent, no sign
    term).
    """
    system = random_instance(int(n), (seed, int(n)), interval=interval)
    p_top = max(ps)
    tree = build(system, kernel, EvalConfig(p=p_top, leaf_capacity=int(n)))
    root = tree.root
    derivs = phi_derivatives(kernel, root.center, y, p_top)
    exact = float(np.sum(system.qs * phi(kernel, system.xs, y)))
    out = []
    for p in ps:
        approx = float(derivs[: p + 1] @ root.moments[: p + 1])
        out.append((int(p), abs(approx - exact) / abs(exact)))
    return out
