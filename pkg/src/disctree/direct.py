"""O(N^2) reference evaluator: the full pairwise sum plus the sign term.

This is the correctness oracle and the benchmark baseline.  The field at a
target y is

    E(y) = e(y) + sum_j q_j (x_j - y) / sqrt((x_j - y)^2 + r_d^2),

with e(y) the sign term from :func:`disctree.charges.sign_term_all`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .charges import ChargeSystem, _sign_terms
from .kernel import DiscKernel


@dataclass(frozen=True)
class FieldResult:
    """Field values at the targets plus wall-clock timings.

    ``build_time`` is zero for the direct method; for the tree method it is
    the tree-construction time, kept separate from ``eval_time``.
    """

    values: np.ndarray
    build_time: float
    eval_time: float
    method: str

    def __post_init__(self) -> None:
        if self.method not in ("tree", "direct"):
            raise ValueError(f"method must be 'tree' or 'direct', got {self.method!r}")
        if self.build_time < 0 or self.eval_time < 0:
            raise ValueError("timings must be nonnegative")


def _as_targets(targets) -> np.ndarray:
    t = np.ascontiguousarray(targets, dtype=np.float64)
    if t.ndim != 1:
        raise ValueError(f"targets must be one-dimensional, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise ValueError("targets must all be finite")
    return t


def evaluate_direct(
    system: ChargeSystem,
    kernel: DiscKernel,
    targets,
    threads: int | None = 1,
    compensated: bool = False,
) -> FieldResult:
    """Evaluate the field at every target by direct summation.

    The pairwise sum runs in ascending source order with plain double
    accumulation (the jitted loop folds it into deterministic interleaved
    partial sums; outputs are bit-identical for identical inputs and build).
    When the targets coincide with the source positions, each pair is
    computed once and applied to both sides through the kernel's sign flip,
    roughly halving the cost; the summation order changes but stays fixed.
    ``compensated=True`` switches to Kahan summation for ill-conditioned
    instances.  ``threads=None`` uses machine parallelism; the per-target
    results do not depend on the thread count.
    """
    t = _as_targets(targets)
    start = time.perf_counter()
    values = _sign_terms(system, t)
    rd2 = kernel.r_d * kernel.r_d
    phi_part = np.empty_like(t)
    if compensated:
        _kernels.run_chunked(
            _kernels.phi_sum_kahan, len(t), threads, (system.xs, system.qs, t, rd2, phi_part)
        )
    elif len(t) == len(system.xs) and np.array_equal(t, system.xs):
        _kernels.phi_sum_symmetric(system.xs, system.qs, rd2, phi_part, threads)
    else:
        _kernels.run_chunked(
            _kernels.phi_sum_plain, len(t), threads, (system.xs, system.qs, t, rd2, phi_part)
        )
    values = values + phi_part
    elapsed = time.perf_counter() - start
    return FieldResult(values=values, build_time=0.0, eval_time=elapsed, method="direct")
