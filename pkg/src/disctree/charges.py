"""Discrete charge systems: particles, quadrature-discretized densities, images.

A :class:`ChargeSystem` stores positions sorted ascending together with prefix
sums of the strengths, which makes the sign term e(y) (sum of charge strictly
below a point minus sum at or above it) an O(log N) lookup per target.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np


@dataclass(frozen=True)
class Charge:
    """One point charge: position ``x`` and strength ``q``.

    ``q`` already includes the quadrature weight, density value, cell width
    and permittivity factor when built from a density.
    """

    x: float
    q: float


@dataclass(frozen=True)
class ChargeSystem:
    """Immutable set of charges sorted ascending by position.

    ``prefix[m]`` is the sum of the first ``m + 1`` strengths in sorted order
    and ``total`` equals ``prefix[-1]``.  Arrays are marked read-only so a
    system can be shared freely across threads.
    """

    xs: np.ndarray
    qs: np.ndarray
    prefix: np.ndarray
    total: float

    def __post_init__(self) -> None:
        for arr in (self.xs, self.qs, self.prefix):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return self.xs.shape[0]

    def __getitem__(self, m: int) -> Charge:
        return Charge(float(self.xs[m]), float(self.qs[m]))

    def __iter__(self) -> Iterator[Charge]:
        for x, q in zip(self.xs, self.qs):
            yield Charge(float(x), float(q))


@dataclass(frozen=True)
class DensitySpec:
    """Line charge density to be discretized by Gauss-Legendre quadrature.

    ``values`` holds either one constant density per cell (length ``cells``)
    or densities tabulated on the cell endpoints (length ``cells + 1``,
    interpolated linearly at the quadrature nodes).
    """

    domain: tuple[float, float]
    cells: int
    values: Sequence[float]
    quadrature_order: int
    eps0: float = 8.8541878128e-12

    def __post_init__(self) -> None:
        a, b = self.domain
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise ValueError(f"domain must be a finite interval, got {self.domain!r}")
        if self.cells < 1:
            raise ValueError(f"cells must be >= 1, got {self.cells!r}")
        if self.quadrature_order < 1:
            raise ValueError(f"quadrature_order must be >= 1, got {self.quadrature_order!r}")
        if self.eps0 <= 0:
            raise ValueError(f"eps0 must be positive, got {self.eps0!r}")
        n_values = len(self.values)
        if n_values not in (self.cells, self.cells + 1):
            raise ValueError(
                f"values must have length cells ({self.cells}) for per-cell constants "
                f"or cells + 1 ({self.cells + 1}) for endpoint tabulation, got {n_values}"
            )


@dataclass(frozen=True)
class ImageSpec:
    """Mirror-charge configuration for one or two electrode planes.

    The lower electrode sits at ``lower_electrode`` and the upper one at
    ``lower_electrode + gap_length``.  An image is kept only when its distance
    to its electrode is strictly less than ``gap_length``.
    """

    gap_length: float
    lower_electrode: float = 0.0
    reflect_lower: bool = True
    reflect_upper: bool = True

    def __post_init__(self) -> None:
        if not (np.isfinite(self.gap_length) and self.gap_length > 0):
            raise ValueError(f"gap_length must be positive, got {self.gap_length!r}")
        if not np.isfinite(self.lower_electrode):
            raise ValueError(f"lower_electrode must be finite, got {self.lower_electrode!r}")


MAX_QUADRATURE_ORDER = 16


def from_particles(raw) -> ChargeSystem:
    """Build a sorted ChargeSystem from (x, q) pairs.

    Duplicate positions are kept as distinct particles; the sort is stable so
    their input order survives.  Rejects NaN or infinite entries.
    """
    arr = np.asarray(raw, dtype=np.float64)
    if arr.size == 0:
        arr = arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected (x, q) pairs, got array of shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("positions and strengths must all be finite")
    order = np.argsort(arr[:, 0], kind="stable")
    xs = np.ascontiguousarray(arr[order, 0])
    qs = np.ascontiguousarray(arr[order, 1])
    prefix = np.cumsum(qs)
    total = float(prefix[-1]) if len(prefix) else 0.0
    return ChargeSystem(xs=xs, qs=qs, prefix=prefix, total=total)


def from_density(spec: DensitySpec) -> ChargeSystem:
    """Discretize a density into one charge per Gauss-Legendre node.

    Each cell of width ``dx`` contributes nodes x_j with strengths
    q_j = (w_j / 2) * sigma(x_j) * dx / (2 eps0), where w_j are the reference
    weights on [-1, 1] (summing to 2), so a constant density sigma over [a, b]
    yields total charge sigma * (b - a) / (2 eps0) exactly.
    """
    if not 1 <= spec.quadrature_order <= MAX_QUADRATURE_ORDER:
        raise ValueError(
            f"quadrature_order must be in 1..{MAX_QUADRATURE_ORDER}, got {spec.quadrature_order}"
        )
    a, b = spec.domain
    values = np.asarray(spec.values, dtype=np.float64)
    nodes, weights = np.polynomial.legendre.leggauss(spec.quadrature_order)
    dx = (b - a) / spec.cells
    edges = a + dx * np.arange(spec.cells + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    # (cells, order) node grid flattened in ascending position order
    x = (mids[:, None] + (0.5 * dx) * nodes[None, :]).ravel()
    if len(values) == spec.cells:
        sigma = np.repeat(values, spec.quadrature_order)
    else:
        sigma = np.interp(x, edges, values)
    w = np.tile(weights, spec.cells)
    q = 0.5 * w * sigma * dx / (2.0 * spec.eps0)
    return from_particles(np.column_stack([x, q]))


def with_images(system: ChargeSystem, spec: ImageSpec) -> ChargeSystem:
    """Add sign-flipped mirror charges across the enabled electrode planes.

    Each enabled electrode reflects every charge once; an image is kept only
    if its distance to that electrode is strictly less than the gap length.
    """
    parts = [np.column_stack([system.xs, system.qs])]
    planes = []
    if spec.reflect_lower:
        planes.append(spec.lower_electrode)
    if spec.reflect_upper:
        planes.append(spec.lower_electrode + spec.gap_length)
    for plane in planes:
        mirrored = 2.0 * plane - system.xs
        keep = np.abs(mirrored - plane) < spec.gap_length
        parts.append(np.column_stack([mirrored[keep], -system.qs[keep]]))
    return from_particles(np.concatenate(parts))


def _sign_terms(system: ChargeSystem, targets: np.ndarray) -> np.ndarray:
    """e(y) for targets in any order (no sortedness requirement)."""
    idx = np.searchsorted(system.xs, targets, side="left")
    below = np.concatenate([[0.0], system.prefix])[idx]
    return 2.0 * below - system.total


def sign_term_all(system: ChargeSystem, targets) -> np.ndarray:
    """The sign term e(y) = sum(q_j for x_j < y) - sum(q_j for x_j >= y).

    ``targets`` must be sorted ascending.  A charge exactly at the target
    counts on the minus side.  Equivalent to the linear recursion
    e_{m+1} = e_m + 2 q_{m+1} over the merged position ordering.
    """
    t = np.asarray(targets, dtype=np.float64)
    if t.ndim != 1:
        raise ValueError(f"targets must be one-dimensional, got shape {t.shape}")
    if len(t) > 1 and np.any(np.diff(t) < 0):
        raise ValueError("targets must be sorted ascending")
    return _sign_terms(system, t)
