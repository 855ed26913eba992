"""Binary spatial tree with per-node Taylor moments and field evaluation.

The tree bisects the source interval uniformly until each node holds at most
``leaf_capacity`` charges.  Every node stores the moments

    m_k = sum_j q_j (x_j - x_c)^k / k!,   k = 0..p,

over its own sources.  Evaluation descends from the root: well-separated
nodes contribute through the truncated Taylor expansion
sum_k Phi^(k)(x_c, y) m_k, leaves contribute by direct summation, and
everything else recurses.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .charges import ChargeSystem, _sign_terms
from .direct import FieldResult, _as_targets
from .kernel import (
    DEFAULT_CONTOUR_SAMPLES,
    DEFAULT_P_MAX,
    DiscKernel,
    choose_p,
    phi_derivatives,
)

MAX_DEPTH = 60


@dataclass(frozen=True)
class EvalConfig:
    """Evaluation parameters: truncation order, separation ratio, leaf size.

    ``theta`` is the multipole acceptance ratio: a node of half-width r is
    well separated from a target at distance R from its center iff
    r / R <= theta.  When ``adaptive`` is set, each accepted interaction
    picks its own truncation order from the error bound and ``tolerance``.
    """

    p: int = 10
    theta: float = 1.0 / 3.0
    leaf_capacity: int = 40
    adaptive: bool = False
    tolerance: float = 1e-9

    def __post_init__(self) -> None:
        if self.p < 0:
            raise ValueError(f"p must be >= 0, got {self.p!r}")
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta!r}")
        if self.leaf_capacity < 1:
            raise ValueError(f"leaf_capacity must be >= 1, got {self.leaf_capacity!r}")
        if self.tolerance <= 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance!r}")


@dataclass
class Tree:
    """Flattened binary tree over a sorted charge system.

    Nodes are stored in breadth-first order as parallel arrays (index 0 is
    the root; child index -1 means absent).  ``moments`` has one row per node
    with columns k = 0..moment_order.
    """

    system: ChargeSystem
    lo: np.ndarray
    hi: np.ndarray
    center: np.ndarray
    half: np.ndarray
    level: np.ndarray
    start: np.ndarray
    end: np.ndarray
    left: np.ndarray
    right: np.ndarray
    moments: np.ndarray
    moment_order: int
    depth: int
    leaf_count: int
    build_seconds: float

    def __len__(self) -> int:
        return len(self.lo)

    def node(self, index: int) -> "TreeNode":
        return TreeNode(self, index)

    @property
    def root(self) -> "TreeNode":
        return TreeNode(self, 0)

    @property
    def mean_leaf_occupancy(self) -> float:
        return len(self.system) / self.leaf_count


@dataclass(frozen=True)
class TreeNode:
    """Read-only view of one tree node."""

    tree: Tree
    index: int

    @property
    def interval(self) -> tuple[float, float]:
        return (float(self.tree.lo[self.index]), float(self.tree.hi[self.index]))

    @property
    def center(self) -> float:
        return float(self.tree.center[self.index])

    @property
    def half_width(self) -> float:
        return float(self.tree.half[self.index])

    @property
    def level(self) -> int:
        return int(self.tree.level[self.index])

    @property
    def source_range(self) -> tuple[int, int]:
        return (int(self.tree.start[self.index]), int(self.tree.end[self.index]))

    @property
    def source_count(self) -> int:
        return int(self.tree.end[self.index] - self.tree.start[self.index])

    @property
    def moments(self) -> np.ndarray:
        return self.tree.moments[self.index]

    @property
    def children(self) -> tuple["TreeNode", ...]:
        out = []
        for child in (self.tree.left[self.index], self.tree.right[self.index]):
            if child >= 0:
                out.append(TreeNode(self.tree, int(child)))
        return tuple(out)

    @property
    def is_leaf(self) -> bool:
        return self.tree.left[self.index] < 0 and self.tree.right[self.index] < 0


def _segment_starts(counts: np.ndarray) -> np.ndarray:
    starts = np.zeros(len(counts), dtype=np.int64)
    np.cumsum(counts[:-1], out=starts[1:])
    return starts


def build(system: ChargeSystem, kernel: DiscKernel, config: EvalConfig) -> Tree:
    """Build the tree and compute all node moments.

    The bounding interval is the source min/max widened by a relative epsilon
    so every source falls strictly inside.  Bisection is uniform at interval
    midpoints; a side that would receive no sources is not materialized.
    Moments are computed level by level, one vectorized pass over the sources
    per level and moment order.  Moment order is ``config.p`` (raised to the
    adaptive search cap when ``config.adaptive`` so adaptive selection is not
    artificially truncated).
    """
    if len(system) == 0:
        raise ValueError("cannot build a tree over an empty charge system")
    t0 = time.perf_counter()
    xs = system.xs
    qs = system.qs
    n = len(xs)
    pad = 1e-12 * max(1.0, abs(float(xs[0])), abs(float(xs[-1])))
    root_lo = float(xs[0]) - pad
    root_hi = float(xs[-1]) + pad

    lo, hi, level, start, end = [root_lo], [root_hi], [0], [0], [n]
    left, right = [-1], [-1]
    frontier = [0]
    depth = 0
    while frontier:
        next_frontier = []
        for node in frontier:
            count = end[node] - start[node]
            if count <= config.leaf_capacity or level[node] >= MAX_DEPTH:
                continue
            mid = 0.5 * (lo[node] + hi[node])
            split = start[node] + int(
                np.searchsorted(xs[start[node] : end[node]], mid, side="left")
            )
            for child_lo, child_hi, s, e in (
                (lo[node], mid, start[node], split),
                (mid, hi[node], split, end[node]),
            ):
                if e == s:
                    continue
                child = len(lo)
                lo.append(child_lo)
                hi.append(child_hi)
                level.append(level[node] + 1)
                start.append(s)
                end.append(e)
                left.append(-1)
                right.append(-1)
                if child_hi == mid:
                    left[node] = child
                else:
                    right[node] = child
                next_frontier.append(child)
                depth = max(depth, level[child])
        frontier = next_frontier

    lo_a = np.asarray(lo)
    hi_a = np.asarray(hi)
    level_a = np.asarray(level, dtype=np.int64)
    start_a = np.asarray(start, dtype=np.int64)
    end_a = np.asarray(end, dtype=np.int64)
    left_a = np.asarray(left, dtype=np.int64)
    right_a = np.asarray(right, dtype=np.int64)
    center_a = 0.5 * (lo_a + hi_a)
    half_a = 0.5 * (hi_a - lo_a)
    leaf_count = int(np.sum((left_a < 0) & (right_a < 0)))

    moment_order = config.p
    if config.adaptive:
        moment_order = max(config.p, DEFAULT_P_MAX)
    moments = np.zeros((len(lo_a), moment_order + 1))
    for lev in range(depth + 1):
        nodes = np.nonzero(level_a == lev)[0]
        counts = end_a[nodes] - start_a[nodes]
        seg = _segment_starts(counts)
        idx = np.arange(int(counts.sum()), dtype=np.int64) + np.repeat(start_a[nodes] - seg, counts)
        t = xs[idx] - np.repeat(center_a[nodes], counts)
        term = qs[idx].astype(np.float64, copy=True)
        moments[nodes, 0] = np.add.reduceat(term, seg)
        for k in range(1, moment_order + 1):
            term *= t / k
            moments[nodes, k] = np.add.reduceat(term, seg)

    elapsed = time.perf_counter() - t0
    return Tree(
        system=system,
        lo=lo_a,
        hi=hi_a,
        center=center_a,
        half=half_a,
        level=level_a,
        start=start_a,
        end=end_a,
        left=left_a,
        right=right_a,
        moments=moments,
        moment_order=moment_order,
        depth=depth,
        leaf_count=leaf_count,
        build_seconds=elapsed,
    )


def well_separated(node: TreeNode, y: float, theta: float) -> bool:
    """True iff node.half_width / |y - node.center| <= theta (false at R = 0)."""
    dist = abs(y - node.center)
    if dist == 0.0:
        return False
    return node.half_width <= theta * dist


def _tol_share(tree: Tree, config: EvalConfig) -> float:
    # split the global tolerance across an estimate of accepted interactions
    return config.tolerance / (3.0 * max(tree.depth, 1))


def evaluate_point(tree: Tree, kernel: DiscKernel, config: EvalConfig, y: float) -> float:
    """Field at one target from the pairwise kernel part (the sign term
    e(y) is added by :func:`evaluate_all`, not here).

    Pure-Python twin of the jitted traversal; used for small cases and as a
    readable reference.  Self-interaction at y = x_j contributes zero
    automatically since Phi(x, x) = 0.
    """
    if tree.moment_order < config.p:
        raise ValueError(
            f"tree was built with moment order {tree.moment_order}, "
            f"config.p = {config.p} requires at least that"
        )
    tol_share = _tol_share(tree, config)
    rd2 = kernel.r_d * kernel.r_d
    xs = tree.system.xs
    qs = tree.system.qs
    acc = 0.0
    stack = [0]
    while stack:
        node = stack.pop()
        c = float(tree.center[node])
        h = float(tree.half[node])
        dist = abs(y - c)
        if dist > 0.0 and h <= config.theta * dist:
            p_use = config.p
            if config.adaptive:
                p_use = min(
                    choose_p(kernel, h, dist, tol_share, p_max=tree.moment_order).p,
                    tree.moment_order,
                )
            derivs = phi_derivatives(kernel, c, y, p_use)
            acc += float(derivs @ tree.moments[node, : p_use + 1])
        elif tree.left[node] < 0 and tree.right[node] < 0:
            for j in range(int(tree.start[node]), int(tree.end[node])):
                d = xs[j] - y
                acc += qs[j] * d / np.sqrt(d * d + rd2)
        else:
            if tree.right[node] >= 0:
                stack.append(int(tree.right[node]))
            if tree.left[node] >= 0:
                stack.append(int(tree.left[node]))
    return acc


def evaluate_all(
    tree: Tree,
    kernel: DiscKernel,
    config: EvalConfig,
    system: ChargeSystem,
    targets,
    threads: int | None = 1,
) -> FieldResult:
    """Field at every target: sign term plus the tree-accelerated kernel sum.

    Runs the jitted traversal over contiguous target chunks; per-target
    results are bit-identical regardless of ``threads`` (None = machine
    parallelism).  ``build_time`` in the result is the tree's own
    construction time.
    """
    t = _as_targets(targets)
    if tree.moment_order < config.p:
        raise ValueError(
            f"tree was built with moment order {tree.moment_order}, "
            f"config.p = {config.p} requires at least that"
        )
    start = time.perf_counter()
    values = _sign_terms(system, t)
    if len(t):
        angles = np.linspace(0.0, 2.0 * np.pi, DEFAULT_CONTOUR_SAMPLES, endpoint=False)
        phi_part = np.empty_like(t)
        args = (
            tree.center,
            tree.half,
            tree.start,
            tree.end,
            tree.left,
            tree.right,
            tree.moments,
            tree.system.xs,
            tree.system.qs,
            kernel.r_d * kernel.r_d,
            config.theta,
            config.p,
            config.adaptive,
            _tol_share(tree, config),
            tree.moment_order,
            np.cos(angles),
            np.sin(angles),
            t,
            phi_part,
        )
        _kernels.run_chunked(_kernels.tree_phi_sum, len(t), threads, args)
        values = values + phi_part
    elapsed = time.perf_counter() - start
    return FieldResult(
        values=values,
        build_time=tree.build_seconds,
        eval_time=elapsed,
        method="tree",
    )
