"""Jit-compiled inner loops shared by the direct and tree evaluators.

The pairwise loops here are the only performance-critical code in the
package.  Two implementation notes:

* ``_sqrt`` emits the ``llvm.sqrt`` intrinsic instead of the libm call that
  ``np.sqrt`` lowers to inside numba; external calls block LLVM's loop
  vectorizer, the intrinsic does not.
* ``error_model="numpy"`` removes the zero-divisor branch that Python
  semantics would insert on every float division, which likewise blocks
  vectorization.  ``fastmath={"reassoc", "contract"}`` lets the accumulator
  be computed as interleaved partial sums (deterministic for a given build,
  order documented as such) and fuses multiplies with adds; no other
  floating-point rewrites are enabled.
"""

from __future__ import annotations

import cmath
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from llvmlite import ir as _llir
from numba import njit, types
from numba.extending import intrinsic

_FASTMATH = {"reassoc", "contract"}

# Symmetric direct summation: source-index block width, cap on the number of
# blocks (bounds the partial-sum matrix at 8*blocks bytes per target), and the
# length of the stack buffer that splits the pair loop into vectorizable passes.
SYM_TILE = 16384
SYM_MAX_BLOCKS = 32
SYM_BUF = 256


@intrinsic
def _sqrt(typingctx, x):
    sig = types.float64(types.float64)

    def codegen(context, builder, signature, args):
        fn = builder.module.declare_intrinsic("llvm.sqrt", [_llir.DoubleType()])
        return builder.call(fn, args)

    return sig, codegen


@njit(cache=True, nogil=True, error_model="numpy", fastmath=_FASTMATH)
def phi_sum_plain(xs, qs, ys, rd2, out, i0, i1):
    """out[i] = sum_j q_j (x_j - y_i) / sqrt((x_j - y_i)^2 + rd2) for i in [i0, i1)."""
    n = xs.shape[0]
    for i in range(i0, i1):
        y = ys[i]
        acc = 0.0
        for j in range(n):
            d = xs[j] - y
            acc += qs[j] * d / _sqrt(d * d + rd2)
        out[i] = acc


@njit(cache=True, nogil=True, error_model="numpy", fastmath=_FASTMATH)
def phi_pair_block(xs, qs, rd2, row_a, row_b, i0, i1, j0, j1):
    """Accumulate pair interactions between index blocks [i0, i1) and [j0, j1).

    Each pair value v = (x_j - x_i)/sqrt((x_j - x_i)^2 + rd2) is computed once
    and applied to both sides: row_b[i] += q_j v and row_a[j] -= q_i v, using
    that the kernel flips sign under argument exchange.  row_a collects the
    contributions of block [i0, i1) acting as sources, row_b those of
    [j0, j1); for the diagonal block (i0 == j0) both rows are the same array
    and only the upper triangle is visited.  The loop over j is staged through
    a small buffer so that the sqrt/divide pass, the reduction and the row
    update each vectorize.
    """
    vbuf = np.empty(SYM_BUF)
    same = i0 == j0
    for i in range(i0, i1):
        y = xs[i]
        qi = qs[i]
        acc = 0.0
        jj = i + 1 if same else j0
        while jj < j1:
            jhi = min(jj + SYM_BUF, j1)
            m = jhi - jj
            for t in range(m):
                d = xs[jj + t] - y
                vbuf[t] = d / _sqrt(d * d + rd2)
            for t in range(m):
                acc += qs[jj + t] * vbuf[t]
            for t in range(m):
                row_a[jj + t] -= qi * vbuf[t]
            jj = jhi
        row_b[i] += acc


@njit(cache=True, nogil=True, error_model="numpy", fastmath=_FASTMATH)
def sum_rows(part, out, i0, i1):
    """out[i] = sum over the rows of part at column i, in fixed row order."""
    nb = part.shape[0]
    for i in range(i0, i1):
        acc = 0.0
        for b in range(nb):
            acc += part[b, i]
        out[i] = acc


def phi_sum_symmetric(xs, qs, rd2, out, threads) -> None:
    """Direct sum when targets coincide with sources, one kernel call per pair.

    Sources are cut into blocks; the task for block pair (a, b) writes the
    partial fields of a's sources into row a and of b's into row b, columns
    restricted to the other block, so tasks never overlap and the result is
    independent of the thread count.  out[i] is the fixed-order row sum.
    """
    n = xs.shape[0]
    tile = max(SYM_TILE, -(-n // SYM_MAX_BLOCKS))
    nb = max(1, -(-n // tile))
    starts = np.minimum(np.arange(nb + 1) * tile, n).astype(np.int64)
    part = np.zeros((nb, n))
    tasks = [(a, b) for a in range(nb) for b in range(a, nb)]
    if threads is None:
        threads = os.cpu_count() or 1
    threads = max(1, min(int(threads), len(tasks)))
    if threads == 1:
        for a, b in tasks:
            phi_pair_block(
                xs, qs, rd2, part[a], part[b],
                starts[a], starts[a + 1], starts[b], starts[b + 1],
            )
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(
                    phi_pair_block,
                    xs, qs, rd2, part[a], part[b],
                    starts[a], starts[a + 1], starts[b], starts[b + 1],
                )
                for a, b in tasks
            ]
            for fut in futures:
                fut.result()
    run_chunked(sum_rows, n, threads, (part, out))


@njit(cache=True, nogil=True)
def phi_sum_kahan(xs, qs, ys, rd2, out, i0, i1):
    """Kahan-compensated variant, strictly in ascending source order."""
    n = xs.shape[0]
    for i in range(i0, i1):
        y = ys[i]
        acc = 0.0
        c = 0.0
        for j in range(n):
            d = xs[j] - y
            term = qs[j] * d / np.sqrt(d * d + rd2)
            t = term - c
            s = acc + t
            c = (s - acc) - t
            acc = s
        out[i] = acc


@njit(cache=True, nogil=True, error_model="numpy", fastmath=_FASTMATH)
def tree_phi_sum(
    centers,
    halves,
    starts,
    ends,
    lefts,
    rights,
    moments,
    xs,
    qs,
    rd2,
    theta,
    p,
    adaptive,
    tol_share,
    p_cap,
    cos_tab,
    sin_tab,
    ys,
    out,
    i0,
    i1,
):
    """Far-field/near-field traversal for targets ys[i0:i1].

    Per target: descend from the root; a node whose half-width over target
    distance is at most theta contributes through its Taylor moments, a leaf
    contributes by direct summation, anything else recurses.  The traversal
    order is fixed, so results per target do not depend on how targets are
    partitioned across threads.
    """
    n_samples = cos_tab.shape[0]
    deriv = np.empty(p_cap + 1)
    stack = np.empty(160, np.int64)
    safety = 1.1
    for i in range(i0, i1):
        y = ys[i]
        acc = 0.0
        top = 0
        stack[0] = 0
        while top >= 0:
            node = stack[top]
            top -= 1
            c = centers[node]
            h = halves[node]
            d = c - y
            big_r = abs(d)
            if big_r > 0.0 and h <= theta * big_r:
                p_use = p
                if adaptive:
                    # sample max|f| on the contour of radius big_r, then scan
                    # the closed-form bound for the smallest adequate order
                    m_max = 0.0
                    for t in range(n_samples):
                        wr = big_r * cos_tab[t] - big_r
                        wi = big_r * sin_tab[t]
                        z = complex(wr, wi)
                        fv = abs(z / cmath.sqrt(z * z + rd2))
                        if fv > m_max:
                            m_max = fv
                    ratio = h / big_r
                    value = safety * m_max * (big_r / (big_r - h)) * ratio
                    p_use = p_cap
                    for cand in range(p_cap):
                        if value <= tol_share:
                            p_use = cand
                            break
                        value *= ratio
                s2 = d * d + rd2
                f_prev3 = 0.0
                f_prev2 = 0.0
                f_prev = d / _sqrt(s2)
                deriv[0] = f_prev
                if p_use >= 1:
                    f_cur = rd2 / (s2 * _sqrt(s2))
                    deriv[1] = f_cur
                    denom = d * s2
                    for k in range(2, p_use + 1):
                        f_prev3 = f_prev2
                        f_prev2 = f_prev
                        f_prev = f_cur
                        t_k = (rd2 - (k - 1) * (3.0 * d * d + rd2)) * f_prev
                        if k >= 3:
                            t_k -= 3.0 * (k - 1) * (k - 2) * d * f_prev2
                        if k >= 4:
                            t_k -= (k - 1) * (k - 2) * (k - 3) * f_prev3
                        f_cur = t_k / denom
                        deriv[k] = f_cur
                for k in range(p_use + 1):
                    acc += deriv[k] * moments[node, k]
            elif lefts[node] < 0 and rights[node] < 0:
                for j in range(starts[node], ends[node]):
                    dd = xs[j] - y
                    acc += qs[j] * dd / _sqrt(dd * dd + rd2)
            else:
                if rights[node] >= 0:
                    top += 1
                    stack[top] = rights[node]
                if lefts[node] >= 0:
                    top += 1
                    stack[top] = lefts[node]
        out[i] = acc
    return out


def run_chunked(fn, n_targets: int, threads, args) -> None:
    """Run ``fn(*args, lo, hi)`` over [0, n_targets) in contiguous chunks.

    ``threads=None`` means machine parallelism.  The jitted kernels release
    the GIL, so plain threads scale; each target is handled entirely by one
    chunk, keeping per-target results independent of the thread count.
    """
    if threads is None:
        threads = os.cpu_count() or 1
    threads = max(1, min(int(threads), n_targets)) if n_targets else 1
    if threads == 1:
        fn(*args, 0, n_targets)
        return
    bounds = np.linspace(0, n_targets, threads + 1).astype(np.int64)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [
            pool.submit(fn, *args, int(bounds[t]), int(bounds[t + 1]))
            for t in range(threads)
        ]
        for fut in futures:
            fut.result()


def warm_up() -> None:
    """Compile (or load from cache) every jitted kernel on tiny inputs."""
    xs = np.array([0.0, 1.0])
    qs = np.array([1.0, -1.0])
    ys = np.array([0.5])
    out = np.empty(1)
    phi_sum_plain(xs, qs, ys, 0.01, out, 0, 1)
    phi_sum_kahan(xs, qs, ys, 0.01, out, 0, 1)
    part = np.zeros((1, 2))
    phi_pair_block(xs, qs, 0.01, part[0], part[0], 0, 2, 0, 2)
    sum_rows(part, np.empty(2), 0, 2)
    centers = np.array([0.5])
    halves = np.array([0.5])
    starts = np.array([0], np.int64)
    ends = np.array([2], np.int64)
    lefts = np.array([-1], np.int64)
    rights = np.array([-1], np.int64)
    moments = np.zeros((1, 2))
    angles = np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False)
    tree_phi_sum(
        centers, halves, starts, ends, lefts, rights, moments, xs, qs,
        0.01, 1.0 / 3.0, 1, True, 1e-6, 1, np.cos(angles), np.sin(angles),
        ys, out, 0, 1,
    )
