"""Pure-Python kernels: the fallback when the compiled extension is absent.

Every function here is the reference semantics for its compiled twin in
``_ckernels.pyx``. The two must produce bit-identical output, so sums are
accumulated in the same order and with the same guard thresholds; do not
"optimize" a loop here into a BLAS call with different rounding.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "pure"


def _cell_grid(positions: np.ndarray, r_star: float, side: float):
    """Counting-sort points into a cell grid with cell side >= r_star."""
    n, d = positions.shape
    nc = max(1, int(side // r_star))
    cell_side = side / nc
    half = side / 2.0
    coords = np.empty((n, d), dtype=np.int64)
    for ax in range(d):
        idx = np.floor((positions[:, ax] + half) / cell_side).astype(np.int64)
        coords[:, ax] = np.clip(idx, 0, nc - 1)
    if d == 2:
        flat = coords[:, 0] * nc + coords[:, 1]
    else:
        flat = (coords[:, 0] * nc + coords[:, 1]) * nc + coords[:, 2]
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=nc**d)
    starts = np.concatenate(([0], np.cumsum(counts)))
    return nc, coords, flat, order, starts


def _axis_neighbors(c: int, nc: int, torus: bool) -> list[int]:
    if torus:
        vals = sorted({(c - 1) % nc, c, (c + 1) % nc})
    else:
        vals = [v for v in (c - 1, c, c + 1) if 0 <= v < nc]
    return vals


def cell_edges(positions: np.ndarray, r_star: float, side: float, torus: bool):
    """Fixed-radius pairs (i, j), i < j, via cell lists; order is arbitrary."""
    n, d = positions.shape
    out_i: list[np.ndarray] = []
    out_j: list[np.ndarray] = []
    if n == 0:
        return (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))
    nc, coords, _flat, order, starts = _cell_grid(positions, r_star, side)
    r2 = r_star * r_star
    for i in range(n):
        ci = coords[i]
        cand_chunks = []
        ax0 = _axis_neighbors(int(ci[0]), nc, torus)
        ax1 = _axis_neighbors(int(ci[1]), nc, torus)
        ax2 = _axis_neighbors(int(ci[2]), nc, torus) if d == 3 else [0]
        for a in ax0:
            for b in ax1:
                for c in ax2:
                    cell = (a * nc + b) * nc + c if d == 3 else a * nc + b
                    lo, hi = starts[cell], starts[cell + 1]
                    if hi > lo:
                        cand_chunks.append(order[lo:hi])
        cand = np.concatenate(cand_chunks)
        cand = cand[cand > i]
        if cand.size == 0:
            continue
        d2 = np.zeros(cand.size, dtype=np.float64)
        for ax in range(d):
            dx = np.abs(positions[cand, ax] - positions[i, ax])
            if torus:
                dx = np.minimum(dx, side - dx)
            d2 = d2 + dx * dx
        hit = cand[d2 <= r2]
        if hit.size:
            out_i.append(np.full(hit.size, i, dtype=np.int64))
            out_j.append(hit.astype(np.int64))
    if not out_i:
        return (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))
    return (np.concatenate(out_i), np.concatenate(out_j))


def union_components(n: int, ei: np.ndarray, ej: np.ndarray) -> np.ndarray:
    """Component labels via union-find; label = smallest vertex id in component."""
    parent = list(range(n))
    size = [1] * n

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for k in range(len(ei)):
        ra, rb = find(int(ei[k])), find(int(ej[k]))
        if ra == rb:
            continue
        if size[ra] < size[rb]:
            ra, rb = rb, ra
        parent[rb] = ra
        size[ra] += size[rb]

    labels = np.empty(n, dtype=np.int64)
    comp_min = [-1] * n
    for v in range(n):
        r = find(v)
        if comp_min[r] < 0:
            comp_min[r] = v  # ascending visit: first hit is the minimum
        labels[v] = comp_min[r]
    return labels


def heat_bath_chunk(sigma, indptr, indices, weights, ext, s, beta, u) -> None:
    """Systematic heat-bath sweeps for two-state spins; mutates sigma.

    u has shape (nsweeps, nsites); site x flips up iff u < p_plus(h_x).
    """
    nsweeps, n = u.shape
    for t in range(nsweeps):
        ut = u[t]
        for x in range(n):
            h = ext[x] * s
            for k in range(indptr[x], indptr[x + 1]):
                h += weights[k] * sigma[indices[k]]
            z = -2.0 * beta * h
            if z > 700.0:
                p = 0.0
            elif z < -700.0:
                p = 1.0
            else:
                p = 1.0 / (1.0 + math.exp(z))
            sigma[x] = 1.0 if ut[x] < p else -1.0


def metropolis_chunk(sigma, indptr, indices, weights, ext, s, beta, width, kind, p0, p1, u) -> int:
    """Systematic random-walk Metropolis sweeps for continuous spins.

    u has shape (nsweeps, nsites, 2); kind 1 = uniform interval with
    half-width p0, kind 2 = density exp(-(p0 t^4 + p1 t^2)). Returns the
    number of accepted proposals.
    """
    nsweeps, n, _ = u.shape
    accepted = 0
    for t in range(nsweeps):
        ut = u[t]
        for x in range(n):
            h = ext[x] * s
            for k in range(indptr[x], indptr[x + 1]):
                h += weights[k] * sigma[indices[k]]
            cur = sigma[x]
            prop = cur + width * (2.0 * ut[x, 0] - 1.0)
            if kind == 1:
                if prop > p0 or prop < -p0:
                    continue
                logr = beta * h * (prop - cur)
            else:
                vc = p0 * ((cur * cur) * (cur * cur)) + p1 * (cur * cur)
                vp = p0 * ((prop * prop) * (prop * prop)) + p1 * (prop * prop)
                logr = beta * h * (prop - cur) + (vc - vp)
            if logr >= 0.0 or ut[x, 1] < math.exp(logr):
                sigma[x] = prop
                accepted += 1
    return accepted
