# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Semantics (and bit patterns) must match _pykernels.

Accumulation order, guard thresholds and expression grouping are copied
verbatim from the pure versions so trajectories agree bit for bit.
"""

from libc.math cimport exp, fabs
from libcpp.vector cimport vector

import numpy as np

from ._pykernels import _cell_grid

BACKEND = "compiled"


cdef inline int _axis_nbrs(long long c, long long nc, bint torus, long long* out) nogil:
    cdef long long a, b, e, t
    cdef int m = 0
    if torus:
        a = (c - 1 + nc) % nc
        b = c
        e = (c + 1) % nc
        # sort the triple, then drop duplicates
        if a > b: t = a; a = b; b = t
        if b > e: t = b; b = e; e = t
        if a > b: t = a; a = b; b = t
        out[m] = a; m += 1
        if b != a: out[m] = b; m += 1
        if e != b: out[m] = e; m += 1
    else:
        if c - 1 >= 0: out[m] = c - 1; m += 1
        out[m] = c; m += 1
        if c + 1 < nc: out[m] = c + 1; m += 1
    return m


def cell_edges(positions, double r_star, double side, bint torus):
    """Fixed-radius pairs (i, j), i < j, via cell lists; order is arbitrary."""
    pos_arr = np.ascontiguousarray(positions, dtype=np.float64)
    cdef double[:, ::1] pos = pos_arr
    cdef Py_ssize_t n = pos.shape[0]
    cdef Py_ssize_t d = pos.shape[1]
    if n == 0:
        return (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))

    nc_py, coords_py, _flat, order_py, starts_py = _cell_grid(pos_arr, r_star, side)
    cdef long long nc = nc_py
    cdef long long[:, ::1] coords = np.ascontiguousarray(coords_py, dtype=np.int64)
    cdef long long[::1] order = np.ascontiguousarray(order_py, dtype=np.int64)
    cdef long long[::1] starts = np.ascontiguousarray(starts_py, dtype=np.int64)

    cdef vector[long long] out_i
    cdef vector[long long] out_j
    cdef double r2 = r_star * r_star
    cdef long long ax0[3]
    cdef long long ax1[3]
    cdef long long ax2[3]
    cdef int m0, m1, m2, ia, ib, ic
    cdef Py_ssize_t i, k, ax
    cdef long long j, cell, lo, hi
    cdef double d2, dx

    for i in range(n):
        m0 = _axis_nbrs(coords[i, 0], nc, torus, ax0)
        m1 = _axis_nbrs(coords[i, 1], nc, torus, ax1)
        if d == 3:
            m2 = _axis_nbrs(coords[i, 2], nc, torus, ax2)
        else:
            m2 = 1
            ax2[0] = 0
        for ia in range(m0):
            for ib in range(m1):
                for ic in range(m2):
                    if d == 3:
                        cell = (ax0[ia] * nc + ax1[ib]) * nc + ax2[ic]
                    else:
                        cell = ax0[ia] * nc + ax1[ib]
                    lo = starts[cell]
                    hi = starts[cell + 1]
                    for k in range(lo, hi):
                        j = order[k]
                        if j <= i:
                            continue
                        d2 = 0.0
                        for ax in range(d):
                            dx = fabs(pos[j, ax] - pos[i, ax])
                            if torus and side - dx < dx:
                                dx = side - dx
                            d2 = d2 + dx * dx
                        if d2 <= r2:
                            out_i.push_back(i)
                            out_j.push_back(j)

    cdef Py_ssize_t ne = out_i.size()
    ei = np.empty(ne, dtype=np.int64)
    ej = np.empty(ne, dtype=np.int64)
    cdef long long[::1] ei_v = ei
    cdef long long[::1] ej_v = ej
    for k in range(ne):
        ei_v[k] = out_i[k]
        ej_v[k] = out_j[k]
    return (ei, ej)


def union_components(Py_ssize_t n, ei, ej):
    """Component labels via union-find; label = smallest vertex id in component."""
    cdef long long[::1] a = np.ascontiguousarray(ei, dtype=np.int64)
    cdef long long[::1] b = np.ascontiguousarray(ej, dtype=np.int64)
    parent_arr = np.arange(n, dtype=np.int64)
    size_arr = np.ones(n, dtype=np.int64)
    cdef long long[::1] parent = parent_arr
    cdef long long[::1] size = size_arr
    cdef Py_ssize_t k
    cdef long long x, root, ra, rb, t, v

    labels = np.empty(n, dtype=np.int64)
    cdef long long[::1] lab = labels
    comp_min_arr = np.full(n, -1, dtype=np.int64)
    cdef long long[::1] comp_min = comp_min_arr

    for k in range(a.shape[0]):
        # find with path compression, both endpoints
        root = a[k]
        while parent[root] != root:
            root = parent[root]
        x = a[k]
        while parent[x] != root:
            t = parent[x]
            parent[x] = root
            x = t
        ra = root
        root = b[k]
        while parent[root] != root:
            root = parent[root]
        x = b[k]
        while parent[x] != root:
            t = parent[x]
            parent[x] = root
            x = t
        rb = root
        if ra == rb:
            continue
        if size[ra] < size[rb]:
            t = ra; ra = rb; rb = t
        parent[rb] = ra
        size[ra] += size[rb]

    for v in range(n):
        root = v
        while parent[root] != root:
            root = parent[root]
        x = v
        while parent[x] != root:
            t = parent[x]
            parent[x] = root
            x = t
        if comp_min[root] < 0:
            comp_min[root] = v
        lab[v] = comp_min[root]
    return labels


def heat_bath_chunk(double[::1] sigma, long long[::1] indptr, long long[::1] indices,
                    double[::1] weights, double[::1] ext, double s, double beta,
                    double[:, ::1] u):
    """Systematic heat-bath sweeps for two-state spins; mutates sigma."""
    cdef Py_ssize_t nsweeps = u.shape[0]
    cdef Py_ssize_t n = u.shape[1]
    cdef Py_ssize_t t, x
    cdef long long k
    cdef double h, z, p
    for t in range(nsweeps):
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
                p = 1.0 / (1.0 + exp(z))
            sigma[x] = 1.0 if u[t, x] < p else -1.0


def metropolis_chunk(double[::1] sigma, long long[::1] indptr, long long[::1] indices,
                     double[::1] weights, double[::1] ext, double s, double beta,
                     double width, int kind, double p0, double p1,
                     double[:, :, ::1] u):
    """Systematic random-walk Metropolis sweeps; returns accepted count."""
    cdef Py_ssize_t nsweeps = u.shape[0]
    cdef Py_ssize_t n = u.shape[1]
    cdef Py_ssize_t t, x
    cdef long long k
    cdef long long accepted = 0
    cdef double h, cur, prop, logr, vc, vp
    for t in range(nsweeps):
        for x in range(n):
            h = ext[x] * s
            for k in range(indptr[x], indptr[x + 1]):
                h += weights[k] * sigma[indices[k]]
            cur = sigma[x]
            prop = cur + width * (2.0 * u[t, x, 0] - 1.0)
            if kind == 1:
                if prop > p0 or prop < -p0:
                    continue
                logr = beta * h * (prop - cur)
            else:
                vc = p0 * ((cur * cur) * (cur * cur)) + p1 * (cur * cur)
                vp = p0 * ((prop * prop) * (prop * prop)) + p1 * (prop * prop)
                logr = beta * h * (prop - cur) + (vc - vp)
            if logr >= 0.0 or u[t, x, 1] < exp(logr):
                sigma[x] = prop
                accepted += 1
    return int(accepted)
