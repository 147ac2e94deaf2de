"""Compiled Euler-Maruyama row kernels.

Each kernel advances rows [i0, i1) of the state by one step, drawing the
pairwise Brownian increments on the fly from the keyed Philox stream (no
n^2-sized buffer is ever materialized).  Row updates only read the previous
state, so disjoint row ranges can be computed concurrently and the result is
independent of the schedule.
"""

import numpy as np
from numba import njit

from .noise import _fill_normals


@njit(cache=True, nogil=True)
def step_rows_maxwell_projection(x, out, i0, i1, dt, key0, key1, step):
    n, d = x.shape
    root_dt_over_n = np.sqrt(dt) / np.sqrt(n)
    dt_over_n = dt / n
    coef = d - 1.0
    v = np.empty(d)
    z = np.empty(d)
    diff = np.empty(d)
    dr = np.empty(d)
    for i in range(i0, i1):
        for j in range(d):
            diff[j] = 0.0
            dr[j] = 0.0
        for k in range(n):
            nv2 = 0.0
            for j in range(d):
                v[j] = x[i, j] - x[k, j]
                nv2 += v[j] * v[j]
            _fill_normals(z, step, i, k, key0, key1)
            if nv2 > 0.0:
                nv = np.sqrt(nv2)
                dot = 0.0
                for j in range(d):
                    dot += v[j] * z[j]
                dot /= nv2
                for j in range(d):
                    diff[j] += nv * (z[j] - v[j] * dot)
            for j in range(d):
                dr[j] -= coef * v[j]
        for j in range(d):
            out[i, j] = x[i, j] + root_dt_over_n * diff[j] + dt_over_n * dr[j]


@njit(cache=True, nogil=True)
def step_rows_maxwell_cross3(x, out, i0, i1, dt, key0, key1, step):
    n = x.shape[0]
    root_dt_over_n = np.sqrt(dt) / np.sqrt(n)
    dt_over_n = dt / n
    z = np.empty(3)
    for i in range(i0, i1):
        d0 = 0.0
        d1 = 0.0
        d2 = 0.0
        r0 = 0.0
        r1 = 0.0
        r2 = 0.0
        xi0 = x[i, 0]
        xi1 = x[i, 1]
        xi2 = x[i, 2]
        for k in range(n):
            v0 = xi0 - x[k, 0]
            v1 = xi1 - x[k, 1]
            v2 = xi2 - x[k, 2]
            _fill_normals(z, step, i, k, key0, key1)
            # sigma(v) h = v x h
            d0 += v1 * z[2] - v2 * z[1]
            d1 += v2 * z[0] - v0 * z[2]
            d2 += v0 * z[1] - v1 * z[0]
            r0 -= 2.0 * v0
            r1 -= 2.0 * v1
            r2 -= 2.0 * v2
        out[i, 0] = xi0 + root_dt_over_n * d0 + dt_over_n * r0
        out[i, 1] = xi1 + root_dt_over_n * d1 + dt_over_n * r1
        out[i, 2] = xi2 + root_dt_over_n * d2 + dt_over_n * r2


@njit(cache=True, nogil=True)
def step_rows_isotropic_ou(x, out, i0, i1, dt, key0, key1, step):
    n, d = x.shape
    root_dt_over_n = np.sqrt(dt) / np.sqrt(n)
    dt_over_n = dt / n
    z = np.empty(d)
    diff = np.empty(d)
    dr = np.empty(d)
    for i in range(i0, i1):
        for j in range(d):
            diff[j] = 0.0
            dr[j] = 0.0
        for k in range(n):
            _fill_normals(z, step, i, k, key0, key1)
            for j in range(d):
                diff[j] += z[j]
                dr[j] -= x[i, j] - x[k, j]
        for j in range(d):
            out[i, j] = x[i, j] + root_dt_over_n * diff[j] + dt_over_n * dr[j]


KERNELS = {
    "maxwell_projection": step_rows_maxwell_projection,
    "maxwell_cross3": step_rows_maxwell_cross3,
    "isotropic_ou": step_rows_isotropic_ou,
}
