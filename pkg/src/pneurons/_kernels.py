"""Compiled inner loops. Pure array-in/array-out; no validation here."""
import math

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def lfsr_leap_fill(state, tables, n):
    nbytes = tables.shape[0]
    out = np.empty(n, np.int64)
    for i in range(n):
        s = 0
        for b in range(nbytes):
            s ^= tables[b, (state >> (8 * b)) & 0xFF]
        state = s
        out[i] = s
    return out


@numba.njit(cache=True, inline="always")
def _llg_rhs(mx, my, mz, hx, hy, hz, gp, alpha):
    cx = my * hz - mz * hy
    cy = mz * hx - mx * hz
    cz = mx * hy - my * hx
    dx = my * cz - mz * cy
    dy = mz * cx - mx * cz
    dz = mx * cy - my * cx
    return -gp * (cx + alpha * dx), -gp * (cy + alpha * dy), -gp * (cz + alpha * dz)


@numba.njit(cache=True, nogil=True)
def heun_run(m0, noise, gp, alpha, hext, sigma, dt, record_every):
    """Integrate ``noise.shape[0]`` steps; record m after every ``record_every``-th."""
    steps = noise.shape[0]
    out = np.empty((steps // record_every, 3))
    mx, my, mz = m0[0], m0[1], m0[2]
    k = 0
    for i in range(steps):
        hx = hext[0] + sigma * noise[i, 0]
        hy = hext[1] + sigma * noise[i, 1]
        hz = hext[2] + sigma * noise[i, 2]
        f1x, f1y, f1z = _llg_rhs(mx, my, mz, hx, hy, hz, gp, alpha)
        px = mx + dt * f1x
        py = my + dt * f1y
        pz = mz + dt * f1z
        f2x, f2y, f2z = _llg_rhs(px, py, pz, hx, hy, hz, gp, alpha)
        ix = 0.5 * dt * (f1x + f2x)
        iy = 0.5 * dt * (f1y + f2y)
        iz = 0.5 * dt * (f1z + f2z)
        if ix != 0.0 or iy != 0.0 or iz != 0.0:
            mx += ix
            my += iy
            mz += iz
            norm = math.sqrt(mx * mx + my * my + mz * mz)
            mx /= norm
            my /= norm
            mz /= norm
        if (i + 1) % record_every == 0:
            out[k, 0] = mx
            out[k, 1] = my
            out[k, 2] = mz
            k += 1
    final = np.empty(3)
    final[0] = mx
    final[1] = my
    final[2] = mz
    return out, final


@numba.njit(cache=True, nogil=True)
def slew_run(targets, v0, max_step):
    out = np.empty(targets.shape[0])
    v = v0
    for i in range(targets.shape[0]):
        d = targets[i] - v
        if d > max_step:
            d = max_step
        elif d < -max_step:
            d = -max_step
        v += d
        out[i] = v
    return out


@numba.njit(cache=True, nogil=True)
def gibbs_comparator(J, h, i0, orders, state, draws, mid, scale, wmax, counts, record_from):
    """Comparator-driven sequential updates; ``draws[s, k]`` feeds update k of sweep s."""
    n = state.shape[0]
    for s in range(orders.shape[0]):
        for k in range(orders.shape[1]):
            i = orders[s, k]
            field = h[i]
            for j in range(n):
                field += J[i, j] * state[j]
            w = mid + np.rint(i0 * field * scale)
            if w < 0.0:
                w = 0.0
            elif w > wmax:
                w = wmax
            state[i] = 1 if w > draws[s, k] else -1
        if s >= record_from:
            idx = 0
            for j in range(n):
                idx = 2 * idx + (1 if state[j] > 0 else 0)
            counts[idx] += 1


@numba.njit(cache=True, nogil=True)
def gibbs_logistic(J, h, i0, orders, state, uniforms, counts, record_from):
    """Exact-logistic sequential updates: fire with probability sigma(2 I)."""
    n = state.shape[0]
    for s in range(orders.shape[0]):
        for k in range(orders.shape[1]):
            i = orders[s, k]
            field = h[i]
            for j in range(n):
                field += J[i, j] * state[j]
            p = 1.0 / (1.0 + math.exp(-2.0 * i0 * field))
            state[i] = 1 if uniforms[s, k] < p else -1
        if s >= record_from:
            idx = 0
            for j in range(n):
                idx = 2 * idx + (1 if state[j] > 0 else 0)
            counts[idx] += 1
