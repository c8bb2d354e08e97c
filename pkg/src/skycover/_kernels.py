"""Compiled inner loops: supercover ray marching and profile-graph A*.

The ray march is the single source of truth for visibility. It walks every
grid cell the 2D projection of a segment passes through (supercover: corner
crossings touch both side cells), excluding the endpoint cells, and reports

  * req_z: the minimum altitude at the far end for the segment to clear
    every crossed cell, exploiting that clearance is monotone in the far
    endpoint's height when the near end is fixed, and
  * clearance: the minimum of (segment height - surface height) over the
    crossed cell boundaries for the actual endpoint heights.

``clearance >= 0`` and ``bz >= req_z`` are algebraically the same test; in
floating point they may differ at exact-graze ties, which callers accept.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

_FAR = 1.0e30


@njit(cache=True, nogil=True)
def march_ray(surface, ax, ay, az, bx, by, bz):
    """March from (ax, ay) to (bx, by); returns (req_z, clearance)."""
    rows, cols = surface.shape
    axc = int(math.floor(ax))
    ayc = int(math.floor(ay))
    bxc = int(math.floor(bx))
    byc = int(math.floor(by))
    req_z = -_FAR
    clearance = _FAR
    if axc == bxc and ayc == byc:
        return req_z, clearance

    dx = bx - ax
    dy = by - ay
    dz = bz - az
    if dx > 0.0:
        step_x = 1
        t_max_x = (math.floor(ax) + 1.0 - ax) / dx
        t_dx = 1.0 / dx
    elif dx < 0.0:
        step_x = -1
        t_max_x = (ax - math.floor(ax)) / -dx
        t_dx = -1.0 / dx
    else:
        step_x = 0
        t_max_x = _FAR
        t_dx = _FAR
    if dy > 0.0:
        step_y = 1
        t_max_y = (math.floor(ay) + 1.0 - ay) / dy
        t_dy = 1.0 / dy
    elif dy < 0.0:
        step_y = -1
        t_max_y = (ay - math.floor(ay)) / -dy
        t_dy = -1.0 / dy
    else:
        step_y = 0
        t_max_y = _FAR
        t_dy = _FAR

    cx, cy = axc, ayc
    t_in = 0.0
    while True:
        at_end = cx == bxc and cy == byc
        # Freeze an axis once aligned with the end cell so float drift in
        # the crossing parameters cannot overshoot the grid walk.
        tmx = t_max_x if cx != bxc else _FAR
        tmy = t_max_y if cy != byc else _FAR
        if at_end:
            t_out = 1.0
        else:
            t_out = tmx if tmx < tmy else tmy
            if t_out > 1.0:
                t_out = 1.0
        if not at_end and not (cx == axc and cy == ayc):
            if 0 <= cx < cols and 0 <= cy < rows:
                h = surface[cy, cx]
                for t in (t_in, t_out):
                    if t > 0.0:
                        r = az + (h - az) / t
                    elif h > az:
                        r = _FAR
                    else:
                        r = -_FAR
                    if r > req_z:
                        req_z = r
                    c = az + t * dz - h
                    if c < clearance:
                        clearance = c
        if at_end:
            break
        corner = tmx < _FAR and tmy < _FAR and abs(tmx - tmy) < 1.0e-12
        if corner:
            # Supercover: the segment passes (numerically) through a cell
            # corner; both side cells are touched at that single point.
            for sx_, sy_ in ((cx + step_x, cy), (cx, cy + step_y)):
                if (sx_ == axc and sy_ == ayc) or (sx_ == bxc and sy_ == byc):
                    continue
                if 0 <= sx_ < cols and 0 <= sy_ < rows:
                    h = surface[sy_, sx_]
                    t = t_out
                    if t > 0.0:
                        r = az + (h - az) / t
                    elif h > az:
                        r = _FAR
                    else:
                        r = -_FAR
                    if r > req_z:
                        req_z = r
                    c = az + t * dz - h
                    if c < clearance:
                        clearance = c
            cx += step_x
            cy += step_y
            t_max_x += t_dx
            t_max_y += t_dy
        elif tmx < tmy:
            cx += step_x
            t_max_x += t_dx
        else:
            cy += step_y
            t_max_y += t_dy
        t_in = t_out
    return req_z, clearance


@njit(cache=True, parallel=True, nogil=True)
def min_clear_altitude_grid(surface, ax, ay, az, x0, y0, nx, ny):
    """req_z from one antenna to every ROI column centre; (nx, ny) float64."""
    out = np.empty((nx, ny), dtype=np.float64)
    for i in prange(nx):
        bx = x0 + i + 0.5
        for j in range(ny):
            rz, _ = march_ray(surface, ax, ay, az, bx, y0 + j + 0.5, 0.0)
            out[i, j] = rz
    return out


# ---------------------------------------------------------------------------
# Profile-graph A*
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _heap_less(hf, hg, ha, hs, i, j):
    if hf[i] != hf[j]:
        return hf[i] < hf[j]
    if hg[i] != hg[j]:
        return hg[i] < hg[j]
    if ha[i] != ha[j]:
        return ha[i] < ha[j]
    return hs[i] < hs[j]


@njit(cache=True, nogil=True)
def _heap_swap(hf, hg, ha, hs, hid, i, j):
    hf[i], hf[j] = hf[j], hf[i]
    hg[i], hg[j] = hg[j], hg[i]
    ha[i], ha[j] = ha[j], ha[i]
    hs[i], hs[j] = hs[j], hs[i]
    hid[i], hid[j] = hid[j], hid[i]


@njit(cache=True, nogil=True)
def _heap_push(hf, hg, ha, hs, hid, size, f, g, a, s, nid):
    hf[size] = f
    hg[size] = g
    ha[size] = a
    hs[size] = s
    hid[size] = nid
    i = size
    while i > 0:
        p = (i - 1) >> 1
        if _heap_less(hf, hg, ha, hs, i, p):
            _heap_swap(hf, hg, ha, hs, hid, i, p)
            i = p
        else:
            break
    return size + 1


@njit(cache=True, nogil=True)
def _heap_pop(hf, hg, ha, hs, hid, size):
    nid = hid[0]
    size -= 1
    if size > 0:
        _heap_swap(hf, hg, ha, hs, hid, 0, size)
        i = 0
        while True:
            l = 2 * i + 1
            r = l + 1
            best = i
            if l < size and _heap_less(hf, hg, ha, hs, l, best):
                best = l
            if r < size and _heap_less(hf, hg, ha, hs, r, best):
                best = r
            if best == i:
                break
            _heap_swap(hf, hg, ha, hs, hid, i, best)
            i = best
    return nid, size


@njit(cache=True, nogil=True)
def astar_search(blocked, sinr, pos, start_ks, goal_k, free_goal,
                 threshold_db, normalization, floor_cost, clamp, h_scale):
    """Forward A* over a (steps x altitudes) profile.

    Moves per node: (+1 step, 0), (0, +-1 alt), (+1 step, +-1 alt). Edge
    cost is move length plus (threshold - arrival SINR) / normalization,
    clamped below at floor_cost when clamp is set. Expanded nodes are
    never reopened. Queue ties break on lower f, then g, then altitude,
    then step.

    start_ks lists the admissible start altitudes at step 0 (one entry for
    an anchored start). With free_goal the search stops at the first
    expanded last-step node at any altitude and the heuristic uses the
    remaining horizontal distance; otherwise the target is (last step,
    goal_k) and the heuristic is the Euclidean profile-plane distance.
    Returns (parent, goal_cost, found, goal_id).
    """
    ns, nz = blocked.shape
    n_nodes = ns * nz
    # -1 collides with no node id; the free-goal test is step-based.
    goal_id = -1 if free_goal else (ns - 1) * nz + goal_k
    goal_pos = pos[ns - 1]

    g = np.full(n_nodes, np.inf)
    closed = np.zeros(n_nodes, np.bool_)
    parent = np.full(n_nodes, -1, np.int64)

    cap = 5 * n_nodes + nz + 16
    hf = np.empty(cap)
    hg = np.empty(cap)
    ha = np.empty(cap, np.int64)
    hs = np.empty(cap, np.int64)
    hid = np.empty(cap, np.int64)
    size = 0

    dxp = goal_pos - pos[0]
    for i in range(start_ks.shape[0]):
        sk = start_ks[i]
        g[sk] = 0.0
        if free_goal:
            hm = dxp
        else:
            dkp = float(goal_k - sk)
            hm = math.sqrt(dxp * dxp + dkp * dkp)
        size = _heap_push(hf, hg, ha, hs, hid, size,
                          h_scale * hm, 0.0, sk, 0, sk)

    while size > 0:
        nid, size = _heap_pop(hf, hg, ha, hs, hid, size)
        if closed[nid]:
            continue
        closed[nid] = True
        s = nid // nz
        k = nid % nz
        if (nid == goal_id) or (free_goal and s == ns - 1):
            return parent, g[nid], True, nid
        gs = g[nid]
        for m in range(5):
            if m == 0:
                ds, dk = 1, 0
            elif m == 1:
                ds, dk = 0, 1
            elif m == 2:
                ds, dk = 0, -1
            elif m == 3:
                ds, dk = 1, 1
            else:
                ds, dk = 1, -1
            s2 = s + ds
            k2 = k + dk
            if s2 >= ns or k2 < 0 or k2 >= nz:
                continue
            if blocked[s2, k2]:
                continue
            vid = s2 * nz + k2
            if closed[vid]:
                continue
            if ds == 1:
                dxm = pos[s2] - pos[s]
                length = dxm if dk == 0 else math.sqrt(dxm * dxm + 1.0)
            else:
                length = 1.0
            cost = length + (threshold_db - sinr[s2, k2]) / normalization
            if clamp and cost < floor_cost:
                cost = floor_cost
            ng = gs + cost
            if ng < g[vid]:
                g[vid] = ng
                parent[vid] = nid
                ddx = goal_pos - pos[s2]
                if free_goal:
                    hm = ddx
                else:
                    ddk = float(goal_k - k2)
                    hm = math.sqrt(ddx * ddx + ddk * ddk)
                size = _heap_push(hf, hg, ha, hs, hid, size,
                                  ng + h_scale * hm, ng, k2, s2, vid)
    return parent, np.inf, False, -1
