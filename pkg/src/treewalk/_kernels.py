"""numba kernels for the hot simulation paths.

Everything here is deterministic given its inputs: random kernels consume an
explicit xoshiro256++ state or a pre-drawn normal buffer, never hidden global
RNG state.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_U64_1 = np.uint64(1)
_DINV = 1.0 / 9007199254740992.0  # 2^-53


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True, inline="always")
def _xo_next(s):
    """xoshiro256++ step; mutates the length-4 uint64 state ``s``."""
    result = _rotl(s[0] + s[3], 23) + s[0]
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@njit(cache=True, inline="always")
def _xo_double(s):
    return float(_xo_next(s) >> np.uint64(11)) * _DINV


@njit(cache=True, inline="always")
def _alias_draw(s, accept, alias):
    m = accept.shape[0]
    i = int(_xo_double(s) * m)
    if _xo_double(s) < accept[i]:
        return i
    return alias[i]


# ---------------------------------------------------------------- plane trees


@njit(cache=True)
def parent_height_from_counts(counts):
    """Parent and height arrays for a DFS child-count (Lukasiewicz) sequence."""
    n = counts.shape[0]
    parent = np.empty(n, np.int64)
    height = np.empty(n, np.int64)
    stack_v = np.empty(n + 1, np.int64)
    stack_r = np.empty(n + 1, np.int64)
    parent[0] = -1
    height[0] = 0
    top = -1
    if counts[0] > 0:
        top = 0
        stack_v[0] = 0
        stack_r[0] = counts[0]
    for i in range(1, n):
        v = stack_v[top]
        parent[i] = v
        height[i] = height[v] + 1
        stack_r[top] -= 1
        if stack_r[top] == 0:
            top -= 1
        if counts[i] > 0:
            top += 1
            stack_v[top] = i
            stack_r[top] = counts[i]
    return parent, height


@njit(cache=True)
def accumulate_locations(parent, increments, out):
    """out[v] = out[parent[v]] + increments[v-1]; parent[v] < v is required."""
    n = parent.shape[0]
    d = out.shape[1]
    for j in range(d):
        out[0, j] = 0
    for v in range(1, n):
        p = parent[v]
        for j in range(d):
            out[v, j] = out[p, j] + increments[v - 1, j]


@njit(cache=True)
def pair_distance_counts(offsets, neighbors, k_max):
    """Ordered-pair counts by graph distance k = 0..k_max via per-source BFS."""
    n = offsets.shape[0] - 1
    counts = np.zeros(k_max + 1, np.int64)
    dist = np.full(n, -1, np.int64)
    stamp = np.full(n, -1, np.int64)
    queue = np.empty(n, np.int64)
    for src in range(n):
        head = 0
        tail = 0
        queue[tail] = src
        tail += 1
        stamp[src] = src
        dist[src] = 0
        counts[0] += 1
        while head < tail:
            v = queue[head]
            head += 1
            dv = dist[v]
            if dv == k_max:
                continue
            for e in range(offsets[v], offsets[v + 1]):
                w = neighbors[e]
                if stamp[w] != src:
                    stamp[w] = src
                    dist[w] = dv + 1
                    counts[dv + 1] += 1
                    queue[tail] = w
                    tail += 1
    return counts


# ------------------------------------------------- unconditioned spatial DFS


@njit(cache=True)
def _dfs_spatial_hit(state, mu_accept, mu_alias, th_accept, th_alias, th_pts,
                     target, cap, child_buf):
    """DFS-generate one spatial tree; stop on visiting ``target`` or cap.

    Returns (hit, capped): capped means the tree has more than ``cap``
    vertices and target was not seen among the generated ones.
    """
    d = th_pts.shape[1]
    size = 256
    stack = np.empty((size, d), np.int64)
    for j in range(d):
        stack[0, j] = 0
    top = 1
    created = 1
    while top > 0:
        top -= 1
        match = True
        for j in range(d):
            if stack[top, j] != target[j]:
                match = False
                break
        if match:
            return True, False
        c = _alias_draw(state, mu_accept, mu_alias)
        if c > 0:
            created += c
            if created > cap:
                return False, True
            if top + c > size:
                new_size = size * 2
                while top + c > new_size:
                    new_size *= 2
                new_stack = np.empty((new_size, d), np.int64)
                new_stack[:top] = stack[:top]
                stack = new_stack
                size = new_size
            # sample child displacements in sibling order, push reversed so
            # pops follow lexicographic DFS order
            for k in range(c):
                jidx = _alias_draw(state, th_accept, th_alias)
                for j in range(d):
                    child_buf[k, j] = stack[top, j] + th_pts[jidx, j]
            for k in range(c - 1, -1, -1):
                for j in range(d):
                    stack[top, j] = child_buf[k, j]
                top += 1
    return False, False


@njit(cache=True)
def dfs_hit_chunk(states, mu_accept, mu_alias, th_accept, th_alias, th_pts,
                  target, cap, trees_per_trial, max_children):
    """Run one hit-test trial per state row; each trial uses its own stream.

    A trial is a hit when any of its ``trees_per_trial`` independent trees
    visits ``target`` before the per-tree cap.
    """
    n = states.shape[0]
    hit = np.zeros(n, np.uint8)
    capped = np.zeros(n, np.uint8)
    d = th_pts.shape[1]
    child_buf = np.empty((max_children, d), np.int64)
    for i in range(n):
        state = states[i]
        any_capped = False
        for _ in range(trees_per_trial):
            h, cpd = _dfs_spatial_hit(state, mu_accept, mu_alias, th_accept,
                                      th_alias, th_pts, target, cap, child_buf)
            if cpd:
                any_capped = True
            if h:
                hit[i] = 1
                break
        if hit[i] == 0 and any_capped:
            capped[i] = 1
    return hit, capped


@njit(cache=True)
def dfs_spatial_collect(state, mu_accept, mu_alias, th_accept, th_alias,
                        th_pts, cap, coord_bound, pack_shift, child_buf):
    """DFS-generate one spatial tree collecting packed visited coordinates.

    Returns (keys, n_keys, capped, overflow).  ``overflow`` flags a walk that
    left the packable coordinate box; such trials must be discarded upstream.
    """
    d = th_pts.shape[1]
    size = 256
    stack = np.empty((size, d), np.int64)
    for j in range(d):
        stack[0, j] = 0
    top = 1
    created = 1
    buf_size = 1024
    keys = np.empty(buf_size, np.int64)
    n_keys = 0
    capped = False
    while top > 0:
        top -= 1
        key = np.int64(0)
        for j in range(d):
            x = stack[top, j]
            if x > coord_bound or x < -coord_bound:
                return keys, n_keys, capped, True
            key = (key << pack_shift) | (x + coord_bound)
        if n_keys == buf_size:
            buf_size *= 2
            new_keys = np.empty(buf_size, np.int64)
            new_keys[:n_keys] = keys[:n_keys]
            keys = new_keys
        keys[n_keys] = key
        n_keys += 1
        c = _alias_draw(state, mu_accept, mu_alias)
        if c > 0:
            created += c
            if created > cap:
                capped = True
                continue  # do not expand further below this vertex
            if top + c > size:
                new_size = size * 2
                while top + c > new_size:
                    new_size *= 2
                new_stack = np.empty((new_size, d), np.int64)
                new_stack[:top] = stack[:top]
                stack = new_stack
                size = new_size
            for k in range(c):
                jidx = _alias_draw(state, th_accept, th_alias)
                for j in range(d):
                    child_buf[k, j] = stack[top, j] + th_pts[jidx, j]
            for k in range(c - 1, -1, -1):
                for j in range(d):
                    stack[top, j] = child_buf[k, j]
                top += 1
    return keys, n_keys, capped, False


# -------------------------------------------------------------------- snake


@njit(cache=True)
def snake_evolve(e, normals, heads):
    """Evolve the snake head along a grid excursion.

    ``e`` has m+1 lifetime values with e[0] = e[m] = 0.  Between grid times
    the path is truncated to the endpoint minimum and regrown with Gaussian
    increments; cuts through stored segments draw a Brownian-bridge value so
    that, given ``e``, Cov(head_i, head_j) = min(e[i..j]) per coordinate.
    ``normals`` must hold at least 2m rows of iid standard normals.
    Returns the number of normal rows consumed.
    """
    m = e.shape[0] - 1
    d = heads.shape[1]
    sh = np.empty(2 * m + 4, np.float64)
    sp = np.empty((2 * m + 4, d), np.float64)
    cut = np.empty(d, np.float64)
    up = np.empty(d, np.float64)
    sh[0] = 0.0
    for j in range(d):
        sp[0, j] = 0.0
        heads[0, j] = 0.0
    top = 0
    nk = 0
    for i in range(m):
        e_next = e[i + 1]
        mi = min(e[i], e_next)
        if sh[top] <= mi:
            h_base = sh[top]
            for j in range(d):
                cut[j] = sp[top, j]
        else:
            h_up = sh[top]
            for j in range(d):
                up[j] = sp[top, j]
            top -= 1
            while sh[top] > mi:
                h_up = sh[top]
                for j in range(d):
                    up[j] = sp[top, j]
                top -= 1
            h_low = sh[top]
            if h_up > h_low:
                frac = (mi - h_low) / (h_up - h_low)
                var = (mi - h_low) * (h_up - mi) / (h_up - h_low)
                sd = np.sqrt(var) if var > 0.0 else 0.0
                for j in range(d):
                    cut[j] = sp[top, j] + frac * (up[j] - sp[top, j]) \
                        + sd * normals[nk, j]
                nk += 1
            else:
                for j in range(d):
                    cut[j] = sp[top, j]
            if mi > sh[top]:
                top += 1
                sh[top] = mi
                for j in range(d):
                    sp[top, j] = cut[j]
            h_base = mi
        sd = np.sqrt(e_next - h_base) if e_next > h_base else 0.0
        top += 1
        sh[top] = e_next
        for j in range(d):
            sp[top, j] = cut[j] + sd * normals[nk, j]
            heads[i + 1, j] = sp[top, j]
        nk += 1
    return nk
