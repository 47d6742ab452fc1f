"""Compiled per-sample loops shared by the estimators."""
from __future__ import annotations

import numba as nb
import numpy as np

from .clusters import uf_find, uf_union
from .field import edge_hash, sample_key, uniform
from .lattice import H_EDGE, zd_edge_class

NEVER = 2.0
ALWAYS = -1.0


@nb.njit(cache=True, nogil=True)
def local_cluster_stats(center, radius, s, axis_rule, thr, seed, start, stop):
    """Explore C(center) inside B_radius(center) of Z^d for each sample.

    Returns, per sample, the largest sup-distance reached, the number of
    vertices of the outer shell reached, and the cluster size in the box.
    """
    d = center.shape[0]
    side = 2 * radius + 1
    stride = np.ones(d, dtype=np.int64)
    for a in range(d - 2, -1, -1):
        stride[a] = stride[a + 1] * side
    nbox = stride[0] * side
    visited = np.zeros(nbox, dtype=np.int64)
    queue = np.empty(nbox, dtype=np.int64)
    rel = np.empty(d, dtype=np.int64)
    low = np.empty(d, dtype=np.int64)
    ns = stop - start
    maxr = np.zeros(ns, dtype=np.int64)
    hits = np.zeros(ns, dtype=np.int64)
    size = np.zeros(ns, dtype=np.int64)
    origin = 0
    for a in range(d):
        origin += radius * stride[a]
    for j in range(ns):
        skey = sample_key(seed, start + j)
        stamp = j + 1
        visited[origin] = stamp
        queue[0] = origin
        head = 0
        tail = 1
        mr = 0
        bh = 0
        while head < tail:
            li = queue[head]
            head += 1
            rem = li
            dist = 0
            for a in range(d):
                rel[a] = rem // stride[a]
                rem -= rel[a] * stride[a]
                da = abs(rel[a] - radius)
                if da > dist:
                    dist = da
            if dist > mr:
                mr = dist
            if dist == radius:
                bh += 1
            for a in range(d):
                for sg in (-1, 1):
                    nr = rel[a] + sg
                    if nr < 0 or nr >= side:
                        continue
                    li2 = li + sg * stride[a]
                    if visited[li2] == stamp:
                        continue
                    for b in range(d):
                        low[b] = center[b] + rel[b] - radius
                    if sg < 0:
                        low[a] -= 1
                    u = uniform(edge_hash(low, a), skey)
                    if u < thr[zd_edge_class(low, a, s, axis_rule)]:
                        visited[li2] = stamp
                        queue[tail] = li2
                        tail += 1
        maxr[j] = mr
        hits[j] = bh
        size[j] = tail
    return maxr, hits, size


@nb.njit(cache=True, nogil=True)
def crossing_thresholds(n, eu, ev, ekeys, eclass, face_bits, thr, axes, seed, start, stop):
    """Per sample and axis, the smallest q at which the window is crossed.

    Non-H edges are fixed by ``thr``; H-edges are then added in increasing
    order of U(e) (a Newman-Ziff sweep).  Crossing at q holds iff the returned
    value is < q; NEVER marks samples that do not cross even at q = 1 and
    ALWAYS those crossed by non-H edges alone (crossed at every q, q = 0 included).
    """
    ns = stop - start
    na = axes.shape[0]
    out = np.full((ns, na), NEVER)
    m = eu.shape[0]
    nh = 0
    for e in range(m):
        if eclass[e] == H_EDGE:
            nh += 1
    hidx = np.empty(nh, dtype=np.int64)
    k = 0
    for e in range(m):
        if eclass[e] == H_EDGE:
            hidx[k] = e
            k += 1
    uh = np.empty(nh)
    parent = np.empty(n, dtype=np.int64)
    size = np.empty(n, dtype=np.int64)
    flags = np.empty(n, dtype=np.int64)
    want = np.empty(na, dtype=np.int64)
    for a in range(na):
        want[a] = (1 << (2 * axes[a])) | (1 << (2 * axes[a] + 1))
    for j in range(ns):
        skey = sample_key(seed, start + j)
        for x in range(n):
            parent[x] = x
            size[x] = 1
            flags[x] = face_bits[x]
        k = 0
        for e in range(m):
            u = uniform(ekeys[e], skey)
            c = eclass[e]
            if c == H_EDGE:
                uh[k] = u
                k += 1
            elif u < thr[c]:
                uf_union(parent, size, flags, eu[e], ev[e])
        left = na
        for a in range(na):
            for x in range(n):
                if parent[x] == x and (flags[x] & want[a]) == want[a]:
                    out[j, a] = ALWAYS
                    left -= 1
                    break
        if left == 0:
            continue
        order = np.argsort(uh)
        for k in range(nh):
            e = hidx[order[k]]
            r = uf_union(parent, size, flags, eu[e], ev[e])
            for a in range(na):
                if out[j, a] == NEVER and (flags[r] & want[a]) == want[a]:
                    out[j, a] = uh[order[k]]
                    left -= 1
            if left == 0:
                break
    return out


@nb.njit(cache=True, nogil=True)
def crossing_indicator(n, eu, ev, ekeys, eclass, face_bits, thr, axis, seed, start, stop):
    ns = stop - start
    out = np.zeros(ns)
    parent = np.empty(n, dtype=np.int64)
    size = np.empty(n, dtype=np.int64)
    flags = np.empty(n, dtype=np.int64)
    want = (1 << (2 * axis)) | (1 << (2 * axis + 1))
    for j in range(ns):
        skey = sample_key(seed, start + j)
        for x in range(n):
            parent[x] = x
            size[x] = 1
            flags[x] = face_bits[x]
        for e in range(eu.shape[0]):
            if uniform(ekeys[e], skey) < thr[eclass[e]]:
                r = uf_union(parent, size, flags, eu[e], ev[e])
                if (flags[r] & want) == want:
                    out[j] = 1.0
                    break
    return out


@nb.njit(cache=True, nogil=True)
def open_masks(ekeys, eclass, thr, seed, start, stop):
    out = np.empty((stop - start, ekeys.shape[0]), dtype=np.bool_)
    for j in range(stop - start):
        skey = sample_key(seed, start + j)
        for e in range(ekeys.shape[0]):
            out[j, e] = uniform(ekeys[e], skey) < thr[eclass[e]]
    return out


@nb.njit(cache=True, nogil=True)
def spanning_sizes(n, eu, ev, ekeys, eclass, face_bits, thr, axis, min_size, seed, start, stop):
    """Per sample, the number of components spanning ``axis`` with size >= min_size."""
    ns = stop - start
    out = np.zeros(ns, dtype=np.int64)
    parent = np.empty(n, dtype=np.int64)
    size = np.empty(n, dtype=np.int64)
    flags = np.empty(n, dtype=np.int64)
    want = (1 << (2 * axis)) | (1 << (2 * axis + 1))
    for j in range(ns):
        skey = sample_key(seed, start + j)
        for x in range(n):
            parent[x] = x
            size[x] = 1
            flags[x] = face_bits[x]
        for e in range(eu.shape[0]):
            if uniform(ekeys[e], skey) < thr[eclass[e]]:
                uf_union(parent, size, flags, eu[e], ev[e])
        c = 0
        for x in range(n):
            if parent[x] == x and (flags[x] & want) == want and size[x] >= min_size:
                c += 1
        out[j] = c
    return out
