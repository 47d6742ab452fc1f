"""Connected components of a configuration and the observables built on them."""
from __future__ import annotations

from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .field import ParamPoint, UniformField, open_mask
from .lattice import FREE, LatticeSpec, Region, edges_within


@nb.njit(inline="always")
def uf_find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@nb.njit(inline="always")
def uf_union(parent, size, flags, a, b):
    ra = uf_find(parent, a)
    rb = uf_find(parent, b)
    if ra == rb:
        return ra
    if size[ra] < size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]
    flags[ra] |= flags[rb]
    return ra


@nb.njit(cache=True, nogil=True)
def label_components(n, eu, ev, use, flags0):
    """Union-find over the edges with ``use`` set; returns compressed roots."""
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    flags = flags0.copy()
    for i in range(eu.shape[0]):
        if use[i]:
            uf_union(parent, size, flags, eu[i], ev[i])
    for x in range(n):
        parent[x] = uf_find(parent, x)
    return parent, size, flags


@dataclass
class ClusterForest:
    """Component structure of the open subgraph inside a region.

    ``root[v]`` is the representative of v; ``size`` and ``flags`` are valid at
    roots.  Flag bits 0..2d-1 record contact with the region's faces and bit
    2d records contact with H.  Vertices outside the region are singletons and
    are not counted.
    """

    spec: LatticeSpec
    region: Region
    root: np.ndarray
    size: np.ndarray
    flags: np.ndarray
    used_edges: np.ndarray = field(repr=False)

    @property
    def h_bit(self) -> int:
        return 1 << (2 * self.spec.d)

    @property
    def face_mask(self) -> int:
        return self.h_bit - 1

    def find(self, v: int) -> int:
        return int(self.root[v])

    @property
    def component_roots(self) -> np.ndarray:
        vs = self.region.vertices
        return np.unique(self.root[vs])

    @property
    def n_components(self) -> int:
        return int(self.component_roots.shape[0])

    def cluster_of(self, v: int) -> np.ndarray:
        vs = self.region.vertices
        return vs[self.root[vs] == self.root[v]]

    def touches_boundary(self, v: int) -> bool:
        return bool(self.flags[self.root[v]] & self.face_mask)

    def touches_H(self, v: int) -> bool:
        return bool(self.flags[self.root[v]] & self.h_bit)

    def connected(self, a: int, b: int) -> bool:
        return self.root[a] == self.root[b]


def _edge_filter_mask(spec: LatticeSpec, edge_filter) -> np.ndarray:
    if edge_filter is None:
        return np.ones(spec.n_edges, dtype=bool)
    arr = np.asarray(edge_filter)
    if arr.dtype == bool and arr.shape == (spec.n_edges,):
        return arr
    classes = np.asarray(list(edge_filter), dtype=np.int8)
    return np.isin(spec.edge_classes, classes)


def forest_from_open(spec: LatticeSpec, is_open: np.ndarray, region: Region | None = None,
                     edge_filter=None) -> ClusterForest:
    """Clusters of a given open-edge mask inside ``region`` using unmasked edges only."""
    region = Region.whole(spec) if region is None else region
    use = is_open & edges_within(spec, region.mask) & _edge_filter_mask(spec, edge_filter)
    flags0 = region.face_bits.copy()
    flags0 |= spec.vertex_in_H.astype(np.int64) << (2 * spec.d)
    flags0[~region.mask] = 0
    root, size, flags = label_components(spec.n_vertices, spec.edge_u, spec.edge_v, use, flags0)
    return ClusterForest(spec, region, root, size, flags, use)


def build_clusters(field: UniformField, spec: LatticeSpec, params: ParamPoint,
                   region: Region | None = None, edge_filter=None) -> ClusterForest:
    return forest_from_open(spec, open_mask(field, spec, params), region, edge_filter)


def connected_to_set(forest: ClusterForest, source_set, target_set) -> np.ndarray:
    """C(S'; S): members of S' sharing a component with some vertex of S."""
    src = np.asarray(source_set, dtype=np.int64)
    tgt = np.asarray(target_set, dtype=np.int64)
    if src.size == 0 or tgt.size == 0:
        return np.empty(0, dtype=np.int64)
    hit = np.isin(forest.root[src], forest.root[tgt])
    return np.unique(src[hit])


def count_spanning_clusters(forest: ClusterForest, axis: int, min_size: int = 1) -> int:
    """Components touching both opposite faces of the region along ``axis``."""
    if forest.spec.bc[axis] != FREE:
        raise ValueError(f"axis {axis} is periodic; spanning is undefined")
    both = (1 << (2 * axis)) | (1 << (2 * axis + 1))
    roots = forest.component_roots
    span = (forest.flags[roots] & both) == both
    return int(np.count_nonzero(span & (forest.size[roots] >= min_size)))


# trifurcations ----------------------------------------------------------------

@nb.njit(cache=True, nogil=True)
def _csr(n, eu, ev, use):
    deg = np.zeros(n + 1, dtype=np.int64)
    for i in range(eu.shape[0]):
        if use[i]:
            deg[eu[i] + 1] += 1
            deg[ev[i] + 1] += 1
    for i in range(n):
        deg[i + 1] += deg[i]
    nbr = np.empty(deg[n], dtype=np.int64)
    fill = deg[:-1].copy()
    for i in range(eu.shape[0]):
        if use[i]:
            nbr[fill[eu[i]]] = ev[i]
            fill[eu[i]] += 1
            nbr[fill[ev[i]]] = eu[i]
            fill[ev[i]] += 1
    return deg, nbr


@nb.njit(cache=True, nogil=True)
def branching_arms(n, eu, ev, use, on_boundary):
    """Per vertex, the number of pieces of C(u) minus u that touch the boundary.

    One iterative depth-first search per component (Tarjan low-links).  A
    child subtree with low >= disc(u) becomes its own piece when u is removed;
    the parent side together with the non-separated children forms one more
    piece whenever u is not the DFS root.
    """
    indptr, nbr = _csr(n, eu, ev, use)
    disc = np.full(n, -1, dtype=np.int64)
    low = np.zeros(n, dtype=np.int64)
    sub_b = np.zeros(n, dtype=np.int64)
    sep_b = np.zeros(n, dtype=np.int64)
    arms = np.zeros(n, dtype=np.int64)
    parent = np.full(n, -1, dtype=np.int64)
    comp = np.zeros(n, dtype=np.int64)
    it = np.zeros(n, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    t = 0
    for r in range(n):
        if disc[r] >= 0:
            continue
        sp = 0
        stack[0] = r
        disc[r] = t
        low[r] = t
        t += 1
        it[r] = indptr[r]
        comp[r] = r
        sub_b[r] = 1 if on_boundary[r] else 0
        while sp >= 0:
            u = stack[sp]
            if it[u] < indptr[u + 1]:
                w = nbr[it[u]]
                it[u] += 1
                if disc[w] < 0:
                    parent[w] = u
                    comp[w] = r
                    disc[w] = t
                    low[w] = t
                    t += 1
                    it[w] = indptr[w]
                    sub_b[w] = 1 if on_boundary[w] else 0
                    sp += 1
                    stack[sp] = w
                elif w != parent[u] and disc[w] < low[u]:
                    low[u] = disc[w]
            else:
                sp -= 1
                pu = parent[u]
                if pu >= 0:
                    if low[u] < low[pu]:
                        low[pu] = low[u]
                    sub_b[pu] += sub_b[u]
                    if low[u] >= disc[pu]:
                        if sub_b[u] > 0:
                            arms[pu] += 1
                        sep_b[pu] += sub_b[u]
    for v in range(n):
        if parent[v] >= 0:
            rest = sub_b[comp[v]] - sep_b[v] - (1 if on_boundary[v] else 0)
            if rest > 0:
                arms[v] += 1
    return arms, indptr


@dataclass
class TrifurcationReport:
    vertices: np.ndarray
    arms: np.ndarray
    shell_size: int

    @property
    def count(self) -> int:
        return int(self.vertices.shape[0])


def trifurcations_from_open(spec: LatticeSpec, is_open: np.ndarray,
                            region: Region | None = None) -> TrifurcationReport:
    region = Region.whole(spec) if region is None else region
    use = is_open & edges_within(spec, region.mask)
    on_b = region.face_bits != 0
    arms, indptr = branching_arms(spec.n_vertices, spec.edge_u, spec.edge_v, use, on_b)
    deg = np.diff(indptr)
    hit = np.flatnonzero((arms >= 3) & (deg >= 3) & region.mask)
    n_shell = int(np.count_nonzero(on_b & region.mask))
    if hit.shape[0] > n_shell:
        raise AssertionError("trifurcation count exceeds the boundary size")
    return TrifurcationReport(hit, arms[hit], n_shell)


def find_trifurcations(field: UniformField, spec: LatticeSpec, params: ParamPoint,
                       region: Region | None = None) -> TrifurcationReport:
    if not any(b == FREE for b in spec.bc):
        raise ValueError("region needs a free boundary on at least one axis")
    return trifurcations_from_open(spec, open_mask(field, spec, params), region)


def boundary_to_H_ratio_from_open(spec: LatticeSpec, is_open: np.ndarray, region: Region) -> float:
    forest = forest_from_open(spec, is_open, region)
    shell = region.shell
    h = region.vertices[spec.vertex_in_H[region.vertices]]
    hit = connected_to_set(forest, shell, h)
    return hit.shape[0] / h.shape[0]


def boundary_to_H_ratio(field: UniformField, spec: LatticeSpec, params: ParamPoint,
                        region: Region) -> float:
    """|C(shell of B_n; H)| / |B_n ∩ H| for one sample, connectivity inside B_n."""
    if spec.s >= spec.d:
        raise ValueError("the ratio needs s < d")
    return boundary_to_H_ratio_from_open(spec, open_mask(field, spec, params), region)
