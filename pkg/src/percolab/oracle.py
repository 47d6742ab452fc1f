"""Exact computations on tiny instances by enumerating every configuration.

Configuration index c encodes the open edges as bits (bit e set = edge e
open).  Probabilities are accumulated with math.fsum, so every sum is the
correctly rounded value of the exact sum of the double-precision terms.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Sequence

import numba as nb
import numpy as np

from .clusters import _csr, uf_find, uf_union
from .field import ParamPoint, uniforms_batch
from .lattice import H_EDGE, MINUS, PERIODIC, LatticeSpec
from .sampling import EstimateRecord

MAX_EDGES = 24
BK_MAX_EDGES = 14
CHUNK = 1 << 16


@dataclass(frozen=True)
class TinyInstance:
    """Explicit graph with independent edges; edge e is open with probability probs[e]."""

    n_vertices: int
    eu: tuple
    ev: tuple
    probs: tuple
    coords: tuple | None = None
    classes: tuple | None = None

    def __post_init__(self):
        m = len(self.eu)
        if len(self.ev) != m or len(self.probs) != m:
            raise ValueError("eu, ev and probs must have equal length")
        if m > MAX_EDGES:
            raise ValueError(f"{m} edges exceed the enumeration cap of {MAX_EDGES}")
        for a, b in zip(self.eu, self.ev):
            if not (0 <= a < self.n_vertices and 0 <= b < self.n_vertices):
                raise ValueError("edge endpoint out of range")
        for p in self.probs:
            if not (0 <= p <= 1):
                raise ValueError(f"edge probability {p} outside [0, 1]")

    @classmethod
    def from_edges(cls, n_vertices: int, edges: Sequence, probs) -> "TinyInstance":
        edges = list(edges)
        if np.isscalar(probs) or isinstance(probs, Fraction):
            probs = [probs] * len(edges)
        return cls(n_vertices, tuple(int(a) for a, _ in edges), tuple(int(b) for _, b in edges),
                   tuple(probs))

    @classmethod
    def from_spec(cls, spec: LatticeSpec, params: ParamPoint) -> "TinyInstance":
        """Every edge of a lattice window, with its class threshold as probability."""
        if spec.n_edges > MAX_EDGES:
            raise ValueError(f"{spec.n_edges} edges exceed the enumeration cap of {MAX_EDGES}")
        thr = params.thresholds()
        cls_ = spec.edge_classes
        return cls(spec.n_vertices, tuple(int(x) for x in spec.edge_u),
                   tuple(int(x) for x in spec.edge_v), tuple(float(thr[c]) for c in cls_),
                   tuple(tuple(int(v) for v in r) for r in spec.coords),
                   tuple(int(c) for c in cls_))

    @property
    def n_edges(self) -> int:
        return len(self.eu)

    @property
    def n_configs(self) -> int:
        return 1 << self.n_edges

    @cached_property
    def eu_arr(self) -> np.ndarray:
        return np.array(self.eu, dtype=np.int64)

    @cached_property
    def ev_arr(self) -> np.ndarray:
        return np.array(self.ev, dtype=np.int64)

    @cached_property
    def p_arr(self) -> np.ndarray:
        return np.array([float(p) for p in self.probs])

    def masks(self, start: int, stop: int) -> np.ndarray:
        """Open-edge matrix of configurations start..stop-1."""
        c = np.arange(start, stop, dtype=np.int64)
        bits = np.arange(self.n_edges, dtype=np.int64)
        return ((c[:, None] >> bits[None, :]) & 1).astype(bool)

    def weights(self, masks: np.ndarray) -> np.ndarray:
        p = self.p_arr
        return np.prod(np.where(masks, p, 1.0 - p), axis=1)

    def vertex_index(self, coords) -> int:
        if self.coords is None:
            raise ValueError("instance has no coordinates")
        return self.coords.index(tuple(int(v) for v in coords))


def _chunks(n: int):
    for a in range(0, n, CHUNK):
        yield a, min(a + CHUNK, n)


def _values(inst: TinyInstance, fn: Callable, masks: np.ndarray, batched: bool) -> np.ndarray:
    if batched:
        return np.asarray(fn(masks), dtype=float)
    return np.array([float(fn(row)) for row in masks])


def exact_expected(inst: TinyInstance, functional: Callable, batched: bool = False) -> float:
    """Sum over configurations of weight times ``functional``.

    ``functional`` maps one boolean open-edge vector to a number, or with
    ``batched=True`` a (configs x edges) matrix to one value per row.
    """
    terms = []
    for a, b in _chunks(inst.n_configs):
        m = inst.masks(a, b)
        terms.append(inst.weights(m) * _values(inst, functional, m, batched))
    return math.fsum(itertools.chain.from_iterable(t.tolist() for t in terms))


def exact_probability(inst: TinyInstance, event: Callable, batched: bool = False) -> float:
    return exact_expected(inst, lambda x: np.asarray(event(x), dtype=bool).astype(float)
                          if batched else float(bool(event(x))), batched)


def total_mass(inst: TinyInstance) -> float:
    return exact_expected(inst, lambda m: np.ones(m.shape[0]), batched=True)


# connectivity functionals ---------------------------------------------------------

@nb.njit(cache=True)
def _connected_rows(masks, eu, ev, n, source, target_mask):
    out = np.zeros(masks.shape[0], dtype=np.bool_)
    parent = np.empty(n, dtype=np.int64)
    size = np.empty(n, dtype=np.int64)
    flags = np.zeros(n, dtype=np.int64)
    for j in range(masks.shape[0]):
        for x in range(n):
            parent[x] = x
            size[x] = 1
        for e in range(eu.shape[0]):
            if masks[j, e]:
                uf_union(parent, size, flags, eu[e], ev[e])
        r = uf_find(parent, source)
        for x in range(n):
            if target_mask[x] and uf_find(parent, x) == r:
                out[j] = True
                break
    return out


@nb.njit(cache=True)
def _cluster_size_rows(masks, eu, ev, n, source):
    out = np.zeros(masks.shape[0], dtype=np.int64)
    parent = np.empty(n, dtype=np.int64)
    size = np.empty(n, dtype=np.int64)
    flags = np.zeros(n, dtype=np.int64)
    for j in range(masks.shape[0]):
        for x in range(n):
            parent[x] = x
            size[x] = 1
        for e in range(eu.shape[0]):
            if masks[j, e]:
                uf_union(parent, size, flags, eu[e], ev[e])
        out[j] = size[uf_find(parent, source)]
    return out


def _target_mask(inst: TinyInstance, targets) -> np.ndarray:
    t = np.zeros(inst.n_vertices, dtype=bool)
    t[np.asarray(list(targets), dtype=np.int64)] = True
    return t


def connection_event(inst: TinyInstance, source: int, targets) -> Callable:
    """Batched indicator of {source is joined by an open path to some target}."""
    t = _target_mask(inst, targets)
    return lambda m: _connected_rows(np.ascontiguousarray(m), inst.eu_arr, inst.ev_arr,
                                     inst.n_vertices, int(source), t)


def cluster_size(inst: TinyInstance, source: int) -> Callable:
    return lambda m: _cluster_size_rows(np.ascontiguousarray(m), inst.eu_arr, inst.ev_arr,
                                        inst.n_vertices, int(source))


def connection_probability(inst: TinyInstance, source: int, targets) -> float:
    return exact_probability(inst, connection_event(inst, source, targets), batched=True)


def box_instance(d: int, s: int, n: int, params: ParamPoint, class_rule=None) -> TinyInstance:
    spec = LatticeSpec.box(d, s, n) if class_rule is None else LatticeSpec.box(d, s, n, class_rule)
    return TinyInstance.from_spec(spec, params)


def arm_probability(d: int, s: int, params: ParamPoint, n: int, class_rule=None) -> float:
    """P(o ↔ ∂B_n) using edges inside B_n, by enumeration."""
    inst = box_instance(d, s, n, params, class_rule)
    c = np.array(inst.coords)
    return connection_probability(inst, inst.vertex_index((0,) * d),
                                  np.flatnonzero(np.abs(c).max(axis=1) == n))


# independent exact routes (rational arithmetic) -------------------------------------

def _adjacent(n_vertices, edges, state):
    """Components reachable through edges with state 1 (open)."""
    adj = [[] for _ in range(n_vertices)]
    for (a, b), st in zip(edges, state):
        if st == 1:
            adj[a].append(b)
            adj[b].append(a)
    return adj


def _reach(adj, source):
    seen = {source}
    stack = [source]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def factoring_connection(inst: TinyInstance, source: int, targets) -> Fraction:
    """P(source ↔ targets) by recursive conditioning on edge states, in exact
    rationals: a branch stops as soon as open edges join source to a target or
    open-or-undecided edges cannot."""
    probs = [Fraction(str(p)) if isinstance(p, float) else Fraction(p) for p in inst.probs]
    edges = list(zip(inst.eu, inst.ev))
    targets = set(int(t) for t in targets)
    n = inst.n_vertices

    def rec(state, k):
        if targets & _reach(_adjacent(n, edges, state), source):
            return Fraction(1)
        hopeful = [1 if s != 0 else 0 for s in state]
        if not targets & _reach(_adjacent(n, edges, hopeful), source):
            return Fraction(0)
        while state[k] != -1:
            k += 1
        p = probs[k]
        out = Fraction(0)
        if p:
            state[k] = 1
            out += p * rec(state, k + 1)
        if p != 1:
            state[k] = 0
            out += (1 - p) * rec(state, k + 1)
        state[k] = -1
        return out

    if source in targets:
        return Fraction(1)
    return rec([-1] * len(edges), 0)


def simple_paths(inst: TinyInstance, source: int, targets) -> list:
    """Edge sets of the simple paths from source to the first target they meet."""
    targets = set(int(t) for t in targets)
    adj = [[] for _ in range(inst.n_vertices)]
    for e, (a, b) in enumerate(zip(inst.eu, inst.ev)):
        adj[a].append((b, e))
        adj[b].append((a, e))
    out = []

    def walk(v, seen, used):
        for w, e in adj[v]:
            if w in seen:
                continue
            if w in targets:
                out.append(frozenset(used | {e}))
            else:
                walk(w, seen | {w}, used | {e})

    if source in targets:
        return [frozenset()]
    walk(source, {source}, frozenset())
    return out


def path_connection(inst: TinyInstance, source: int, targets, max_paths: int = 18) -> Fraction:
    """P(source ↔ targets) by inclusion-exclusion over the simple paths."""
    probs = [Fraction(str(p)) if isinstance(p, float) else Fraction(p) for p in inst.probs]
    paths = sorted(set(simple_paths(inst, source, targets)), key=len)
    if len(paths) > max_paths:
        raise ValueError(f"{len(paths)} paths exceed max_paths={max_paths}")
    total = Fraction(0)
    for r in range(1, len(paths) + 1):
        sign = 1 if r % 2 else -1
        for combo in itertools.combinations(paths, r):
            union = frozenset().union(*combo)
            term = Fraction(1)
            for e in union:
                term *= probs[e]
            total += sign * term
    return total


# inequality verifiers ----------------------------------------------------------------

@dataclass
class InequalityCheck:
    lhs: float
    rhs: float
    holds: bool
    monotone: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _table(inst: TinyInstance, f: Callable, batched: bool) -> np.ndarray:
    out = np.empty(inst.n_configs, dtype=bool)
    for a, b in _chunks(inst.n_configs):
        out[a:b] = _values(inst, f, inst.masks(a, b), batched) != 0
    return out


def is_increasing(table: np.ndarray, n_edges: int) -> bool:
    """table[c] <= table[c | bit e] for every configuration c and edge e."""
    c = np.arange(table.shape[0], dtype=np.int64)
    for e in range(n_edges):
        lo = c[(c >> e) & 1 == 0]
        if np.any(table[lo] & ~table[lo | (1 << e)]):
            return False
    return True


def _weighted(inst: TinyInstance, table: np.ndarray) -> float:
    terms = []
    for a, b in _chunks(inst.n_configs):
        w = inst.weights(inst.masks(a, b))
        terms.append(w[table[a:b]])
    return math.fsum(itertools.chain.from_iterable(t.tolist() for t in terms))


def verify_fkg(inst: TinyInstance, f: Callable, g: Callable, batched: bool = False,
               tol: float = 1e-12) -> InequalityCheck:
    """E[fg] >= E[f] E[g] for increasing indicators f, g."""
    tf, tg = _table(inst, f, batched), _table(inst, g, batched)
    mono = is_increasing(tf, inst.n_edges) and is_increasing(tg, inst.n_edges)
    lhs = _weighted(inst, tf & tg)
    rhs = _weighted(inst, tf) * _weighted(inst, tg)
    return InequalityCheck(lhs, rhs, lhs >= rhs - tol, mono)


@nb.njit(cache=True)
def disjoint_occurrence(ta, tb):
    """A∘B: some K ⊆ ω has K ∈ A and ω \\ K ∈ B (tables of increasing events)."""
    n = ta.shape[0]
    out = np.zeros(n, dtype=np.bool_)
    for w in range(n):
        k = w
        while True:
            if ta[k] and tb[w ^ k]:
                out[w] = True
                break
            if k == 0:
                break
            k = (k - 1) & w
    return out


def verify_bk(inst: TinyInstance, A: Callable, B: Callable, batched: bool = False,
              tol: float = 1e-12) -> InequalityCheck:
    """P(A∘B) <= P(A) P(B), with A∘B found by enumerating witness sets."""
    if inst.n_edges > BK_MAX_EDGES:
        raise ValueError(f"disjoint occurrence is enumerated up to {BK_MAX_EDGES} edges")
    ta, tb = _table(inst, A, batched), _table(inst, B, batched)
    mono = is_increasing(ta, inst.n_edges) and is_increasing(tb, inst.n_edges)
    lhs = _weighted(inst, disjoint_occurrence(ta, tb))
    rhs = _weighted(inst, ta) * _weighted(inst, tb)
    return InequalityCheck(lhs, rhs, lhs <= rhs + tol, mono)


# exhaustive sweep over increasing events ----------------------------------------------

def monotone_functions(k: int) -> np.ndarray:
    """All increasing Boolean functions of k edges as bitmasks over the 2^k configurations.

    Uses f = (f0, f1) with f0 <= f1, f0 and f1 the restrictions to edge k-1
    closed and open.
    """
    if not 0 <= k <= 5:
        raise ValueError("k must lie in 0..5")
    funcs = [0, 1]
    for j in range(k):
        half = 1 << j
        funcs = [f0 | (f1 << half) for f1 in funcs for f0 in funcs if f0 & ~f1 == 0]
    return np.array(sorted(funcs), dtype=np.int64)


@nb.njit(cache=True)
def _minimal_sets(func, k):
    out = []
    for c in range(1 << k):
        if (func >> c) & 1:
            minimal = True
            for e in range(k):
                if (c >> e) & 1 and (func >> (c ^ (1 << e))) & 1:
                    minimal = False
                    break
            if minimal:
                out.append(c)
    return out


@nb.njit(cache=True)
def _mass(mask, w):
    s = 0
    c = 0
    while mask:
        if mask & 1:
            s += w[c]
        mask >>= 1
        c += 1
    return s


@nb.njit(cache=True)
def _sweep(funcs, k, w, total):
    """Counts of FKG and BK violations over all ordered pairs, in exact integers."""
    nf = funcs.shape[0]
    ncfg = 1 << k
    mass = np.empty(nf, dtype=np.int64)
    for i in range(nf):
        mass[i] = _mass(funcs[i], w)
    up = np.zeros(ncfg, dtype=np.int64)
    for sset in range(ncfg):
        for c in range(ncfg):
            if c & sset == sset:
                up[sset] |= 1 << c
    mins = np.full((nf, 16), -1, dtype=np.int64)
    nmin = np.zeros(nf, dtype=np.int64)
    for i in range(nf):
        ms = _minimal_sets(funcs[i], k)
        nmin[i] = len(ms)
        for j in range(len(ms)):
            mins[i, j] = ms[j]
    fkg_bad = 0
    bk_bad = 0
    fkg_eq = 0
    bk_eq = 0
    for i in range(nf):
        for j in range(nf):
            prod = mass[i] * mass[j]
            both = _mass(funcs[i] & funcs[j], w) * total
            if both < prod:
                fkg_bad += 1
            elif both == prod:
                fkg_eq += 1
            circ = 0
            for a in range(nmin[i]):
                ka = mins[i, a]
                for b in range(nmin[j]):
                    lb = mins[j, b]
                    if ka & lb == 0:
                        circ |= up[ka | lb]
            dis = _mass(circ, w) * total
            if dis > prod:
                bk_bad += 1
            elif dis == prod:
                bk_eq += 1
    return fkg_bad, bk_bad, fkg_eq, bk_eq


@dataclass
class SweepResult:
    k: int
    p_num: tuple
    denom: int
    n_functions: int
    pairs: int
    fkg_violations: int
    bk_violations: int
    fkg_equalities: int
    bk_equalities: int


def inequality_sweep(k: int, p_num: Sequence[int], denom: int = 10,
                     funcs: np.ndarray | None = None) -> SweepResult:
    """FKG and BK over every ordered pair of increasing events on k edges, with
    edge e open with probability p_num[e] / denom.  All comparisons are made on
    integers scaled by denom^k."""
    if len(p_num) != k:
        raise ValueError("need one probability per edge")
    if not all(0 <= x <= denom for x in p_num):
        raise ValueError("probabilities must lie in [0, 1]")
    funcs = monotone_functions(k) if funcs is None else funcs
    w = np.empty(1 << k, dtype=np.int64)
    for c in range(1 << k):
        v = 1
        for e in range(k):
            v *= p_num[e] if (c >> e) & 1 else denom - p_num[e]
        w[c] = v
    total = denom ** k
    fb, bb, fe, be = _sweep(funcs, k, w, total)
    n = funcs.shape[0]
    return SweepResult(k, tuple(int(x) for x in p_num), denom, n, n * n, int(fb), int(bb),
                       int(fe), int(be))


# mass transport ----------------------------------------------------------------------

@dataclass
class TransportContext:
    """Arrays of a torus window used by the transport kernels."""

    spec: LatticeSpec
    params: ParamPoint
    x: int

    @cached_property
    def eu(self):
        return self.spec.edge_u.astype(np.int64)

    @cached_property
    def ev(self):
        return self.spec.edge_v.astype(np.int64)

    @cached_property
    def classes(self):
        return self.spec.edge_classes.astype(np.int64)

    @cached_property
    def in_H(self):
        return self.spec.vertex_in_H

    @cached_property
    def csr(self):
        return _csr(self.spec.n_vertices, self.eu, self.ev, np.ones(self.eu.shape[0], np.bool_))


@nb.njit(cache=True)
def _labels(n, eu, ev, openm):
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    flags = np.zeros(n, dtype=np.int64)
    for e in range(eu.shape[0]):
        if openm[e]:
            uf_union(parent, size, flags, eu[e], ev[e])
    for v in range(n):
        parent[v] = uf_find(parent, v)
    return parent, size


@nb.njit(cache=True)
def _connectivity_sums(U, eu, ev, thr, cls, n, in_H, x):
    rows = U.shape[0]
    a = np.zeros(rows)
    b = np.zeros(rows)
    openm = np.empty(eu.shape[0], dtype=np.bool_)
    for j in range(rows):
        for e in range(eu.shape[0]):
            openm[e] = U[j, e] < thr[cls[e]]
        root, size = _labels(n, eu, ev, openm)
        c = 0
        for y in range(n):
            if in_H[y] and root[y] == root[x]:
                c += 1
        a[j] = c
        b[j] = c
    return a, b


@nb.njit(cache=True)
def _nearest_sums(U, eu, ev, thr1, thr2, cls, n, in_H, deg, nbr, x):
    """m(u, v) = 1 when v is the unique vertex of C_H(u, ω2) nearest to the
    H-part of the largest ω1-clusters, at positive distance."""
    rows = U.shape[0]
    a = np.zeros(rows)
    b = np.zeros(rows)
    m = eu.shape[0]
    o1 = np.empty(m, dtype=np.bool_)
    o2 = np.empty(m, dtype=np.bool_)
    dist = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    big = n + 1
    for j in range(rows):
        for e in range(m):
            o1[e] = U[j, e] < thr1[cls[e]]
            o2[e] = U[j, e] < thr2[cls[e]]
        r1, s1 = _labels(n, eu, ev, o1)
        smax = 0
        for v in range(n):
            if s1[r1[v]] > smax:
                smax = s1[r1[v]]
        tail = 0
        for v in range(n):
            dist[v] = big
            if in_H[v] and s1[r1[v]] == smax:
                dist[v] = 0
                queue[tail] = v
                tail += 1
        head = 0
        while head < tail:
            v = queue[head]
            head += 1
            for k in range(deg[v], deg[v + 1]):
                w = nbr[k]
                if dist[w] == big:
                    dist[w] = dist[v] + 1
                    queue[tail] = w
                    tail += 1
        r2, s2 = _labels(n, eu, ev, o2)
        best = big
        count = 0
        arg = -1
        members = 0
        for v in range(n):
            if in_H[v] and r2[v] == r2[x]:
                members += 1
                if dist[v] < best:
                    best = dist[v]
                    count = 1
                    arg = v
                elif dist[v] == best:
                    count += 1
        if count == 1 and 0 < best < big:
            a[j] = 1.0
            if arg == x:
                b[j] = members
    return a, b


class Transport:
    """A Γ-covariant transport m(u, v, ω) over the H-vertices of a torus.

    ``sums`` returns, per row of variates, (Σ_v m(x, v), Σ_v m(v, x)).
    """

    name = "transport"
    symmetric = False

    def thresholds(self, params: ParamPoint) -> list:
        return [params.thresholds()]

    def sums(self, ctx: TransportContext, U: np.ndarray) -> tuple:
        raise NotImplementedError


class DiagonalTransport(Transport):
    """m(u, v) = 1{u = v}."""

    name = "diagonal"
    symmetric = True

    def sums(self, ctx, U):
        one = np.ones(U.shape[0])
        return one, one.copy()


class ConnectivityTransport(Transport):
    """m(u, v) = 1{u ↔ v}; symmetric in (u, v)."""

    name = "connectivity"
    symmetric = True

    def sums(self, ctx, U):
        return _connectivity_sums(U, ctx.eu, ctx.ev, ctx.params.thresholds(), ctx.classes,
                                  ctx.spec.n_vertices, ctx.in_H, ctx.x)


class NearestClusterTransport(Transport):
    """m(u, v) = 1{v ∈ C_H(u, ω2), v is the unique vertex of C_H(u, ω2) closest
    to the H-part of the largest clusters of ω1, distance > 0}.

    ω1 keeps only the edges of class E+ at level p (H-edges and E- closed) and
    ω2 is the configuration at (p, q, t), both from the same variates.  On a
    finite torus the union of the largest ω1-clusters stands in for the
    infinite cluster; it is translation covariant.
    """

    name = "nearest_cluster"

    def thresholds(self, params):
        t1 = params.thresholds().copy()
        t1[H_EDGE] = 0.0
        t1[MINUS] = 0.0
        return [t1, params.thresholds()]

    def sums(self, ctx, U):
        t1, t2 = self.thresholds(ctx.params)
        deg, nbr = ctx.csr
        return _nearest_sums(U, ctx.eu, ctx.ev, t1, t2, ctx.classes, ctx.spec.n_vertices,
                             ctx.in_H, deg, nbr, ctx.x)


TRANSPORTS = {"diagonal": DiagonalTransport, "connectivity": ConnectivityTransport,
              "nearest_cluster": NearestClusterTransport}


@dataclass
class TransportResult:
    lhs: float
    rhs: float
    delta: float
    stderr: float
    n: int
    mode: str
    transport: str
    meta: dict = field(default_factory=dict)

    @property
    def z(self) -> float:
        if self.stderr > 0:
            return self.delta / self.stderr
        return 0.0 if self.delta == 0 else math.inf

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["z"] = self.z
        return out


def _check_torus(spec: LatticeSpec) -> None:
    for a in range(spec.s):
        if spec.bc[a] != PERIODIC:
            raise ValueError("mass transport needs a window periodic along every H axis")


def _levels(thr_sets: list, classes: np.ndarray) -> list:
    """Per edge, (representative variate, probability) for each interval cut by the thresholds."""
    out = []
    for c in classes:
        cuts = sorted({0.0, 1.0, *(float(t[c]) for t in thr_sets)})
        out.append([((lo + hi) / 2, hi - lo) for lo, hi in zip(cuts, cuts[1:]) if hi > lo])
    return out


def mass_transport_check(spec: LatticeSpec, transport: Transport, params: ParamPoint,
                         mode: str = "exact", n_samples: int = 10000, seed: int = 0,
                         x=None, workers: int = 1) -> TransportResult:
    """Σ_y E m(x, y) against Σ_y E m(y, x) for x in H (default: the first H-vertex)."""
    _check_torus(spec)
    if mode not in ("exact", "monte_carlo"):
        raise ValueError("mode must be 'exact' or 'monte_carlo'")
    hv = np.flatnonzero(spec.vertex_in_H)
    xi = int(hv[0]) if x is None else spec.vertex_index(x)
    if not spec.vertex_in_H[xi]:
        raise ValueError("x must lie in H")
    ctx = TransportContext(spec, params, xi)
    meta = {"spec": spec.describe(), "params": {"p": params.p, "q": params.q, "t": params.t_eff}}
    if mode == "exact":
        levels = _levels(transport.thresholds(params), spec.edge_classes)
        n_cfg = math.prod(len(l) for l in levels)
        if n_cfg > 1 << MAX_EDGES:
            raise ValueError(f"{n_cfg} configurations exceed the enumeration cap")
        radix = np.array([len(l) for l in levels], dtype=np.int64)
        vals = [np.array([v for v, _ in l]) for l in levels]
        probs = [np.array([p for _, p in l]) for l in levels]
        ta, tb, td = [], [], []
        for s0, s1 in _chunks(n_cfg):
            idx = np.arange(s0, s1, dtype=np.int64)
            U = np.empty((idx.shape[0], len(levels)))
            w = np.ones(idx.shape[0])
            rem = idx.copy()
            for e in range(len(levels)):
                digit = rem % radix[e]
                rem //= radix[e]
                U[:, e] = vals[e][digit]
                w *= probs[e][digit]
            a, b = transport.sums(ctx, U)
            ta.append(w * a)
            tb.append(w * b)
            td.append(w * (a - b))
        flat = lambda ts: itertools.chain.from_iterable(t.tolist() for t in ts)
        lhs, rhs, delta = math.fsum(flat(ta)), math.fsum(flat(tb)), math.fsum(flat(td))
        meta["configurations"] = n_cfg
        return TransportResult(lhs, rhs, delta, 0.0, n_cfg, mode, transport.name, meta)
    from .sampling import run_samples

    keys = spec.edge_keys
    seed64 = np.uint64(seed)

    def chunk(a, b):
        U = uniforms_batch(keys, seed64, a, b)
        s_a, s_b = transport.sums(ctx, U)
        return np.stack([s_a, s_b], axis=1)

    ab = run_samples(chunk, n_samples, workers, chunk=4096)
    diff = ab[:, 0] - ab[:, 1]
    n = ab.shape[0]
    se = float(diff.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    meta["seed"] = seed
    return TransportResult(float(ab[:, 0].mean()), float(ab[:, 1].mean()), float(diff.mean()),
                           se, n, mode, transport.name, meta)


def oracle_record(value: float, event: str, meta: dict) -> EstimateRecord:
    """An exact value in the common record shape (stderr 0)."""
    return EstimateRecord(event, float(value), 0.0, 0, 0, (float(value), float(value)), meta)
