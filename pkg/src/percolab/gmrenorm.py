"""Dynamic block renormalization onto the oriented site graph
G = {x in Z+ x Z : x1 + x2 even} with edges x -> x + (1, +-1).

Each renormalized site x owns the site-block Lambda_x = 4N x + (B_N ∪ (2N u2 + B_N))
and the passage-block Pi_x, with N = 6n.  Z(x) = 1 when a chain of local
explorations (steps) links an incoming m-seed in Lambda_x to one seed in
Lambda_{x+(1,-1)}^u and one in Lambda_{x+(1,1)}^l.

A step explores one box D around the current seed centre.  Edges of the
boundary of the explored edge set E inside D get their level raised by
delta and are opened if U(e) < gamma(e) + delta; from there a breadth-first
search follows fresh (p,q)-open edges inside D.  Every edge keeps the pair
(gamma, zeta) with gamma <= U < zeta (strict threshold convention), gamma
non-decreasing and zeta non-increasing in time.

Coordinates below are 0-based: axis 0 is x1, axis 1 is x2.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable

import numba as nb
import numpy as np
from numba import types
from numba.typed import Dict, List

from .field import ParamPoint, UniformField, edge_hash, edge_hashes, sample_key, uniform, uniforms_for
from .gmgeometry import GMEventSpec, F_points, T_points, as_fraction, scaled, seed_box, seed_centers
from .lattice import H_EDGE, zd_edge_class

EDGE_VALUE = types.Tuple((types.float64, types.float64, types.int64, types.int64))
_MONO, _BRACKET = 0, 1


class RenormPreconditionError(RuntimeError):
    """A step would violate the separation hypotheses of the finite-size criterion."""

    def __init__(self, site, phase, step, condition):
        super().__init__(f"site {site}, phase {phase}, step {step}: {condition}")
        self.site, self.phase, self.step, self.condition = site, phase, step, condition


# coordinate codes -----------------------------------------------------------

def code_params(d: int) -> tuple:
    bits = 60 // d
    return bits, 1 << (bits - 1)


@nb.njit(inline="always")
def _vcode(x, bits, off):
    c = 0
    for i in range(x.shape[0]):
        c |= (x[i] + off) << (bits * i)
    return c


@nb.njit(inline="always")
def _vdecode(c, bits, off, out):
    mask = (1 << bits) - 1
    for i in range(out.shape[0]):
        out[i] = ((c >> (bits * i)) & mask) - off


@nb.njit(inline="always")
def _in_box(x, center, radius):
    for i in range(x.shape[0]):
        if abs(x[i] - center[i]) > radius:
            return False
    return True


@nb.njit(cache=True)
def vertex_codes(coords, bits, off):
    out = np.empty(coords.shape[0], dtype=np.int64)
    for i in range(coords.shape[0]):
        out[i] = _vcode(coords[i], bits, off)
    return out


@nb.njit(cache=True)
def edge_codes(lows, axes, bits, off):
    out = np.empty(lows.shape[0], dtype=np.int64)
    for i in range(lows.shape[0]):
        out[i] = (_vcode(lows[i], bits, off) << 2) | axes[i]
    return out


@nb.njit(cache=True)
def has_vertices(verts, coords, bits, off):
    out = np.zeros(coords.shape[0], dtype=np.bool_)
    for i in range(coords.shape[0]):
        out[i] = _vcode(coords[i], bits, off) in verts
    return out


@nb.njit(cache=True)
def add_vertices(verts, coords, bits, off):
    for i in range(coords.shape[0]):
        verts[_vcode(coords[i], bits, off)] = 1


@nb.njit(cache=True)
def near_explored(verts, coords, center, radius, bits, off):
    """Per point: is it, or a neighbour of it inside the box, an explored vertex."""
    d = coords.shape[1]
    out = np.zeros(coords.shape[0], dtype=np.bool_)
    y = np.empty(d, dtype=np.int64)
    for i in range(coords.shape[0]):
        if _vcode(coords[i], bits, off) in verts:
            out[i] = True
            continue
        for a in range(d):
            for sg in (-1, 1):
                for b in range(d):
                    y[b] = coords[i, b]
                y[a] += sg
                if _in_box(y, center, radius) and _vcode(y, bits, off) in verts:
                    out[i] = True
    return out


@nb.njit(cache=True)
def export_edges(edges, d, bits, off):
    n = len(edges)
    lows = np.empty((n, d), dtype=np.int64)
    axes = np.empty(n, dtype=np.int64)
    gam = np.empty(n)
    zet = np.empty(n)
    insp = np.empty(n, dtype=np.int64)
    inE = np.empty(n, dtype=np.bool_)
    x = np.empty(d, dtype=np.int64)
    i = 0
    for c in edges.keys():
        g, z, k, e = edges[c]
        _vdecode(c >> 2, bits, off, x)
        lows[i] = x
        axes[i] = c & 3
        gam[i] = g
        zet[i] = z
        insp[i] = k
        inE[i] = e == 1
        i += 1
    return lows, axes, gam, zet, insp, inE


@nb.njit(cache=True)
def edge_class_array(lows, axes, s):
    out = np.empty(axes.shape[0], dtype=np.int64)
    for i in range(axes.shape[0]):
        out[i] = zd_edge_class(lows[i], axes[i], s, False)
    return out


@nb.njit(cache=True)
def path_search(lows, axes, src, dst, bits, off):
    """Shortest path from src to dst over the given edges; edge indices in path order."""
    d = src.shape[0]
    index = Dict.empty(types.int64, types.int64)
    for i in range(axes.shape[0]):
        index[(_vcode(lows[i], bits, off) << 2) | axes[i]] = i
    sc = _vcode(src, bits, off)
    dc = _vcode(dst, bits, off)
    prev_v = Dict.empty(types.int64, types.int64)
    prev_e = Dict.empty(types.int64, types.int64)
    prev_v[sc] = sc
    prev_e[sc] = -1
    queue = List.empty_list(types.int64)
    queue.append(sc)
    x = np.empty(d, dtype=np.int64)
    y = np.empty(d, dtype=np.int64)
    head = 0
    while head < len(queue) and dc not in prev_v:
        xc = queue[head]
        head += 1
        _vdecode(xc, bits, off, x)
        for a in range(d):
            for sg in (-1, 1):
                for b in range(d):
                    y[b] = x[b]
                y[a] += sg
                lc = _vcode(x, bits, off) if sg > 0 else _vcode(y, bits, off)
                e = index.get((lc << 2) | a, -1)
                if e < 0:
                    continue
                yc = _vcode(y, bits, off)
                if yc not in prev_v:
                    prev_v[yc] = xc
                    prev_e[yc] = e
                    queue.append(yc)
    if dc not in prev_v:
        return np.zeros(0, dtype=np.int64), False
    path = List.empty_list(types.int64)
    v = dc
    while v != sc:
        path.append(prev_e[v])
        v = prev_v[v]
    out = np.empty(len(path), dtype=np.int64)
    for i in range(len(path)):
        out[i] = path[len(path) - 1 - i]
    return out, True


@nb.njit(cache=True)
def open_seed_edges(edges, lows, axes, zeta, bits, off):
    """Phase 1: put the seed edges into E with the given zeta."""
    for i in range(lows.shape[0]):
        c = (_vcode(lows[i], bits, off) << 2) | axes[i]
        g, z, k, e = edges.get(c, (0.0, 1.0, 0, 0))
        edges[c] = (g, zeta, k + 1, 1)


@nb.njit(cache=True)
def explore_step(edges, verts, center, radius, delta, thr, s, skey, bits, off,
                 touched, new_edges, viol):
    """One exploration step inside the box center + B_radius.

    (a) every edge of the boundary of E inside the box is inspected once: it
    joins E with zeta = gamma + delta if U < gamma + delta, else gamma += delta;
    (b) breadth-first search from the newly reached vertices along fresh
    edges (not in E nor on its boundary) inside the box: open ones join E with
    zeta = threshold, closed ones get gamma = threshold.
    Returns (boundary edges opened, new vertices).
    """
    d = center.shape[0]
    x = np.empty(d, dtype=np.int64)
    y = np.empty(d, dtype=np.int64)
    low = np.empty(d, dtype=np.int64)
    seen = Dict.empty(types.int64, types.int64)
    reached = Dict.empty(types.int64, types.int64)
    queue = List.empty_list(types.int64)
    n_open = 0
    for vc in verts.keys():
        _vdecode(vc, bits, off, x)
        if not _in_box(x, center, radius):
            continue
        for a in range(d):
            for sg in (-1, 1):
                for b in range(d):
                    y[b] = x[b]
                y[a] += sg
                if not _in_box(y, center, radius):
                    continue
                if sg > 0:
                    for b in range(d):
                        low[b] = x[b]
                else:
                    for b in range(d):
                        low[b] = y[b]
                ec = (_vcode(low, bits, off) << 2) | a
                if ec in seen:
                    continue
                g, z, k, e = edges.get(ec, (0.0, 1.0, 0, 0))
                if e == 1:
                    continue
                seen[ec] = 1
                touched.append(ec)
                u = uniform(edge_hash(low, a), skey)
                if u < g + delta:
                    nz = min(g + delta, 1.0)
                    if nz > z:
                        viol[_MONO] += 1
                    if not (g <= u < nz):
                        viol[_BRACKET] += 1
                    edges[ec] = (g, nz, k + 1, 1)
                    new_edges.append(ec)
                    n_open += 1
                    for w in (x, y):
                        wc = _vcode(w, bits, off)
                        if wc not in verts and wc not in reached:
                            reached[wc] = 1
                            queue.append(wc)
                else:
                    if not (g + delta <= u < z):
                        viol[_BRACKET] += 1
                    edges[ec] = (g + delta, z, k + 1, 0)
    head = 0
    while head < len(queue):
        xc = queue[head]
        head += 1
        _vdecode(xc, bits, off, x)
        for a in range(d):
            for sg in (-1, 1):
                for b in range(d):
                    y[b] = x[b]
                y[a] += sg
                if not _in_box(y, center, radius):
                    continue
                yc = _vcode(y, bits, off)
                if yc in verts:
                    continue
                if sg > 0:
                    for b in range(d):
                        low[b] = x[b]
                else:
                    for b in range(d):
                        low[b] = y[b]
                ec = (_vcode(low, bits, off) << 2) | a
                if ec in seen:
                    continue
                seen[ec] = 1
                touched.append(ec)
                g, z, k, e = edges.get(ec, (0.0, 1.0, 0, 0))
                u = uniform(edge_hash(low, a), skey)
                t = thr[zd_edge_class(low, a, s, False)]
                if u < t:
                    if t > z:
                        viol[_MONO] += 1
                    if not (g <= u < t):
                        viol[_BRACKET] += 1
                    edges[ec] = (g, t, k + 1, 1)
                    new_edges.append(ec)
                    if yc not in reached:
                        reached[yc] = 1
                        queue.append(yc)
                else:
                    if t < g:
                        viol[_MONO] += 1
                    if not (t <= u < z):
                        viol[_BRACKET] += 1
                    edges[ec] = (t, z, k + 1, 0)
    for vc in reached.keys():
        verts[vc] = 1
    return n_open, len(reached)


# configuration and geometry ---------------------------------------------------

@dataclass(frozen=True)
class RenormConfig:
    """Scale and geometry constants.

    Box radii are floor(beta n) + floor(alpha n) with beta in {1, 2, beta3};
    ``budgets`` overrides the per-phase step budgets (keys 2, 4, 6, 7, 9; the
    long/short pair of 4 and 7 is swapped for seeds in the upper half-block).
    """

    n: int
    m: int
    alpha: object = Fraction(1, 2)
    delta: float = 0.02
    d: int = 3
    s: int = 2
    beta3: object = None
    budgets: tuple = ()
    p_site: float = 0.7055
    strict: bool = True
    step_limit: int | None = None

    def __post_init__(self):
        if self.s < 2 or self.d < self.s or self.d > 4:
            raise ValueError("renormalization needs 2 <= s <= d <= 4")
        if self.m < 0 or self.n < 1:
            raise ValueError("need m >= 0 and n >= 1")
        if not self.a > 2 * self.m + 1:
            raise ValueError(f"alpha*n = {self.a} must exceed 2m+1 = {2 * self.m + 1}")
        if not (0.0 <= self.delta < 1.0):
            raise ValueError("delta must lie in [0, 1)")

    @classmethod
    def desk(cls, **kw) -> "RenormConfig":
        base = dict(n=8, m=1, alpha=Fraction(1, 2), delta=0.02)
        base.update(kw)
        return cls(**base)

    @classmethod
    def full(cls, eta: float = 0.08, n: int = 200, m: int = 0, **kw) -> "RenormConfig":
        """alpha = 1/100, betas 1, 2, 2 + alpha + alpha^2, delta = eta / 16."""
        return cls(n=n, m=m, alpha=Fraction(1, 100), delta=eta / 16, **kw)

    @property
    def alpha_f(self) -> Fraction:
        return as_fraction(self.alpha)

    @property
    def beta3_f(self) -> Fraction:
        if self.beta3 is None:
            a = self.alpha_f
            return 2 + a + a * a
        return as_fraction(self.beta3)

    @property
    def a(self) -> int:
        return scaled(self.alpha, self.n)

    @property
    def N(self) -> int:
        return 6 * self.n

    def beta(self, which: int) -> Fraction:
        return {1: Fraction(1), 2: Fraction(2), 3: self.beta3_f}[which]

    def radius(self, which: int) -> int:
        return scaled(self.beta(which), self.n) + self.a

    @property
    def phase3_separated(self) -> bool:
        """The upper branching target clears the lower branching box and its boundary."""
        return scaled(self.beta3_f, self.n) >= self.radius(2) + 2

    def budget(self, phase: int, start: str) -> int:
        table = {2: 9, 4: 12, 6: 13, 7: 24, 9: 13}
        table.update(dict(self.budgets))
        if start == "upper" and phase in (4, 7):
            return table[11 - phase]
        return table[phase]

    @property
    def max_steps(self) -> int:
        return sum(self.budget(k, "lower") for k in (2, 4, 6, 7, 9)) + 4

    @property
    def lam_target(self) -> float:
        return 0.5 * (1.0 + self.p_site)

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "alpha": str(self.alpha_f), "delta": self.delta,
                "d": self.d, "s": self.s, "beta3": str(self.beta3_f), "a": self.a, "N": self.N,
                "budgets": {k: self.budget(k, "lower") for k in (2, 4, 6, 7, 9)},
                "p_site": self.p_site}


@dataclass(frozen=True)
class BlockGeometry:
    """Site-blocks Lambda_x = 4N x + (B_N ∪ (2N u2 + B_N)) and passage-blocks Pi_x."""

    n: int
    d: int = 3

    @property
    def N(self) -> int:
        return 6 * self.n

    def origin(self, x) -> np.ndarray:
        o = np.zeros(self.d, dtype=np.int64)
        o[0], o[1] = 4 * self.N * x[0], 4 * self.N * x[1]
        return o

    def lower_center(self, x) -> np.ndarray:
        return self.origin(x)

    def upper_center(self, x) -> np.ndarray:
        c = self.origin(x)
        c[1] += 2 * self.N
        return c

    def passage_centers(self, x) -> list:
        out = []
        for c in (self.lower_center(x), self.upper_center(x)):
            for sg in (1, -1):
                y = c.copy()
                y[0] += 2 * self.N
                y[1] += sg * 2 * self.N
                out.append(y)
        return out

    def in_box(self, v, center) -> bool:
        return bool(np.all(np.abs(np.asarray(v) - center) <= self.N))

    def site_half(self, v, x) -> str | None:
        """'lower' or 'upper' if v lies in that half of Lambda_x, else None."""
        if self.in_box(v, self.lower_center(x)):
            return "lower"
        if self.in_box(v, self.upper_center(x)):
            return "upper"
        return None


def site_vertices(max_x1: int) -> list:
    """Sites of G with first coordinate <= max_x1, in lexicographic order."""
    return [(a, b) for a in range(max_x1 + 1) for b in range(-a, a + 1) if (a + b) % 2 == 0]


# steering ---------------------------------------------------------------------

def _factor(v) -> int:
    """-sgn(v) with the zero coordinate left unflipped."""
    return -1 if v > 0 else 1


def rotate_L(x) -> np.ndarray:
    """(x1, x2, x3, ..., xd) -> (x2, -x1, x3, ..., xd)."""
    x = np.asarray(x, dtype=np.int64).copy()
    x[0], x[1] = x[1], -x[0]
    return x


def steering(v, x, mode: str, s: int | None = None) -> np.ndarray:
    """sigma_v(x) for the three steering rules, relative to the origin.

    ``phase2`` flips coordinates 2..s by -sgn(v_i); ``phase3`` flips 3..s and
    then applies L; ``phase5`` negates coordinate 2 and flips 3..s.
    """
    v = np.asarray(v, dtype=np.int64)
    x = np.asarray(x, dtype=np.int64).copy()
    s = x.shape[0] if s is None else s
    first = {"phase2": 1, "phase3": 2, "phase5": 2}
    if mode not in first:
        raise ValueError(f"unknown steering mode {mode!r}")
    for i in range(first[mode], s):
        x[i] *= _factor(v[i])
    if mode == "phase5":
        x[1] = -x[1]
    if mode == "phase3":
        x = rotate_L(x)
    return x


def phase_matrix(phase: str, rel, cfg: RenormConfig, row_ref: int = 0) -> np.ndarray:
    """Linear map from the canonical frame (growth +x1, transverse >= 0) to the
    actual offset from the current seed, for a seed at ``rel`` from the block origin."""
    d, s, n = cfg.d, cfg.s, cfg.n
    M = np.zeros((d, d), dtype=np.int64)
    for i in range(2, s):
        M[i, i] = _factor(rel[i])
    for i in range(s, d):
        M[i, i] = 1
    if phase == "2":
        M[0, 0], M[1, 1] = 1, _factor(rel[1] - row_ref)
    elif phase == "3l":
        M[0, 1], M[1, 0] = 1, -1
    elif phase == "3u":
        M[0, 1], M[1, 0] = -1, 1
        for i in range(2, d):
            M[i, i] = -M[i, i]
    elif phase == "4":
        M[0, 1], M[1, 0] = _factor(rel[0] - 12 * n), -1
    elif phase == "5":
        M[0, 0], M[1, 1] = 1, -1
    elif phase == "6":
        M[0, 0], M[1, 1] = 1, _factor(rel[1] + 12 * n)
    elif phase == "7":
        M[0, 1], M[1, 0] = _factor(rel[0] - 12 * n), 1
    elif phase == "8":
        M[0, 0], M[1, 1] = 1, 1
    elif phase == "9":
        M[0, 0], M[1, 1] = 1, _factor(rel[1] - 24 * n)
    else:
        raise ValueError(f"unknown phase {phase!r}")
    return M


# canonical target sets ----------------------------------------------------------

@dataclass
class TargetSets:
    """F, T, the T-F edges and the m-seeds of F in the canonical frame."""

    F: np.ndarray
    T: np.ndarray
    tf_t: np.ndarray
    tf_f: np.ndarray
    centers: np.ndarray
    members: np.ndarray
    seed_a: np.ndarray
    seed_b: np.ndarray

    @classmethod
    def build(cls, cfg: RenormConfig, beta: Fraction) -> "TargetSets":
        g = GMEventSpec(cfg.alpha_f, beta, cfg.m, cfg.n, cfg.d, cfg.s)
        F = F_points(g)
        T = T_points(g)
        fidx = {tuple(p): i for i, p in enumerate(F)}
        tt, tf = [], []
        for i, t in enumerate(T):
            for a in range(cfg.d):
                for sg in (-1, 1):
                    y = t.copy()
                    y[a] += sg
                    j = fidx.get(tuple(y))
                    if j is not None:
                        tt.append(i)
                        tf.append(j)
        centers = seed_centers(g)
        members = np.array([[fidx[tuple(p)] for p in seed_box(c, cfg.m, cfg.s)] for c in centers],
                           dtype=np.int64)
        off = seed_box(np.zeros(cfg.d, dtype=np.int64), cfg.m, cfg.s)
        ea, eb = [], []
        for p in off:
            for a in range(cfg.s):
                if p[a] < cfg.m:
                    q = p.copy()
                    q[a] += 1
                    ea.append(p)
                    eb.append(q)
        ea = np.array(ea, dtype=np.int64).reshape(-1, cfg.d)
        eb = np.array(eb, dtype=np.int64).reshape(-1, cfg.d)
        seed_a = centers[:, None, :] + ea[None, :, :]
        seed_b = centers[:, None, :] + eb[None, :, :]
        return cls(F, T, np.array(tt, dtype=np.int64), np.array(tf, dtype=np.int64), centers,
                   members, seed_a, seed_b)


def _edge_of(a: np.ndarray, b: np.ndarray) -> tuple:
    """Lower endpoints and axes of unit edges given as endpoint arrays."""
    diff = b - a
    axes = np.abs(diff).argmax(axis=-1)
    lows = np.where((diff.sum(axis=-1) > 0)[..., None], a, b)
    return lows, axes


# state --------------------------------------------------------------------------

class RenormState:
    """Explored edges E with (gamma, zeta, inspections), the explored vertex set,
    step/phase counters, seeds and the trace.

    Edges absent from the store have gamma = 0, zeta = 1 and no inspections.
    """

    def __init__(self, d: int, s: int):
        self.d, self.s = d, s
        self.bits, self.off = code_params(d)
        self.edges = Dict.empty(types.int64, EDGE_VALUE)
        self.verts = Dict.empty(types.int64, types.int64)
        self.violations = np.zeros(2, dtype=np.int64)
        self.k = 0
        self.phase = 0
        self.trace: list = []
        self.seeds: dict = {}

    def codes(self, coords) -> np.ndarray:
        return vertex_codes(np.asarray(coords, dtype=np.int64).reshape(-1, self.d), self.bits,
                            self.off)

    def lookup(self, low, axis) -> tuple:
        """(gamma, zeta, inspections, in_E) of one edge."""
        c = int(edge_codes(np.asarray([low], dtype=np.int64), np.array([axis]), self.bits,
                           self.off)[0])
        if c in self.edges:
            g, z, k, e = self.edges[c]
            return g, z, k, bool(e)
        return 0.0, 1.0, 0, False

    def explored(self, coords) -> np.ndarray:
        return has_vertices(self.verts, np.asarray(coords, dtype=np.int64).reshape(-1, self.d),
                            self.bits, self.off)

    def export(self) -> dict:
        lows, axes, g, z, k, e = export_edges(self.edges, self.d, self.bits, self.off)
        return {"lows": lows, "axes": axes, "gamma": g, "zeta": z, "inspections": k, "in_E": e}

    @property
    def n_explored_edges(self) -> int:
        return len(self.edges)

    def check_range(self, center, radius) -> None:
        lim = self.off - 2
        if np.abs(np.asarray(center)).max() + radius > lim:
            raise ValueError("exploration leaves the encodable coordinate range")


# engine ---------------------------------------------------------------------------

@dataclass
class StepOutcome:
    success: bool
    center: np.ndarray | None
    reason: str = ""


@dataclass
class SiteResult:
    site: tuple
    Z: int
    start: str
    entry: tuple | None
    exit_lower: tuple | None = None
    exit_upper: tuple | None = None
    steps: int = 0
    failed_phase: str | None = None
    reason: str = ""
    seeds: dict = field(default_factory=dict)
    preconditions: list = field(default_factory=list)
    touched: set = field(default_factory=set, repr=False)

    def to_dict(self) -> dict:
        return {"site": list(self.site), "Z": self.Z, "start": self.start,
                "entry": None if self.entry is None else list(self.entry),
                "exit_lower": None if self.exit_lower is None else list(self.exit_lower),
                "exit_upper": None if self.exit_upper is None else list(self.exit_upper),
                "steps": self.steps, "failed_phase": self.failed_phase, "reason": self.reason,
                "preconditions": self.preconditions}

    @property
    def certified(self) -> bool:
        """Z = 1 with every step meeting the separation hypotheses."""
        return self.Z == 1 and not self.preconditions


def _tup(v) -> tuple:
    return tuple(int(c) for c in v)


class Renormalizer:
    """Runs phases 1-9 for one configuration, keeping one RenormState across sites."""

    def __init__(self, cfg: RenormConfig, params: ParamPoint, field_: UniformField,
                 record_touched: bool = False):
        self.cfg = cfg
        self.params = params
        self.field = field_
        self.thr = params.thresholds()
        self.skey = np.uint64(sample_key(np.uint64(field_.master_seed), field_.sample_index))
        self.state = RenormState(cfg.d, cfg.s)
        self.geometry = BlockGeometry(cfg.n, cfg.d)
        self.record_touched = record_touched
        self._targets: dict = {}
        self._site: tuple = (0, 0)
        self._touched: set = set()
        self._site_steps = 0
        self._broken: list = []

    def target(self, which: int) -> TargetSets:
        if which not in self._targets:
            self._targets[which] = TargetSets.build(self.cfg, self.cfg.beta(which))
        return self._targets[which]

    def raw_u(self, lows: np.ndarray, axes: np.ndarray) -> np.ndarray:
        keys = edge_hashes(np.ascontiguousarray(lows, dtype=np.int64),
                           np.ascontiguousarray(axes, dtype=np.int64))
        return uniforms_for(keys, np.uint64(self.field.master_seed), self.field.sample_index)

    def raw_threshold(self, lows: np.ndarray, axes: np.ndarray) -> np.ndarray:
        cls = edge_class_array(np.ascontiguousarray(lows, dtype=np.int64).reshape(-1, self.cfg.d),
                               np.ascontiguousarray(axes, dtype=np.int64), self.cfg.s)
        return self.thr[cls]

    # phase 1
    def phase1(self, center=None) -> bool:
        """E_1 = H-edges of the seed at ``center``; success iff all are q-open."""
        cfg, st = self.cfg, self.state
        c = np.zeros(cfg.d, dtype=np.int64) if center is None else np.asarray(center, np.int64)
        st.phase = 1
        pts = seed_box(c, cfg.m, cfg.s)
        lows, axes = [], []
        for p in pts:
            for a in range(cfg.s):
                if p[a] - c[a] < cfg.m:
                    lows.append(p)
                    axes.append(a)
        lows = np.array(lows, dtype=np.int64).reshape(-1, cfg.d)
        axes = np.array(axes, dtype=np.int64)
        ok = bool(np.all(self.raw_u(lows, axes) < self.params.q)) if axes.size else True
        st.k = 1
        self._emit("1", c, 0, ok, c if ok else None, int(axes.size), "")
        if ok:
            open_seed_edges(st.edges, lows, axes, self.params.q, st.bits, st.off)
            add_vertices(st.verts, pts, st.bits, st.off)
            if self.record_touched and axes.size:
                self._touched.update(int(v) for v in edge_codes(lows, axes, st.bits, st.off))
        return ok

    def _emit(self, phase, center, radius, success, seed, touched, note):
        rec = {"site": list(self._site), "phase": phase, "step": self.state.k,
               "box": {"center": _tup(center), "radius": int(radius)}, "success": bool(success),
               "seed_center": None if seed is None else _tup(seed), "edges_touched": int(touched)}
        if note:
            rec["note"] = note
        self.state.trace.append(rec)

    # one step
    def step(self, phase: str, center: np.ndarray, which: int, M: np.ndarray) -> StepOutcome:
        cfg, st = self.cfg, self.state
        if cfg.step_limit is not None and st.k >= cfg.step_limit:
            return StepOutcome(False, None, "step limit reached")
        radius = cfg.radius(which)
        st.check_range(center, radius)
        tg = self.target(which)
        F = center + tg.F @ M.T
        T = center + tg.T @ M.T
        broken = []
        if st.explored(F).any():
            broken.append("explored region meets F")
        if near_explored(st.verts, T, center, radius, st.bits, st.off).any():
            broken.append("(R ∪ Δ_v R) meets T")
        for cond in broken:
            if cfg.strict:
                self._emit(phase, center, radius, False, None, 0, "precondition: " + cond)
                raise RenormPreconditionError(self._site, phase, st.k, cond)
            self._broken.append({"phase": phase, "step": st.k, "condition": cond})
        touched = List.empty_list(types.int64)
        new_edges = List.empty_list(types.int64)
        viol = np.zeros(2, dtype=np.int64)
        explore_step(st.edges, st.verts, center, radius, cfg.delta, self.thr, cfg.s, self.skey,
                     st.bits, st.off, touched, new_edges, viol)
        st.violations += viol
        st.k += 1
        self._site_steps += 1
        if self.record_touched:
            self._touched.update(touched)
        nxt = self._next_seed(center, M, tg, F, T)
        self._emit(phase, center, radius, nxt is not None, nxt, len(touched),
                   "; ".join("precondition: " + c for c in broken))
        if nxt is None:
            return StepOutcome(False, None, "no seed reached")
        return StepOutcome(True, nxt)

    def _next_seed(self, center, M, tg: TargetSets, F, T) -> np.ndarray | None:
        """Lexicographically first q-open m-seed in F joined by a (p,q)-open
        edge to an explored vertex of T."""
        if tg.centers.shape[0] == 0 or tg.tf_t.size == 0:
            return None
        st = self.state
        t_expl = st.explored(T)
        use = t_expl[tg.tf_t]
        if not use.any():
            return None
        ta, fb = T[tg.tf_t[use]], F[tg.tf_f[use]]
        lows, axes = _edge_of(ta, fb)
        u = self.raw_u(lows, axes)
        hit = u < self.raw_threshold(lows, axes)
        marked = np.zeros(F.shape[0], dtype=bool)
        marked[tg.tf_f[use][hit]] = True
        cand = marked[tg.members].any(axis=1)
        if not cand.any():
            return None
        centers = center + tg.centers @ M.T
        good = cand.copy()
        if tg.seed_a.shape[1]:
            sa = center + tg.seed_a[cand] @ M.T
            sb = center + tg.seed_b[cand] @ M.T
            lw, ax = _edge_of(sa.reshape(-1, self.cfg.d), sb.reshape(-1, self.cfg.d))
            qopen = (self.raw_u(lw, ax) < self.params.q).reshape(sa.shape[0], sa.shape[1])
            good[np.flatnonzero(cand)] = qopen.all(axis=1)
        idx = np.flatnonzero(good)
        if idx.size == 0:
            return None
        pts = centers[idx]
        first = np.lexsort(pts.T[::-1])[0]
        return pts[first]

    def _advance(self, phase, center, origin, which, done, budget, row_ref=0):
        c = center
        for _ in range(budget):
            M = phase_matrix(phase, c - origin, self.cfg, row_ref)
            out = self.step(phase, c, which, M)
            if not out.success:
                return out
            c = out.center
            if done(c - origin):
                return StepOutcome(True, c)
        return StepOutcome(False, None, "step budget exhausted")

    def run_phase(self, phase: int, center, origin, start: str = "lower") -> StepOutcome:
        """Phases 2-9 from the seed at ``center`` for the site with block origin ``origin``.

        Phase 3 returns the lower seed and stores the upper one under seeds['3u'].
        """
        cfg, n = self.cfg, self.cfg.n
        center = np.asarray(center, dtype=np.int64)
        origin = np.asarray(origin, dtype=np.int64)
        self.state.phase = phase
        rel = center - origin
        if phase == 2:
            ref = 2 * cfg.N if start == "upper" else 0
            return self._advance("2", center, origin, 1, lambda r: r[0] >= 9 * n,
                                 cfg.budget(2, start), ref)
        if phase == 3:
            low = self.step("3l", center, 2, phase_matrix("3l", rel, cfg))
            if not low.success:
                return low
            up = self.step("3u", center, 3, phase_matrix("3u", rel, cfg))
            if not up.success:
                return up
            self.state.seeds["3u"] = up.center
            return low
        if phase == 4:
            return self._advance("4", center, origin, 1, lambda r: r[1] <= -9 * n,
                                 cfg.budget(4, start))
        if phase in (5, 8):
            return self.step(str(phase), center, 2, phase_matrix(str(phase), rel, cfg))
        if phase in (6, 9):
            return self._advance(str(phase), center, origin, 1, lambda r: r[0] >= 24 * n,
                                 cfg.budget(phase, start))
        if phase == 7:
            return self._advance("7", center, origin, 1, lambda r: r[1] >= 21 * n,
                                 cfg.budget(7, start))
        raise ValueError(f"phase must be 2..9, got {phase}")

    def determine_site(self, x, entry=None) -> SiteResult:
        """Z(x) from the incoming seed centre ``entry`` (origin seed for x = o)."""
        x = tuple(int(v) for v in x)
        self._site = x
        self._touched = set()
        self._site_steps = 0
        self._broken = []
        geo = self.geometry
        origin = geo.origin(x)
        if entry is None:
            if x != (0, 0):
                raise ValueError("sites other than the origin need an incoming seed")
            entry = origin.copy()
            if not self.phase1(entry):
                return self._finish(SiteResult(x, 0, "lower", _tup(entry), failed_phase="1",
                                               reason="seed not open"))
        entry = np.asarray(entry, dtype=np.int64)
        start = "upper" if entry[1] - origin[1] > geo.N else "lower"
        res = SiteResult(x, 0, start, _tup(entry))
        seeds = {}
        c = entry
        for ph in (2, 3, 4, 5, 6):
            out = self.run_phase(ph, c, origin, start)
            if not out.success:
                return self._finish(res, str(ph), out.reason, seeds)
            c = out.center
            seeds[str(ph)] = _tup(c)
            if ph == 3:
                seeds["3u"] = _tup(self.state.seeds["3u"])
        res.exit_lower = _tup(c)
        c = np.asarray(seeds["3u"], dtype=np.int64)
        for ph in (7, 8, 9):
            out = self.run_phase(ph, c, origin, start)
            if not out.success:
                return self._finish(res, str(ph), out.reason, seeds)
            c = out.center
            seeds[str(ph)] = _tup(c)
        res.exit_upper = _tup(c)
        res.Z = 1
        return self._finish(res, None, "", seeds)

    def _finish(self, res: SiteResult, phase=None, reason="", seeds=None) -> SiteResult:
        if phase is not None:
            res.failed_phase = phase
            res.reason = reason
            res.exit_lower = None if res.Z == 0 else res.exit_lower
        res.Z = 1 if phase is None and res.Z == 1 else res.Z
        if res.Z == 0:
            res.exit_lower = res.exit_upper = None
        res.steps = self._site_steps
        res.seeds = dict(seeds or {})
        res.touched = self._touched
        res.preconditions = list(self._broken)
        return res

    def write_trace(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in self.state.trace:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


# audits -----------------------------------------------------------------------------

@dataclass
class Audit:
    n_edges: int
    n_E: int
    monotone_violations: int
    bracket_violations: int
    zeta_bound_violations: int
    max_inspections: int
    max_inspections_E: int

    @property
    def clean(self) -> bool:
        return self.monotone_violations == 0 and self.bracket_violations == 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def audit(engine: Renormalizer, slack: int = 8) -> Audit:
    """Recheck gamma <= U < zeta on every stored edge and zeta <= threshold + slack*delta on E."""
    ex = engine.state.export()
    n = ex["axes"].shape[0]
    if n == 0:
        return Audit(0, 0, int(engine.state.violations[_MONO]),
                     int(engine.state.violations[_BRACKET]), 0, 0, 0)
    u = engine.raw_u(ex["lows"], ex["axes"])
    thr = engine.raw_threshold(ex["lows"], ex["axes"])
    bad_bracket = ~((ex["gamma"] <= u) & (u < ex["zeta"]))
    E = ex["in_E"]
    bound = thr + slack * engine.cfg.delta + 1e-12
    bad_zeta = E & (ex["zeta"] > bound)
    return Audit(n, int(E.sum()), int(engine.state.violations[_MONO]),
                 int(engine.state.violations[_BRACKET]) + int(bad_bracket.sum()),
                 int(bad_zeta.sum()), int(ex["inspections"].max()),
                 int(ex["inspections"][E].max()) if E.any() else 0)


@dataclass
class CertifiedPath:
    found: bool
    lows: np.ndarray
    axes: np.ndarray
    reverified: bool

    @property
    def length(self) -> int:
        return int(self.axes.shape[0])


def certify_path(engine: Renormalizer, source, target, slack: int = 8) -> CertifiedPath:
    """Shortest path in E from ``source`` to ``target`` over edges whose zeta is
    at most threshold + slack*delta, then recheck U < threshold + slack*delta."""
    ex = engine.state.export()
    d = engine.cfg.d
    thr = engine.raw_threshold(ex["lows"], ex["axes"])
    ok = ex["in_E"] & (ex["zeta"] <= thr + slack * engine.cfg.delta + 1e-12)
    lows, axes = ex["lows"][ok], ex["axes"][ok]
    st = engine.state
    idx, found = path_search(lows, axes, np.asarray(source, dtype=np.int64),
                             np.asarray(target, dtype=np.int64), st.bits, st.off)
    if not found:
        return CertifiedPath(False, np.zeros((0, d), dtype=np.int64), np.zeros(0, dtype=np.int64),
                             False)
    pl, pa = lows[idx].reshape(-1, d), axes[idx]
    u = engine.raw_u(pl, pa)
    again = bool(np.all(u < engine.raw_threshold(pl, pa) + slack * engine.cfg.delta))
    return CertifiedPath(True, pl, pa, again)


# cluster growth on the renormalized graph ---------------------------------------------

@dataclass
class GrowthStep:
    t: int
    site: tuple
    Z: int
    rho_hat: float


@dataclass
class GrowthResult:
    A: list
    B: list
    steps: list
    reached_max: bool
    extinct: bool

    @property
    def rho_hat(self) -> float:
        return self.steps[-1].rho_hat if self.steps else math.nan

    def to_dict(self) -> dict:
        return {"A": [list(a) for a in self.A], "B": [list(b) for b in self.B],
                "steps": [{"t": s.t, "site": list(s.site), "Z": s.Z, "rho_hat": s.rho_hat}
                          for s in self.steps],
                "reached_max": self.reached_max, "extinct": self.extinct}


def grow_cluster(z_of: Callable[[tuple, list], int], max_sites: int) -> GrowthResult:
    """Cluster-growth process of o on G with oriented edges x -> x + (1, +-1).

    Edges are ordered by target (x1, x2) and then by source, so a site is
    examined only after every site of the previous column that will ever be
    examined.  ``z_of(y, sources)`` returns Z(y) given the sources in A
    pointing to y.
    """
    if max_sites < 1:
        raise ValueError("max_sites must be >= 1")
    A, B, steps = [], [], []
    inA, seen = set(), set()
    succ = 0
    o = (0, 0)
    z = int(z_of(o, []))
    seen.add(o)
    (A if z else B).append(o)
    if z:
        inA.add(o)
    succ += z
    steps.append(GrowthStep(1, o, z, succ / 1))
    while len(steps) < max_sites:
        cands = {}
        for x in A:
            for dy in (-1, 1):
                y = (x[0] + 1, x[1] + dy)
                if y not in seen:
                    cands.setdefault(y, []).append(x)
        if not cands:
            return GrowthResult(A, B, steps, False, True)
        y = min(cands)
        z = int(z_of(y, sorted(cands[y])))
        seen.add(y)
        if z:
            A.append(y)
            inA.add(y)
        else:
            B.append(y)
        succ += z
        steps.append(GrowthStep(len(steps) + 1, y, z, succ / (len(steps) + 1)))
    return GrowthResult(A, B, steps, True, False)


class RenormOracle:
    """Z(y) from the exploration engine, passing exit seeds between sites.

    Incoming seed priority: the lower-branch exit of y - (1, -1), which lands
    in the upper half of Lambda_y, then the upper-branch exit of y - (1, 1).
    """

    def __init__(self, engine: Renormalizer):
        self.engine = engine
        self.results: dict = {}

    def __call__(self, y, sources) -> int:
        if y == (0, 0):
            res = self.engine.determine_site(y)
        else:
            a = self.results.get((y[0] - 1, y[1] + 1))
            b = self.results.get((y[0] - 1, y[1] - 1))
            entry = None
            if a is not None and a.Z and a.exit_lower is not None:
                entry = a.exit_lower
            elif b is not None and b.Z and b.exit_upper is not None:
                entry = b.exit_upper
            if entry is None:
                raise RuntimeError(f"site {y} has no incoming seed")
            res = self.engine.determine_site(y, entry)
        self.results[y] = res
        return res.Z


def grow_renormalized_cluster(cfg: RenormConfig, params: ParamPoint, seed: int, max_sites: int,
                              sample: int = 0, z_oracle: Callable | None = None,
                              record_touched: bool = False) -> tuple:
    """Run the cluster-growth process; returns (GrowthResult, oracle or None).

    ``z_oracle`` replaces the exploration (e.g. to force Z); by default Z is
    determined by a Renormalizer on UniformField(seed, sample).
    """
    if z_oracle is not None:
        return grow_cluster(z_oracle, max_sites), None
    eng = Renormalizer(cfg, params, UniformField(seed, sample), record_touched)
    orc = RenormOracle(eng)
    return grow_cluster(orc, max_sites), orc


def disjoint_columns(results: dict) -> bool:
    """Edges touched for distinct sites with equal first coordinate are disjoint."""
    by_col: dict = {}
    for site, res in results.items():
        by_col.setdefault(site[0], []).append(res.touched)
    for sets in by_col.values():
        for i in range(len(sets)):
            for j in range(i + 1, len(sets)):
                if sets[i] & sets[j]:
                    return False
    return True


# separation ---------------------------------------------------------------------------

def separation_check(points, M: int, k: int):
    """Greedy choice of M points with pairwise sup-distance > k, or None.

    Succeeds whenever len(points) > (2k+1)^d (M - 1): each chosen point
    excludes at most (2k+1)^d candidates.
    """
    pts = [tuple(int(c) for c in p) for p in points]
    if M < 1:
        raise ValueError("M must be >= 1")
    chosen = []
    for p in pts:
        if all(max(abs(a - b) for a, b in zip(p, q)) > k for q in chosen):
            chosen.append(p)
            if len(chosen) == M:
                return chosen
    return None


def separation_bound(M: int, k: int, d: int) -> int:
    """The implemented T(M, k): more points than this always admit a separated M-subset."""
    return (2 * k + 1) ** d * (M - 1)
