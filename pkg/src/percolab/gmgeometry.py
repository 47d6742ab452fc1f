"""Seed-event geometry: the annulus S, the strip F, its boundary T and m-seeds.

All sets are given in canonical position (growth along +x1, transverse
coordinates 2..s non-negative).  Integer radii are ``b = floor(beta n)`` and
``a = floor(alpha n)``; the enclosing box is B_{b+a}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .lattice import LatticeSpec, iter_box


def as_fraction(x) -> Fraction:
    """Exact rational from a Fraction, int, decimal string like '1/4', or float."""
    return Fraction(str(x)) if isinstance(x, float) else Fraction(x)


def scaled(x, n: int) -> int:
    return int(math.floor(as_fraction(x) * n))


@dataclass(frozen=True)
class GMEventSpec:
    alpha: object
    beta: object
    m: int
    n: int
    d: int = 3
    s: int = 2
    kind: str = "seed_reach"

    def __post_init__(self):
        if self.kind not in ("U_count", "V_count", "seed_reach", "finite_size_conditional"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.s < 2 and self.kind != "U_count":
            raise ValueError("the strip F needs s >= 2")
        if not self.b > self.m:
            raise ValueError(f"geometry needs beta*n > m (got floor(beta n)={self.b}, m={self.m})")
        if self.a < 1:
            raise ValueError("alpha*n must be at least 1")

    @property
    def a(self) -> int:
        return scaled(self.alpha, self.n)

    @property
    def b(self) -> int:
        return scaled(self.beta, self.n)

    @property
    def radius(self) -> int:
        return self.a + self.b

    @property
    def seeds_fit(self) -> bool:
        return self.a > 2 * self.m + 1

    @cached_property
    def box(self) -> LatticeSpec:
        return LatticeSpec.box(self.d, self.s, self.radius)


def in_H(x: np.ndarray, s: int) -> np.ndarray:
    return np.all(x[..., s:] == 0, axis=-1)


def seed_box(center, m: int, s: int) -> np.ndarray:
    """center + B_m^H as a coordinate array."""
    center = np.asarray(center, dtype=np.int64)
    d = center.shape[0]
    side = 2 * m + 1
    pts = np.indices((side,) * s).reshape(s, -1).T - m
    out = np.zeros((pts.shape[0], d), dtype=np.int64)
    out[:, :s] = pts
    return out + center


def seed_edges(center, m: int, s: int) -> list:
    """H-edges of center + B_m^H as (lower endpoint, axis) pairs."""
    out = []
    for x in seed_box(center, m, s):
        for a in range(s):
            if x[a] - center[a] < m:
                out.append((tuple(int(v) for v in x), a))
    return out


def F_points(g: GMEventSpec) -> np.ndarray:
    a, b, d, s = g.a, g.b, g.d, g.s
    ranges = [range(b + 1, b + a + 1)] + [range(0, b + a + 1)] * (s - 1)
    grids = np.indices([len(r) for r in ranges]).reshape(s, -1).T
    pts = np.zeros((grids.shape[0], d), dtype=np.int64)
    pts[:, 0] = grids[:, 0] + b + 1
    pts[:, 1:s] = grids[:, 1:]
    return pts


def neighbours(pts: np.ndarray) -> np.ndarray:
    d = pts.shape[1]
    out = []
    for a in range(d):
        for sg in (-1, 1):
            q = pts.copy()
            q[:, a] += sg
            out.append(q)
    return np.concatenate(out)


def _unique_rows(x: np.ndarray) -> np.ndarray:
    return np.unique(x, axis=0) if x.shape[0] else x


def exterior_boundary(pts: np.ndarray) -> np.ndarray:
    """Delta_v of a point set in Z^d."""
    nb = _unique_rows(neighbours(pts))
    own = {tuple(r) for r in pts}
    keep = np.array([tuple(r) not in own for r in nb], dtype=bool)
    return nb[keep]


def T_points(g: GMEventSpec) -> np.ndarray:
    ext = exterior_boundary(F_points(g))
    return ext[np.abs(ext).max(axis=1) <= g.radius]


def S_points(g: GMEventSpec) -> np.ndarray:
    pts = iter_box((0,) * g.d, g.radius)
    pts = pts[in_H(pts, g.s)]
    r = np.abs(pts).max(axis=1)
    return pts[(r >= g.b + 1) & (r <= g.b + g.a)]


def seed_centers(g: GMEventSpec) -> np.ndarray:
    """Centers z with z + B_m^H inside F, in lexicographic order."""
    a, b, m, d, s = g.a, g.b, g.m, g.d, g.s
    lo1, hi1 = b + 1 + m, b + a - m
    lo, hi = m, b + a - m
    if hi1 < lo1 or hi < lo:
        return np.zeros((0, d), dtype=np.int64)
    ranges = [np.arange(lo1, hi1 + 1)] + [np.arange(lo, hi + 1)] * (s - 1)
    grids = np.meshgrid(*ranges, indexing="ij")
    pts = np.zeros((grids[0].size, d), dtype=np.int64)
    for i in range(s):
        pts[:, i] = grids[i].ravel()
    return pts


class BoxIndex:
    """Precomputed index arrays of the seed-event sets inside the box B_{b+a}."""

    def __init__(self, g: GMEventSpec):
        self.g = g
        spec = g.box
        self.spec = spec
        vi = spec.vertex_indices
        nv = spec.n_vertices
        self.F = vi(F_points(g))
        self.T = vi(T_points(g))
        self.S = vi(S_points(g))
        self.seedH = vi(seed_box((0,) * g.d, g.m, g.s))
        self.in_F = np.zeros(nv, dtype=bool)
        self.in_F[self.F] = True
        self.in_S = np.zeros(nv, dtype=bool)
        self.in_S[self.S] = True
        ext_S = exterior_boundary(S_points(g))
        ext_S = ext_S[np.abs(ext_S).max(axis=1) <= g.radius]
        self.dS = vi(ext_S)
        centers = seed_centers(g)
        self.centers = centers
        if centers.shape[0]:
            self.seed_vertices = np.stack([vi(seed_box(c, g.m, g.s)) for c in centers])
            self.seed_edge_idx = np.stack([
                np.array([spec.edge_index(spec.vertex_index(x), ax)
                          for x, ax in seed_edges(c, g.m, g.s)], dtype=np.int64)
                for c in centers])
        else:
            self.seed_vertices = np.zeros((0, 1), dtype=np.int64)
            self.seed_edge_idx = np.zeros((0, 1), dtype=np.int64)
        in_T = np.zeros(nv, dtype=bool)
        in_T[self.T] = True
        eu, ev = spec.edge_u, spec.edge_v
        tf = (in_T[eu] & self.in_F[ev]) | (in_T[ev] & self.in_F[eu])
        self.tf_edges = np.flatnonzero(tf)
        self.tf_T = np.where(in_T[eu[tf]], eu[tf], ev[tf])
        self.tf_F = np.where(in_T[eu[tf]], ev[tf], eu[tf])

    def K(self, is_open: np.ndarray) -> np.ndarray:
        """K_{m,n}: vertices of T with an open edge to a vertex of an open m-seed in F."""
        if self.centers.shape[0] == 0:
            return np.zeros(0, dtype=np.int64)
        if self.seed_edge_idx.shape[1]:
            good = is_open[self.seed_edge_idx].all(axis=1)
        else:
            good = np.ones(self.centers.shape[0], dtype=bool)
        in_seed = np.zeros(self.spec.n_vertices, dtype=bool)
        in_seed[self.seed_vertices[good].ravel()] = True
        hit = is_open[self.tf_edges] & in_seed[self.tf_F]
        return np.unique(self.tf_T[hit])
