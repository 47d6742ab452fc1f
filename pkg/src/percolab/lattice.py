"""Finite pieces of Z^d: boxes, slabs and tori with stable integer indexing.

Vertices are indexed by a mixed-radix encoding of their coordinates (last
axis fastest).  Edge slots are ``vertex * d + axis`` for the edge from a vertex
to its +e_axis neighbour; slots that do not exist (free boundary) are skipped,
so edge indices run over 0..|E|-1 in slot order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from typing import Iterable, Sequence

import numba as nb
import numpy as np

H_EDGE, PLUS, MINUS, BULK = 0, 1, 2, 3
DEFECT = "defect_sublattice"
AXIS = "axis_direction"
FREE = "free"
PERIODIC = "periodic"


class EdgeClass(IntEnum):
    H = H_EDGE
    PLUS = PLUS
    MINUS = MINUS
    BULK = BULK


@nb.njit(inline="always")
def zd_edge_class(coords, axis, s, axis_rule):
    """Class of the Z^d edge {x, x + e_axis} given its lower endpoint x."""
    d = coords.shape[0]
    if axis_rule:
        return BULK if axis == 0 else H_EDGE
    in_h = axis < s
    if in_h:
        for i in range(s, d):
            if coords[i] != 0:
                in_h = False
                break
    if in_h:
        return H_EDGE
    top = coords[d - 1] + (1 if axis == d - 1 else 0)
    return PLUS if top > 0 else MINUS


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry of a finite lattice window.

    ``lo``/``hi`` are inclusive coordinate ranges per axis.  ``L`` and ``N``
    only describe how the window was built (side and slab half-thickness) and
    are carried into output rows.
    """

    d: int
    s: int
    lo: tuple
    hi: tuple
    bc: tuple
    class_rule: str = DEFECT
    L: int | None = None
    N: int | None = None

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("d must be at least 2")
        if not 1 <= self.s <= self.d:
            raise ValueError("s must satisfy 1 <= s <= d")
        if self.class_rule not in (DEFECT, AXIS):
            raise ValueError(f"unknown class_rule {self.class_rule!r}")
        for name in ("lo", "hi", "bc"):
            if len(getattr(self, name)) != self.d:
                raise ValueError(f"{name} must have length d={self.d}")
        for a in range(self.d):
            if self.hi[a] < self.lo[a]:
                raise ValueError(f"empty extent on axis {a}")
            if self.bc[a] not in (FREE, PERIODIC):
                raise ValueError(f"unknown boundary condition {self.bc[a]!r}")
            if self.bc[a] == PERIODIC and self.hi[a] - self.lo[a] + 1 < 3:
                raise ValueError("periodic axes need length >= 3")

    # constructors -------------------------------------------------------
    @classmethod
    def box(cls, d: int, s: int, radius: int, class_rule: str = DEFECT) -> "LatticeSpec":
        """B_radius = {-radius..radius}^d with free boundary."""
        return cls(d, s, (-radius,) * d, (radius,) * d, (FREE,) * d, class_rule,
                   L=2 * radius + 1)

    @classmethod
    def crossing_box(cls, d: int, s: int, L: int, N: int | None = None,
                     class_rule: str = DEFECT) -> "LatticeSpec":
        """Free-boundary box of side L; axes >= 2 become {-N..N} when N is given."""
        lo, hi = [], []
        for a in range(d):
            if a >= 2 and N is not None:
                lo.append(-N)
                hi.append(N)
            else:
                lo.append(-(L // 2))
                hi.append(-(L // 2) + L - 1)
        return cls(d, s, tuple(lo), tuple(hi), (FREE,) * d, class_rule, L=L, N=N)

    @classmethod
    def slab(cls, d: int, s: int, L: int, N: int, plane_bc: str = PERIODIC,
             class_rule: str = DEFECT) -> "LatticeSpec":
        """Z^2 x {-N..N}^(d-2) cut to side L in the plane."""
        base = cls.crossing_box(d, s, L, N, class_rule)
        bc = tuple(plane_bc if a < 2 else FREE for a in range(d))
        return cls(d, s, base.lo, base.hi, bc, class_rule, L=L, N=N)

    @classmethod
    def torus(cls, d: int, s: int, shape: Sequence[int], transverse_bc: str = FREE,
              class_rule: str = DEFECT) -> "LatticeSpec":
        """Periodic along the first s axes; H sits at transverse coordinate 0."""
        lo, hi, bc = [], [], []
        for a, n in enumerate(shape):
            if a < s:
                lo.append(0)
                hi.append(n - 1)
                bc.append(PERIODIC)
            else:
                lo.append(-((n - 1) // 2))
                hi.append(-((n - 1) // 2) + n - 1)
                bc.append(transverse_bc)
        return cls(d, s, tuple(lo), tuple(hi), tuple(bc), class_rule, L=int(shape[0]))

    # sizes and indexing --------------------------------------------------
    @cached_property
    def shape(self) -> tuple:
        return tuple(h - l + 1 for l, h in zip(self.lo, self.hi))

    @cached_property
    def strides(self) -> np.ndarray:
        st = np.ones(self.d, dtype=np.int64)
        for a in range(self.d - 2, -1, -1):
            st[a] = st[a + 1] * self.shape[a + 1]
        return st

    @property
    def n_vertices(self) -> int:
        return int(np.prod(self.shape))

    @property
    def n_edges(self) -> int:
        return int(self.edge_u.shape[0])

    def vertex_index(self, coords) -> int:
        c = np.asarray(coords, dtype=np.int64)
        if c.shape != (self.d,) or np.any(c < self.lo) or np.any(c > self.hi):
            raise IndexError(f"coordinates {tuple(c)} outside lattice")
        return int(((c - np.asarray(self.lo)) * self.strides).sum())

    def vertex_indices(self, coords: np.ndarray) -> np.ndarray:
        c = np.asarray(coords, dtype=np.int64)
        return ((c - np.asarray(self.lo)) * self.strides).sum(axis=-1)

    def contains(self, coords: np.ndarray) -> np.ndarray:
        c = np.asarray(coords, dtype=np.int64)
        return np.all((c >= self.lo) & (c <= self.hi), axis=-1)

    @cached_property
    def coords(self) -> np.ndarray:
        grids = np.indices(self.shape).reshape(self.d, -1).T
        return (grids + np.asarray(self.lo)).astype(np.int64)

    @cached_property
    def _edges(self):
        d = self.d
        c = self.coords
        nv = self.n_vertices
        us, vs, axes, slots = [], [], [], []
        for a in range(d):
            at_top = c[:, a] == self.hi[a]
            if self.bc[a] == PERIODIC:
                src = np.arange(nv)
            else:
                src = np.flatnonzero(~at_top)
            step = np.where(at_top[src], -(self.shape[a] - 1), 1) * self.strides[a]
            us.append(src)
            vs.append(src + step)
            axes.append(np.full(src.shape[0], a))
            slots.append(src * d + a)
        slots = np.concatenate(slots)
        order = np.argsort(slots, kind="stable")
        eu = np.concatenate(us)[order].astype(np.int64)
        ev = np.concatenate(vs)[order].astype(np.int64)
        ax = np.concatenate(axes)[order].astype(np.int64)
        slots = slots[order].astype(np.int64)
        slot_to_edge = np.full(nv * d, -1, dtype=np.int64)
        slot_to_edge[slots] = np.arange(slots.shape[0])
        return eu, ev, ax, slots, slot_to_edge

    @property
    def edge_u(self) -> np.ndarray:
        return self._edges[0]

    @property
    def edge_v(self) -> np.ndarray:
        return self._edges[1]

    @property
    def edge_axis(self) -> np.ndarray:
        return self._edges[2]

    @property
    def edge_slot(self) -> np.ndarray:
        return self._edges[3]

    def edge_index(self, v: int, axis: int) -> int:
        e = int(self._edges[4][v * self.d + axis])
        if e < 0:
            raise IndexError(f"no edge from vertex {v} along axis {axis}")
        return e

    def edge_between(self, x, y) -> int:
        """Index of the edge joining neighbouring coordinates x and y."""
        x = np.asarray(x, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        diff = np.flatnonzero(x != y)
        if diff.shape[0] != 1:
            raise IndexError("not neighbours")
        a = int(diff[0])
        step = (y[a] - x[a]) % self.shape[a]
        if step == 1:
            return self.edge_index(self.vertex_index(x), a)
        if step == self.shape[a] - 1:
            return self.edge_index(self.vertex_index(y), a)
        raise IndexError("not neighbours")

    def check_edge(self, e: int) -> None:
        if not 0 <= e < self.n_edges:
            raise IndexError(f"edge index {e} out of range 0..{self.n_edges - 1}")

    @cached_property
    def edge_keys(self) -> np.ndarray:
        from .field import edge_hashes
        return edge_hashes(self.coords[self.edge_u], self.edge_axis)

    # sublattice ------------------------------------------------------------
    @cached_property
    def vertex_in_H(self) -> np.ndarray:
        if self.s == self.d:
            return np.ones(self.n_vertices, dtype=bool)
        return np.all(self.coords[:, self.s:] == 0, axis=1)

    @cached_property
    def edge_classes(self) -> np.ndarray:
        if self.class_rule == AXIS:
            return np.where(self.edge_axis == 0, BULK, H_EDGE).astype(np.int8)
        inh = self.vertex_in_H
        both = inh[self.edge_u] & inh[self.edge_v]
        top = np.maximum(self.coords[self.edge_u, -1], self.coords[self.edge_v, -1])
        cls = np.where(top > 0, PLUS, MINUS)
        return np.where(both, H_EDGE, cls).astype(np.int8)

    @cached_property
    def face_bits(self) -> np.ndarray:
        """Bit 2a (2a+1) set for vertices on the low (high) face of free axis a."""
        bits = np.zeros(self.n_vertices, dtype=np.int64)
        for a in range(self.d):
            if self.bc[a] == FREE:
                bits |= (self.coords[:, a] == self.lo[a]).astype(np.int64) << (2 * a)
                bits |= (self.coords[:, a] == self.hi[a]).astype(np.int64) << (2 * a + 1)
        return bits

    def describe(self) -> dict:
        return {"d": self.d, "s": self.s, "lo": list(self.lo), "hi": list(self.hi),
                "bc": list(self.bc), "class_rule": self.class_rule, "L": self.L, "N": self.N}


def classify_edge(spec: LatticeSpec, e: int) -> EdgeClass:
    spec.check_edge(e)
    return EdgeClass(int(spec.edge_classes[e]))


@dataclass(frozen=True)
class Region:
    """The box B_radius(center) intersected with the lattice window."""

    spec: LatticeSpec
    center: tuple = field(default=None)
    radius: int | None = None

    @classmethod
    def whole(cls, spec: LatticeSpec) -> "Region":
        return cls(spec, None, None)

    @cached_property
    def mask(self) -> np.ndarray:
        if self.radius is None:
            return np.ones(self.spec.n_vertices, dtype=bool)
        c = np.asarray(self.center, dtype=np.int64)
        return np.all(np.abs(self.spec.coords - c) <= self.radius, axis=1)

    @cached_property
    def vertices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @cached_property
    def face_bits(self) -> np.ndarray:
        """Face contact bits of the region box (faces clipped by the window kept)."""
        if self.radius is None:
            return self.spec.face_bits
        spec = self.spec
        c = np.asarray(self.center, dtype=np.int64)
        bits = np.zeros(spec.n_vertices, dtype=np.int64)
        x = spec.coords
        for a in range(spec.d):
            lo = max(c[a] - self.radius, spec.lo[a]) if spec.bc[a] == FREE else c[a] - self.radius
            hi = min(c[a] + self.radius, spec.hi[a]) if spec.bc[a] == FREE else c[a] + self.radius
            bits |= (x[:, a] == lo).astype(np.int64) << (2 * a)
            bits |= (x[:, a] == hi).astype(np.int64) << (2 * a + 1)
        bits[~self.mask] = 0
        return bits

    @cached_property
    def shell(self) -> np.ndarray:
        """Vertices at sup-distance exactly radius from the center (B_m minus B_{m-1})."""
        if self.radius is None:
            raise ValueError("the whole window has no shell")
        c = np.asarray(self.center, dtype=np.int64)
        dist = np.abs(self.spec.coords - c).max(axis=1)
        return np.flatnonzero(dist == self.radius)


def box_region(spec: LatticeSpec, radius: int, center=None) -> Region:
    center = (0,) * spec.d if center is None else tuple(int(v) for v in center)
    return Region(spec, center, int(radius))


def _as_mask(spec: LatticeSpec, K) -> np.ndarray:
    if isinstance(K, Region):
        return K.mask
    K = np.asarray(K)
    if K.dtype == bool:
        return K
    m = np.zeros(spec.n_vertices, dtype=bool)
    m[K.astype(np.int64)] = True
    return m


def boundary_sets(spec: LatticeSpec, K, subgraph: np.ndarray | None = None) -> dict:
    """Interior vertex boundary, exterior vertex boundary and edge boundary of K.

    ``subgraph`` is an optional boolean mask over edges; only those edges count
    as adjacencies.
    """
    inK = _as_mask(spec, K)
    eu, ev = spec.edge_u, spec.edge_v
    use = np.ones(spec.n_edges, dtype=bool) if subgraph is None else np.asarray(subgraph, bool)
    cross = use & (inK[eu] != inK[ev])
    ends = np.concatenate([eu[cross], ev[cross]])
    interior = np.unique(ends[inK[ends]])
    exterior = np.unique(ends[~inK[ends]])
    return {"interior": interior, "exterior_v": exterior, "exterior_e": np.flatnonzero(cross)}


def sublattice_intersection(region: Region) -> np.ndarray:
    """Vertices of the region lying in H."""
    return region.vertices[region.spec.vertex_in_H[region.vertices]]


def shell_size(d: int, m: int) -> int:
    """|B_m minus B_{m-1}| in Z^d."""
    if m == 0:
        return 1
    return (2 * m + 1) ** d - (2 * m - 1) ** d


def edges_within(spec: LatticeSpec, vertex_mask: np.ndarray) -> np.ndarray:
    return vertex_mask[spec.edge_u] & vertex_mask[spec.edge_v]


def iter_box(center: Iterable[int], radius: int) -> np.ndarray:
    """All integer points of center + B_radius as an array."""
    center = np.asarray(list(center), dtype=np.int64)
    d = center.shape[0]
    side = 2 * radius + 1
    pts = np.indices((side,) * d).reshape(d, -1).T - radius
    return pts + center
