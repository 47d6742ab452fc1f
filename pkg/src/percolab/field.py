"""Per-edge uniform variates and the monotone (p, q, t) coupling.

Every edge of Z^d carries one variate U(e), produced by a stateless hash of
(master seed, sample index, edge identity).  The edge identity is the
coordinate vector of its lower endpoint plus its axis, so any finite window
of the lattice (box, slab, torus, local exploration) sees the same value for
the same edge.  Openness is always a threshold test ``u < threshold``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .lattice import BULK, H_EDGE, MINUS, PLUS, LatticeSpec

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SAMPLE_MUL = np.uint64(0xD6E8FEB86659FD93)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S32 = np.uint64(32)
_INV32 = 1.0 / 4294967296.0


@nb.njit(inline="always")
def mix64(z):
    """splitmix64 finalizer; a bijection of uint64 with full avalanche."""
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(inline="always")
def edge_hash(coords, axis):
    """Seed-independent identity hash of the edge (coords, coords + e_axis)."""
    h = mix64(_GOLDEN * np.uint64(axis + 1))
    for c in coords:
        h = mix64((h ^ np.uint64(c)) + _GOLDEN)
    return h


@nb.njit(inline="always")
def sample_key(master_seed, sample_index):
    a = mix64(np.uint64(master_seed) + _GOLDEN)
    b = mix64(np.uint64(sample_index) * _SAMPLE_MUL + _GOLDEN)
    return mix64(a ^ b)


@nb.njit(inline="always")
def uniform(ekey, skey):
    """Map (edge hash, sample key) to the midpoint of a 32-bit cell in (0, 1)."""
    x = mix64(ekey ^ skey)
    x = mix64(x + skey)
    return (np.float64(x >> _S32) + 0.5) * _INV32


@nb.njit(cache=True)
def edge_hashes(coords, axes):
    n = axes.shape[0]
    out = np.empty(n, dtype=np.uint64)
    for i in range(n):
        out[i] = edge_hash(coords[i], axes[i])
    return out


@nb.njit(cache=True, nogil=True)
def uniforms_for(ekeys, master_seed, sample_index):
    skey = sample_key(master_seed, sample_index)
    out = np.empty(ekeys.shape[0])
    for i in range(ekeys.shape[0]):
        out[i] = uniform(ekeys[i], skey)
    return out


@nb.njit(cache=True, nogil=True)
def uniforms_batch(ekeys, master_seed, start, stop):
    out = np.empty((stop - start, ekeys.shape[0]))
    for j in range(stop - start):
        skey = sample_key(master_seed, start + j)
        for i in range(ekeys.shape[0]):
            out[j, i] = uniform(ekeys[i], skey)
    return out


@dataclass(frozen=True)
class ParamPoint:
    """Parameters of omega_{p,q,t}: q on H-edges, p on E+ (and bulk), t on E-.

    ``t=None`` means t = p, which is the two-parameter measure P_{p,q}.
    """

    p: float
    q: float
    t: float | None = None

    def __post_init__(self):
        for name in ("p", "q", "t"):
            v = getattr(self, name)
            if v is not None and not (0.0 <= v <= 1.0):
                raise ValueError(f"{name}={v} outside [0, 1]")

    @property
    def t_eff(self) -> float:
        return self.p if self.t is None else self.t

    def thresholds(self) -> np.ndarray:
        """Threshold per class code (H, PLUS, MINUS, BULK)."""
        out = np.empty(4)
        out[H_EDGE] = self.q
        out[PLUS] = self.p
        out[MINUS] = self.t_eff
        out[BULK] = self.p
        return out

    def shifted(self, delta: float) -> "ParamPoint":
        t = None if self.t is None else min(1.0, self.t + delta)
        return ParamPoint(min(1.0, self.p + delta), min(1.0, self.q + delta), t)


@dataclass(frozen=True)
class UniformField:
    """The variates {U(e)} of one sample."""

    master_seed: int
    sample_index: int = 0

    def __post_init__(self):
        if not (0 <= self.master_seed < 2**64):
            raise ValueError("master_seed must fit in 64 bits")
        if self.sample_index < 0:
            raise ValueError("sample_index must be non-negative")

    def uniforms(self, spec: LatticeSpec) -> np.ndarray:
        return uniforms_for(spec.edge_keys, np.uint64(self.master_seed), self.sample_index)

    def u(self, spec: LatticeSpec, e: int) -> float:
        spec.check_edge(e)
        return float(uniforms_for(spec.edge_keys[e:e + 1], np.uint64(self.master_seed),
                                  self.sample_index)[0])

    def u_at(self, coords, axis: int) -> float:
        """Variate of the Z^d edge {coords, coords + e_axis}."""
        key = edge_hash(np.asarray(coords, dtype=np.int64), axis)
        return float(uniforms_for(np.array([key], dtype=np.uint64),
                                  np.uint64(self.master_seed), self.sample_index)[0])

    def batch(self, spec: LatticeSpec, n_samples: int) -> np.ndarray:
        """Variates for samples sample_index .. sample_index + n_samples - 1."""
        return uniforms_batch(spec.edge_keys, np.uint64(self.master_seed),
                              self.sample_index, self.sample_index + n_samples)


def edge_thresholds(spec: LatticeSpec, params: ParamPoint) -> np.ndarray:
    return params.thresholds()[spec.edge_classes]


def is_open(field: UniformField, spec: LatticeSpec, e: int, params: ParamPoint) -> bool:
    return field.u(spec, e) < params.thresholds()[spec.edge_classes[e]]


def open_mask(field: UniformField, spec: LatticeSpec, params: ParamPoint) -> np.ndarray:
    return field.uniforms(spec) < edge_thresholds(spec, params)


def conditioned_above(u, gamma):
    """Affine map of U(0,1) onto U(gamma, 1): the law of U given U >= gamma."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma >= 1.0) or np.any(gamma < 0.0):
        raise ValueError("gamma must lie in [0, 1)")
    return gamma + (1.0 - gamma) * u


def resample_conditionally_closed(field: UniformField, spec: LatticeSpec, e: int,
                                  gamma: float) -> float:
    """Variate of edge e drawn from its law conditioned on being gamma-closed."""
    if not (0.0 <= gamma < 1.0):
        raise ValueError(f"gamma={gamma} must lie in [0, 1)")
    return float(conditioned_above(field.u(spec, e), gamma))
