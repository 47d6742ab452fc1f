"""Monte Carlo estimators: connection probabilities, crossing, critical curves
and the subcriticality certificate."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .clusters import ClusterForest, forest_from_open
from .field import ParamPoint, UniformField
from .lattice import AXIS, DEFECT, FREE, LatticeSpec, shell_size
from .sampling import Z95, EstimateRecord, run_samples


def _meta(spec: LatticeSpec | dict, params: ParamPoint, **extra) -> dict:
    sd = spec.describe() if isinstance(spec, LatticeSpec) else dict(spec)
    out = {"spec": sd, "params": {"p": params.p, "q": params.q, "t": params.t_eff}}
    out.update(extra)
    return out


class SampleView:
    """One sample of the configuration on a lattice window, computed lazily."""

    def __init__(self, spec: LatticeSpec, params: ParamPoint, field_: UniformField):
        self.spec = spec
        self.params = params
        self.field = field_

    @cached_property
    def u(self) -> np.ndarray:
        return self.field.uniforms(self.spec)

    @cached_property
    def open(self) -> np.ndarray:
        return self.u < self.params.thresholds()[self.spec.edge_classes]

    @cached_property
    def forest(self) -> ClusterForest:
        return forest_from_open(self.spec, self.open)


def estimate_event(spec: LatticeSpec, params: ParamPoint, event: Callable, n_samples: int,
                   seed: int, workers: int = 1, name: str = "event",
                   batched: bool = False) -> EstimateRecord:
    """Mean of ``event`` over independent samples.

    ``event`` receives a SampleView, or with ``batched=True`` a boolean array
    (samples x edges) of open states and returns one value per row.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    thr = params.thresholds()
    seed64 = np.uint64(seed)

    if batched:
        def chunk(a, b):
            masks = kernels.open_masks(spec.edge_keys, spec.edge_classes, thr, seed64, a, b)
            return np.asarray(event(masks), dtype=float)
        values = run_samples(chunk, n_samples, workers, chunk=8192)
    else:
        def chunk(a, b):
            return np.array([float(event(SampleView(spec, params, UniformField(seed, i))))
                             for i in range(a, b)])
        values = run_samples(chunk, n_samples, workers, chunk=256)
    return EstimateRecord.from_values(values, seed, name, _meta(spec, params))


# local explorations in Z^d ------------------------------------------------

def _local_stats(d, s, class_rule, params, center, radius, n_samples, seed, workers):
    thr = params.thresholds()
    c = np.asarray(center, dtype=np.int64)
    axis_rule = class_rule == AXIS

    def chunk(a, b):
        mr, hits, size = kernels.local_cluster_stats(c, radius, s, axis_rule, thr,
                                                     np.uint64(seed), a, b)
        return np.stack([mr, hits, size], axis=1)
    return run_samples(chunk, n_samples, workers, chunk=16384)


def theta(d: int, s: int, params: ParamPoint, n: int, n_samples: int, seed: int,
          class_rule: str = DEFECT, workers: int = 1, center=None) -> EstimateRecord:
    """P(v ↔ ∂B_n(v)) in Z^d (v = origin by default)."""
    center = (0,) * d if center is None else center
    st = _local_stats(d, s, class_rule, params, center, n, n_samples, seed, workers)
    spec = {"d": d, "s": s, "L": n, "N": None, "class_rule": class_rule}
    return EstimateRecord.from_values(st[:, 0] >= n, seed, "theta",
                                      _meta(spec, params, n=n, center=list(center)),
                                      indicator=True)


@dataclass
class OneArmProfile:
    m: list
    records: list
    decay_rate: float
    intercept: float
    r2: float
    dropped: list
    degenerate: bool


def fit_decay(m_list: Sequence[int], means: Sequence[float]):
    """Least-squares slope of -log(mean) against m; zero means are dropped."""
    m = np.asarray(m_list, dtype=float)
    y = np.asarray(means, dtype=float)
    keep = y > 0
    dropped = [int(v) for v in m[~keep]]
    if np.count_nonzero(keep) < 2:
        return math.nan, math.nan, math.nan, dropped, True
    mx, ly = m[keep], -np.log(y[keep])
    slope, icpt = np.polyfit(mx, ly, 1)
    resid = ly - (slope * mx + icpt)
    tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 if tot == 0.0 else 1.0 - float((resid ** 2).sum()) / tot
    return float(slope), float(icpt), r2, dropped, False


def one_arm_profile(d: int, s: int, params: ParamPoint, m_list: Sequence[int], n_samples: int,
                    seed: int, v=None, class_rule: str = DEFECT, workers: int = 1) -> OneArmProfile:
    """P(v ↔ ∂B_m(v)) for every m in m_list from one set of explorations."""
    v = (0,) * d if v is None else tuple(v)
    m_list = [int(m) for m in m_list]
    st = _local_stats(d, s, class_rule, params, v, max(m_list), n_samples, seed, workers)
    spec = {"d": d, "s": s, "L": max(m_list), "N": None, "class_rule": class_rule}
    recs = [EstimateRecord.from_values(st[:, 0] >= m, seed, "one_arm",
                                       _meta(spec, params, m=m, center=list(v)), indicator=True)
            for m in m_list]
    slope, icpt, r2, dropped, degen = fit_decay(m_list, [r.mean for r in recs])
    return OneArmProfile(m_list, recs, slope, icpt, r2, dropped, degen)


# crossing and critical points ---------------------------------------------

def _check_free(spec: LatticeSpec, axes) -> None:
    for a in axes:
        if spec.bc[a] != FREE:
            raise ValueError(f"crossing needs a free boundary on axis {a}")


def crossing_probability(spec: LatticeSpec, params: ParamPoint, axis: int, n_samples: int,
                         seed: int, workers: int = 1) -> EstimateRecord:
    _check_free(spec, [axis])
    thr = params.thresholds()

    def chunk(a, b):
        return kernels.crossing_indicator(spec.n_vertices, spec.edge_u, spec.edge_v,
                                          spec.edge_keys, spec.edge_classes, spec.face_bits,
                                          thr, axis, np.uint64(seed), a, b)
    vals = run_samples(chunk, n_samples, workers, chunk=32)
    return EstimateRecord.from_values(vals, seed, "crossing", _meta(spec, params, axis=axis),
                                      indicator=True)


def crossing_thresholds(spec: LatticeSpec, p: float, n_samples: int, seed: int,
                        axes: Sequence[int] = (0, 1), t: float | None = None,
                        workers: int = 1, start: int = 0) -> np.ndarray:
    """Per sample and axis, the least q for which the window is crossed (exact)."""
    axes = np.asarray(axes, dtype=np.int64)
    _check_free(spec, axes)
    thr = ParamPoint(p, 0.0, t).thresholds()

    def chunk(a, b):
        return kernels.crossing_thresholds(spec.n_vertices, spec.edge_u, spec.edge_v,
                                           spec.edge_keys, spec.edge_classes, spec.face_bits,
                                           thr, axes, np.uint64(seed), start + a, start + b)
    return run_samples(chunk, n_samples, workers, chunk=16)


@dataclass
class CriticalEstimate:
    q_hat: float
    stderr: float
    ci: tuple
    L: int
    n_samples: int
    brackets: list
    flag: str | None
    drift: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def row(self) -> dict:
        spec = self.meta.get("spec", {})
        return {"event": "q_c", "d": spec.get("d", ""), "s": spec.get("s", ""), "L": self.L,
                "N": spec.get("N", ""), "p": self.meta.get("p", ""), "q": self.q_hat,
                "mean": self.q_hat, "stderr": self.stderr, "n": self.n_samples,
                "seed": self.meta.get("seed", "")}

    def to_dict(self) -> dict:
        return {"q_hat": self.q_hat, "stderr": self.stderr, "ci": list(self.ci), "L": self.L,
                "n_samples": self.n_samples, "brackets": [list(b) for b in self.brackets],
                "flag": self.flag, "drift": self.drift, "meta": self.meta}


def _pooled(thr: np.ndarray, q: float) -> np.ndarray:
    """Per-sample crossing indicator at q, averaged over the crossing axes."""
    return (thr < q).mean(axis=1)


def _bisect(thr_source: Callable[[int], np.ndarray], n0: int, cap: int, tol: float):
    thr = thr_source(n0)
    lo, hi = 0.0, 1.0
    brackets = [(lo, hi)]
    if _pooled(thr, 0.0).mean() > 0.5:
        return 0.0, thr, brackets, "crossing above 1/2 at q=0"
    if _pooled(thr, 1.0).mean() < 0.5:
        return 1.0, thr, brackets, "crossing below 1/2 at q=1"
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        x = _pooled(thr, mid)
        f = x.mean()
        se = x.std(ddof=1) / math.sqrt(x.shape[0]) if x.shape[0] > 1 else 0.0
        if abs(f - 0.5) <= Z95 * se and thr.shape[0] * 2 <= cap:
            thr = thr_source(thr.shape[0] * 2)
            continue
        if f < 0.5:
            lo = mid
        else:
            hi = mid
        brackets.append((lo, hi))
    return 0.5 * (lo + hi), thr, brackets, None


def _bootstrap_median_se(thr: np.ndarray, seed: int, reps: int = 400) -> float:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    n = thr.shape[0]
    clipped = np.clip(thr, 0.0, 1.0)
    meds = np.empty(reps)
    for r in range(reps):
        pick = rng.integers(0, n, n)
        meds[r] = np.median(clipped[pick].ravel())
    return float(meds.std(ddof=1))


def bisect_critical_q(spec: LatticeSpec, p: float, L: int | None = None, tolerance: float = 2e-3,
                      samples_per_step: int = 100, seed: int = 0, max_samples: int = 800,
                      axes: Sequence[int] | None = None, t: float | None = None,
                      workers: int = 1) -> CriticalEstimate:
    """The q at which the pooled face-to-face crossing probability equals 1/2.

    Bisection runs on the empirical crossing curve of a fixed, growing sample
    set (common random numbers), so each midpoint evaluation is monotone in q.
    ``L`` names a second side length (default spec.L // 2) at which the same
    procedure is repeated to report the finite-size drift.
    """
    axes = tuple(range(min(2, spec.d))) if axes is None else tuple(axes)
    cache: dict = {}

    def source_for(sp):
        def get(n):
            have = cache.get(sp)
            if have is None or have.shape[0] < n:
                start = 0 if have is None else have.shape[0]
                more = crossing_thresholds(sp, p, n - start, seed, axes, t, workers, start=start)
                have = more if have is None else np.concatenate([have, more])
                cache[sp] = have
            return have[:n]
        return get

    def run(sp):
        q_hat, thr, brackets, flag = _bisect(source_for(sp), samples_per_step, max_samples,
                                             tolerance)
        se = 0.0 if flag else _bootstrap_median_se(thr, seed)
        return q_hat, se, thr.shape[0], brackets, flag

    q_hat, se, n_used, brackets, flag = run(spec)
    drift = {}
    L2 = (spec.L or 0) // 2 if L is None else L
    if L2 and L2 >= 2 and spec.L is not None and L2 != spec.L:
        sp2 = LatticeSpec.crossing_box(spec.d, spec.s, L2, spec.N, spec.class_rule)
        q2, se2, n2, _, flag2 = run(sp2)
        drift = {"L": L2, "q_hat": q2, "stderr": se2, "n_samples": n2, "flag": flag2,
                 "shift": q_hat - q2}
    meta = {"spec": spec.describe(), "p": p, "t": t, "axes": list(axes), "seed": seed,
            "tolerance": tolerance}
    return CriticalEstimate(q_hat, se, (q_hat - Z95 * se, q_hat + Z95 * se), spec.L or 0,
                            n_used, brackets, flag, drift, meta)


def slab_critical_curve(d: int, s: int, p: float, L: int, N_list: Sequence[int | None],
                        seed: int = 0, class_rule: str = DEFECT, **kw) -> list:
    """q̂_c^N for each slab half-thickness in N_list (None = full box of side L)."""
    out = []
    for N in N_list:
        spec = LatticeSpec.crossing_box(d, s, L, N, class_rule)
        out.append(bisect_critical_q(spec, p, L=0, seed=seed, **kw))
    return out


# subcriticality certificate -------------------------------------------------

def certificate_constant(d: int, L: int) -> float:
    """Smallest K' with |∂B_m| <= K' m^d for 1 <= m <= L."""
    return max(shell_size(d, m) / m ** d for m in range(1, L + 1))


def certificate_representatives(d: int, s: int, L: int, class_rule: str = DEFECT) -> list:
    """One vertex per translation class relative to H that B_L(v) can see.

    Transverse coordinates beyond L+1 give the same local law as L+1, and the
    local law is symmetric under permutations and reflections of the
    transverse axes, so sorted tuples in 0..L+1 cover every class.
    """
    if class_rule == AXIS or s == d:
        return [(0,) * d]
    reps = []
    for tail in itertools.combinations_with_replacement(range(L + 2), d - s):
        reps.append((0,) * s + tuple(tail))
    return reps


@dataclass
class Certificate:
    L: int
    K_prime: float
    representatives: list
    phi: list
    phi_upper: list
    records: list
    holds: bool

    def to_dict(self) -> dict:
        return {"L": self.L, "K_prime": self.K_prime,
                "representatives": [list(v) for v in self.representatives],
                "phi": self.phi, "phi_upper": self.phi_upper, "holds": self.holds}


def subcritical_certificate(d: int, s: int, params: ParamPoint, L: int, n_samples: int,
                            seed: int, class_rule: str = DEFECT, workers: int = 1) -> Certificate:
    """phi_v = K' L^d E|S_L(v)| for every representative; holds iff all upper CIs < 1/2."""
    if L < 1:
        raise ValueError("L must be >= 1")
    kp = certificate_constant(d, L)
    scale = kp * L ** d
    reps = certificate_representatives(d, s, L, class_rule)
    spec = {"d": d, "s": s, "L": L, "N": None, "class_rule": class_rule}
    phis, uppers, recs = [], [], []
    for i, v in enumerate(reps):
        st = _local_stats(d, s, class_rule, params, v, L, n_samples,
                          _sub_seed(seed, i), workers)
        rec = EstimateRecord.from_values(st[:, 1], _sub_seed(seed, i), "S_L",
                                         _meta(spec, params, center=list(v)), indicator=False)
        recs.append(rec)
        phis.append(scale * rec.mean)
        uppers.append(scale * (rec.mean + Z95 * rec.stderr))
    holds = all(u < 0.5 for u in uppers)
    return Certificate(L, kp, reps, phis, uppers, recs, holds)


def _sub_seed(seed: int, k: int) -> int:
    """Independent stream for the k-th sub-experiment of a run."""
    from .field import mix64
    return int(mix64(np.uint64(seed) ^ mix64(np.uint64(k + 1))))


# other observables ----------------------------------------------------------

def spanning_fraction(spec: LatticeSpec, params: ParamPoint, axis: int, min_fraction: float,
                      n_samples: int, seed: int, workers: int = 1) -> tuple:
    """Fraction of samples with exactly one spanning component of size >= min_fraction |V|."""
    _check_free(spec, [axis])
    thr = params.thresholds()
    min_size = max(1, int(math.ceil(min_fraction * spec.n_vertices)))

    def chunk(a, b):
        return kernels.spanning_sizes(spec.n_vertices, spec.edge_u, spec.edge_v, spec.edge_keys,
                                      spec.edge_classes, spec.face_bits, thr, axis, min_size,
                                      np.uint64(seed), a, b)
    counts = run_samples(chunk, n_samples, workers, chunk=16)
    rec = EstimateRecord.from_values(counts == 1, seed, "unique_spanning",
                                     _meta(spec, params, axis=axis, min_fraction=min_fraction),
                                     indicator=True)
    return rec, counts


def boundary_to_H_ratio_mean(d: int, s: int, params: ParamPoint, n: int, n_samples: int,
                             seed: int, workers: int = 1) -> EstimateRecord:
    """Mean of |C(∂B_n; H)| / |B_n ∩ H| with connections inside B_n."""
    from .clusters import boundary_to_H_ratio_from_open
    from .lattice import box_region

    if s >= d:
        raise ValueError("the ratio needs s < d")
    spec = LatticeSpec.box(d, s, n)
    region = box_region(spec, n)
    thr = params.thresholds()

    def chunk(a, b):
        masks = kernels.open_masks(spec.edge_keys, spec.edge_classes, thr, np.uint64(seed), a, b)
        return np.array([boundary_to_H_ratio_from_open(spec, om, region) for om in masks])
    vals = run_samples(chunk, n_samples, workers, chunk=64)
    return EstimateRecord.from_values(vals, seed, "boundary_to_H", _meta(spec, params, n=n),
                                      indicator=False)


# seed events ---------------------------------------------------------------

def _roots(spec: LatticeSpec, use: np.ndarray) -> np.ndarray:
    from .clusters import label_components
    root, _, _ = label_components(spec.n_vertices, spec.edge_u, spec.edge_v, use,
                                  np.zeros(spec.n_vertices, dtype=np.int64))
    return root


def _mask_chunk(spec: LatticeSpec) -> int:
    return max(1, (1 << 22) // max(spec.n_edges, 1))


def _gm_meta(ev, params: ParamPoint, **extra) -> dict:
    return _meta(ev.box, params, alpha=str(ev.alpha), beta=str(ev.beta), m=ev.m, n=ev.n,
                 a=ev.a, b=ev.b, kind=ev.kind, degenerate=not ev.seeds_fit, **extra)


def gm_seed_event(params: ParamPoint, ev, n_samples: int, seed: int, workers: int = 1,
                  index=None) -> EstimateRecord:
    """Seed events in the box B_{b+a}, by kind.

    ``U_count``: |{x in Δ_v S : x ↔ B_m^H off S}|; ``V_count``: the same with
    T and F in place of Δ_v S and S; ``seed_reach``: indicator that B_m^H
    connects inside the box to K_{m,n}.  When the strip is too thin for an
    m-seed the record is flagged ``degenerate`` and seed_reach is 0.
    """
    from .gmgeometry import BoxIndex

    if ev.kind == "finite_size_conditional":
        raise ValueError("use finite_size_conditional for that event kind")
    idx = BoxIndex(ev) if index is None else index
    spec = idx.spec
    thr = params.thresholds()
    eu, ev_ = spec.edge_u, spec.edge_v
    if ev.kind == "U_count":
        avoid, targets = idx.in_S, idx.dS
    elif ev.kind == "V_count":
        avoid, targets = idx.in_F, idx.T
    else:
        avoid, targets = None, None
    allowed = None if avoid is None else ~(avoid[eu] | avoid[ev_])

    def chunk(a, b):
        masks = kernels.open_masks(spec.edge_keys, spec.edge_classes, thr, np.uint64(seed), a, b)
        out = np.empty(b - a)
        for j, om in enumerate(masks):
            root = _roots(spec, om if allowed is None else om & allowed)
            src = np.unique(root[idx.seedH])
            if targets is None:
                k = idx.K(om)
                out[j] = float(k.size > 0 and bool(np.isin(root[k], src).any()))
            else:
                out[j] = float(np.count_nonzero(np.isin(root[targets], src)))
        return out
    vals = run_samples(chunk, n_samples, workers, chunk=_mask_chunk(spec))
    return EstimateRecord.from_values(vals, seed, ev.kind, _gm_meta(ev, params),
                                      indicator=ev.kind == "seed_reach")


@dataclass
class ConditionalSetup:
    """Validated data of the finite-size criterion on one box.

    ``f_edges`` is Δ_e R ∩ E_B in edge-index order, ``f_outer`` the endpoint of
    each outside R, ``gamma`` the level per f-edge.
    """

    index: object
    in_R: np.ndarray
    f_edges: np.ndarray
    f_outer: np.ndarray
    gamma: np.ndarray
    delta: float
    outside: np.ndarray


def conditional_setup(ev, R, gamma, delta: float, index=None) -> ConditionalSetup:
    """Check the hypotheses on R and gamma; raise ValueError naming the failed one.

    ``R`` is a coordinate array (k x d) or a boolean vertex mask over the box;
    ``gamma`` is a scalar, an array aligned with Δ_e R ∩ E_B, or a callable
    ``(lower_endpoint, axis) -> level``.
    """
    from .gmgeometry import BoxIndex

    idx = BoxIndex(ev) if index is None else index
    spec = idx.spec
    R = np.asarray(R)
    if R.dtype == bool:
        if R.shape != (spec.n_vertices,):
            raise ValueError("R mask has the wrong length")
        in_R = R.copy()
    else:
        R = R.reshape(-1, spec.d).astype(np.int64)
        if R.size and np.abs(R).max() > ev.radius:
            raise ValueError("R must lie inside B_{beta n + alpha n}")
        in_R = np.zeros(spec.n_vertices, dtype=bool)
        in_R[spec.vertex_indices(R)] = True
    if not in_R[idx.seedH].all():
        raise ValueError("R must contain B_m^H")
    eu, ev_ = spec.edge_u, spec.edge_v
    cross = in_R[eu] != in_R[ev_]
    f_edges = np.flatnonzero(cross)
    f_outer = np.where(in_R[eu[f_edges]], ev_[f_edges], eu[f_edges])
    touched = in_R.copy()
    touched[f_outer] = True
    if touched[idx.T].any():
        raise ValueError("(R ∪ Δ_v R) must not meet T")
    if in_R[idx.F].any():
        raise ValueError("R must not meet F")
    if not (0.0 <= delta <= 1.0):
        raise ValueError("delta must lie in [0, 1]")
    if callable(gamma):
        g = np.array([gamma(tuple(int(c) for c in spec.coords[eu[e]]), int(spec.edge_axis[e]))
                      for e in f_edges], dtype=float)
    else:
        g = np.broadcast_to(np.asarray(gamma, dtype=float), f_edges.shape).copy()
    if g.size and (g.min() < 0.0 or g.max() > 1.0 - delta):
        raise ValueError("gamma must take values in [0, 1 - delta]")
    outside = ~(in_R[eu] | in_R[ev_])
    return ConditionalSetup(idx, in_R, f_edges, f_outer, g, float(delta), outside)


def conditional_event_values(params: ParamPoint, setup: ConditionalSetup, n_samples: int,
                             seed: int, mode: str = "truncated", workers: int = 1) -> np.ndarray:
    """Per-sample indicator of E given F; NaN marks samples rejected in rejection mode.

    ``truncated`` draws each f-variate from U(gamma(f), 1) as
    gamma + (1 - gamma) u; ``rejection`` keeps the raw variates and discards
    samples in which some f is gamma(f)-open.
    """
    from .field import uniforms_batch

    if mode not in ("truncated", "rejection"):
        raise ValueError(f"unknown mode {mode!r}")
    idx = setup.index
    spec = idx.spec
    thr_e = params.thresholds()[spec.edge_classes]
    g, dl, fe = setup.gamma, setup.delta, setup.f_edges

    def chunk(a, b):
        u = uniforms_batch(spec.edge_keys, np.uint64(seed), a, b)
        out = np.empty(b - a)
        for j in range(b - a):
            uf = u[j, fe]
            if mode == "truncated":
                uf = g + (1.0 - g) * uf
            elif np.any(uf < g):
                out[j] = np.nan
                continue
            om = u[j] < thr_e
            root = _roots(spec, om & setup.outside)
            k = idx.K(om)
            hit = (uf < g + dl) & np.isin(root[setup.f_outer], root[k])
            out[j] = float(hit.any())
        return out
    return run_samples(chunk, n_samples, workers, chunk=_mask_chunk(spec) // 2 or 1)


def finite_size_conditional(params: ParamPoint, ev, R, gamma, delta: float, n_samples: int,
                            seed: int, mode: str = "truncated", workers: int = 1,
                            index=None) -> EstimateRecord:
    """P(E | F) for the finite-size criterion on the box B_{b+a} of ``ev``.

    E: some path joins R to K_{m,n} using exactly one edge f of Δ_e R, which
    is (gamma(f) + delta)-open, and otherwise (p,q)-open edges of the box
    outside R.  F: every f in Δ_e R ∩ E_B is gamma(f)-closed.
    """
    setup = conditional_setup(ev, R, gamma, delta, index)
    vals = conditional_event_values(params, setup, n_samples, seed, mode, workers)
    kept = vals[~np.isnan(vals)]
    if kept.size == 0:
        raise ValueError("no sample satisfied the conditioning event; raise n_samples")
    meta = _gm_meta(ev, params, mode=mode, delta=setup.delta, n_f_edges=int(setup.f_edges.size),
                    acceptance=kept.size / vals.size)
    return EstimateRecord.from_values(kept, seed, "finite_size_conditional", meta,
                                      indicator=True)
