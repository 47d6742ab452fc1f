import math
from fractions import Fraction

import numpy as np
import pytest

from percolab.estimators import (
    bisect_critical_q, boundary_to_H_ratio_mean, certificate_constant,
    certificate_representatives, crossing_probability, estimate_event, finite_size_conditional,
    fit_decay, gm_seed_event, one_arm_profile, subcritical_certificate, theta,
)
from percolab.field import ParamPoint
from percolab.gmgeometry import GMEventSpec, seed_box
from percolab.lattice import AXIS, LatticeSpec, shell_size
from percolab.oracle import arm_probability
from percolab.sampling import EstimateRecord

B1_ARM = 0.9216  # P(o <-> dB_1) in Z^2 at (p,q)=(0.3,0.6): 1 - 0.7^2 0.4^2


def test_certain_event():
    r = estimate_event(LatticeSpec.box(2, 1, 1), ParamPoint(0.5, 0.5), lambda sv: True, 50, 1)
    assert r.mean == 1.0 and r.stderr == 0.0 and r.ci == (1.0, 1.0)


def test_n_samples_checked():
    with pytest.raises(ValueError):
        estimate_event(LatticeSpec.box(2, 1, 1), ParamPoint(0.5, 0.5), lambda sv: True, 0, 1)


def test_single_edge_marginal():
    spec = LatticeSpec.box(2, 1, 1)
    e = spec.edge_between((0, 0), (1, 0))
    r = estimate_event(spec, ParamPoint(0.37, 0.37), lambda m: m[:, e], 10**6, 3, batched=True)
    assert abs(r.mean - 0.37) < 4 * r.stderr
    assert r.stderr == pytest.approx(math.sqrt(r.mean * (1 - r.mean) / r.n))


def test_view_and_batched_agree():
    spec = LatticeSpec.box(2, 1, 2)
    e = 7
    a = estimate_event(spec, ParamPoint(0.4, 0.6), lambda sv: sv.open[e], 300, 9)
    b = estimate_event(spec, ParamPoint(0.4, 0.6), lambda m: m[:, e], 300, 9, batched=True)
    assert a.mean == b.mean


def test_indicator_ci_clamped():
    r = EstimateRecord.from_values([1] * 9 + [0], 0, "x")
    assert 0.0 <= r.ci[0] <= r.ci[1] <= 1.0
    assert r.stderr == pytest.approx(math.sqrt(0.9 * 0.1 / 10))


def test_ci_coverage_single_edge():
    spec = LatticeSpec.box(2, 1, 1)
    covered = 0
    for seed in range(100):
        r = estimate_event(spec, ParamPoint(0.3, 0.3), lambda m: m[:, 0], 400, seed, batched=True)
        covered += r.ci[0] <= 0.3 <= r.ci[1]
    assert covered >= 85


def test_theta_matches_oracle():
    r = theta(2, 1, ParamPoint(0.3, 0.6), 1, 200000, 5)
    assert abs(r.mean - B1_ARM) < 4 * r.stderr
    assert arm_probability(2, 1, ParamPoint(0.3, 0.6), 1) == pytest.approx(B1_ARM, abs=1e-12)


def test_theta_worker_independent():
    a = theta(3, 2, ParamPoint(0.2, 0.7), 3, 5000, 8, workers=1)
    b = theta(3, 2, ParamPoint(0.2, 0.7), 3, 5000, 8, workers=3)
    assert a.to_json() == b.to_json()


def test_estimators_monotone_under_coupling():
    lo = theta(3, 2, ParamPoint(0.2, 0.5), 4, 4000, 12)
    hi = theta(3, 2, ParamPoint(0.25, 0.6), 4, 4000, 12)
    assert lo.mean <= hi.mean
    spec = LatticeSpec.crossing_box(3, 2, 8, 2)
    c_lo = crossing_probability(spec, ParamPoint(0.2, 0.5), 0, 300, 4)
    c_hi = crossing_probability(spec, ParamPoint(0.22, 0.55), 0, 300, 4)
    assert c_lo.mean <= c_hi.mean


def test_one_arm_trivial_cases():
    full = one_arm_profile(3, 2, ParamPoint(1, 1), [1, 2, 3], 50, 0)
    assert all(r.mean == 1.0 for r in full.records) and full.decay_rate == pytest.approx(0.0)
    empty = one_arm_profile(3, 2, ParamPoint(0, 0), [1, 2, 3], 50, 0)
    assert empty.degenerate and empty.dropped == [1, 2, 3]


def test_fit_decay_exact_exponential():
    m = [2, 4, 6, 8]
    slope, icpt, r2, dropped, degen = fit_decay(m, [math.exp(-0.3 * x - 0.1) for x in m])
    assert slope == pytest.approx(0.3) and icpt == pytest.approx(0.1) and r2 == pytest.approx(1)
    assert fit_decay([1, 2, 3], [0.5, 0.0, 0.1])[3] == [2]


def test_crossing_extremes_and_periodic_axis():
    spec = LatticeSpec.crossing_box(2, 1, 10)
    assert crossing_probability(spec, ParamPoint(1, 1), 0, 20, 0).mean == 1.0
    assert crossing_probability(spec, ParamPoint(0, 0), 0, 20, 0).mean == 0.0
    with pytest.raises(ValueError):
        crossing_probability(LatticeSpec.torus(2, 1, (6, 3)), ParamPoint(0.5, 0.5), 0, 5, 0)


def test_bisect_brackets_shrink_and_worker_invariance():
    spec = LatticeSpec.crossing_box(2, 1, 24, None, AXIS)
    a = bisect_critical_q(spec, 0.3, samples_per_step=100, max_samples=400, seed=2)
    b = bisect_critical_q(spec, 0.3, samples_per_step=100, max_samples=400, seed=2, workers=3)
    assert a.to_dict() == b.to_dict()
    widths = [hi - lo for lo, hi in a.brackets]
    assert all(w2 <= w1 for w1, w2 in zip(widths, widths[1:]))
    assert widths[-1] <= 2e-3
    assert "shift" in a.drift and a.drift["L"] == 12
    assert abs(a.q_hat - 0.7) < 0.05


def test_bisect_isolated_lines():
    spec = LatticeSpec.crossing_box(2, 1, 16, None, AXIS)
    assert bisect_critical_q(spec, 0.0, samples_per_step=100, max_samples=200).q_hat > 0.9


def test_bisect_flags_non_bracketing():
    spec = LatticeSpec.crossing_box(2, 1, 8)
    est = bisect_critical_q(spec, 1.0, samples_per_step=20, max_samples=40)
    assert est.flag is not None and est.q_hat == 0.0


def test_certificate_constant_is_max_ratio():
    for d in (2, 3):
        for L in (1, 3, 5):
            want = max(Fraction(shell_size(d, m), m ** d) for m in range(1, L + 1))
            assert certificate_constant(d, L) == pytest.approx(float(want))


def test_certificate_representatives():
    assert certificate_representatives(2, 1, 4, AXIS) == [(0, 0)]
    reps = certificate_representatives(3, 2, 2)
    assert reps == [(0, 0, 0), (0, 0, 1), (0, 0, 2), (0, 0, 3)]


def test_certificate_extremes():
    zero = subcritical_certificate(3, 2, ParamPoint(0, 0), 2, 50, 0)
    assert zero.holds and all(v == 0 for v in zero.phi)
    one = subcritical_certificate(3, 2, ParamPoint(1, 1), 2, 50, 0)
    assert not one.holds
    kp = certificate_constant(3, 2)
    assert one.phi[0] == pytest.approx(kp * 8 * shell_size(3, 2))


def test_certificate_deep_subcritical_axis_rule():
    cert = subcritical_certificate(2, 1, ParamPoint(0.05, 0.05), 4, 20000, 1, AXIS)
    assert cert.holds


def test_gm_spec_invariants():
    with pytest.raises(ValueError):
        GMEventSpec(Fraction(1, 2), Fraction(1, 8), 2, 8)  # beta n = 1 <= m
    thin = GMEventSpec(Fraction(1, 4), Fraction(1), 1, 8)  # alpha n = 2 <= 2m + 1
    assert not thin.seeds_fit
    r = gm_seed_event(ParamPoint(1, 1), thin, 3, 0)
    assert r.mean == 0.0 and r.meta["degenerate"]


def test_gm_seed_reach_extremes():
    ev = GMEventSpec(Fraction(1, 2), Fraction(1), 1, 8)
    assert gm_seed_event(ParamPoint(1, 1), ev, 5, 0).mean == 1.0
    assert gm_seed_event(ParamPoint(0, 0), ev, 5, 0).mean == 0.0


def test_gm_counts_are_non_negative_integers():
    ev = GMEventSpec(Fraction(1, 2), Fraction(1), 1, 8, kind="U_count")
    r = gm_seed_event(ParamPoint(0.2, 0.7), ev, 20, 0)
    assert r.mean >= 0 and not r.meta["indicator"]


def _cond(delta, gamma, mode="truncated", n=400, params=ParamPoint(0.2, 0.7)):
    ev = GMEventSpec(Fraction(1, 2), Fraction(1), 1, 8, kind="finite_size_conditional")
    R = seed_box(np.zeros(3, dtype=np.int64), 1, 2)
    return finite_size_conditional(params, ev, R, gamma, delta, n, 7, mode)


def test_conditional_delta_zero_is_zero():
    assert _cond(0.0, 0.05).mean == 0.0


def test_conditional_gamma_zero_is_unconditional():
    a, b = _cond(0.1, 0.0), _cond(0.1, 0.0, "rejection")
    assert a.mean == b.mean and b.meta["acceptance"] == 1.0


def test_conditional_preconditions():
    ev = GMEventSpec(Fraction(1, 2), Fraction(1), 1, 8, kind="finite_size_conditional")
    with pytest.raises(ValueError, match="B_m"):
        finite_size_conditional(ParamPoint(0.2, 0.7), ev, np.array([[5, 5, 0]]), 0.0, 0.1, 10, 0)
    big = seed_box(np.zeros(3, dtype=np.int64), 8, 2)
    with pytest.raises(ValueError, match="T|F"):
        finite_size_conditional(ParamPoint(0.2, 0.7), ev, big, 0.0, 0.1, 10, 0)
    with pytest.raises(ValueError, match="gamma"):
        _cond(0.1, 0.95)


@pytest.mark.slow
def test_seed_reach_increases_with_n():
    means = []
    for n in (8, 16, 32):
        ev = GMEventSpec(Fraction(1, 4), Fraction(1), 1, n)
        means.append(gm_seed_event(ParamPoint(0.15, 0.8), ev, 150, 3))
    assert means[0].mean <= means[1].mean <= means[2].mean


@pytest.mark.slow
def test_boundary_ratio_decreases():
    vals = [boundary_to_H_ratio_mean(3, 2, ParamPoint(0.1, 0.6), n, 2000, 4).mean
            for n in (4, 8, 12)]
    assert vals[0] > vals[1] > vals[2]
