import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from percolab.field import ParamPoint, UniformField
from percolab.gmrenorm import (
    BlockGeometry, RenormConfig, RenormPreconditionError, Renormalizer, audit, certify_path,
    disjoint_columns, grow_cluster, grow_renormalized_cluster, rotate_L, separation_bound,
    separation_check, site_vertices, steering,
)


# steering and geometry ------------------------------------------------------------

def test_phase3_rotation_example():
    assert steering((0, 0, 0), (1, 0, 0), "phase3").tolist() == [0, -1, 0]
    assert rotate_L((1, 2, 3, 4)).tolist() == [2, -1, 3, 4]


def test_phase2_example():
    assert steering((5, -2, 0), (1, 3, 0), "phase2", s=2).tolist() == [1, 3, 0]
    assert steering((5, 2, 0), (1, 3, 0), "phase2", s=2).tolist() == [1, -3, 0]


def test_zero_sign_is_identity():
    x = (4, -3, 2, 7)
    assert steering((0, 0, 0, 0), x, "phase2").tolist() == list(x)
    assert steering((0, 0, 0, 0), x, "phase5").tolist() == [4, 3, 2, 7]
    with pytest.raises(ValueError):
        steering((0, 0), (1, 1), "phase9")


@settings(max_examples=50, deadline=None)
@given(v=st.lists(st.integers(-9, 9), min_size=4, max_size=4),
       x=st.lists(st.integers(-9, 9), min_size=4, max_size=4))
def test_steering_keeps_coordinates_bounded(v, x):
    """Steered coordinates keep their size and point away from the sign of v_i."""
    y = steering(v, x, "phase2")
    assert y[0] == x[0]
    for i in range(1, 4):
        assert abs(y[i]) == abs(x[i])
        if v[i] > 0:
            assert y[i] == -x[i]


def test_block_geometry():
    g = BlockGeometry(2)
    assert g.N == 12
    x = (1, 1)
    lo, up = g.lower_center(x), g.upper_center(x)
    assert lo.tolist() == [48, 48, 0] and (up - lo).tolist() == [0, 24, 0]
    # the two halves are translates of B_N with disjoint interiors
    assert g.site_half(lo + np.array([0, 11, 0]), x) == "lower"
    assert g.site_half(lo + np.array([0, 13, 0]), x) == "upper"
    assert g.site_half(lo + np.array([0, -13, 0]), x) is None
    pc = g.passage_centers(x)
    assert len(pc) == 4
    # passage blocks of x sit next to Lambda^u of x + (1, -1) and Lambda^l of x + (1, 1)
    for nxt in (g.upper_center((2, 0)), g.lower_center((2, 2))):
        assert min(int(np.abs(c - nxt).max()) for c in pc) == 2 * g.N


def test_site_order():
    sites = site_vertices(2)
    assert sites == [(0, 0), (1, -1), (1, 1), (2, -2), (2, 0), (2, 2)]
    assert all((a + b) % 2 == 0 for a, b in sites)


def test_config_presets():
    desk = RenormConfig.desk()
    assert (desk.n, desk.m, desk.alpha_f, desk.N) == (8, 1, Fraction(1, 2), 48)
    full = RenormConfig.full(eta=0.8)
    assert full.alpha_f == Fraction(1, 100) and full.delta == pytest.approx(0.05)
    assert full.beta3_f == 2 + Fraction(1, 100) + Fraction(1, 10000)
    assert full.max_steps == 75
    assert full.budget(4, "lower") == 12 and full.budget(4, "upper") == 24
    with pytest.raises(ValueError):
        RenormConfig(n=8, m=2, alpha=Fraction(1, 2))  # alpha n = 4 <= 2m + 1
    with pytest.raises(ValueError):
        RenormConfig.desk(delta=1.0)


# phases and Z(x) -------------------------------------------------------------------

def _engine(p, q, delta=0.3, **kw):
    cfg = RenormConfig.desk(delta=delta, **kw)
    return Renormalizer(cfg, ParamPoint(p, q), UniformField(1))


def test_phase1_extremes():
    assert _engine(0.2, 1.0).phase1()
    assert not _engine(0.2, 0.0).phase1()


def test_phase1_m0_is_a_single_vertex():
    eng = _engine(0.0, 0.0, m=0)
    assert eng.phase1()


def test_closed_lattice_gives_zero():
    res = _engine(0.0, 0.0).determine_site((0, 0))
    assert res.Z == 0 and res.failed_phase == "1"
    growth, _ = grow_renormalized_cluster(RenormConfig.desk(), ParamPoint(0, 0), 0, 5)
    assert growth.A == [] and growth.extinct


@pytest.fixture(scope="module")
def open_run():
    cfg = RenormConfig.desk(delta=0.3, strict=False)
    growth, orc = grow_renormalized_cluster(cfg, ParamPoint(1, 1), 0, 3, record_touched=True)
    return cfg, growth, orc


@pytest.mark.slow
def test_open_lattice_sites_succeed(open_run):
    cfg, growth, orc = open_run
    assert [s.Z for s in growth.steps] == [1, 1, 1]
    assert growth.A == [(0, 0), (1, -1), (1, 1)]
    geo = BlockGeometry(cfg.n, cfg.d)
    for site, res in orc.results.items():
        assert res.steps <= cfg.max_steps
        assert geo.site_half(res.exit_lower, (site[0] + 1, site[1] - 1)) == "upper"
        assert geo.site_half(res.exit_upper, (site[0] + 1, site[1] + 1)) == "lower"


@pytest.mark.slow
def test_open_run_bookkeeping(open_run):
    cfg, _, orc = open_run
    au = audit(orc.engine)
    assert au.clean and au.zeta_bound_violations == 0 and au.n_E > 0


@pytest.mark.slow
def test_open_run_paths_reverify(open_run):
    _, _, orc = open_run
    for res in orc.results.values():
        for tgt in (res.exit_lower, res.exit_upper):
            path = certify_path(orc.engine, res.entry, tgt)
            assert path.found and path.reverified and path.length > 0


@pytest.mark.slow
def test_equal_column_sites_use_disjoint_edges(open_run):
    _, _, orc = open_run
    assert disjoint_columns(orc.results)
    assert orc.results[(1, -1)].touched and orc.results[(1, 1)].touched


@pytest.mark.slow
def test_trace_records(open_run, tmp_path):
    _, _, orc = open_run
    path = tmp_path / "trace.jsonl"
    orc.engine.write_trace(path)
    recs = [json.loads(line) for line in path.read_text().splitlines()]
    assert recs and {"phase", "step", "box", "success", "seed_center", "edges_touched"} <= set(recs[0])
    assert recs[0]["phase"] == "1"


@pytest.mark.slow
def test_strict_mode_raises_on_precondition():
    cfg = RenormConfig.desk(delta=0.3, strict=True)
    eng = Renormalizer(cfg, ParamPoint(1, 1), UniformField(0))
    with pytest.raises(RenormPreconditionError) as err:
        eng.determine_site((0, 0))
    assert err.value.condition and err.value.phase


def test_step_limit_stops_exploration():
    cfg = RenormConfig.desk(delta=0.3, step_limit=3)
    res = Renormalizer(cfg, ParamPoint(1, 1), UniformField(0)).determine_site((0, 0))
    assert res.Z == 0 and res.steps <= 3 and "step limit" in res.reason


# cluster growth and separation ------------------------------------------------------

def test_growth_all_open():
    g = grow_cluster(lambda y, src: 1, 12)
    assert len(g.A) == 12 and g.B == [] and g.reached_max
    assert [s.site for s in g.steps][:4] == [(0, 0), (1, -1), (1, 1), (2, -2)]
    assert all(s.rho_hat == 1.0 for s in g.steps)


def test_growth_all_closed():
    g = grow_cluster(lambda y, src: 0, 12)
    assert g.A == [] and g.B == [(0, 0)] and g.extinct


def test_growth_sources_point_into_site():
    seen = {}

    def z(y, src):
        seen[y] = src
        return int(y[1] >= 0)
    grow_cluster(z, 10)
    for y, src in seen.items():
        assert all(s[0] == y[0] - 1 and abs(s[1] - y[1]) == 1 for s in src)


def test_growth_ordering_of_outcomes():
    strong, _ = grow_renormalized_cluster(RenormConfig.desk(), ParamPoint(1, 1), 0, 4,
                                          z_oracle=lambda y, s: 1)
    weak, _ = grow_renormalized_cluster(RenormConfig.desk(), ParamPoint(0, 0), 0, 4)
    assert strong.reached_max and not weak.reached_max


def test_separation_examples():
    assert separation_check([(3, 4)], 1, 5) == [(3, 4)]
    assert separation_check([(0, 0), (3, 0)], 2, 3) is None
    rng = np.random.default_rng(0)
    pts = rng.integers(-50, 51, (100, 3))
    got = separation_check(pts, 3, 10)
    assert got is not None and len(got) == 3
    for i in range(3):
        for j in range(i + 1, 3):
            assert max(abs(a - b) for a, b in zip(got[i], got[j])) > 10


@settings(max_examples=60, deadline=None)
@given(M=st.integers(1, 4), k=st.integers(0, 2), seed=st.integers(0, 10**6))
def test_separation_bound_suffices(M, k, seed):
    rng = np.random.default_rng(seed)
    need = separation_bound(M, k, 2) + 1
    pool = {tuple(p) for p in rng.integers(-12, 13, (4 * need, 2))}
    pts = sorted(pool)[:need]
    if len(pts) < need:
        return
    got = separation_check(pts, M, k)
    assert got is not None and len(got) == M
