from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from percolab.clusters import (
    boundary_to_H_ratio_from_open, connected_to_set, count_spanning_clusters, forest_from_open,
    trifurcations_from_open,
)
from percolab.field import ParamPoint, UniformField, open_mask
from percolab.lattice import EdgeClass, LatticeSpec, Region, box_region


def bfs_labels(n, eu, ev, use):
    adj = [[] for _ in range(n)]
    for a, b, u in zip(eu, ev, use):
        if u:
            adj[a].append(b)
            adj[b].append(a)
    lab = -np.ones(n, dtype=np.int64)
    for s in range(n):
        if lab[s] >= 0:
            continue
        lab[s] = s
        dq = deque([s])
        while dq:
            x = dq.popleft()
            for y in adj[x]:
                if lab[y] < 0:
                    lab[y] = s
                    dq.append(y)
    return lab, adj


def same_partition(a, b):
    pairs = set(zip(a.tolist(), b.tolist()))
    return len(pairs) == len(set(a.tolist())) == len(set(b.tolist()))


def brute_trifurcations(spec, is_open, on_boundary):
    """Delete all edges at u and count boundary-touching pieces among u's neighbours."""
    out = []
    n = spec.n_vertices
    lab, adj = bfs_labels(n, spec.edge_u, spec.edge_v, is_open)
    for u in range(n):
        if len(adj[u]) < 3:
            continue
        keep = is_open & (spec.edge_u != u) & (spec.edge_v != u)
        lab2, _ = bfs_labels(n, spec.edge_u, spec.edge_v, keep)
        touching = {lab2[v] for v in range(n) if on_boundary[v] and v != u}
        pieces = {lab2[w] for w in adj[u]} & touching
        if len(pieces) >= 3:
            out.append(u)
    return np.array(out, dtype=np.int64)


def test_all_closed_and_all_open():
    spec = LatticeSpec.box(2, 1, 2)
    closed = forest_from_open(spec, np.zeros(spec.n_edges, bool))
    assert closed.n_components == spec.n_vertices
    opened = forest_from_open(spec, np.ones(spec.n_edges, bool))
    assert opened.n_components == 1
    assert opened.size[opened.component_roots].sum() == spec.n_vertices


def test_three_by_three_matches_bfs():
    spec = LatticeSpec.box(2, 1, 1)
    for k in range(50):
        om = open_mask(UniformField(4, k), spec, ParamPoint(0.5, 0.5))
        f = forest_from_open(spec, om)
        lab, _ = bfs_labels(spec.n_vertices, spec.edge_u, spec.edge_v, om)
        assert same_partition(f.root, lab)


@settings(max_examples=120, deadline=None)
@given(d=st.integers(2, 3), L=st.integers(2, 9), p=st.floats(0, 1), seed=st.integers(0, 2**32))
def test_union_find_equals_bfs(d, L, p, seed):
    spec = LatticeSpec.crossing_box(d, min(2, d), L if d == 2 else min(L, 9), 1 if d == 3 else None)
    om = open_mask(UniformField(seed), spec, ParamPoint(p, 1 - p))
    f = forest_from_open(spec, om)
    lab, _ = bfs_labels(spec.n_vertices, spec.edge_u, spec.edge_v, om)
    assert same_partition(f.root, lab)
    assert f.size[f.component_roots].sum() == spec.n_vertices
    a, b = np.random.default_rng(seed % 1000).integers(0, spec.n_vertices, 2)
    assert f.connected(a, a)
    assert f.connected(a, b) == f.connected(b, a) == (lab[a] == lab[b])


def test_edge_filter_restricts_classes():
    spec = LatticeSpec.box(3, 2, 2)
    off_h = [EdgeClass.PLUS, EdgeClass.MINUS]
    f = forest_from_open(spec, np.ones(spec.n_edges, bool), edge_filter=off_h)
    o, x = spec.vertex_index((0, 0, 0)), spec.vertex_index((1, 0, 0))
    assert f.connected(o, x)  # around through the bulk
    only_h = spec.edge_classes == EdgeClass.H
    g = forest_from_open(spec, only_h, edge_filter=off_h)
    assert not g.connected(o, x)
    assert forest_from_open(spec, only_h, edge_filter=[EdgeClass.H]).connected(o, x)


def test_connected_to_set():
    spec = LatticeSpec.box(2, 1, 2)
    closed = forest_from_open(spec, np.zeros(spec.n_edges, bool))
    S = np.array([0, 1, 2])
    assert np.array_equal(connected_to_set(closed, S, S), S)
    assert connected_to_set(closed, np.array([10, 11]), S).size == 0
    opened = forest_from_open(spec, np.ones(spec.n_edges, bool))
    assert np.array_equal(connected_to_set(opened, np.array([10, 11]), S), [10, 11])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32), p=st.floats(0.2, 0.8))
def test_connected_to_set_matches_definition(seed, p):
    spec = LatticeSpec.box(2, 1, 2)
    om = open_mask(UniformField(seed), spec, ParamPoint(p, p))
    f = forest_from_open(spec, om)
    lab, _ = bfs_labels(spec.n_vertices, spec.edge_u, spec.edge_v, om)
    rng = np.random.default_rng(seed)
    src = rng.choice(spec.n_vertices, 6, replace=False)
    tgt = rng.choice(spec.n_vertices, 3, replace=False)
    want = sorted(int(u) for u in src if any(lab[u] == lab[v] for v in tgt))
    assert connected_to_set(f, src, tgt).tolist() == want


def test_spanning_counts():
    spec = LatticeSpec.crossing_box(2, 1, 5)
    assert count_spanning_clusters(forest_from_open(spec, np.ones(spec.n_edges, bool)), 0) == 1
    assert count_spanning_clusters(forest_from_open(spec, np.zeros(spec.n_edges, bool)), 0) == 0
    om = np.zeros(spec.n_edges, bool)
    rows = {spec.coords[0, 1], spec.coords[-1, 1]}
    for e in range(spec.n_edges):
        x, y = spec.coords[spec.edge_u[e]], spec.coords[spec.edge_v[e]]
        if x[1] == y[1] and x[1] in rows:
            om[e] = True
    assert count_spanning_clusters(forest_from_open(spec, om), 0) == 2
    torus = LatticeSpec.torus(2, 1, (4, 3))
    with pytest.raises(ValueError):
        count_spanning_clusters(forest_from_open(torus, np.zeros(torus.n_edges, bool)), 0)


def _cross(spec, arms):
    om = np.zeros(spec.n_edges, bool)
    for e in range(spec.n_edges):
        x, y = spec.coords[spec.edge_u[e]], spec.coords[spec.edge_v[e]]
        for a in arms:
            if np.all(x[[i for i in range(spec.d) if i != a]] == 0) and \
                    np.all(y[[i for i in range(spec.d) if i != a]] == 0):
                om[e] = True
    return om


def test_plus_shape_has_unique_trifurcation():
    spec = LatticeSpec.box(2, 1, 3)
    rep = trifurcations_from_open(spec, _cross(spec, [0, 1]))
    assert rep.vertices.tolist() == [spec.vertex_index((0, 0))]
    assert rep.arms.tolist() == [4]


def test_straight_path_has_none():
    spec = LatticeSpec.box(2, 1, 3)
    assert trifurcations_from_open(spec, _cross(spec, [0])).count == 0


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32), p=st.floats(0.35, 0.8))
def test_trifurcations_match_delete_and_recount(seed, p):
    spec = LatticeSpec.box(2, 1, 2)
    om = open_mask(UniformField(seed), spec, ParamPoint(p, p))
    region = Region.whole(spec)
    rep = trifurcations_from_open(spec, om, region)
    want = brute_trifurcations(spec, om, region.face_bits != 0)
    assert rep.vertices.tolist() == want.tolist()
    assert rep.count <= rep.shell_size
    deg = np.bincount(np.concatenate([spec.edge_u[om], spec.edge_v[om]]), minlength=spec.n_vertices)
    assert np.all(deg[rep.vertices] >= 3)


def test_trifurcations_in_subregion_match_brute_force():
    spec = LatticeSpec.box(3, 2, 3)
    region = box_region(spec, 2)
    for k in range(10):
        om = open_mask(UniformField(77, k), spec, ParamPoint(0.45, 0.6))
        rep = trifurcations_from_open(spec, om, region)
        inside = om & region.mask[spec.edge_u] & region.mask[spec.edge_v]
        want = brute_trifurcations(spec, inside, region.face_bits != 0)
        want = want[region.mask[want]] if want.size else want
        assert rep.vertices.tolist() == want.tolist()


def test_boundary_ratio_extremes():
    spec = LatticeSpec.box(3, 2, 3)
    region = box_region(spec, 3)
    # shell vertices inside H are joined to H trivially (u <-> u)
    closed = boundary_to_H_ratio_from_open(spec, np.zeros(spec.n_edges, bool), region)
    assert closed == 24 / 49
    full = boundary_to_H_ratio_from_open(spec, np.ones(spec.n_edges, bool), region)
    assert full == len(region.shell) / 49
