import numpy as np
import pytest

from fusepeel.hypergraph import FuseParams, Hypergraph, generate_er, generate_fuse
from fusepeel.peeler import (
    peel_rounds,
    peel_sequential,
    replay_is_valid,
    rooted_survival,
    segment_fractions,
    segment_survival,
)
from fusepeel.threshold import iterate_p


def _brute_core(h):
    """Largest edge set in which every touched vertex has degree >= 2, by fixpoint."""
    alive = np.ones(h.num_edges, dtype=bool)
    while True:
        deg = np.zeros(h.num_vertices, dtype=int)
        for e in np.flatnonzero(alive):
            for v in set(h.edges[e]):
                deg[v] += 1
        drop = [e for e in np.flatnonzero(alive) if any(deg[v] <= 1 for v in set(h.edges[e]))]
        if not drop:
            break
        alive[drop] = False
    verts = sorted({int(v) for e in np.flatnonzero(alive) for v in h.edges[e]})
    return np.array(verts, dtype=int), np.flatnonzero(alive)


def _random_small(rng, trial):
    nv = int(rng.integers(3, 40))
    m = int(rng.integers(0, int(1.2 * nv) + 1))
    k = int(rng.integers(3, 5))
    if nv < k:
        nv = k
    if rng.random() < 0.5:
        return generate_er(k, nv, m, seed=trial)
    ell = int(rng.integers(1, 6))
    n = int(rng.integers(1, 8))
    return generate_fuse(FuseParams(k, float(rng.uniform(0.5, 1.3)), ell, n, seed=trial))


def test_empty_edge_set():
    h = Hypergraph(5, np.zeros((0, 3), dtype=int))
    r = peel_rounds(h)
    assert r.is_peelable and r.rounds == 1
    assert r.peel_order == [(v, None) for v in range(5)]


def test_double_edge_is_core():
    h = Hypergraph(3, [[0, 1, 2], [0, 1, 2]])
    r = peel_rounds(h)
    assert not r.is_peelable and r.rounds == 1
    assert list(r.core_vertices) == [0, 1, 2]
    assert list(r.core_edges) == [0, 1]
    assert list(peel_sequential(h).core_vertices) == [0, 1, 2]


def test_single_edge():
    h = Hypergraph(3, [[0, 1, 2]])
    for r in (peel_sequential(h), peel_rounds(h)):
        assert r.is_peelable
        assert sum(e is not None for _, e in r.peel_order) == 1
        assert replay_is_valid(h, r)


def test_confluence_and_replay_on_random_instances():
    rng = np.random.default_rng(1)
    for trial in range(1000):
        h = _random_small(rng, trial)
        a, b = peel_rounds(h), peel_sequential(h)
        assert np.array_equal(a.core_vertices, b.core_vertices)
        assert np.array_equal(a.core_edges, b.core_edges)
        assert replay_is_valid(h, a) and replay_is_valid(h, b)
        if trial < 200:
            cv, ce = _brute_core(h)
            assert np.array_equal(a.core_edges, ce)
            # core vertices are exactly the vertices of core edges
            assert np.array_equal(a.core_vertices, cv)


def test_survival_table_basics():
    h = generate_fuse(FuseParams(3, 0.8, 10, 500, seed=2))
    r = peel_rounds(h)
    assert r.is_peelable
    assert np.all(segment_survival(r, 0) == 1.0)
    assert np.all(segment_survival(r, r.rounds) == 0.0)
    assert np.all(np.diff(r.survivors_by_round, axis=0) <= 0)
    with pytest.raises(ValueError):
        segment_survival(r, r.rounds + 1)
    with pytest.raises(ValueError):
        segment_survival(peel_sequential(h), 0)


def test_survival_table_nonpeelable_is_monotone():
    h = generate_fuse(FuseParams(3, 1.0, 10, 500, seed=2))
    r = peel_rounds(h)
    assert not r.is_peelable
    assert np.all(np.diff(r.survivors_by_round, axis=0) <= 0)
    assert r.survivors_by_round[-1].sum() == len(r.core_vertices)


def test_linear_work():
    per = []
    for n in (10**4, 10**5, 10**6):
        h = generate_er(3, n, int(0.8 * n), seed=n)
        r = peel_sequential(h)
        per.append(r.work / (3 * h.num_edges + h.num_vertices))
    assert max(per) / min(per) < 2


def test_fuse_c091_peels_at_large_n():
    assert peel_sequential(generate_fuse(FuseParams(3, 0.91, 100, 10**5, seed=1))).is_peelable


def _rooted_brute(h, root, rounds):
    """Simulate the rooted process for ``root``; returns survival flags for r = 0..rounds."""
    alive_v = np.ones(h.num_vertices, dtype=bool)
    alive_e = np.ones(h.num_edges, dtype=bool)
    out = [True]
    for _ in range(rounds):
        deg = np.zeros(h.num_vertices, dtype=int)
        for e in np.flatnonzero(alive_e):
            for v in set(h.edges[e]):
                deg[v] += 1
        kill = alive_v & (deg <= 1)
        kill[root] = alive_v[root] and deg[root] == 0
        alive_v &= ~kill
        for e in np.flatnonzero(alive_e):
            if any(kill[v] for v in h.edges[e]):
                alive_e[e] = False
        out.append(bool(alive_v[root]))
    return out


def _random_hyperforest(rng, k, m):
    edges = []
    nv = 0
    for _ in range(m):
        if nv and rng.random() < 0.85:
            anchor = int(rng.integers(nv))
            e = [anchor] + list(range(nv, nv + k - 1))
            nv += k - 1
        else:
            e = list(range(nv, nv + k))
            nv += k
        rng.shuffle(e)
        edges.append(e)
    return Hypergraph(nv, np.array(edges))


def test_rooted_survival_matches_brute_force_on_forests():
    rng = np.random.default_rng(3)
    for trial in range(20):
        h = _random_hyperforest(rng, 3, int(rng.integers(1, 25)))
        fast = rooted_survival(h, 5)
        for v in range(h.num_vertices):
            assert list(fast[:, v]) == _rooted_brute(h, v, 5)


def test_rooted_survival_tracks_operator():
    h = generate_fuse(FuseParams(3, 0.9, 20, 50000, seed=4))
    emp = segment_fractions(rooted_survival(h, 3), h.layout)
    ana = iterate_p(3, 0.9, 20, 3)
    assert np.abs(emp - ana).max() < 0.03
