import math
from collections import Counter
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest

from mmlab import graphs as gl
from mmlab.errors import CapacityError, DomainError, StructuralError
from mmlab.rng import stream


def to_nx(g):
    h = nx.Graph()
    h.add_nodes_from(range(g.n))
    h.add_edges_from((int(u), int(v)) for u, _, v, _ in g.edges())
    return h


# -- port graphs ------------------------------------------------------------


def test_port_graph_basics():
    g = gl.cycle_graph(5)
    assert g.m == 5 and g.is_regular(2)
    e = g.edges()
    assert (e[:, 0] < e[:, 2]).all()
    idx = g.edge_index()
    assert (np.bincount(idx[idx >= 0]) == 2).all()
    assert sorted(g.neighbors(0).tolist()) == [1, 4]


def test_port_graph_errors():
    g = gl.PortGraph(3, 2)
    g.add_edge(0, 1)
    with pytest.raises(StructuralError):
        g.add_edge(0, 1)
    with pytest.raises(StructuralError):
        g.add_edge(2, 2)
    bad = g.nbr.copy()
    bad[2, 0] = 0
    with pytest.raises(StructuralError):
        gl.PortGraph(3, 2, bad, g.back)


def test_text_round_trip(tmp_path):
    g = gl.sample_configuration_model(50, 3, seed=2)
    h = gl.PortGraph.from_text(g.to_text())
    assert np.array_equal(h.nbr, g.nbr) and np.array_equal(h.back, g.back) and h.simple == g.simple
    g.save(tmp_path / "g.txt")
    assert np.array_equal(gl.PortGraph.load(tmp_path / "g.txt").nbr, g.nbr)
    assert g.to_text().splitlines()[0].startswith("mmll-graph v1 n=50 delta=3")
    with pytest.raises(StructuralError):
        gl.PortGraph.from_text("other v1\n")


# -- configuration model ----------------------------------------------------


def test_config_model_degree_one():
    for seed in range(20):
        g = gl.sample_configuration_model(2, 1, seed=seed)
        assert g.m == 1 and g.simple
    counts = Counter()
    N = 30_000
    for seed in range(N):
        g = gl.sample_configuration_model(4, 1, seed=seed)
        counts[tuple(map(tuple, g.edges()[:, [0, 2]].tolist()))] += 1
    assert len(counts) == 3
    sd = math.sqrt(N * (1 / 3) * (2 / 3))
    for c in counts.values():
        assert abs(c - N / 3) < 4 * sd


def test_config_model_odd():
    with pytest.raises(DomainError):
        gl.sample_configuration_model(5, 3, seed=0)
    with pytest.raises(DomainError):
        gl.sample_hard_instance(5, 3, 3)


def test_config_model_deterministic():
    a = gl.sample_configuration_model(100, 3, seed=9)
    b = gl.sample_configuration_model(100, 3, seed=9)
    assert np.array_equal(a.nbr, b.nbr)


def test_simple_regular_probability():
    assert gl.simple_regular_probability(3, 2) == pytest.approx(math.exp(-2))
    assert gl.simple_regular_probability(4, 4) == pytest.approx(math.exp(-(1.5 + 2.25 + 4.5 + 81 / 8)))


# -- girth ------------------------------------------------------------------


def test_girth_examples():
    assert gl.girth(gl.complete_graph(4)) == 3
    assert gl.girth(gl.cycle_graph(7)) == 7
    assert gl.girth(gl.delta_ary_tree(3, 3)) == math.inf
    assert gl.girth_by_edges(gl.cycle_graph(7)) == 7
    assert gl.girth_by_edges(gl.path_graph(4)) == math.inf


def test_girth_matches_networkx():
    for seed in range(20):
        g = gl.sample_configuration_model(60, 3, seed=seed)
        expected = nx.girth(to_nx(g))
        assert gl.girth(g) == expected
        assert gl.girth_by_edges(g) == expected


def test_hard_instance_girth3_accepts_first_simple():
    g, cert = gl.sample_hard_instance(100, 3, 3, seed=4)
    assert cert.simple and cert.regular and cert.girth >= 3
    assert cert.method == "reject" and cert.acceptance_rate == 1 / cert.tries


def test_hard_instance_reject():
    g, cert = gl.sample_hard_instance(200, 3, 5, seed=1)
    assert cert.girth >= 5 and cert.girth == nx.girth(to_nx(g))


@pytest.mark.parametrize("n,delta,girth", [(1000, 4, 5), (2000, 3, 8)])
def test_hard_instance_switch(n, delta, girth):
    g, cert = gl.sample_hard_instance(n, delta, girth, seed=0, method="switch")
    assert g.simple and g.is_regular()
    assert cert.girth >= girth and cert.method == "switch"
    assert nx.girth(to_nx(g)) >= girth
    data = __import__("json").loads(cert.to_json())
    assert data["girth"] == cert.girth


def test_hard_instance_auto_picks_switch():
    _, cert = gl.sample_hard_instance(1000, 4, 5, seed=0, method="auto")
    assert cert.method == "switch"


def test_hard_instance_exhaustion():
    from mmlab.errors import ExhaustionError

    with pytest.raises(ExhaustionError):
        gl.sample_hard_instance(60, 3, 9, max_tries=3, seed=0)


# -- subgraph density and expansion -----------------------------------------


@pytest.fixture(scope="module")
def dense16():
    g, _ = gl.sample_hard_instance(2000, 16, 3, seed=0, method="switch")
    return g


def test_subgraph_empty_and_full():
    g = gl.sample_configuration_model(100, 4, seed=0)
    c = gl.subgraph_size_check(g, [])
    assert c.edges == 0 and c.branch == "n/a" and c.passed is None
    full = gl.density_check(g, range(g.n))
    assert full.edges == g.m and full.lhs == abs(g.m - g.n * g.delta / 2)


def test_subgraph_full_regular(dense16):
    c = gl.density_check(dense16, range(dense16.n))
    assert c.edges == 2000 * 16 // 2 and c.lhs == 0 and c.passed


def test_subgraph_random_halves(dense16):
    rng = stream(3)
    for _ in range(1000):
        S = rng.choice(dense16.n, dense16.n // 2, replace=False)
        assert gl.density_check(dense16, S).passed


def test_subgraph_branch_a():
    g = gl.sample_configuration_model(400, 4, seed=1)
    c = gl.subgraph_size_check(g, range(40))
    assert c.branch == "a" and c.passed


def test_expansion_examples(dense16):
    full = gl.expansion_check(dense16, range(dense16.n))
    assert full.ratio == 1 and not full.in_window and full.passed is None
    assert gl.expansion_check(dense16, [7]).ratio == 17
    with pytest.raises(DomainError):
        gl.expansion_check(dense16, [])


def test_expansion_random_tenths(dense16):
    rng = stream(4)
    for _ in range(1000):
        S = rng.choice(dense16.n, dense16.n // 10, replace=False)
        c = gl.expansion_check(dense16, S)
        assert c.ratio > c.threshold


# -- matching intersection distribution -------------------------------------


def test_pmf_small():
    assert [gl.matching_intersection_pmf_exact(4, 2, t) for t in (0, 1)] == [Fraction(2, 3), Fraction(1, 3)]
    assert gl.matching_intersection_pmf(4, 2, 1) == pytest.approx(1 / 3)
    assert gl.matching_intersection_pmf_exact(4, 2, 2) == 0
    with pytest.raises(DomainError):
        gl.matching_intersection_pmf(5, 2, 0)


def test_pmf_normalized_and_ulc():
    for n in range(2, 65, 2):
        for k in range(n + 1):
            p = [gl.matching_intersection_pmf_exact(n, k, t) for t in range(k // 2 + 1)]
            assert sum(p) == 1
            # ultra-log-concavity on the support
            lo = min(t for t in range(len(p)) if p[t])
            hi = max(t for t in range(len(p)) if p[t])
            assert gl.is_ultra_log_concave(p[lo : hi + 1]) or lo == hi


def test_pmf_float_matches_exact():
    for n, k in [(20, 7), (64, 30), (40, 40)]:
        for t in gl.matching_support(n, k):
            assert gl.matching_intersection_pmf(n, k, t) == pytest.approx(
                float(gl.matching_intersection_pmf_exact(n, k, t)), rel=1e-9)


def test_pmf_mean():
    n, k = 30, 11
    mean = sum(t * gl.matching_intersection_pmf_exact(n, k, t) for t in gl.matching_support(n, k))
    assert mean == Fraction(k * (k - 1), 2 * (n - 1))


def test_pmf_bruteforce():
    # enumerate all perfect matchings of K_6 and count edges inside S = {0, 1, 2}
    def matchings(vs):
        if not vs:
            yield []
            return
        a = vs[0]
        for b in vs[1:]:
            rest = [v for v in vs if v not in (a, b)]
            for m in matchings(rest):
                yield [(a, b)] + m

    S = {0, 1, 2}
    counts = Counter(sum(a in S and b in S for a, b in m) for m in matchings(list(range(6))))
    total = sum(counts.values())
    for t, c in counts.items():
        assert gl.matching_intersection_pmf_exact(6, 3, t) == Fraction(c, total)


def test_tail_bounds_hold():
    for n, k in [(64, 40), (200, 80), (1000, 300)]:
        for d in (0.25, 0.5, 0.9):
            up, lo = gl.matching_tails(n, k, d)
            ub, lb = gl.matching_tail_bounds(n, k, d)
            assert float(up) <= ub and float(lo) <= lb


# -- trees and line graphs --------------------------------------------------


def test_tree():
    assert gl.delta_ary_tree(3, 0).n == 1
    t = gl.delta_ary_tree(3, 2)
    assert t.n == 10 == gl.tree_size(3, 2)
    assert t.degree()[0] == 3 and (t.nbr[1:, 0] < np.arange(1, 10)).all()
    assert nx.is_tree(to_nx(t))
    with pytest.raises(CapacityError):
        gl.delta_ary_tree(4, 12, budget=1000)


def test_line_graphs():
    lg = gl.line_graph(gl.path_graph(4))
    assert lg.n == 3 and sorted(tuple(r) for r in lg.edges()[:, [0, 2]].tolist()) == [(0, 1), (1, 2)]
    assert nx.is_isomorphic(to_nx(gl.line_graph(gl.complete_graph(3))), nx.complete_graph(3))
    assert nx.is_isomorphic(to_nx(gl.line_graph(gl.star_graph(5))), nx.complete_graph(5))


def test_matching_helpers():
    g = gl.cycle_graph(6)
    e = g.edges()
    ids = {tuple(r): k for k, r in enumerate(e[:, [0, 2]].tolist())}
    m = [ids[(0, 1)], ids[(2, 3)], ids[(4, 5)]]
    assert gl.is_matching(g, m) and gl.is_maximal_matching(g, m)
    assert not gl.is_maximal_matching(g, m[:1])
    assert not gl.is_matching(g, [ids[(0, 1)], ids[(1, 2)]])
    # matchings of g are independent sets of the line graph
    lg = gl.line_graph(g)
    assert gl.is_independent(lg, m)
    ind = gl.greedy_independent_set(lg)
    assert gl.is_maximal_matching(g, ind)
