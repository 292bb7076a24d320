import math
import random

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from aliveness import graph as gc
from aliveness.graph import Graph

PATH = Graph([("a", "b"), ("b", "c")])
K3 = Graph([("a", "b"), ("b", "c"), ("a", "c")])
K4 = Graph([(u, v) for u in "abcd" for v in "abcd" if u < v])
STAR = Graph([("c", x) for x in "xyz"])
C4 = Graph([(0, 1), (1, 2), (2, 3), (3, 0)])
BOWTIE = Graph([("a", "b"), ("b", "w"), ("a", "w"), ("w", "c"), ("c", "d"), ("d", "w")])
PENDANT = Graph([("a", "b"), ("b", "c"), ("a", "c"), ("c", "p")])


def test_graph_drops_self_loops_and_parallel_edges():
    g = Graph([("a", "b"), ("b", "a"), ("a", "a")], nodes=["z"])
    assert g.nodes == {"a", "b", "z"}
    assert g.number_of_edges() == 1
    assert gc.degree(g, "z") == 0
    for v in g.nodes:
        assert len(g.neighbors(v)) == sum(v in e for e in g.edges)


def test_unknown_node_is_an_error():
    with pytest.raises(KeyError):
        gc.closeness(PATH, "nope")
    with pytest.raises(KeyError):
        gc.avg_min_cut(PATH, "nope")


@pytest.mark.parametrize("g,v,expected", [(K3, "a", 2), (Graph(nodes=["i"]), "i", 0), (STAR, "c", 3)])
def test_degree_examples(g, v, expected):
    assert gc.degree(g, v) == expected


def test_betweenness_examples():
    assert gc.betweenness_all(PATH)["b"] == 1.0
    assert gc.betweenness_all(STAR)["c"] == 3.0
    assert all(b == 0.5 for b in gc.betweenness_all(C4).values())
    assert gc.betweenness_all(Graph()) == {}


def test_closeness_examples():
    assert gc.closeness(STAR, "c") == pytest.approx(1 / 3)
    assert gc.closeness(PATH, "a") == pytest.approx(1 / 3)
    assert gc.closeness(Graph(nodes=["i"]), "i") == 0.0


def test_coreness_examples():
    assert set(gc.coreness_all(K4).values()) == {3}
    assert gc.coreness_all(PENDANT) == {"a": 2, "b": 2, "c": 2, "p": 1}
    assert set(gc.coreness_all(PATH).values()) == {1}


def test_eccentricity_examples():
    assert gc.eccentricity(PATH, "a") == 2
    assert gc.eccentricity(PATH, "b") == 1
    assert gc.eccentricity(K4, "a") == 1
    assert gc.eccentricity(Graph(nodes=["i"]), "i") == 0


def test_articulation_examples():
    assert gc.articulation_points(PATH) == {"b"}
    assert gc.articulation_points(C4) == set()
    assert gc.articulation_points(BOWTIE) == {"w"}


def test_avg_min_cut_examples():
    assert gc.avg_min_cut(K3, "a") == pytest.approx(4 / 3)
    assert gc.avg_min_cut(PATH, "a") == pytest.approx(2 / 3)
    g = Graph([("a", "b")], nodes=["i"])
    assert gc.avg_min_cut(g, "i") == 0.0
    # min-cut oracle agrees with literal edge-subset removal on the spec's graphs
    for h in (K3, PATH, C4, BOWTIE):
        nodes = h.sorted_nodes()
        for u in nodes:
            for v in nodes:
                if u != v:
                    assert gc.min_cut(h, u, v) == oracles.min_cut_by_edge_removal(nodes, h.edges, u, v)


def test_all_metrics_examples():
    assert gc.all_metrics(Graph()) == {}
    m = gc.all_metrics(K3)["a"]
    assert (m.degree, m.coreness, m.eccentricity, m.betweenness, m.is_articulation) == (2, 2, 1, 0.0, False)
    assert m.closeness == pytest.approx(0.5)
    assert m.avg_min_cut == pytest.approx(4 / 3)
    b = gc.all_metrics(PATH)["b"]
    assert (b.degree, b.betweenness, b.is_articulation) == (2, 1.0, True)


def test_all_metrics_equals_individual_measures(small_graphs):
    for nodes, edges, g in small_graphs[:60]:
        met = gc.all_metrics(g)
        bet, core, cuts = gc.betweenness_all(g), gc.coreness_all(g), gc.articulation_points(g)
        for v in nodes:
            m = met[v]
            assert m.degree == gc.degree(g, v)
            assert m.betweenness == pytest.approx(bet[v], abs=1e-12)
            assert m.closeness == gc.closeness(g, v)
            assert m.eccentricity == gc.eccentricity(g, v)
            assert m.coreness == core[v]
            assert m.is_articulation == (v in cuts)
            assert m.avg_min_cut == pytest.approx(gc.avg_min_cut(g, v), abs=1e-12)


def test_measures_match_brute_force(small_graphs):
    assert len(small_graphs) >= 200
    for nodes, edges, g in small_graphs:
        met = gc.all_metrics(g)
        bet = oracles.betweenness(nodes, edges)
        clo = oracles.closeness(nodes, edges)
        ecc = oracles.eccentricity(nodes, edges)
        core = oracles.coreness(nodes, edges)
        cuts = oracles.articulation_points(nodes, edges)
        mc = oracles.avg_min_cut(nodes, edges)
        for v in nodes:
            assert abs(met[v].betweenness - bet[v]) <= 1e-9
            assert abs(met[v].closeness - clo[v]) <= 1e-9
            assert met[v].eccentricity == ecc[v]
            assert met[v].coreness == core[v]
            assert met[v].is_articulation == (v in cuts)
            assert abs(met[v].avg_min_cut - mc[v]) <= 1e-9


def test_pairwise_min_cut_matches_bipartition_oracle(small_graphs):
    for nodes, edges, g in small_graphs[:80]:
        for u in nodes:
            for v in nodes:
                if u < v:
                    assert gc.min_cut(g, u, v) == oracles.min_cut(nodes, edges, u, v)


def test_networkx_cross_check():
    rng = random.Random(7)
    for _ in range(30):
        n = rng.randint(2, 25)
        h = nx.gnp_random_graph(n, 0.2, seed=rng.randint(0, 10**6))
        g = Graph(h.edges(), nodes=h.nodes())
        bet = nx.betweenness_centrality(h, normalized=False)
        core = nx.core_number(h)
        met = gc.all_metrics(g)
        assert gc.articulation_points(g) == set(nx.articulation_points(h))
        for v in h.nodes:
            assert met[v].betweenness == pytest.approx(bet[v], abs=1e-9)
            assert met[v].coreness == core[v]
            comp = h.subgraph(nx.node_connected_component(h, v))
            assert met[v].eccentricity == nx.eccentricity(comp, v)
            mc = sum(nx.edge_connectivity(h, u, v) if nx.has_path(h, u, v) else 0
                     for u in h.nodes if u != v) / n
            assert met[v].avg_min_cut == pytest.approx(mc, abs=1e-9)


def _tree(n, rng):
    return Graph([(i, rng.randrange(i)) for i in range(1, n)], nodes=range(n))


def test_tree_betweenness_sum_counts_interior_nodes():
    # each pair's unique path credits every interior node once: sum of B = sum of (d - 1)
    rng = random.Random(3)
    for _ in range(40):
        n = rng.randint(1, 9)
        g = _tree(n, rng)
        d = oracles.all_pairs_distances(list(g.nodes), g.edges)
        interior = sum(d[u][v] - 1 for u in g.nodes for v in g.nodes if u < v)
        assert sum(gc.betweenness_all(g).values()) == pytest.approx(interior)
    # the pair count alone only matches when no path has two interior nodes
    star = Graph([(0, i) for i in range(1, 6)])
    assert sum(gc.betweenness_all(star).values()) == 10
    assert sum(gc.betweenness_all(Graph([(0, 1), (1, 2), (2, 3)])).values()) == 4


edge_lists = st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), max_size=25)


@settings(max_examples=150, deadline=None)
@given(edge_lists)
def test_structural_invariants(edges):
    g = Graph(edges)
    met = gc.all_metrics(g)
    n = len(g)
    for v, m in met.items():
        assert m.coreness <= m.degree
        assert m.degree >= 1  # nodes only enter through edges here
        assert 1 <= m.eccentricity <= n - 1
        assert m.avg_min_cut >= 0 and m.betweenness >= 0 and m.closeness > 0


@settings(max_examples=100, deadline=None)
@given(edge_lists, st.permutations(list(range(10))))
def test_relabeling_invariance(edges, perm):
    g = Graph(edges, nodes=range(10))
    mapping = {i: f"x{perm[i]}" for i in range(10)}
    h = g.relabel(mapping)
    mg, mh = gc.all_metrics(g), gc.all_metrics(h)
    for v in g.nodes:
        a, b = mg[v], mh[mapping[v]]
        assert (a.degree, a.coreness, a.eccentricity, a.is_articulation) == (
            b.degree, b.coreness, b.eccentricity, b.is_articulation)
        assert math.isclose(a.betweenness, b.betweenness, abs_tol=1e-9)
        assert math.isclose(a.closeness, b.closeness, abs_tol=1e-12)
        assert math.isclose(a.avg_min_cut, b.avg_min_cut, abs_tol=1e-12)


@settings(max_examples=100, deadline=None)
@given(edge_lists, st.tuples(st.integers(0, 9), st.integers(0, 9)).filter(lambda e: e[0] != e[1]))
def test_adding_an_edge_never_lowers_degree_or_coreness(edges, extra):
    g = Graph(edges, nodes=range(10))
    h = Graph(list(edges) + [extra], nodes=range(10))
    cg, ch = gc.coreness_all(g), gc.coreness_all(h)
    for v in extra:
        assert gc.degree(h, v) >= gc.degree(g, v)
        assert ch[v] >= cg[v]


def test_avg_min_cut_sampling():
    rng = random.Random(11)
    h = nx.connected_watts_strogatz_graph(60, 4, 0.3, seed=5)
    g = Graph(h.edges())
    exact, used = gc.avg_min_cut_all(g)
    assert used is None
    # under the threshold, sampling flags are ignored
    same, used = gc.avg_min_cut_all(g, sample_size=10, sample_threshold=100)
    assert used is None and same == exact
    est, used = gc.avg_min_cut_all(g, sample_size=60, sample_threshold=50, seed=rng.randint(0, 99))
    assert used == 60
    for v in g.nodes:
        assert est[v] == pytest.approx(exact[v], rel=1e-12)
    est, used = gc.avg_min_cut_all(g, sample_size=20, sample_threshold=50, seed=1)
    assert used == 20
    assert sum(est.values()) / 60 == pytest.approx(sum(exact.values()) / 60, rel=0.2)
    with pytest.raises(ValueError):
        gc.avg_min_cut_all(g, sample_size=0, sample_threshold=50)


def test_edge_list_and_metrics_csv_round_trip(tmp_path):
    g = Graph([("a", "b"), ("b", "c"), ("c", "a"), ("c", "d")])
    p = tmp_path / "g.edges"
    gc.write_edge_list(g, p)
    h = gc.read_edge_list(p)
    assert h.edges == g.edges and h.nodes == g.nodes
    out = tmp_path / "m.csv"
    gc.write_metrics_csv(gc.all_metrics(g), out)
    lines = out.read_text().splitlines()
    assert lines[0] == "node_id,degree,betweenness,closeness,coreness,eccentricity,is_articulation,avg_min_cut"
    assert lines[3].startswith("c,3,2.0,") and lines[3].endswith(",true,1.25")
    (tmp_path / "bad.edges").write_text("a b c\n")
    with pytest.raises(ValueError, match="bad.edges:1"):
        gc.read_edge_list(tmp_path / "bad.edges")
