import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given

from conftest import graphs, to_nx
from mdeo.community import (GreedyModularity, Partition, WalkTrap, detect_greedy_modularity, get_detector,
                            modularity, read_partition_csv, write_partition_csv)
from mdeo.graph import Graph

TWO_TRIANGLES = Graph.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])


def test_partition_relabels_contiguously():
    p = Partition([7, 7, 3, 9, 3])
    assert p.assignment.tolist() == [0, 0, 1, 2, 1]
    assert p.k == 3 and p.communities == [(0, 1), (2, 4), (3,)]
    assert p == Partition([1, 1, 0, 5, 0])


def test_from_communities_requires_cover():
    with pytest.raises(ValueError):
        Partition.from_communities([[0, 1], [3]], n=4)


def test_disjoint_triangles():
    assert detect_greedy_modularity(TWO_TRIANGLES).communities == [(0, 1, 2), (3, 4, 5)]


def test_single_triangle():
    assert detect_greedy_modularity(Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])).k == 1


def _bridged_cliques():
    edges = list(itertools.combinations(range(5), 2)) + list(itertools.combinations(range(5, 10), 2)) + [(4, 5)]
    return Graph.from_edges(10, edges)


def test_bridged_cliques_recovered_and_best_two_block_split():
    g = _bridged_cliques()
    p = detect_greedy_modularity(g)
    assert p.communities == [tuple(range(5)), tuple(range(5, 10))]
    # brute force over every 2-block partition
    best = max(
        modularity(g, Partition([1 if (mask >> u) & 1 else 0 for u in range(10)]))
        for mask in range(1, 2 ** 9)
    )
    assert modularity(g, p) == pytest.approx(best, abs=1e-12)


def test_edgeless_graph_rejected():
    with pytest.raises(ValueError):
        detect_greedy_modularity(Graph.from_edges(3, []))


def test_modularity_single_community_zero():
    g = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    assert modularity(g, Partition([0, 0, 0])) == pytest.approx(0.0, abs=1e-15)


def test_modularity_two_triangles_half():
    # hand-scripted: each block has e_c/m = 1/2 and d_c/2m = 1/2
    assert modularity(TWO_TRIANGLES, Partition([0, 0, 0, 1, 1, 1])) == pytest.approx(0.5, abs=1e-15)


@given(graphs(min_nodes=3, max_nodes=25))
def test_modularity_matches_networkx(g):
    p = Partition(np.arange(g.node_count) % 3)
    ref = nx.community.modularity(to_nx(g), [set(c) for c in p.communities])
    assert modularity(g, p) == pytest.approx(ref, abs=1e-12)


def test_karate_greedy_matches_reference_q(karate):
    q = modularity(karate, detect_greedy_modularity(karate))
    ref = nx.community.modularity(to_nx(karate), nx.community.greedy_modularity_communities(to_nx(karate)))
    assert q == pytest.approx(ref, abs=1e-9)
    assert q == pytest.approx(0.3806706114, abs=1e-9)


@given(graphs(min_nodes=4, max_nodes=25))
def test_detector_deterministic_and_merge_stable(g):
    # greedy agglomeration is a heuristic, so it need not beat every partition;
    # it must stop where no merge of two of its communities raises modularity
    p = detect_greedy_modularity(g)
    assert p == detect_greedy_modularity(Graph.from_edges(g.node_count, list(g.edges)))
    q = modularity(g, p)
    assert q >= -1e-12
    assert q >= modularity(g, Partition(np.arange(g.node_count))) - 1e-12
    for a in range(p.k):
        for b in range(a + 1, p.k):
            merged = np.where(p.assignment == b, a, p.assignment)
            assert modularity(g, Partition(merged)) <= q + 1e-12


@given(graphs(min_nodes=3, max_nodes=25))
def test_detected_partition_is_valid(g):
    p = detect_greedy_modularity(g)
    assert sorted(u for c in p.communities for u in c) == list(range(g.node_count))
    assert set(p.assignment.tolist()) == set(range(p.k))


def test_partition_csv_roundtrip(tmp_path, karate):
    p = detect_greedy_modularity(karate)
    path = tmp_path / "p.csv"
    write_partition_csv(p, path)
    assert path.read_text().splitlines()[0] == "node_id,community_id"
    assert read_partition_csv(path) == p


def test_detector_registry():
    assert isinstance(get_detector("greedy"), GreedyModularity)
    with pytest.raises(NotImplementedError):
        WalkTrap()(TWO_TRIANGLES)
    with pytest.raises(ValueError):
        get_detector("louvain")


def test_id_ties_variant():
    from mdeo.community import GreedyModularity, get_detector
    from mdeo.datasets import load_builtin
    assert get_detector("greedy-id").name == "greedy-id"
    with pytest.raises(ValueError):
        GreedyModularity(ties="random")
    karate = load_builtin("karate")
    assert GreedyModularity(ties="id")(karate) == GreedyModularity()(karate)
    # davis has many exact gain ties: the id rule is sensitive to node numbering, the default is not
    davis = load_builtin("davis")
    perm = np.random.default_rng(0).permutation(davis.node_count)
    moved = davis.relabel(perm)
    for det, invariant in ((GreedyModularity(), True), (GreedyModularity(ties="id"), False)):
        back = det(moved).assignment[perm]
        assert (Partition(back) == det(davis)) is invariant
