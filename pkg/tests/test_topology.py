import random

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from membrane_fssp.fssp import random_graph, random_layered_dag, random_tree
from membrane_fssp.topology import (
    Kind,
    TopologyError,
    bfs_levels,
    brute_force_counts,
    build_topology,
    format_topology,
    parse_topology,
)

# node, level, predecessors, successors, peers, count
FIG1 = [
    ("1", "1", "3", "2", "-", "1"),
    ("2", "2", "1", "-", "-", "1"),
    ("3", "0", "-", "1,4,5,6", "-", "1"),
    ("4", "1", "3", "-", "-", "1"),
    ("5", "1", "3", "-", "-", "1"),
    ("6", "1", "3", "7", "-", "1"),
    ("7", "2", "6", "-", "-", "1"),
]
FIG2 = [
    ("1", "2", "2,3", "-", "-", "2"),
    ("2", "1", "6", "1,5", "-", "1"),
    ("3", "1", "6", "1,7", "-", "1"),
    ("4", "3", "7", "-", "-", "1"),
    ("5", "2", "2", "-", "-", "1"),
    ("6", "0", "-", "2,3,9", "-", "1"),
    ("7", "2", "3", "4", "8", "1"),
    ("8", "2", "9", "10", "7", "1"),
    ("9", "1", "6", "8", "-", "1"),
    ("10", "3", "8", "-", "-", "1"),
]
FIG3 = [
    ("1", "0", "-", "3,7", "-", "1"),
    ("2", "2", "3", "-", "4", "1"),
    ("3", "1", "1", "2,4,5", "-", "1"),
    ("4", "2", "3,7", "6", "2", "2"),
    ("5", "2", "3,7", "6", "-", "2"),
    ("6", "3", "4,5", "-", "-", "4"),
    ("7", "1", "1", "4,5", "-", "1"),
]


@pytest.mark.parametrize("fixture,commander,rows,ecc", [
    ("fig1", 3, FIG1, 2), ("fig2", 6, FIG2, 3), ("fig3", 1, FIG3, 3),
])
def test_reference_level_tables(request, fixture, commander, rows, ecc):
    lt = bfs_levels(request.getfixturevalue(fixture), commander)
    assert lt.rows() == rows
    assert lt.eccentricity == ecc


def test_fig2_counts_match_brute_force(fig2):
    assert brute_force_counts(fig2, 6) == bfs_levels(fig2, 6).count


def test_level_order_is_trace_column_order(fig2):
    assert bfs_levels(fig2, 6).order() == [6, 2, 3, 9, 1, 5, 7, 8, 4, 10]


def test_tsv_header(fig1):
    first = bfs_levels(fig1, 3).to_tsv().splitlines()[0]
    assert first == "node\tlevel\tpredecessors\tsuccessors\tpeers\tcount"


def test_tree_neighbors(fig1):
    assert fig1.neighbors(3) == {1, 4, 5, 6}
    assert fig1.parents(1) == {3}
    assert fig1.siblings(4) == {1, 5, 6}


def test_dag_siblings_only_when_requested():
    arcs = [(1, 2), (1, 3)]
    assert build_topology("dag", 3, arcs).neighbors(2) == {1}
    assert build_topology("dag", 3, arcs, include_siblings=True).neighbors(2) == {1, 3}


def test_graph_is_symmetric_closure():
    g = build_topology("graph", 3, [(1, 2), (2, 3)])
    assert g.neighbors(2) == {1, 3}
    assert (2, 1) in g.arcs


@pytest.mark.parametrize("kind,n,arcs,msg", [
    ("dag", 3, [(1, 2), (2, 3), (3, 1)], "cycle"),
    ("tree", 3, [(1, 3), (2, 3)], "multiple parents"),
    ("dag", 3, [(1, 2)], "not weakly connected"),
    ("graph", 2, [(1, 1)], "self-loop"),
    ("graph", 2, [(1, 3)], "out of range"),
    ("dag", 0, [], "positive"),
])
def test_build_errors(kind, n, arcs, msg):
    with pytest.raises(TopologyError, match=msg):
        build_topology(kind, n, arcs)


def test_commander_out_of_range(fig1):
    with pytest.raises(TopologyError):
        bfs_levels(fig1, 8)


def test_parse_roundtrip(fig1, fig2, fig3):
    for topo in (fig1, fig2, fig3):
        assert parse_topology(format_topology(topo)) == topo


@pytest.mark.parametrize("text,lineno", [
    ("kind: dag\nnodes: 2\narc: 1\n", 3),
    ("kind: web\n", 1),
    ("kind: dag\nkind: dag\n", 2),
    ("kind: dag\nnodes: 2\ncolor: red\n", 3),
    ("kind: dag\n\n# note\nnodes: x\n", 4),
])
def test_parse_errors_carry_line_numbers(text, lineno):
    with pytest.raises(TopologyError, match=f"line {lineno}:"):
        parse_topology(text)


def test_parse_missing_header():
    with pytest.raises(TopologyError, match="nodes"):
        parse_topology("kind: tree\n")


def _random_structure(seed, max_nodes):
    rng = random.Random(seed)
    n = rng.randint(2, max_nodes)
    maker = rng.choice([random_tree, random_layered_dag, random_graph])
    return rng, maker(rng, n)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 10))
def test_bfs_counts_match_path_enumeration(seed, max_nodes):
    rng, topo = _random_structure(seed, max_nodes)
    c = rng.randint(1, topo.node_count)
    assert bfs_levels(topo, c).count == brute_force_counts(topo, c)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 25))
def test_levels_are_shortest_distances(seed, max_nodes):
    rng, topo = _random_structure(seed, max_nodes)
    g = nx.Graph()
    g.add_nodes_from(topo.nodes)
    g.add_edges_from((u, v) for u in topo.nodes for v in topo.neighbors(u))
    c = rng.randint(1, topo.node_count)
    lt = bfs_levels(topo, c)
    assert lt.level == nx.single_source_shortest_path_length(g, c)
    assert lt.eccentricity == nx.eccentricity(g, c)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 25))
def test_level_relations_are_consistent(seed, max_nodes):
    rng, topo = _random_structure(seed, max_nodes)
    c = rng.randint(1, topo.node_count)
    lt = bfs_levels(topo, c)
    for x in topo.nodes:
        assert all(x in topo.neighbors(y) for y in topo.neighbors(x))
        assert all(x in lt.predecessors[y] for y in lt.successors[x])
        assert all(x in lt.peers[y] for y in lt.peers[x])
        if x != c:
            assert lt.predecessors[x]
            assert lt.count[x] == sum(lt.count[p] for p in lt.predecessors[x])


def test_brute_force_size_limit():
    topo = build_topology("tree", 16, [(i, i + 1) for i in range(1, 16)])
    with pytest.raises(ValueError):
        brute_force_counts(topo, 1)


def test_kind_enum_values():
    assert [k.value for k in Kind] == ["tree", "dag", "graph"]
