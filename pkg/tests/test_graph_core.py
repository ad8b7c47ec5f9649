import itertools
import json
import math
import warnings

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings

from conftest import BUILTINS, brute_matrix_power, small_digraphs, to_nx
from randsft.errors import CapExceeded, GraphError
from randsft.graph_core import (
    build_graph,
    closed_walks,
    cycle_graph,
    dump_graph,
    enumerate_paths,
    enumerate_periodic,
    essential_subgraph,
    full_graph,
    golden_mean_graph,
    is_irreducible,
    is_path,
    is_primitive,
    load_graph,
    n_block_graph,
    path_vertices,
    period,
    power_graph,
    resolve_graph,
    scc_decompose,
    trace_power,
    transpose,
)


def test_build_golden(golden):
    assert golden.vertex_count == 2
    assert golden.edges == [(0, 0), (0, 1), (1, 0)]


def test_build_full2_is_all_ones(full2):
    assert (full2.adjacency() == 1).all()


def test_build_rejects_out_of_range():
    with pytest.raises(GraphError):
        build_graph(1, [(0, 1)])


def test_build_dedupes_with_warning():
    with pytest.warns(UserWarning, match="duplicate"):
        g = build_graph(2, [(1, 0), (0, 1), (1, 0)])
    assert g.edges == [(0, 1), (1, 0)]


def test_canonical_order_is_lexicographic():
    g = build_graph(3, [(2, 0), (0, 2), (1, 1), (0, 1)])
    assert g.edges == sorted(g.edges)
    assert g.edge_index(1, 1) == 2


@pytest.mark.parametrize(
    "g,n,nv,ne",
    [
        (golden_mean_graph(), 2, 3, 5),
        (full_graph(2), 3, 8, 16),
        (golden_mean_graph(), 3, 5, 8),
    ],
)
def test_n_block_sizes(g, n, nv, ne):
    h = n_block_graph(g, n)
    assert (h.vertex_count, h.edge_count) == (nv, ne)


def test_n_block_one_is_identity(golden):
    assert n_block_graph(golden, 1) is golden


def test_n_block_labels_spell_paths(golden):
    h = n_block_graph(golden, 3)
    spelled = sorted(tuple(map(int, lab.split("."))) for lab in h.labels)
    assert spelled == sorted(enumerate_paths(golden, 3).paths)


def test_n_block_cap():
    with pytest.raises(CapExceeded) as err:
        n_block_graph(full_graph(2), 12, edge_cap=1000)
    assert err.value.cap == 1000


@pytest.mark.parametrize("name", ["golden", "full:2", "cycle:3"])
@pytest.mark.parametrize("n", [2, 3, 4])
def test_n_block_path_counts(name, n):
    g = BUILTINS[name]
    h = n_block_graph(g, n)
    for k in range(1, 6):
        assert len(enumerate_paths(h, k)) == len(enumerate_paths(g, k + n - 1))


def test_two_block_matches_line_graph(golden):
    # the 2-block graph is the line graph of the edge set
    h = n_block_graph(golden, 2)
    line = nx.line_graph(to_nx(golden))
    assert nx.is_isomorphic(to_nx(h), line)


def test_power_graph_examples(golden, full2, cycle3):
    assert (power_graph(golden, 1) == golden.adjacency()).all()
    assert (power_graph(cycle3, 3) == np.identity(3, dtype=int)).all()
    assert (power_graph(full2, 2) == 2).all()


def test_power_graph_no_overflow():
    big = power_graph(full_graph(3), 60)
    assert int(big[0, 0]) == 3**59


def test_transpose_examples(golden):
    assert transpose(golden) == golden
    assert transpose(build_graph(2, [(0, 1)])).edges == [(1, 0)]


@given(small_digraphs())
@settings(max_examples=60, deadline=None)
def test_transpose_involution_and_scc(g):
    assert transpose(transpose(g)) == g
    assert scc_decompose(transpose(g)) == scc_decompose(g)


def test_enumerate_paths_examples(golden, cycle3):
    assert len(enumerate_paths(golden, 2)) == 5
    zero = enumerate_paths(golden, 0)
    assert zero.origins == (0, 1) and len(zero) == 2
    assert len(enumerate_paths(cycle3, 4)) == 3


def test_enumerate_paths_cap(full2):
    with pytest.raises(CapExceeded):
        enumerate_paths(full2, 10, cap=100)


@given(small_digraphs(max_vertices=4))
@settings(max_examples=40, deadline=None)
def test_paths_are_valid_and_counted(g):
    for k in range(1, 4):
        ps = enumerate_paths(g, k)
        assert all(len(b) == k and is_path(g, b) for b in ps.paths)
        assert len(set(ps.paths)) == len(ps)
        m = brute_matrix_power(g, k)
        assert len(ps) == sum(map(sum, m))


def test_periodic_examples(golden, full2, cycle3):
    assert [enumerate_periodic(golden, p).walk_count for p in (1, 2, 3)] == [1, 3, 4]
    assert [enumerate_periodic(full2, p).walk_count for p in range(1, 7)] == [2**p for p in range(1, 7)]
    assert enumerate_periodic(cycle3, 1).walk_count == 0
    assert enumerate_periodic(cycle3, 2).walk_count == 0
    per3 = enumerate_periodic(cycle3, 3)
    assert per3.walk_count == 3 and len(per3.orbits) == 1


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_trace_identity(name):
    g = BUILTINS[name]
    for p in range(1, 9):
        m = brute_matrix_power(g, p)
        tr = sum(m[i][i] for i in range(g.vertex_count))
        assert enumerate_periodic(g, p).walk_count == tr == trace_power(g, p)


def test_orbit_representatives_are_minimal_rotations(golden):
    for p in range(1, 7):
        orb = enumerate_periodic(golden, p)
        for rep in orb.orbits:
            assert rep == min(rep[i:] + rep[:i] for i in range(p))
            assert golden.src[rep[0]] == golden.dst[rep[-1]]


@given(small_digraphs(max_vertices=4))
@settings(max_examples=40, deadline=None)
def test_closed_walks_brute_force(g):
    for p in range(1, 4):
        brute = [
            b for b in itertools.product(range(g.edge_count), repeat=p)
            if is_path(g, b) and g.dst[b[-1]] == g.src[b[0]]
        ]
        assert closed_walks(g, p) == sorted(brute)


def test_scc_examples(golden):
    assert scc_decompose(golden) == [(0, 1)]
    assert len(scc_decompose(build_graph(2, [(0, 0), (1, 1)]))) == 2
    assert scc_decompose(build_graph(2, [(0, 1)])) == []


@given(small_digraphs(max_vertices=6))
@settings(max_examples=80, deadline=None)
def test_scc_matches_networkx(g):
    h = to_nx(g)
    expected = sorted(
        tuple(sorted(c)) for c in nx.strongly_connected_components(h)
        if len(c) > 1 or h.has_edge(next(iter(c)), next(iter(c)))
    )
    assert scc_decompose(g) == expected


def test_period_examples(golden, cycle3):
    assert period(cycle3) == 3
    assert period(golden) == 1
    two_four = build_graph(6, [(0, 1), (1, 0), (2, 3), (3, 4), (4, 5), (5, 2)])
    assert period(two_four) == 2
    assert period(build_graph(2, [(0, 1)])) is None


@given(small_digraphs(max_vertices=5))
@settings(max_examples=60, deadline=None)
def test_period_matches_networkx(g):
    h = to_nx(g)
    for comp in scc_decompose(g):
        sub = h.subgraph(comp)
        sub_g = build_graph(len(comp), [(comp.index(u), comp.index(v)) for u, v in sub.edges])
        assert (period(sub_g) == 1) == nx.is_aperiodic(sub)


def test_period_by_cycle_lengths():
    g = build_graph(5, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 0)])
    lengths = [len(c) for c in nx.simple_cycles(to_nx(g))]
    assert period(g) == math.gcd(*lengths) == 1


def test_essential_examples(golden):
    assert essential_subgraph(golden) == golden
    assert essential_subgraph(build_graph(3, [(0, 1), (1, 2)])).vertex_count == 0
    tail = build_graph(4, [(0, 1), (1, 2), (2, 0), (2, 3)])
    assert essential_subgraph(tail) == cycle_graph(3)


@given(small_digraphs(max_vertices=6))
@settings(max_examples=60, deadline=None)
def test_essential_idempotent(g):
    e = essential_subgraph(g)
    assert essential_subgraph(e) == e
    assert (e.vertex_count == 0) == (not scc_decompose(g))


def test_irreducible_primitive(golden, cycle3):
    assert is_irreducible(golden) and is_primitive(golden)
    assert is_irreducible(cycle3) and not is_primitive(cycle3)
    assert not is_irreducible(build_graph(2, [(0, 0), (1, 1)]))


def test_path_vertices(golden):
    assert path_vertices(golden, [1, 2]) == frozenset({0, 1})


def test_load_dump_roundtrip(tmp_path, golden):
    p = tmp_path / "g.json"
    dump_graph(golden, p)
    assert load_graph(p) == golden
    assert resolve_graph(str(p)) == golden


def test_load_rejects_unknown_keys(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"vertex_count": 1, "edges": [], "name": "x"}))
    with pytest.raises(GraphError):
        load_graph(p)


def test_load_out_of_range(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"vertex_count": 1, "edges": [[0, 3]]}))
    with pytest.raises(GraphError):
        load_graph(p)


def test_load_duplicate_warns(tmp_path):
    p = tmp_path / "dup.json"
    p.write_text(json.dumps({"vertex_count": 1, "edges": [[0, 0], [0, 0]]}))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        g = load_graph(p)
    assert g.edge_count == 1 and caught


def test_resolve_builtins():
    assert resolve_graph("golden") == golden_mean_graph()
    assert resolve_graph("full:3") == full_graph(3)
    assert resolve_graph("cycle:4") == cycle_graph(4)
    for bad in ("full:0", "cycle:x", "nope"):
        with pytest.raises(GraphError):
            resolve_graph(bad)
