import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import strategies as st

from randsft.graph_core import build_graph, cycle_graph, full_graph, golden_mean_graph


@pytest.fixture
def golden():
    return golden_mean_graph()


@pytest.fixture
def full2():
    return full_graph(2)


@pytest.fixture
def cycle3():
    return cycle_graph(3)


BUILTINS = {
    "golden": golden_mean_graph(),
    "full:2": full_graph(2),
    "full:3": full_graph(3),
    "cycle:3": cycle_graph(3),
    "cycle:5": cycle_graph(5),
}


@st.composite
def small_digraphs(draw, max_vertices=5, min_vertices=1):
    n = draw(st.integers(min_vertices, max_vertices))
    pairs = list(itertools.product(range(n), repeat=2))
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    return build_graph(n, chosen)


def to_nx(g):
    h = nx.DiGraph()
    h.add_nodes_from(range(g.vertex_count))
    h.add_edges_from(g.edges)
    return h


def brute_matrix_power(g, p):
    # python-int matrix power, independent of the package's exact routine
    a = [[0] * g.vertex_count for _ in range(g.vertex_count)]
    for u, v in g.edges:
        a[u][v] = 1
    n = g.vertex_count
    m = [[int(i == j) for j in range(n)] for i in range(n)]
    for _ in range(p):
        m = [[sum(m[i][k] * a[k][j] for k in range(n)) for j in range(n)] for i in range(n)]
    return m


def irreducible_from(g):
    # strongly connected piece of g with the most vertices, relabelled, or None
    h = to_nx(g)
    comps = [c for c in nx.strongly_connected_components(h) if len(c) > 1 or h.has_edge(next(iter(c)), next(iter(c)))]
    if not comps:
        return None
    comp = sorted(max(comps, key=len))
    index = {v: i for i, v in enumerate(comp)}
    return build_graph(len(comp), [(index[u], index[v]) for u, v in g.edges if u in index and v in index])


def numpy_spectral_radius(g):
    if g.vertex_count == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(g.adjacency(dtype=float))))) if g.edge_count else 0.0


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
