"""Finite directed graphs and the constructions built on them.

A :class:`Graph` is a simple directed graph (self-loops allowed, no parallel
edges) on vertices ``0..vertex_count-1``.  Edges are kept in canonical order,
lexicographic in ``(u, v)``; an edge's position in that order is its *edge
index*, and every mask, sample and label in the package is aligned to it.

Paths are tuples of edge indices.  A path of length ``k`` has ``k`` edges; the
paths of length 0 are the vertices themselves.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import dataclass
from functools import cached_property, reduce
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import CapExceeded, GraphError

DEFAULT_PATH_CAP = 10**7


class Graph:
    """Immutable simple digraph with canonically ordered edges.

    Construct through :func:`build_graph` (validating) unless the arrays are
    already known to be sorted, unique and in range.
    """

    def __init__(self, vertex_count: int, src, dst, labels: Sequence[str] | None = None):
        src = np.asarray(src, dtype=np.int64).copy()
        dst = np.asarray(dst, dtype=np.int64).copy()
        src.setflags(write=False)
        dst.setflags(write=False)
        self._vertex_count = int(vertex_count)
        self._src = src
        self._dst = dst
        if labels is not None:
            labels = tuple(labels)
            if len(labels) != len(src):
                raise GraphError("labels must align with edges")
        self._labels = labels

    @property
    def vertex_count(self) -> int:
        return self._vertex_count

    @property
    def edge_count(self) -> int:
        return len(self._src)

    @property
    def src(self) -> np.ndarray:
        """Initial vertex of each edge, by edge index."""
        return self._src

    @property
    def dst(self) -> np.ndarray:
        """Terminal vertex of each edge, by edge index."""
        return self._dst

    @property
    def labels(self) -> tuple[str, ...] | None:
        return self._labels

    @property
    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self._src.tolist(), self._dst.tolist()))

    @cached_property
    def out_offsets(self) -> np.ndarray:
        """CSR row pointer: out-edges of ``u`` are ``out_offsets[u]:out_offsets[u+1]``."""
        counts = np.bincount(self._src, minlength=self._vertex_count)
        offsets = np.zeros(self._vertex_count + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        return offsets

    @cached_property
    def out_degree(self) -> np.ndarray:
        return np.bincount(self._src, minlength=self._vertex_count)

    @cached_property
    def in_degree(self) -> np.ndarray:
        return np.bincount(self._dst, minlength=self._vertex_count)

    def adjacency(self, dtype=np.int64) -> np.ndarray:
        a = np.zeros((self._vertex_count, self._vertex_count), dtype=dtype)
        a[self._src, self._dst] = 1
        return a

    def csr(self) -> sparse.csr_matrix:
        n = self._vertex_count
        data = np.ones(self.edge_count, dtype=np.float64)
        return sparse.csr_matrix((data, (self._src, self._dst)), shape=(n, n))

    def edge_index(self, u: int, v: int) -> int:
        lo, hi = self.out_offsets[u], self.out_offsets[u + 1]
        j = lo + int(np.searchsorted(self._dst[lo:hi], v))
        if j < hi and self._dst[j] == v:
            return int(j)
        raise KeyError((u, v))

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self._vertex_count == other._vertex_count
            and np.array_equal(self._src, other._src)
            and np.array_equal(self._dst, other._dst)
        )

    def __hash__(self):
        return hash((self._vertex_count, self._src.tobytes(), self._dst.tobytes()))

    def __repr__(self):
        return f"Graph(vertex_count={self._vertex_count}, edge_count={self.edge_count})"


@dataclass(frozen=True)
class PathSet:
    """All paths of one length, in lexicographic edge-index order.

    ``origins[i]`` is the initial vertex of ``paths[i]``; it is the only
    information carried by a length-0 path.
    """

    length: int
    paths: tuple[tuple[int, ...], ...]
    origins: tuple[int, ...]

    def __len__(self):
        return len(self.paths)


@dataclass(frozen=True)
class OrbitSet:
    """Closed walks of length ``period`` grouped into rotation classes.

    Each class is stored as its lexicographically least rotation together
    with the number of distinct rotations it contains.
    """

    period: int
    orbits: tuple[tuple[int, ...], ...]
    class_sizes: tuple[int, ...]

    @property
    def walk_count(self) -> int:
        return sum(self.class_sizes)

    def __len__(self):
        return self.walk_count


# --- construction -----------------------------------------------------------


def build_graph(vertex_count: int, edge_list: Iterable[Sequence[int]], labels=None) -> Graph:
    """Validate, deduplicate and canonically order an edge list."""
    vertex_count = int(vertex_count)
    if vertex_count < 0:
        raise GraphError("vertex_count must be nonnegative")
    pairs = [(int(u), int(v)) for u, v in edge_list]
    for u, v in pairs:
        if not (0 <= u < vertex_count and 0 <= v < vertex_count):
            raise GraphError(f"edge ({u}, {v}) has an endpoint out of range for {vertex_count} vertices")
    if labels is not None:
        labels = list(labels)
        if len(labels) != len(pairs):
            raise GraphError("labels must align with edge_list")
        keyed = {}
        for p, lab in zip(pairs, labels):
            keyed.setdefault(p, lab)
        unique = sorted(keyed)
        labels = [keyed[p] for p in unique]
    else:
        unique = sorted(set(pairs))
    if len(unique) < len(pairs):
        warnings.warn(f"{len(pairs) - len(unique)} duplicate edge(s) dropped", stacklevel=2)
    if unique:
        src, dst = zip(*unique)
    else:
        src, dst = (), ()
    return Graph(vertex_count, src, dst, labels)


def full_graph(a: int) -> Graph:
    """Complete digraph with loops on ``a`` vertices (the full ``a``-shift)."""
    return build_graph(a, [(u, v) for u in range(a) for v in range(a)])


def golden_mean_graph() -> Graph:
    return build_graph(2, [(0, 0), (0, 1), (1, 0)])


def cycle_graph(length: int) -> Graph:
    return build_graph(length, [(i, (i + 1) % length) for i in range(length)])


def load_graph(path: str | os.PathLike) -> Graph:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict) or set(doc) != {"vertex_count", "edges"}:
        raise GraphError(f"{path}: expected an object with keys 'vertex_count' and 'edges'")
    try:
        edges = [(u, v) for u, v in doc["edges"]]
    except (TypeError, ValueError):
        raise GraphError(f"{path}: edges must be [u, v] pairs") from None
    return build_graph(doc["vertex_count"], edges)


def dump_graph(g: Graph, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        json.dump({"vertex_count": g.vertex_count, "edges": [list(e) for e in g.edges]}, fh)


def resolve_graph(spec: str) -> Graph:
    """Builtin name (``golden``, ``full:a``, ``cycle:L``) or a JSON file path."""
    if spec == "golden":
        return golden_mean_graph()
    head, _, arg = spec.partition(":")
    if head in ("full", "cycle") and arg:
        try:
            k = int(arg)
        except ValueError:
            raise GraphError(f"bad size in graph spec {spec!r}") from None
        if k < 1:
            raise GraphError(f"bad size in graph spec {spec!r}")
        return full_graph(k) if head == "full" else cycle_graph(k)
    if os.path.exists(spec):
        return load_graph(spec)
    raise GraphError(f"unknown graph {spec!r} (builtins: golden, full:a, cycle:L, or a JSON file)")


# --- derived graphs ---------------------------------------------------------


def _two_block(h: Graph) -> tuple[np.ndarray, np.ndarray]:
    # edge e is followed by every out-edge of dst[e]
    starts = h.out_offsets[h.dst]
    counts = h.out_degree[h.dst]
    total = int(counts.sum())
    new_src = np.repeat(np.arange(h.edge_count, dtype=np.int64), counts)
    shift = np.repeat(starts - (np.cumsum(counts) - counts), counts)
    new_dst = shift + np.arange(total, dtype=np.int64)
    return new_src, new_dst


def n_block_graph(g: Graph, n: int, edge_cap: int = DEFAULT_PATH_CAP, labels: bool = True) -> Graph:
    """The ``n``-block graph: vertices are paths of length n-1, edges paths of length n.

    Edge labels (when requested) spell the underlying path of ``g`` as
    dot-separated edge indices.  ``n == 1`` returns ``g`` itself.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return g
    h = g
    paths = np.arange(g.edge_count, dtype=np.int64)[:, None]
    for _ in range(n - 1):
        needed = int(h.out_degree[h.dst].sum())
        if needed > edge_cap:
            raise CapExceeded("n-block edge count", edge_cap, needed)
        new_src, new_dst = _two_block(h)
        if labels:
            paths = np.concatenate([paths[new_src], paths[new_dst, -1:]], axis=1)
        h = Graph(h.edge_count, new_src, new_dst)
    if labels:
        names = [".".join(map(str, row)) for row in paths.tolist()]
        h = Graph(h.vertex_count, h.src, h.dst, names)
    return h


def power_graph(g: Graph, p: int) -> np.ndarray:
    """Adjacency counts of the ``p``-th power graph, i.e. ``A**p`` exactly."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return matrix_power_exact(g.adjacency(), p)


def matrix_power_exact(a: np.ndarray, p: int) -> np.ndarray:
    """Exact nonnegative integer matrix power; switches to Python ints on overflow risk."""
    row_max = int(a.sum(axis=1).max()) if a.size else 0
    if row_max <= 1 or p * math.log2(max(row_max, 2)) < 62:
        return np.linalg.matrix_power(a.astype(np.int64), p)
    obj = a.astype(object)
    result = np.identity(a.shape[0], dtype=np.int64).astype(object)
    base = obj
    while p:
        if p & 1:
            result = result.dot(base)
        p >>= 1
        if p:
            base = base.dot(base)
    return result


def transpose(g: Graph) -> Graph:
    return build_graph(g.vertex_count, zip(g.dst.tolist(), g.src.tolist()))


def induced_subgraph(g: Graph, keep: np.ndarray) -> tuple[Graph, np.ndarray]:
    """Subgraph on vertices where ``keep`` is true, relabelled densely.

    Returns the subgraph and the original index of each new vertex.
    """
    keep = np.asarray(keep, dtype=bool)
    old = np.flatnonzero(keep)
    new_index = np.full(g.vertex_count, -1, dtype=np.int64)
    new_index[old] = np.arange(len(old))
    sel = keep[g.src] & keep[g.dst]
    sub = Graph(len(old), new_index[g.src[sel]], new_index[g.dst[sel]])
    return sub, old


def essential_vertices(g: Graph) -> np.ndarray:
    """Boolean mask of vertices surviving iterated removal of sources and sinks."""
    alive = np.ones(g.vertex_count, dtype=bool)
    src, dst = g.src, g.dst
    while True:
        live_edges = alive[src] & alive[dst]
        outd = np.bincount(src[live_edges], minlength=g.vertex_count)
        ind = np.bincount(dst[live_edges], minlength=g.vertex_count)
        nxt = alive & (outd > 0) & (ind > 0)
        if np.array_equal(nxt, alive):
            return alive
        alive = nxt


def essential_subgraph(g: Graph) -> Graph:
    keep = essential_vertices(g)
    if keep.all():
        return g
    return induced_subgraph(g, keep)[0]


# --- enumeration ------------------------------------------------------------


def _count_paths(g: Graph, k: int) -> int:
    counts = [1] * g.vertex_count
    src, dst = g.src.tolist(), g.dst.tolist()
    for _ in range(k):
        nxt = [0] * g.vertex_count
        for u, v in zip(src, dst):
            nxt[u] += counts[v]
        counts = nxt
    return sum(counts)


def enumerate_paths(g: Graph, k: int, cap: int = DEFAULT_PATH_CAP) -> PathSet:
    """Every path of length ``k`` (``B_k``), lexicographic in edge indices."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        verts = tuple(range(g.vertex_count))
        return PathSet(0, tuple(() for _ in verts), verts)
    total = _count_paths(g, k)
    if total > cap:
        raise CapExceeded(f"paths of length {k}", cap, total)
    offsets = g.out_offsets.tolist()
    dst = g.dst.tolist()
    src = g.src.tolist()
    paths: list[tuple[int, ...]] = [(e,) for e in range(g.edge_count)]
    for _ in range(k - 1):
        nxt = []
        for b in paths:
            t = dst[b[-1]]
            for f in range(offsets[t], offsets[t + 1]):
                nxt.append(b + (f,))
        paths = nxt
    return PathSet(k, tuple(paths), tuple(src[b[0]] for b in paths))


def _least_rotation(b: tuple[int, ...]) -> tuple[int, ...]:
    return min(b[i:] + b[:i] for i in range(len(b)))


def closed_walks(g: Graph, p: int, cap: int = DEFAULT_PATH_CAP) -> list[tuple[int, ...]]:
    """All closed walks of length ``p`` (elements of ``Per_p``), lexicographic."""
    if p < 1:
        raise ValueError("p must be >= 1")
    total = trace_power(g, p)
    if total > cap:
        raise CapExceeded(f"closed walks of length {p}", cap, total)
    n = g.vertex_count
    if total == 0:
        return []
    # reach[r][u, v]: some walk of length exactly r from u to v
    a = g.adjacency(dtype=bool)
    reach = [np.identity(n, dtype=bool)]
    for _ in range(p):
        reach.append((reach[-1].astype(np.int64) @ a.astype(np.int64)) > 0)
    offsets = g.out_offsets.tolist()
    dst = g.dst.tolist()
    out: list[tuple[int, ...]] = []

    def extend(prefix: list[int], at: int, home: int, remaining: int):
        if remaining == 0:
            if at == home:
                out.append(tuple(prefix))
            return
        for f in range(offsets[at], offsets[at + 1]):
            t = dst[f]
            if reach[remaining - 1][t, home]:
                prefix.append(f)
                extend(prefix, t, home, remaining - 1)
                prefix.pop()

    src = g.src.tolist()
    for e in range(g.edge_count):
        home = src[e]
        if reach[p - 1][dst[e], home]:
            extend([e], dst[e], home, p - 1)
    return out


def enumerate_periodic(g: Graph, p: int, cap: int = DEFAULT_PATH_CAP) -> OrbitSet:
    """Closed walks of length ``p`` grouped into rotation classes."""
    classes: dict[tuple[int, ...], int] = {}
    for b in closed_walks(g, p, cap):
        rep = _least_rotation(b)
        classes[rep] = classes.get(rep, 0) + 1
    reps = tuple(sorted(classes))
    return OrbitSet(p, reps, tuple(classes[r] for r in reps))


def trace_power(g: Graph, p: int) -> int:
    """``tr(A**p)`` in exact integers."""
    return int(np.trace(matrix_power_exact(g.adjacency(), p)))


def path_vertices(g: Graph, b: Sequence[int]) -> frozenset[int]:
    """Vertices traversed by path ``b``."""
    b = list(b)
    return frozenset(g.src[b].tolist()) | frozenset(g.dst[b].tolist())


def is_path(g: Graph, b: Sequence[int]) -> bool:
    b = list(b)
    if any(not (0 <= e < g.edge_count) for e in b):
        return False
    return all(g.dst[b[j]] == g.src[b[j + 1]] for j in range(len(b) - 1))


# --- strong connectivity ----------------------------------------------------


def _tarjan(n: int, offsets: list[int], dst: list[int]) -> list[list[int]]:
    # iterative Tarjan; returns every SCC, trivial ones included
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, offsets[root])]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, pos = work[-1]
            if pos < offsets[v + 1]:
                work[-1] = (v, pos + 1)
                w = dst[pos]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, offsets[w]))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
    return comps


def scc_decompose(g: Graph) -> list[tuple[int, ...]]:
    """Nontrivial strongly connected components (irreducible components).

    A component is nontrivial when it carries at least one edge, so a lone
    vertex counts only if it has a self-loop.  Components are returned as
    sorted vertex tuples, ordered by their least vertex.
    """
    comps = _tarjan(g.vertex_count, g.out_offsets.tolist(), g.dst.tolist())
    loops = set(g.src[g.src == g.dst].tolist())
    result = [tuple(sorted(c)) for c in comps if len(c) > 1 or c[0] in loops]
    return sorted(result)


def component_period(n: int, src: np.ndarray, dst: np.ndarray) -> int:
    """Period of a strongly connected graph given by relabelled edge arrays.

    Uses breadth-first distances ``d`` from vertex 0: the period is the gcd
    of ``d[u] + 1 - d[v]`` over all edges.
    """
    mat = sparse.csr_matrix((np.ones(len(src)), (src, dst)), shape=(n, n))
    d = csgraph.shortest_path(mat, method="D", unweighted=True, indices=0)
    d = d.astype(np.int64)
    return int(np.gcd.reduce(np.abs(d[src] + 1 - d[dst])))


def _sub_edges(g: Graph, comp: Sequence[int]) -> tuple[int, np.ndarray, np.ndarray]:
    keep = np.zeros(g.vertex_count, dtype=bool)
    keep[list(comp)] = True
    sub, _ = induced_subgraph(g, keep)
    return sub.vertex_count, sub.src, sub.dst


def period(g: Graph) -> int | None:
    """gcd of all cycle lengths, or ``None`` when ``g`` has no cycle."""
    periods = [component_period(*_sub_edges(g, c)) for c in scc_decompose(g)]
    if not periods:
        return None
    return reduce(math.gcd, periods)


def is_irreducible(g: Graph) -> bool:
    comps = scc_decompose(g)
    return g.vertex_count > 0 and len(comps) == 1 and len(comps[0]) == g.vertex_count


def is_primitive(g: Graph) -> bool:
    return is_irreducible(g) and period(g) == 1
