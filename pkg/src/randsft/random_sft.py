"""Random subgraphs of a graph: sampling, classification, and the exhaustive oracle.

Each edge is kept independently with probability ``alpha``.  Sampling is
counter based so a trial can be regenerated from ``(seed, trial_index)``
alone, in any order and on any worker:

    key    = mix64(mix64(seed) + (trial_index + 1) * GAMMA)
    u_j    = (mix64(key + (j + 1) * GAMMA) >> 11) * 2**-53
    keep j <=> u_j < alpha

``mix64`` is the SplitMix64 finalizer and ``GAMMA`` its golden-ratio
increment.  The uniforms do not depend on ``alpha``, so masks for
``alpha1 <= alpha2`` are nested.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np

from .errors import CapExceeded, GraphError
from .graph_core import Graph, component_period, period
from .spectral import perron_root

GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_MASK64 = (1 << 64) - 1

ORACLE_MAX_EDGES = 22
_ORACLE_CHUNK = 1 << 16
_MAX_POSITIVE = 8  # a positive-entropy block needs 3 edges, so 22 edges allow at most 7
BETA_BUCKET = 1e-9

if "NUMBA_THREADING_LAYER" not in os.environ:
    # the TBB layer probes and warns on older installs; workqueue is always present
    numba.config.THREADING_LAYER = "workqueue"


def mix64(z: int) -> int:
    """SplitMix64 output finalizer on a Python int."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _M1) & _MASK64
    z = ((z ^ (z >> 27)) * _M2) & _MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_M1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def trial_key(seed: int, trial_index: int) -> int:
    return mix64(mix64(seed) + (trial_index + 1) * GAMMA)


def edge_uniforms(edge_count: int, seed: int, trial_indices) -> np.ndarray:
    """Uniforms of shape ``(len(trial_indices), edge_count)`` in ``[0, 1)``."""
    t = np.asarray(np.atleast_1d(trial_indices), dtype=np.uint64)
    with np.errstate(over="ignore"):
        keys = _mix64_array(np.uint64(mix64(seed)) + (t + np.uint64(1)) * np.uint64(GAMMA))
        steps = np.arange(1, edge_count + 1, dtype=np.uint64) * np.uint64(GAMMA)
        z = _mix64_array(keys[:, None] + steps[None, :])
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")


@dataclass(frozen=True, eq=False)
class OmegaSample:
    """One draw of allowed edges, reproducible from ``(seed, trial_index, alpha)``."""

    graph: Graph
    mask: np.ndarray
    alpha: float
    seed: int
    trial_index: int

    def __eq__(self, other):
        if not isinstance(other, OmegaSample):
            return NotImplemented
        return (
            self.graph == other.graph
            and np.array_equal(self.mask, other.mask)
            and (self.alpha, self.seed, self.trial_index) == (other.alpha, other.seed, other.trial_index)
        )


def sample_omega(g: Graph, alpha: float, seed: int, trial_index: int) -> OmegaSample:
    _check_alpha(alpha)
    mask = edge_uniforms(g.edge_count, seed, [trial_index])[0] < alpha
    mask.setflags(write=False)
    return OmegaSample(g, mask, float(alpha), int(seed), int(trial_index))


def sample_masks(g: Graph, alpha: float, seed: int, trial_indices) -> np.ndarray:
    """Boolean masks for many trials at once, row ``i`` for ``trial_indices[i]``."""
    _check_alpha(alpha)
    return edge_uniforms(g.edge_count, seed, trial_indices) < alpha


@dataclass(frozen=True)
class RealizationSummary:
    is_empty: bool
    component_count: int
    beta: float
    zero_entropy: bool
    unique_positive_entropy: bool
    positive_component_period: int | None


@numba.njit(cache=True)
def _scc_labels(n, offsets, dst, labels):  # pragma: no cover - compiled
    # iterative Tarjan over CSR arrays; returns the number of components
    index = np.full(n, -1, dtype=np.int64)
    low = np.zeros(n, dtype=np.int64)
    on_stack = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int64)
    work_v = np.empty(n, dtype=np.int64)
    work_pos = np.empty(n, dtype=np.int64)
    sp = 0
    ncomp = 0
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        wp = 0
        work_v[0] = root
        work_pos[0] = offsets[root]
        wp = 1
        index[root] = counter
        low[root] = counter
        counter += 1
        stack[sp] = root
        sp += 1
        on_stack[root] = True
        while wp > 0:
            v = work_v[wp - 1]
            pos = work_pos[wp - 1]
            if pos < offsets[v + 1]:
                work_pos[wp - 1] = pos + 1
                w = dst[pos]
                if index[w] == -1:
                    index[w] = counter
                    low[w] = counter
                    counter += 1
                    stack[sp] = w
                    sp += 1
                    on_stack[w] = True
                    work_v[wp] = w
                    work_pos[wp] = offsets[w]
                    wp += 1
                elif on_stack[w] and index[w] < low[v]:
                    low[v] = index[w]
                continue
            wp -= 1
            if wp > 0:
                u = work_v[wp - 1]
                if low[v] < low[u]:
                    low[u] = low[v]
            if low[v] == index[v]:
                while True:
                    sp -= 1
                    w = stack[sp]
                    on_stack[w] = False
                    labels[w] = ncomp
                    if w == v:
                        break
                ncomp += 1
    return ncomp


@numba.njit(cache=True)
def _bfs_period(n, offsets, dst):  # pragma: no cover - compiled
    # gcd of d[u] + 1 - d[v] over edges, with d the BFS depth from vertex 0
    depth = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    depth[0] = 0
    queue[0] = 0
    head, tail = 0, 1
    while head < tail:
        u = queue[head]
        head += 1
        for k in range(offsets[u], offsets[u + 1]):
            v = dst[k]
            if depth[v] == -1:
                depth[v] = depth[u] + 1
                queue[tail] = v
                tail += 1
    g = 0
    for u in range(n):
        for k in range(offsets[u], offsets[u + 1]):
            x = abs(depth[u] + 1 - depth[dst[k]])
            while x:
                g, x = x, g % x
    return g


def _offsets(n: int, src: np.ndarray) -> np.ndarray:
    out = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=out[1:])
    return out


def realize_mask(g: Graph, mask: np.ndarray, tol: float = 1e-10) -> RealizationSummary:
    """Classify the edge shift of ``g`` restricted to the edges where ``mask`` holds."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (g.edge_count,):
        raise GraphError(f"mask has shape {mask.shape}, graph has {g.edge_count} edges")
    # canonical edge order keeps the kept edges sorted by source
    src = g.src[mask]
    dst = g.dst[mask]
    n = g.vertex_count
    if len(src) == 0:
        return RealizationSummary(True, 0, 0.0, True, False, None)
    labels = np.empty(n, dtype=np.int64)
    ncomp = _scc_labels(n, _offsets(n, src), dst, labels)
    ls, ld = labels[src], labels[dst]
    internal = ls == ld
    e_count = np.bincount(ls[internal], minlength=ncomp)
    v_count = np.bincount(labels, minlength=ncomp)
    nontrivial = np.flatnonzero(e_count)
    count = len(nontrivial)
    if count == 0:
        return RealizationSummary(True, 0, 0.0, True, False, None)
    # strongly connected with |E| == |V| means a single cycle
    positive = nontrivial[e_count[nontrivial] > v_count[nontrivial]]
    if len(positive) == 0:
        return RealizationSummary(False, count, 1.0, True, False, None)
    beta = 0.0
    per = None
    relabel = np.empty(n, dtype=np.int64)
    for c in positive:
        sel = internal & (ls == c)
        verts = np.flatnonzero(labels == c)
        relabel[verts] = np.arange(len(verts))
        s, d = relabel[src[sel]], relabel[dst[sel]]
        beta = max(beta, perron_root(len(verts), s, d, tol).value)
        if len(positive) == 1:
            per = int(_bfs_period(len(verts), _offsets(len(verts), s), d))
    return RealizationSummary(False, count, beta, False, len(positive) == 1, per)


def realize(g: Graph, w: OmegaSample) -> RealizationSummary:
    if w.graph is not g and w.graph != g:
        raise GraphError("sample was drawn on a different graph")
    return realize_mask(g, w.mask)


# --- exhaustive oracle ------------------------------------------------------


@numba.njit(cache=True, parallel=True)
def _classify_masks(start, count, nv, esrc, edst, out_i, out_npos, out_pos):  # pragma: no cover - compiled
    ne = esrc.shape[0]
    block = 1024
    nblocks = (count + block - 1) // block
    one = np.uint64(1)
    for b in numba.prange(nblocks):
        reach = np.zeros(nv, dtype=np.uint64)
        for t in range(b * block, min(count, (b + 1) * block)):
            mask = np.uint64(start + t)
            for v in range(nv):
                reach[v] = 0
            for j in range(ne):
                if (mask >> np.uint64(j)) & one:
                    reach[esrc[j]] |= one << np.uint64(edst[j])
            # transitive closure
            for k in range(nv):
                bk = one << np.uint64(k)
                rk = reach[k]
                for i in range(nv):
                    if reach[i] & bk:
                        reach[i] |= rk
            done = np.uint64(0)
            ncomp = 0
            npos = 0
            for v in range(nv):
                bv = one << np.uint64(v)
                if (done & bv) or not (reach[v] & bv):
                    continue
                comp = np.uint64(0)
                vcount = 0
                for u in range(nv):
                    bu = one << np.uint64(u)
                    if (reach[v] & bu) and (reach[u] & bv):
                        comp |= bu
                        vcount += 1
                done |= comp
                emask = np.uint32(0)
                ecount = 0
                for j in range(ne):
                    if ((mask >> np.uint64(j)) & one) and (comp >> np.uint64(esrc[j])) & one and (comp >> np.uint64(edst[j])) & one:
                        emask |= np.uint32(1) << np.uint32(j)
                        ecount += 1
                ncomp += 1
                if ecount > vcount:
                    out_pos[t, npos] = emask
                    npos += 1
            out_i[t] = ncomp
            out_npos[t] = npos


@dataclass(frozen=True)
class MaskCensus:
    """Masks of one graph grouped by outcome.

    ``table`` rows are ``(allowed_edges, I, beta_bucket, w, count)``; ``beta``
    is ``beta_bucket * BETA_BUCKET``, and ``w`` marks a unique
    positive-entropy component whose period equals the graph's.
    """

    edge_count: int
    table: np.ndarray


def _component_stats(src: np.ndarray, dst: np.ndarray, emask: int) -> tuple[float, int]:
    idx = [j for j in range(len(src)) if emask >> j & 1]
    s, d = src[idx], dst[idx]
    verts, inv = np.unique(np.concatenate([s, d]), return_inverse=True)
    s, d = inv[: len(idx)], inv[len(idx):]
    a = np.zeros((len(verts), len(verts)))
    a[s, d] = 1.0
    lam = float(np.max(np.linalg.eigvals(a).real))
    return lam, component_period(len(verts), s, d)


@lru_cache(maxsize=32)
def mask_census(g: Graph) -> MaskCensus:
    """Classify all ``2**|E|`` allowed-edge masks of ``g``."""
    ne = g.edge_count
    if ne > ORACLE_MAX_EDGES:
        raise CapExceeded("exact oracle edge count", ORACLE_MAX_EDGES, ne)
    used, inv = np.unique(np.concatenate([g.src, g.dst]), return_inverse=True)
    esrc = np.ascontiguousarray(inv[:ne], dtype=np.int64)
    edst = np.ascontiguousarray(inv[ne:], dtype=np.int64)
    nv = len(used)
    g_per = period(g)
    stats: dict[int, tuple[float, int]] = {0: (0.0, 0)}
    total = 1 << ne
    acc: dict[tuple, int] = {}
    for start in range(0, total, _ORACLE_CHUNK):
        count = min(_ORACLE_CHUNK, total - start)
        out_i = np.zeros(count, dtype=np.int64)
        out_npos = np.zeros(count, dtype=np.int64)
        out_pos = np.zeros((count, _MAX_POSITIVE), dtype=np.uint32)
        _classify_masks(start, count, nv, esrc, edst, out_i, out_npos, out_pos)
        keys = np.unique(out_pos)
        for k in keys.tolist():
            if k not in stats:
                stats[k] = _component_stats(esrc, edst, k)
        lam_of = np.array([stats[k][0] for k in keys.tolist()])
        per_of = np.array([stats[k][1] for k in keys.tolist()])
        slot = np.searchsorted(keys, out_pos)
        beta = lam_of[slot].max(axis=1)
        beta = np.where((out_npos == 0) & (out_i > 0), 1.0, beta)
        w = (out_npos == 1) & (per_of[slot[:, 0]] == (g_per or 0))
        bucket = np.rint(beta / BETA_BUCKET).astype(np.int64)
        allowed = np.bitwise_count(np.arange(start, start + count, dtype=np.uint64)).astype(np.int64)
        rows = np.stack([allowed, out_i, bucket, w.astype(np.int64)], axis=1)
        uniq, counts = np.unique(rows, axis=0, return_counts=True)
        for row, c in zip(map(tuple, uniq.tolist()), counts.tolist()):
            acc[row] = acc.get(row, 0) + c
    table = np.array([(*k, v) for k, v in sorted(acc.items())], dtype=np.int64)
    table.setflags(write=False)
    return MaskCensus(ne, table)


@dataclass(frozen=True)
class ExactDistribution:
    """Exact law of the realization statistics at one ``alpha``."""

    alpha: float
    edge_count: int
    p_empty: float
    p_zero_entropy: float
    i_pmf: tuple[float, ...]
    beta_pmf: dict
    p_w: float
    mean_i: float
    var_i: float


def exact_enumerate(g: Graph, alpha: float) -> ExactDistribution:
    """Exact distribution over all ``2**|E|`` masks (``|E| <= 22``)."""
    _check_alpha(alpha)
    census = mask_census(g)
    t = census.table
    ne = census.edge_count
    k = t[:, 0]
    # alpha^k (1-alpha)^(E-k), with 0^0 = 1
    weight = np.power(alpha, k) * np.power(1.0 - alpha, ne - k) * t[:, 4]
    i_vals, bucket, w = t[:, 1], t[:, 2], t[:, 3]
    i_pmf = [math.fsum(weight[i_vals == i]) for i in range(int(i_vals.max(initial=0)) + 1)]
    beta_pmf = {}
    for b in np.unique(bucket).tolist():
        beta_pmf[round(b * BETA_BUCKET, 9)] = math.fsum(weight[bucket == b])
    mean_i = math.fsum(i * p for i, p in enumerate(i_pmf))
    var_i = math.fsum((i - mean_i) ** 2 * p for i, p in enumerate(i_pmf))
    one = int(round(1.0 / BETA_BUCKET))
    # fsum over ~2**|E| rounded terms can land an ulp outside [0, 1]
    clip = lambda p: min(1.0, max(0.0, p))  # noqa: E731
    return ExactDistribution(
        float(alpha),
        ne,
        clip(i_pmf[0]),
        clip(math.fsum(weight[bucket <= one])),
        tuple(map(clip, i_pmf)),
        beta_pmf,
        clip(math.fsum(weight[w == 1])),
        mean_i,
        var_i,
    )
