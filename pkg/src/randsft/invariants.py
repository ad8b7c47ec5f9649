"""Structural invariants of a graph and growth diagnostics for graph sequences.

The invariants are suprema or infima over unbounded horizons, so each search
takes an explicit cap.  A value that reached its cap is returned as
:class:`AtLeast` rather than as a plain integer.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import sparse

from .errors import CapExceeded, NotIrreducibleError
from .graph_core import Graph, is_irreducible, period, transpose
from .spectral import parry_measure, perron_data, spectral_radius

CHEEGER_MAX_VERTICES = 24
_DENSE_MAX = 1024


@dataclass(frozen=True)
class AtLeast:
    """A search that hit its cap: the true value is ``>= value``."""

    value: int

    def __str__(self):
        return f">={self.value}"


def lower_value(x) -> int | None:
    """Numeric lower bound carried by an exact or capped value."""
    if x is None:
        return None
    return x.value if isinstance(x, AtLeast) else x


def compute_m(g: Graph, lam: float | None = None) -> int:
    """``ceil(log_lambda |V|)``.

    When the logarithm ratio lands within ``1e-9`` of an integer it is taken
    to be that integer: for integer ``lambda`` and ``|V|`` a power of it the
    ratio is exact and float noise must not push the ceiling up.
    """
    lam = spectral_radius(g) if lam is None else lam
    if lam <= 1.0:
        raise ValueError(f"m(G) needs lambda > 1, got {lam}")
    x = math.log(g.vertex_count) / math.log(lam)
    k = round(x)
    if abs(x - k) <= 1e-9:
        return int(k)
    return math.ceil(x)


def _simple_cycles_of_length(g: Graph, p: int) -> list[tuple[int, ...]]:
    # each cycle found once, from its least vertex
    offsets = g.out_offsets.tolist()
    dst = g.dst.tolist()
    found: list[tuple[int, ...]] = []
    for s in range(g.vertex_count):
        if p == 1:
            lo, hi = offsets[s], offsets[s + 1]
            if s in dst[lo:hi]:
                found.append((s,))
            continue
        path = [s]
        on_path = {s}
        stack = [iter(dst[offsets[s]:offsets[s + 1]])]
        while stack:
            step = next(stack[-1], None)
            if step is None:
                stack.pop()
                on_path.discard(path.pop())
                continue
            if len(path) == p:
                if step == s:
                    found.append(tuple(path))
                continue
            if step <= s or step in on_path:
                continue
            path.append(step)
            on_path.add(step)
            stack.append(iter(dst[offsets[step]:offsets[step + 1]]))
    return found


def compute_z(g: Graph, cap: int = 32, census=None) -> int | AtLeast:
    """Largest ``n <= cap`` such that distinct periodic orbits of period ``<= n`` are vertex-disjoint.

    Increasing ``p``: a primitive orbit of least period ``p`` that revisits a
    vertex contains a shorter orbit on the same vertices, so ``z < p`` as soon
    as the orbit count ``c_p`` exceeds the number of simple ``p``-cycles.
    Otherwise the simple ``p``-cycles must avoid each other and every
    shorter orbit.  ``census`` (orbit counts of any graph with the same
    nonzero spectrum) supplies ``c_p``.
    """
    from .limit_laws import orbit_counts

    if cap < 1:
        raise ValueError("cap must be >= 1")
    if census is None or census.p_max < cap:
        census = orbit_counts(g, cap)
    owner: dict[int, int] = {}
    for p in range(1, cap + 1):
        cycles = _simple_cycles_of_length(g, p)
        if census.count(p) != len(cycles):
            return p - 1
        for cyc in cycles:
            for v in cyc:
                if v in owner:
                    return p - 1
            for v in cyc:
                owner[v] = p
    return AtLeast(cap)


def _saturated_powers(g: Graph, kmax: int) -> list:
    """``min(A^k, 2)`` for ``k = 0..kmax``; dense for small graphs, CSR otherwise."""
    n = g.vertex_count
    if n <= _DENSE_MAX:
        a = g.adjacency(dtype=np.float64)
        mats = [np.identity(n)]
        for _ in range(kmax):
            mats.append(np.minimum(mats[-1] @ a, 2.0))
        return mats
    a = g.csr()
    mats = [sparse.identity(n, format="csr")]
    for _ in range(kmax):
        m = (mats[-1] @ a).tocsr()
        m.data = np.minimum(m.data, 2.0)
        mats.append(m)
    return mats


def _max_entry(m) -> float:
    if sparse.issparse(m):
        return float(m.data.max()) if m.nnz else 0.0
    return float(m.max()) if m.size else 0.0


def _entries(m, rows, cols) -> np.ndarray:
    if sparse.issparse(m):
        return np.asarray(m[rows, cols]).ravel()
    return m[rows, cols]


def compute_U(g: Graph, cap: int = 16):
    """``(U1, U2, U)`` with ``U = min(U1, U2)``.

    ``U1``: largest ``n <= cap`` with every entry of ``A^n`` at most 1.
    ``U2``: largest ``n <= cap`` such that for every start ``u`` and every
    ``1 <= s < t <= n`` at most one path of length ``t`` from ``u`` has its
    ``s``-th edge equal to its ``t``-th edge.  Path counts saturate at 2.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    pw = _saturated_powers(g, cap)
    u1 = 0
    for n in range(1, cap + 1):
        if _max_entry(pw[n]) <= 1.0:
            u1 = n
    u1_val = AtLeast(cap) if u1 == cap else u1

    src, dst = g.src, g.dst
    u2_val: int | AtLeast = AtLeast(cap)
    for t in range(2, cap + 1):
        bad = False
        for s in range(1, t):
            # paths u ->(s-1)-> i(e) -e-> t(e) ->(t-s-1)-> i(e) -e->
            ret = _entries(pw[t - s - 1], dst, src)
            y = np.bincount(src, weights=ret, minlength=g.vertex_count)
            counts = pw[s - 1] @ y
            if np.max(counts, initial=0.0) > 1.0:
                bad = True
                break
        if bad:
            u2_val = t - 1
            break
    u = min(lower_value(u1_val), lower_value(u2_val))
    u_val = AtLeast(cap) if isinstance(u1_val, AtLeast) and isinstance(u2_val, AtLeast) else u
    return u1_val, u2_val, u_val


def compute_R(g: Graph) -> int:
    """Least ``n`` such that each ordered pair is joined by a path of length ``1..n``."""
    if not is_irreducible(g):
        raise NotIrreducibleError("R(G) is only defined for irreducible graphs")
    n = g.vertex_count
    a = g.csr() if n > _DENSE_MAX else g.adjacency(dtype=np.float64)
    power = a
    covered = (a.toarray() if sparse.issparse(a) else a) > 0
    k = 1
    while not covered.all():
        power = power @ a
        if sparse.issparse(power):
            power.data[:] = 1.0
            covered |= power.toarray() > 0
        else:
            power = np.minimum(power, 1.0)
            covered |= power > 0
        k += 1
        if k > n:
            raise AssertionError("irreducible graph must have R <= |V|")
    return k


def _subset_bits(lo: int, hi: int, n: int) -> np.ndarray:
    masks = np.arange(lo, hi, dtype=np.int64)
    return ((masks[:, None] >> np.arange(n)) & 1).astype(bool)


def cheeger(g: Graph, chunk: int = 1 << 15) -> Fraction:
    """``min |E(S, S^c)| / |S|`` over ``0 < |S| <= |V|/2`` by exhaustive search."""
    n = g.vertex_count
    if n > CHEEGER_MAX_VERTICES:
        raise CapExceeded("Cheeger constant vertex count", CHEEGER_MAX_VERTICES, n)
    if n < 2:
        raise ValueError("Cheeger constant needs at least 2 vertices")
    best = None
    for lo in range(1, 1 << n, chunk):
        bits = _subset_bits(lo, min(lo + chunk, 1 << n), n)
        size = bits.sum(axis=1)
        keep = size <= n // 2
        if not keep.any():
            continue
        bits, size = bits[keep], size[keep]
        cross = (bits[:, g.src] & ~bits[:, g.dst]).sum(axis=1)
        ratio = cross / size
        i = int(np.argmin(ratio))
        cand = Fraction(int(cross[i]), int(size[i]))
        if best is None or cand < best:
            best = cand
    return best


def weighted_cheeger(g: Graph, chunk: int = 1 << 15) -> float:
    """``min F(S, S^c) / min(F(S), F(S^c))`` with ``F`` the Parry edge masses."""
    n = g.vertex_count
    if n > CHEEGER_MAX_VERTICES:
        raise CapExceeded("weighted Cheeger vertex count", CHEEGER_MAX_VERTICES, n)
    if n < 2:
        raise ValueError("Cheeger constant needs at least 2 vertices")
    pm = parry_measure(g)
    fe, fv = pm.edge_mass, pm.vertex_mass
    best = math.inf
    for lo in range(1, (1 << n) - 1, chunk):
        bits = _subset_bits(lo, min(lo + chunk, (1 << n) - 1), n)
        cross = (bits[:, g.src] & ~bits[:, g.dst]) @ fe
        mass = bits @ fv
        denom = np.minimum(mass, 1.0 - mass)
        best = min(best, float(np.min(cross / denom)))
    return best


def spectral_gap(g: Graph) -> tuple[float, bool]:
    """``min 1 - |mu|/lambda`` over the nonzero spectrum minus one copy of ``lambda``.

    Returns ``(gap, by_convention)``; when ``lambda`` is the whole nonzero
    spectrum the minimum is empty and the gap is reported as 1.0 with
    ``by_convention`` set.
    """
    sd = perron_data(g)
    spec = list(sd.require_spectrum())
    i = min(range(len(spec)), key=lambda j: abs(spec[j] - sd.lam))
    rest = spec[:i] + spec[i + 1:]
    if not rest:
        return 1.0, True
    return max(0.0, float(min(1.0 - abs(mu) / sd.lam for mu in rest))), False


@dataclass(frozen=True)
class InvariantCaps:
    z: int = 32
    U: int = 16
    cheeger_vertices: int = 16


@dataclass
class InvariantReport:
    """All single-graph invariants; fields are ``None`` where undefined or over a size cap."""

    vertex_count: int
    edge_count: int
    d_max: int
    lam: float
    m: int | None
    z: int | AtLeast
    U1: int | AtLeast
    U2: int | AtLeast
    U: int | AtLeast
    R: int | None
    cheeger: Fraction | None
    cheeger_transpose: Fraction | None
    weighted_cheeger: float | None
    gap: float | None
    gap_by_convention: bool
    per: int | None
    w_distortion: float | None
    v_distortion: float | None
    vertex_mass_distortion: float | None
    edge_mass_distortion: float | None
    caps: InvariantCaps = field(default_factory=InvariantCaps)

    @property
    def weight_distortion(self) -> float | None:
        if self.w_distortion is None:
            return None
        return max(self.w_distortion, self.v_distortion)

    def as_row(self) -> dict:
        row = {}
        for k, v in asdict(self).items():
            if k == "caps":
                continue
            row[k] = _fmt(v)
        row["weight_distortion"] = _fmt(self.weight_distortion)
        return row


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, AtLeast):
        return str(v)
    if isinstance(v, dict) and "value" in v:
        return f">={v['value']}"
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def invariant_report(g: Graph, caps: InvariantCaps = InvariantCaps()) -> InvariantReport:
    d_max = int(max(g.out_degree.max(initial=0), g.in_degree.max(initial=0)))
    lam = spectral_radius(g)
    irreducible = is_irreducible(g)
    m = compute_m(g, lam) if lam > 1.0 else None
    z = compute_z(g, caps.z)
    u1, u2, u = compute_U(g, caps.U)
    r = compute_R(g) if irreducible else None
    c = ct = cw = None
    gap, by_conv = None, False
    wd = vd = vmd = emd = None
    if irreducible:
        if 2 <= g.vertex_count <= min(caps.cheeger_vertices, CHEEGER_MAX_VERTICES):
            c = cheeger(g)
            ct = cheeger(transpose(g))
            cw = weighted_cheeger(g)
        sd = perron_data(g)
        if sd.nonzero_spectrum is not None:
            gap, by_conv = spectral_gap(g)
        wd = float(sd.left.max() / sd.left.min())
        vd = float(sd.right.max() / sd.right.min())
        pm = parry_measure(g)
        vmd = float(pm.vertex_mass.max() / pm.vertex_mass.min())
        emd = float(pm.edge_mass.max() / pm.edge_mass.min())
    return InvariantReport(
        g.vertex_count, g.edge_count, d_max, lam, m, z, u1, u2, u, r, c, ct, cw,
        gap, by_conv, period(g), wd, vd, vmd, emd, caps,
    )


# --- sequence diagnostics ---------------------------------------------------


def _bounded(values: Sequence[float], slack: float = 1.0) -> bool:
    # finite-sample proxy for "bounded in n": the later half never exceeds the earlier max by more than slack
    if len(values) < 2:
        return True
    half = (len(values) + 1) // 2
    return max(values[half:]) <= max(values[:half]) + slack


def _bounded_below(values: Sequence[float]) -> bool:
    if len(values) < 2:
        return all(v > 0 for v in values)
    half = (len(values) + 1) // 2
    return min(values) > 0 and min(values[half:]) >= 0.5 * min(values[:half])


@dataclass
class ConditionReport:
    rows: list[InvariantReport]
    flags: dict[str, bool | None]
    constants: dict[str, float | None]

    def to_csv(self, index: Sequence[int] | None = None) -> str:
        index = list(index) if index is not None else list(range(1, len(self.rows) + 1))
        buf = io.StringIO()
        rows = [{"n": n, **r.as_row()} for n, r in zip(index, self.rows)]
        for name, val in self.flags.items():
            for row in rows:
                row[f"flag_{name}"] = "" if val is None else str(val)
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue()


def traces_agree(gs: Sequence[Graph], p_max: int) -> bool:
    """Exact check that ``tr(A_n^p)`` matches the first graph for ``p = 1..p_max``."""
    from .limit_laws import orbit_counts

    ref = orbit_counts(gs[0], p_max).traces
    return all(orbit_counts(h, p_max).traces == ref for h in gs[1:])


def condition_report(gs: Sequence[Graph], caps: InvariantCaps = InvariantCaps(), trace_p: int | None = None) -> ConditionReport:
    """Per-graph invariants plus finite-sample trend checks for a growing sequence.

    A condition asking for a constant ``C`` is flagged when the fitted
    constant stays bounded over the sequence (later half no worse than the
    earlier half plus one unit).  ``None`` means the data needed is missing.
    """
    gs = list(gs)
    for h in gs:
        if not is_irreducible(h):
            raise NotIrreducibleError("condition_report needs irreducible graphs")
    rows = [invariant_report(h, caps) for h in gs]
    ms = [r.m for r in rows]
    flags: dict[str, bool | None] = {}
    consts: dict[str, float | None] = {}

    if trace_p is None:
        trace_p = max(gs[0].vertex_count, 2 * caps.z)
    flags["standing_traces"] = traces_agree(gs, trace_p)
    flags["standing_lambda_gt_1"] = all(r.lam > 1.0 for r in rows)
    flags["standing_m_growing"] = (
        None if None in ms else all(b >= a for a, b in zip(ms, ms[1:])) and (len(ms) < 2 or ms[-1] > ms[0])
    )

    d = [r.d_max for r in rows]
    flags["C1"] = _bounded(d, slack=0)
    consts["C1"] = max(d)

    zs = [lower_value(r.z) for r in rows]
    flags["C2"] = all(b >= a for a, b in zip(zs, zs[1:])) and (len(zs) < 2 or zs[-1] > zs[0])
    if None in ms:
        flags["C3"] = flags["C4"] = flags["C5"] = None
    else:
        ratios = [z / m for z, m in zip(zs, ms)]
        consts["C3"] = min(ratios)
        flags["C3"] = _bounded_below(ratios)
        deficit = [m - lower_value(r.U) for m, r in zip(ms, rows)]
        consts["C4"] = max(deficit)
        flags["C4"] = _bounded(deficit)
        excess = [r.R - m for m, r in zip(ms, rows)]
        consts["C5"] = max(excess)
        flags["C5"] = _bounded(excess)

    vm = [r.vertex_mass_distortion for r in rows]
    em = [r.edge_mass_distortion for r in rows]
    consts["C6"] = max(max(vm), max(em))
    flags["C6"] = _bounded(vm) and _bounded(em)
    k = [r.weight_distortion for r in rows]
    consts["C7"] = max(k)
    flags["C7"] = _bounded(k)

    cs = [r.cheeger for r in rows]
    cts = [r.cheeger_transpose for r in rows]
    if None in cs or None in cts:
        flags["C8"] = None
        consts["C8"] = None
    else:
        both = [float(min(a, b)) for a, b in zip(cs, cts)]
        consts["C8"] = min(both)
        flags["C8"] = _bounded_below(both)
    return ConditionReport(rows, flags, consts)
