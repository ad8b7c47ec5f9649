"""Perron-Frobenius data, exact characteristic polynomials and the zeta function.

Perron roots come from power iteration on ``A + I`` (the shift makes the
dominant eigenvalue of every irreducible block strictly dominant in modulus,
so periodic components converge too).  Each iterate gives a Collatz-Wielandt
bracket ``min (Bx)_i/x_i <= rho(B) <= max (Bx)_i/x_i`` and iteration stops
when the bracket is relatively narrower than the tolerance.  Nearly periodic
components converge slowly; for those the iteration switches to repeated
squaring of the dense matrix, which performs ``2**k`` steps per product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numba
import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import CapExceeded, ConvergenceError, NotIrreducibleError
from .graph_core import Graph, essential_subgraph, is_irreducible, is_path

CHAR_POLY_MAX_VERTICES = 64
_SQUARING_AFTER = 500
_SQUARING_MAX_VERTICES = 1024


@dataclass(frozen=True)
class PerronRoot:
    """Perron root of one irreducible block with its certified bracket."""

    value: float
    lower: float
    upper: float
    vector: np.ndarray
    iterations: int


@numba.njit(cache=True)
def _power_steps(offsets, dst, x, tol, max_steps):  # pragma: no cover - compiled
    # x <- (A + I) x / max, until the Collatz-Wielandt bracket closes
    n = x.shape[0]
    y = np.empty(n)
    lo = 0.0
    hi = 0.0
    for it in range(1, max_steps + 1):
        for u in range(n):
            acc = x[u]
            for k in range(offsets[u], offsets[u + 1]):
                acc += x[dst[k]]
            y[u] = acc
        lo = np.inf
        hi = -np.inf
        top = 0.0
        for u in range(n):
            r = y[u] / x[u]
            if r < lo:
                lo = r
            if r > hi:
                hi = r
            if y[u] > top:
                top = y[u]
        for u in range(n):
            x[u] = y[u] / top
        lo -= 1.0
        hi -= 1.0
        if hi - lo <= tol * max(hi, 1.0):
            return lo, hi, it, True
    return lo, hi, max_steps, False


def perron_root(n: int, src, dst, tol: float = 1e-10, max_iter: int = 100_000) -> PerronRoot:
    """Perron root and right eigenvector of a strongly connected edge set.

    ``src``/``dst`` index vertices ``0..n-1``.  ``vector`` is positive with
    maximum entry 1.
    """
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    order = np.argsort(src, kind="stable")
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=offsets[1:])
    csr_dst = np.ascontiguousarray(dst[order])
    x = np.ones(n)
    first = min(max_iter, _SQUARING_AFTER) if n <= _SQUARING_MAX_VERTICES else max_iter
    lo, hi, it, done = _power_steps(offsets, csr_dst, x, tol, first)
    if done:
        return PerronRoot(0.5 * (lo + hi), lo, hi, x, it)
    if it >= max_iter:
        raise ConvergenceError(f"power iteration: bracket [{lo}, {hi}] after {it} steps")
    a = sparse.csr_matrix((np.ones(len(src)), (src, dst)), shape=(n, n))
    return _perron_by_squaring(a, x, tol, max_iter, it)


def _perron_by_squaring(a, x, tol, max_iter, it) -> PerronRoot:
    b = a.toarray() + np.identity(a.shape[0])
    m = b / b.max()
    steps = 1
    while True:
        x = m @ x
        x /= x.max()
        y = b @ x
        ratio = y / x
        lo, hi = ratio.min() - 1.0, ratio.max() - 1.0
        x = y / y.max()
        it += steps + 1
        if hi - lo <= tol * max(hi, 1.0):
            return PerronRoot(0.5 * (lo + hi), lo, hi, x, it)
        if it >= max_iter:
            raise ConvergenceError(f"power iteration: bracket [{lo}, {hi}] after {it} steps")
        m = m @ m
        m /= m.max()
        steps *= 2


def _component_labels(g: Graph) -> tuple[int, np.ndarray]:
    return csgraph.connected_components(g.csr(), directed=True, connection="strong")


def component_roots(g: Graph, tol: float = 1e-10) -> list[PerronRoot]:
    """Perron roots of every nontrivial strongly connected component."""
    if g.edge_count == 0:
        return []
    ncomp, labels = _component_labels(g)
    src, dst = g.src, g.dst
    internal = labels[src] == labels[dst]
    e_count = np.bincount(labels[src[internal]], minlength=ncomp)
    v_count = np.bincount(labels, minlength=ncomp)
    roots = []
    for c in np.flatnonzero(e_count):
        if e_count[c] == v_count[c]:
            # a strongly connected block with as many edges as vertices is a cycle
            roots.append(PerronRoot(1.0, 1.0, 1.0, np.ones(v_count[c]), 0))
            continue
        verts = np.flatnonzero(labels == c)
        relabel = np.full(g.vertex_count, -1, dtype=np.int64)
        relabel[verts] = np.arange(len(verts))
        sel = internal & (labels[src] == c)
        roots.append(perron_root(len(verts), relabel[src[sel]], relabel[dst[sel]], tol))
    return roots


def spectral_radius(g: Graph, tol: float = 1e-10) -> float:
    """Largest Perron root over the irreducible components; 0 if acyclic."""
    roots = component_roots(g, tol)
    return max((r.value for r in roots), default=0.0)


def spectral_radius_upper(g: Graph, tol: float = 1e-10) -> float:
    """Certified upper bound on the spectral radius (Collatz-Wielandt)."""
    roots = component_roots(g, tol)
    return max((r.upper for r in roots), default=0.0)


# --- exact characteristic polynomial ---------------------------------------


def char_poly(a: np.ndarray) -> tuple[int, ...]:
    """Coefficients ``(1, c_1, ..., c_n)`` of ``det(tI - A)``, exact.

    Faddeev-LeVerrier in Python integers: ``M_k = A M_{k-1} + c_{k-1} I`` and
    ``c_k = -tr(A M_k) / k``; every division is exact for integer ``A``.
    """
    n = a.shape[0]
    if n > CHAR_POLY_MAX_VERTICES:
        raise CapExceeded("characteristic polynomial vertex count", CHAR_POLY_MAX_VERTICES, n)
    a_obj = np.asarray(a).astype(object)
    eye = np.identity(n, dtype=np.int64).astype(object)
    coeffs = [1]
    m = np.zeros((n, n), dtype=np.int64).astype(object)
    for k in range(1, n + 1):
        m = a_obj.dot(m) + coeffs[-1] * eye
        tr = int(np.trace(a_obj.dot(m)))
        q, r = divmod(-tr, k)
        assert r == 0, "Faddeev-LeVerrier division must be exact"
        coeffs.append(q)
    return tuple(int(c) for c in coeffs)


def nonzero_spectrum(coeffs: Sequence[int]) -> tuple[complex, ...]:
    """Nonzero roots of a characteristic polynomial, largest modulus first."""
    coeffs = list(coeffs)
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    if len(coeffs) == 1:
        return ()
    roots = np.roots(np.array(coeffs, dtype=float))
    roots = sorted((complex(r) for r in roots), key=lambda z: (-abs(z), -z.real, -z.imag))
    return tuple(roots)


def traces_from_char_poly(coeffs: Sequence[int], p_max: int) -> list[int]:
    """``[tr(A), tr(A**2), ..., tr(A**p_max)]`` by Newton's identities."""
    n = len(coeffs) - 1
    a = list(coeffs)
    traces: list[int] = []
    for p in range(1, p_max + 1):
        s = p * a[p] if p <= n else 0
        for i in range(1, min(p - 1, n) + 1):
            s += a[i] * traces[p - 1 - i]
        traces.append(-s)
    return traces


# --- Perron data and Parry measure -------------------------------------------


@dataclass(frozen=True)
class SpectralData:
    """Perron root with left/right eigenvectors normalised so ``w . v = 1``.

    ``char_poly`` and ``nonzero_spectrum`` are ``None`` above the exact
    characteristic-polynomial size cap.
    """

    lam: float
    lam_upper: float
    left: np.ndarray
    right: np.ndarray
    char_poly: tuple[int, ...] | None
    nonzero_spectrum: tuple[complex, ...] | None

    def require_spectrum(self) -> tuple[complex, ...]:
        if self.nonzero_spectrum is None:
            raise CapExceeded("nonzero spectrum vertex count", CHAR_POLY_MAX_VERTICES, len(self.right))
        return self.nonzero_spectrum


@lru_cache(maxsize=64)
def perron_data(g: Graph, tol: float = 1e-13) -> SpectralData:
    if not is_irreducible(g):
        raise NotIrreducibleError("Perron data needs an irreducible graph")
    right = perron_root(g.vertex_count, g.src, g.dst, tol)
    left = perron_root(g.vertex_count, g.dst, g.src, tol)
    lam = 0.5 * (right.value + left.value)
    v = right.vector
    w = left.vector / float(left.vector @ v)
    cp = None
    spectrum = None
    if g.vertex_count <= CHAR_POLY_MAX_VERTICES:
        cp = char_poly(g.adjacency())
        spectrum = nonzero_spectrum(cp)
    return SpectralData(lam, max(right.upper, left.upper), w, v, cp, spectrum)


@dataclass(frozen=True)
class ParryMeasure:
    """Measure of maximal entropy: ``mu(u) = w_u v_u``, ``mu(e) = w_i lam^-1 v_t``."""

    spectral: SpectralData
    vertex_mass: np.ndarray
    edge_mass: np.ndarray
    graph: Graph


def parry_measure(g: Graph) -> ParryMeasure:
    sd = perron_data(g)
    w, v = sd.left, sd.right
    return ParryMeasure(sd, w * v, w[g.src] * v[g.dst] / sd.lam, g)


def measure_of_path(m: ParryMeasure, b: Sequence[int]) -> float:
    """Mass of the cylinder of path ``b``: ``w_{i(b_1)} lam^-n v_{t(b_n)}``."""
    g = m.graph
    if len(b) == 0 or not is_path(g, b):
        raise ValueError(f"not a path of positive length: {tuple(b)}")
    sd = m.spectral
    return float(sd.left[g.src[b[0]]] * sd.lam ** (-len(b)) * sd.right[g.dst[b[-1]]])


# --- zeta function ----------------------------------------------------------


def det_i_minus_ta(g: Graph, t: float) -> float:
    """``det(I - tA)``; exact rational arithmetic when the char poly is available."""
    if g.vertex_count <= CHAR_POLY_MAX_VERTICES:
        cp = _cached_char_poly(g)
        tf = Fraction(t)
        # det(I - tA) = sum_k c_k t^k with c the char-poly coefficients
        return float(sum(c * tf**k for k, c in enumerate(cp)))
    sign, logdet = np.linalg.slogdet(np.identity(g.vertex_count) - t * g.adjacency(dtype=float))
    return float(sign * math.exp(logdet))


@lru_cache(maxsize=64)
def _cached_char_poly(g: Graph) -> tuple[int, ...]:
    return char_poly(g.adjacency())


def zeta_eval(g: Graph, t: float) -> float:
    """``1 / det(I - tA)``, or ``inf`` at and beyond the radius of convergence."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return 1.0
    det = det_i_minus_ta(g, t)
    roots = component_roots(g)
    lam_lo = max((r.lower for r in roots), default=0.0)
    if det <= 0 or t * lam_lo >= 1:
        return math.inf
    return 1.0 / det


def zeta_product_truncated(g: Graph, t: float, p_max: int) -> tuple[float, float]:
    """Inverse zeta as a product over orbits of period ``<= p_max``.

    Returns ``(value, tail)`` with ``1/zeta(t)`` in ``[value - tail, value]``.
    The omitted factor ``prod_{p > p_max} (1 - t^p)^{c_p}`` lies in
    ``[exp(-T), 1]`` where ``T`` bounds ``sum c_p t^p / (1 - t^p)`` using
    ``c_p <= tr(A^p)/p <= |V| lam^p / p``.
    """
    from .limit_laws import _big_times, orbit_counts, orbit_tail_bound

    if t < 0:
        raise ValueError("t must be >= 0")
    lam_up = spectral_radius_upper(g)
    if t * lam_up >= 1:
        raise ValueError(f"t={t} is not below 1/lambda={1 / lam_up if lam_up else math.inf}")
    if t == 0:
        return 1.0, 0.0
    census = orbit_counts(g, p_max)
    value = 1.0
    for p, c in census.orbits_by_period():
        if c == 0:
            continue
        if c < 64:
            value *= (1.0 - t**p) ** c
        else:
            value *= math.exp(-_big_times(c, -math.log1p(-(t**p))))
    tail_sum = orbit_tail_bound(g, t, p_max, weight="log")
    if tail_sum == 0.0:
        return value, 0.0
    # a few ulps of slack for the floating-point product
    tail = value * -math.expm1(-tail_sum) + 1e-14 * value * p_max
    return value, tail


# --- entropy ----------------------------------------------------------------


def beta(g: Graph) -> float:
    """``exp(h)``: spectral radius of the essential part, 0 for an empty shift."""
    ess = essential_subgraph(g)
    if ess.edge_count == 0:
        return 0.0
    return spectral_radius(ess)


def entropy(g: Graph) -> float | None:
    """Topological entropy ``log beta``; ``None`` marks the empty shift."""
    b = beta(g)
    if b == 0.0:
        return None
    return math.log(b)
