"""Analytic reference values for the random-SFT limit laws.

Everything here is a function of the periodic-orbit census of a graph:
``N_p = tr(A^p)`` points of period ``p`` and ``c_p`` orbits of least period
``p``, related by ``N_p = sum_{d | p} d c_d``.  Distinct orbits of equal
period contribute identical factors, so products and sums over orbits are
taken per period with multiplicity ``c_p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import CapExceeded
from .graph_core import Graph, essential_subgraph
from .spectral import (
    CHAR_POLY_MAX_VERTICES,
    _cached_char_poly,
    component_roots,
    det_i_minus_ta,
    spectral_radius,
    traces_from_char_poly,
)


def mobius(n: int) -> int:
    if n < 1:
        raise ValueError("mobius is defined for n >= 1")
    result = 1
    d = 2
    while d * d <= n:
        if n % d == 0:
            n //= d
            if n % d == 0:
                return 0
            result = -result
        d += 1
    if n > 1:
        result = -result
    return result


def divisors(n: int) -> list[int]:
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d * d != n:
                large.append(n // d)
        d += 1
    return small + large[::-1]


@dataclass(frozen=True)
class OrbitCensus:
    """Orbit counts ``c_p`` and point counts ``N_p`` for ``p = 1..p_max``.

    ``lam_upper`` and ``rank_bound`` bound every later trace,
    ``N_p <= rank_bound * lam_upper**p``; ``finite`` marks a zero-entropy
    graph, whose orbits all have period at most ``rank_bound``.
    """

    p_max: int
    counts: tuple[int, ...]
    traces: tuple[int, ...]
    lam_upper: float
    rank_bound: int
    finite: bool = field(default=False)

    def count(self, p: int) -> int:
        return self.counts[p - 1]

    def trace(self, p: int) -> int:
        return self.traces[p - 1]

    def orbits_by_period(self, upto: int | None = None):
        upto = self.p_max if upto is None else upto
        if upto > self.p_max:
            raise ValueError(f"census only covers periods up to {self.p_max}")
        return ((p, self.counts[p - 1]) for p in range(1, upto + 1))


_CRT_PRIMES = (2147483629, 2147483587, 2147483579, 2147483563, 2147483549, 2147483543, 2147483497, 2147483489)


def _closed_walks_sparse(g: Graph, p_max: int, block: int = 256) -> list[int]:
    # tr(A^p) = sum_v (A^p e_v)_v, a block of start vertices at a time.
    # Counts are taken modulo word-sized primes and rebuilt by CRT, which
    # keeps int64 arithmetic exact however large the traces get.
    n = g.vertex_count
    d = max(int(g.out_degree.max(initial=0)), 2)
    bits = math.log2(n) + p_max * math.log2(d) + 1
    primes = _CRT_PRIMES[: max(1, math.ceil(bits / 30))]
    if len(primes) == len(_CRT_PRIMES) and bits > 30 * len(primes):
        raise CapExceeded("trace bit length", 30 * len(_CRT_PRIMES), int(bits))
    a = g.csr().astype(np.int64)
    diag = np.arange(n)
    residues = []
    for q in primes:
        out = [0] * p_max
        for lo in range(0, n, block):
            hi = min(lo + block, n)
            x = np.zeros((n, hi - lo), dtype=np.int64)
            x[diag[lo:hi], diag[: hi - lo]] = 1
            for p in range(p_max):
                x = (a @ x) % q
                out[p] = (out[p] + int(x[diag[lo:hi], diag[: hi - lo]].sum())) % q
        residues.append(out)
    modulus = math.prod(primes)
    traces = []
    for p in range(p_max):
        acc = 0
        for q, res in zip(primes, residues):
            m = modulus // q
            acc += res[p] * m * pow(m, -1, q)
        traces.append(acc % modulus)
    return traces


def _traces(g: Graph, p_max: int) -> list[int]:
    if g.vertex_count <= CHAR_POLY_MAX_VERTICES:
        return traces_from_char_poly(_cached_char_poly(g), p_max)
    core = essential_subgraph(g)
    if core.vertex_count <= CHAR_POLY_MAX_VERTICES:
        return _traces(core, p_max) if core.vertex_count else [0] * p_max
    return _closed_walks_sparse(core, p_max)


def census_from_traces(traces, lam_upper: float, rank_bound: int, finite: bool = False) -> OrbitCensus:
    counts = []
    for p in range(1, len(traces) + 1):
        s = sum(mobius(p // d) * traces[d - 1] for d in divisors(p))
        c, r = divmod(s, p)
        if r:
            raise ValueError(f"traces are not a valid point-count sequence at p={p}")
        counts.append(c)
    return OrbitCensus(len(traces), tuple(counts), tuple(int(t) for t in traces), lam_upper, rank_bound, finite)


@lru_cache(maxsize=128)
def orbit_counts(g: Graph, p_max: int) -> OrbitCensus:
    """Exact orbit census of ``g`` up to period ``p_max`` (Mobius inversion of traces)."""
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    roots = component_roots(g)
    lam_up = max((r.upper for r in roots), default=0.0)
    finite = lam_up <= 1.0
    return census_from_traces(_traces(g, p_max), lam_up, g.vertex_count, finite)


def _big_times(c: int, x: float) -> float:
    if c == 0 or x == 0.0:
        return 0.0
    if c < 1 << 1000:
        return c * x
    return math.exp(math.log(c) + math.log(x))


def census_tail_bound(census: OrbitCensus, t: float, p_from: int, weight: str = "odds") -> float:
    """Upper bound on ``sum_{p > p_from} c_p f(t^p)``.

    ``f(x) = x/(1-x)`` for ``weight="odds"`` and ``-log(1-x)`` for
    ``weight="log"``; both are at most ``x/(1-x)``.  Exact counts are used
    through ``census.p_max``, then ``c_p <= rank_bound * lam_upper^p / p``.
    """
    if t <= 0.0:
        return 0.0
    if t >= 1.0:
        return math.inf

    def f(x: float) -> float:
        return x / (1.0 - x) if weight == "odds" else -math.log1p(-x)

    total = 0.0
    for p in range(p_from + 1, census.p_max + 1):
        total += _big_times(census.count(p), f(t**p))
    if census.finite and census.p_max >= census.rank_bound:
        return total
    h = max(census.p_max, p_from)
    ratio = t * census.lam_upper
    if ratio >= 1.0:
        return math.inf
    geometric = census.rank_bound * ratio ** (h + 1) / ((h + 1) * (1.0 - t ** (h + 1)) * (1.0 - ratio))
    return total + geometric


def orbit_tail_bound(g: Graph, t: float, p_from: int, weight: str = "odds") -> float:
    horizon = max(p_from, 2 * g.vertex_count)
    census = orbit_counts(g, horizon) if g.vertex_count <= CHAR_POLY_MAX_VERTICES else orbit_counts(g, p_from)
    return census_tail_bound(census, t, p_from, weight)


def zeta_inverse(g: Graph, alpha: float) -> float:
    """Limit of the emptiness probability: ``det(I - alpha A)`` below ``1/lambda``, else 0."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if alpha == 0:
        return 1.0
    lam = spectral_radius(g)
    if alpha * lam >= 1.0:
        return 0.0
    return max(det_i_minus_ta(g, alpha), 0.0)


def log_orbit_product(census: OrbitCensus, alpha: float, upto: int) -> float:
    """``log prod_{p <= upto} (1 - alpha^p)^{c_p}``."""
    total = 0.0
    for p, c in census.orbits_by_period(upto):
        if not c:
            continue
        x = alpha**p
        if x >= 1.0:
            return -math.inf
        total -= _big_times(c, -math.log1p(-x))
    return total


@dataclass(frozen=True)
class EmptinessBounds:
    """Sandwich ``lower <= P(empty) <= upper`` for one graph.

    ``lower_mode`` is ``"exact"`` when every orbit of period ``<= |E|`` was
    counted, or ``"tail"`` when a shorter census was extended by the certified
    tail factor.  ``z_capped`` means ``z`` is only known to be at least ``z``.
    """

    lower: float
    upper: float
    z: int
    z_capped: bool
    edge_count: int
    lower_mode: str


def emptiness_bounds(
    g: Graph,
    alpha: float,
    *,
    census: OrbitCensus | None = None,
    z_cap: int = 32,
    z_value: int | None = None,
    period_cap: int = 20_000,
) -> EmptinessBounds:
    """Lower bound from all orbits of period ``<= |E|``, upper from those ``<= z(G)``.

    ``census`` may come from any graph with the same nonzero spectrum (for
    an n-block graph, its base graph); ``z_value`` skips the ``z`` search.
    """
    from .invariants import AtLeast, compute_z

    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    e = g.edge_count
    if z_value is None:
        z_res = compute_z(g, z_cap, census=census)
        z_capped = isinstance(z_res, AtLeast)
        z = int(z_res.value) if z_capped else int(z_res)
    else:
        z, z_capped = z_value, False
    if alpha == 0.0:
        return EmptinessBounds(1.0, 1.0, z, z_capped, e, "exact")
    want = min(e, period_cap)
    if census is None or census.p_max < max(want, z):
        if g.vertex_count <= CHAR_POLY_MAX_VERTICES:
            census = orbit_counts(g, max(want, z, 1))
        elif census is None:
            raise CapExceeded("orbit census for a large graph (pass a base-graph census)", CHAR_POLY_MAX_VERTICES, g.vertex_count)
    upper_p = min(z, census.p_max)
    upper = math.exp(log_orbit_product(census, alpha, upper_p))
    if want <= census.p_max and want == e:
        lower = math.exp(log_orbit_product(census, alpha, e))
        mode = "exact"
    else:
        p = min(want, census.p_max)
        tail = census_tail_bound(census, alpha, p, weight="log")
        lower = math.exp(log_orbit_product(census, alpha, p) - tail) if math.isfinite(tail) else 0.0
        mode = "tail"
    return EmptinessBounds(lower, upper, z, z_capped, e, mode)


@dataclass(frozen=True)
class IInfinityPMF:
    """Head of the limiting component-count distribution.

    ``probabilities[k]`` is ``P(I_inf = k)`` computed from orbits of period
    ``<= p_max``; each is a lower bound on the exact value, and the missing
    mass (orbit truncation plus ``k > k_max``) is at most ``bound``.
    """

    alpha: float
    probabilities: tuple[float, ...]
    p_max: int
    bound: float


def _truncated_orbit_polynomial(census: OrbitCensus, alpha: float, p_max: int, k_max: int) -> tuple[np.ndarray, float]:
    # prod_p (1 + x r_p)^{c_p}, r_p = alpha^p / (1 - alpha^p), truncated at degree k_max,
    # together with log of its value at x = 1
    poly = np.zeros(k_max + 1)
    poly[0] = 1.0
    log_at_one = 0.0
    for p, c in census.orbits_by_period(p_max):
        if not c:
            continue
        x = alpha**p
        r = x / (1.0 - x)
        if r == 0.0:
            continue
        log_at_one += _big_times(c, math.log1p(r))
        factor = np.zeros(k_max + 1)
        factor[0] = 1.0
        term = 1.0
        for j in range(1, k_max + 1):
            if c - j + 1 <= 0:
                break
            term *= (c - j + 1) / j * r if c < 1 << 1000 else _big_times(c - j + 1, r) / j
            factor[j] = term
        poly = np.convolve(poly, factor)[: k_max + 1]
    return poly, log_at_one


def i_infinity_pmf(
    g: Graph,
    alpha: float,
    k_max: int = 12,
    eps: float = 1e-6,
    *,
    census: OrbitCensus | None = None,
    p_cap: int = 5000,
) -> IInfinityPMF:
    """``P(I_inf = k) = zeta(alpha)^-1 e_k(r_1, r_2, ...)`` for ``k <= k_max``.

    ``e_k`` is the ``k``-th elementary symmetric sum of the orbit odds
    ``r = alpha^p / (1 - alpha^p)``.  The orbit horizon ``p_max`` is the
    least one whose certified tail odds sum is ``<= eps``.
    """
    lam = spectral_radius(g)
    if alpha < 0 or alpha * lam >= 1.0:
        raise ValueError(f"alpha={alpha} must lie in [0, 1/lambda) with lambda={lam}")
    if census is None:
        census = orbit_counts(g, max(2 * g.vertex_count, 1))
    p_max = 1
    while census_tail_bound(census, alpha, p_max) > eps:
        p_max += 1
        if p_max > p_cap:
            raise CapExceeded("I_inf orbit horizon", p_cap)
    if census.p_max < p_max:
        if g.vertex_count > CHAR_POLY_MAX_VERTICES:
            raise CapExceeded("orbit census horizon", census.p_max, p_max)
        census = orbit_counts(g, p_max)
    tail = census_tail_bound(census, alpha, p_max)
    poly, log_at_one = _truncated_orbit_polynomial(census, alpha, p_max, k_max)
    zinv = zeta_inverse(g, alpha)
    probs = zinv * poly
    # mass in degrees beyond k_max of the truncated product
    degree_tail = max(0.0, zinv * math.exp(log_at_one) - float(probs.sum()))
    bound = tail + degree_tail + 1e-12
    return IInfinityPMF(alpha, tuple(float(x) for x in probs), p_max, bound)


def limit_entropy(alpha: float, g: Graph) -> tuple[float, float]:
    """Supercritical limits ``(alpha * lambda, log(alpha * lambda))``."""
    lam = spectral_radius(g)
    if alpha * lam <= 1.0:
        raise ValueError(f"alpha={alpha} must exceed 1/lambda={1 / lam if lam else math.inf}")
    b = alpha * lam
    return b, math.log(b)
