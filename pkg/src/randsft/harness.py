"""Declarative Monte Carlo sweeps over ``(n, alpha)`` cells.

Every trial is regenerated from ``(master seed, cell id, trial index)``, so a
sweep gives the same rows whether it runs serially or split across worker
processes.  Per-trial outcomes are gathered into arrays indexed by trial
and reduced in trial order.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import CapExceeded, ConfigError, ConvergenceError, GraphError, NotIrreducibleError
from .graph_core import Graph, n_block_graph, period, resolve_graph
from .invariants import AtLeast, compute_z
from .limit_laws import emptiness_bounds, i_infinity_pmf, orbit_counts, zeta_inverse
from .random_sft import (
    GAMMA,
    ORACLE_MAX_EDGES,
    exact_enumerate,
    mix64,
    realize_mask,
    sample_masks,
)
from .spectral import spectral_radius

EPSILONS = (0.05, 0.1, 0.2)
AUTO_ORACLE_MAX_EDGES = 12
MASK_CACHE_MAX_EDGES = 22
_TRIAL_CHUNK = 512
SELF_CHECK_SIGMAS = 4.0


@dataclass(frozen=True)
class Caps:
    z: int = 8
    k_max: int = 12
    eps: float = 1e-6
    period_cap: int = 20_000
    block_edges: int = 10**7

    def __post_init__(self):
        for name in ("z", "k_max", "period_cap", "block_edges"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError(f"caps.{name} must be a positive integer")
        if isinstance(self.eps, bool) or not isinstance(self.eps, (int, float)) or not 0 < self.eps < 1:
            raise ConfigError("caps.eps must lie in (0, 1)")


@dataclass(frozen=True)
class ExperimentConfig:
    graph: str
    n_min: int
    n_max: int
    alphas: tuple[float, ...]
    trials: int
    seed: int
    oracle: str = "auto"
    output: str | None = None
    threads: int = 1
    caps: Caps = field(default_factory=Caps)

    def __post_init__(self):
        if not isinstance(self.graph, str) or not self.graph:
            raise ConfigError("graph must be a non-empty string")
        for name in ("n_min", "n_max", "trials", "seed", "threads"):
            if not isinstance(getattr(self, name), int) or isinstance(getattr(self, name), bool):
                raise ConfigError(f"{name} must be an integer")
        if self.n_min < 1 or self.n_max < self.n_min:
            raise ConfigError(f"need 1 <= n_min <= n_max, got {self.n_min}..{self.n_max}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if not self.alphas:
            raise ConfigError("alphas must be non-empty")
        for a in self.alphas:
            if isinstance(a, bool) or not isinstance(a, (int, float)) or not 0.0 <= a <= 1.0:
                raise ConfigError(f"alpha {a!r} is not a number in [0, 1]")
        if self.oracle not in ("auto", "force", "off"):
            raise ConfigError(f"oracle must be auto, force or off, got {self.oracle!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        missing = sorted(k for k in ("graph", "n_min", "n_max", "alphas", "trials", "seed") if k not in d)
        if missing:
            raise ConfigError(f"missing config keys: {', '.join(missing)}")
        d = dict(d)
        caps = d.pop("caps", None) or {}
        if not isinstance(caps, dict):
            raise ConfigError("caps must be an object")
        cap_names = {f.name for f in dataclasses.fields(Caps)}
        bad = sorted(set(caps) - cap_names)
        if bad:
            raise ConfigError(f"unknown caps: {', '.join(bad)}")
        alphas = d.pop("alphas")
        if not isinstance(alphas, list):
            raise ConfigError("alphas must be a list")
        return cls(alphas=tuple(alphas), caps=Caps(**caps), **d)

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(data)


def cell_id(n: int, alpha: float) -> int:
    digest = hashlib.sha256(f"{n}|{alpha!r}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def cell_seed(master: int, n: int, alpha: float) -> int:
    return mix64(mix64(master) ^ (cell_id(n, alpha) * GAMMA))


# --- per-trial work ---------------------------------------------------------


@dataclass
class TrialBatch:
    """Outcomes of trials ``lo..hi-1`` of one cell, one entry per trial."""

    lo: int
    empty: np.ndarray
    count: np.ndarray
    beta: np.ndarray
    zero: np.ndarray
    unique: np.ndarray
    period: np.ndarray

    @classmethod
    def concat(cls, parts: Sequence["TrialBatch"]) -> "TrialBatch":
        parts = sorted(parts, key=lambda b: b.lo)
        cat = lambda name: np.concatenate([getattr(b, name) for b in parts])  # noqa: E731
        return cls(parts[0].lo, *(cat(f) for f in ("empty", "count", "beta", "zero", "unique", "period")))


@lru_cache(maxsize=8)
def _block_graph(spec: str, n: int, edge_cap: int) -> Graph:
    return n_block_graph(resolve_graph(spec), n, edge_cap=edge_cap)


def run_trials(spec: str, n: int, edge_cap: int, alpha: float, seed: int, lo: int, hi: int) -> TrialBatch:
    g = _block_graph(spec, n, edge_cap)
    size = hi - lo
    out = TrialBatch(
        lo,
        np.zeros(size, dtype=bool),
        np.zeros(size, dtype=np.int64),
        np.zeros(size),
        np.zeros(size, dtype=bool),
        np.zeros(size, dtype=bool),
        np.full(size, -1, dtype=np.int64),
    )
    cached = g.edge_count <= MASK_CACHE_MAX_EDGES
    weights = 1 << np.arange(g.edge_count, dtype=np.int64)
    memo: dict[int, object] = {}
    for start in range(lo, hi, _TRIAL_CHUNK):
        stop = min(hi, start + _TRIAL_CHUNK)
        masks = sample_masks(g, alpha, seed, np.arange(start, stop))
        if cached:
            # small graphs repeat masks often: classify each distinct one once
            codes, first, inverse = np.unique(masks.astype(np.int64) @ weights, return_index=True, return_inverse=True)
            summaries = []
            for code, i in zip(codes.tolist(), first.tolist()):
                r = memo.get(code)
                if r is None:
                    r = memo[code] = realize_mask(g, masks[i])
                summaries.append(r)
            results = [summaries[k] for k in inverse.ravel().tolist()]
        else:
            results = [realize_mask(g, m) for m in masks]
        for i, r in enumerate(results):
            j = start - lo + i
            out.empty[j] = r.is_empty
            out.count[j] = r.component_count
            out.beta[j] = r.beta
            out.zero[j] = r.zero_entropy
            out.unique[j] = r.unique_positive_entropy
            out.period[j] = -1 if r.positive_component_period is None else r.positive_component_period
    return out


def _run_trials_star(args):
    return run_trials(*args)


def _chunks(trials: int, parts: int) -> list[tuple[int, int]]:
    step = max(_TRIAL_CHUNK, math.ceil(trials / parts))
    return [(lo, min(trials, lo + step)) for lo in range(0, trials, step)]


# --- rows -------------------------------------------------------------------


COLUMNS = (
    "n", "vertices", "edges", "alpha", "trials", "status",
    "p_empty", "se_empty", "p_zero", "se_zero", "i_hist", "mean_i",
    "mean_beta", "median_beta", "p_beta_eps_0.05", "p_beta_eps_0.1", "p_beta_eps_0.2",
    "p_w", "se_w",
    "zeta_inverse", "empty_lower", "empty_upper", "z", "i_inf_pmf", "alpha_lambda",
    "oracle_p_empty", "oracle_p_zero", "oracle_mean_i", "oracle_p_w", "oracle_max_sigma",
)


@dataclass
class ResultRow:
    n: int
    vertices: int | None
    edges: int | None
    alpha: float
    trials: int
    status: str = "ok"
    p_empty: float | None = None
    se_empty: float | None = None
    p_zero: float | None = None
    se_zero: float | None = None
    i_hist: dict[int, int] | None = None
    mean_i: float | None = None
    mean_beta: float | None = None
    median_beta: float | None = None
    p_beta_eps: tuple[float, ...] | None = None
    p_w: float | None = None
    se_w: float | None = None
    zeta_inverse: float | None = None
    empty_lower: float | None = None
    empty_upper: float | None = None
    z: int | AtLeast | None = None
    i_inf_pmf: tuple[float, ...] | None = None
    alpha_lambda: float | None = None
    oracle_p_empty: float | None = None
    oracle_p_zero: float | None = None
    oracle_mean_i: float | None = None
    oracle_p_w: float | None = None
    oracle_max_sigma: float | None = None

    def cells(self) -> list[str]:
        eps = self.p_beta_eps or (None,) * len(EPSILONS)
        vals = [
            self.n, self.vertices, self.edges, self.alpha, self.trials, self.status,
            self.p_empty, self.se_empty, self.p_zero, self.se_zero,
            None if self.i_hist is None else ";".join(f"{k}:{v}" for k, v in sorted(self.i_hist.items())),
            self.mean_i, self.mean_beta, self.median_beta, *eps, self.p_w, self.se_w,
            self.zeta_inverse, self.empty_lower, self.empty_upper, self.z,
            None if self.i_inf_pmf is None else ";".join(f"{k}:{fmt_float(p)}" for k, p in enumerate(self.i_inf_pmf)),
            self.alpha_lambda, self.oracle_p_empty, self.oracle_p_zero, self.oracle_mean_i,
            self.oracle_p_w, self.oracle_max_sigma,
        ]
        return [_cell(v) for v in vals]


def fmt_float(x: float) -> str:
    return f"{x:.12g}"


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (float, np.floating)):
        return fmt_float(float(v))
    return str(v)


def _stderr(p: float, t: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / t)


def aggregate(row: ResultRow, b: TrialBatch, target_period: int | None, lam: float) -> None:
    t = len(b.empty)
    row.p_empty = float(np.count_nonzero(b.empty)) / t
    row.se_empty = _stderr(row.p_empty, t)
    row.p_zero = float(np.count_nonzero(b.zero)) / t
    row.se_zero = _stderr(row.p_zero, t)
    ks, cs = np.unique(b.count, return_counts=True)
    row.i_hist = dict(zip(ks.tolist(), cs.tolist()))
    row.mean_i = float(b.count.sum()) / t
    row.mean_beta = math.fsum(b.beta.tolist()) / t
    row.median_beta = float(statistics.median(b.beta.tolist()))
    target = row.alpha * lam
    row.p_beta_eps = tuple(float(np.count_nonzero(np.abs(b.beta - target) < e)) / t for e in EPSILONS)
    w = b.unique & (b.period == (target_period if target_period is not None else -2))
    row.p_w = float(np.count_nonzero(w)) / t
    row.se_w = _stderr(row.p_w, t)


def _attach_analytic(row: ResultRow, g: Graph, base: Graph, lam: float, caps: Caps) -> None:
    a = row.alpha
    row.zeta_inverse = zeta_inverse(base, a)
    row.alpha_lambda = a * lam
    census = orbit_counts(base, max(1, min(g.edge_count, caps.period_cap), caps.z))
    z = compute_z(g, caps.z, census=census)
    row.z = z
    zval = z.value if isinstance(z, AtLeast) else z
    eb = emptiness_bounds(g, a, census=census, z_value=zval, period_cap=caps.period_cap)
    row.empty_lower, row.empty_upper = eb.lower, eb.upper
    if a * lam < 1.0:
        row.i_inf_pmf = i_infinity_pmf(base, a, caps.k_max, caps.eps).probabilities


def _attach_oracle(row: ResultRow, g: Graph) -> None:
    ex = exact_enumerate(g, row.alpha)
    row.oracle_p_empty = ex.p_empty
    row.oracle_p_zero = ex.p_zero_entropy
    row.oracle_mean_i = ex.mean_i
    row.oracle_p_w = ex.p_w
    t = row.trials
    sig = []
    for est, p in ((row.p_empty, ex.p_empty), (row.p_zero, ex.p_zero_entropy), (row.p_w, ex.p_w)):
        sig.append(_sigmas(est - p, _stderr(p, t)))
    sig.append(_sigmas(row.mean_i - ex.mean_i, math.sqrt(ex.var_i / t)))
    row.oracle_max_sigma = max(sig)


def _sigmas(diff: float, se: float) -> float:
    # a degenerate exact law must be matched exactly
    if se == 0.0:
        return 0.0 if abs(diff) <= 1e-12 else math.inf
    return abs(diff) / se


def _wants_oracle(mode: str, edges: int) -> bool:
    if mode == "off":
        return False
    limit = AUTO_ORACLE_MAX_EDGES if mode == "auto" else ORACLE_MAX_EDGES
    return edges <= limit


def run_experiment(cfg: ExperimentConfig, *, executor=None) -> list[ResultRow]:
    """Run every ``(n, alpha)`` cell of ``cfg``; rows come back sorted by ``(n, alpha)``."""
    base = resolve_graph(cfg.graph)
    base_per = period(base)
    lam = spectral_radius(base)
    own = None
    if executor is None and cfg.threads > 1:
        own = executor = ProcessPoolExecutor(max_workers=cfg.threads)
    rows = []
    try:
        for n in range(cfg.n_min, cfg.n_max + 1):
            try:
                g = _block_graph(cfg.graph, n, cfg.caps.block_edges)
            except (CapExceeded, GraphError) as exc:
                rows.extend(ResultRow(n, None, None, float(a), cfg.trials, f"failed: {exc}") for a in sorted(cfg.alphas))
                continue
            for a in sorted(set(float(x) for x in cfg.alphas)):
                rows.append(_run_cell(cfg, g, base, base_per, lam, n, a, executor))
    finally:
        if own is not None:
            own.shutdown()
    return rows


def _run_cell(cfg, g, base, base_per, lam, n, a, executor) -> ResultRow:
    row = ResultRow(n, g.vertex_count, g.edge_count, a, cfg.trials)
    seed = cell_seed(cfg.seed, n, a)
    jobs = [(cfg.graph, n, cfg.caps.block_edges, a, seed, lo, hi) for lo, hi in _chunks(cfg.trials, cfg.threads)]
    if executor is None:
        parts = [run_trials(*j) for j in jobs]
    else:
        parts = list(executor.map(_run_trials_star, jobs))
    aggregate(row, TrialBatch.concat(parts), base_per, lam)
    try:
        _attach_analytic(row, g, base, lam, cfg.caps)
        if _wants_oracle(cfg.oracle, g.edge_count):
            _attach_oracle(row, g)
    except (CapExceeded, ConvergenceError, NotIrreducibleError, ValueError) as exc:
        row.status = f"failed: {exc}"
    return row


def self_check(rows: Iterable[ResultRow], sigmas: float = SELF_CHECK_SIGMAS) -> list[str]:
    """Rows whose Monte Carlo estimates stray more than ``sigmas`` exact standard errors from the oracle."""
    bad = []
    for r in rows:
        if r.oracle_max_sigma is not None and r.oracle_max_sigma > sigmas:
            bad.append(f"n={r.n} alpha={fmt_float(r.alpha)}: {fmt_float(r.oracle_max_sigma)} standard errors from exact")
    return bad


# --- csv --------------------------------------------------------------------


def rows_to_csv(rows: Iterable[ResultRow], header_comment: str | None = None) -> str:
    buf = io.StringIO()
    if header_comment is not None:
        buf.write(f"# {header_comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def read_results(text: str) -> list[dict[str, str]]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or "alpha" not in reader.fieldnames:
        raise ConfigError("not a results CSV (no header with an alpha column)")
    return list(reader)


PLOT_METRICS = {
    "empty": ("p_empty", "se_empty", "zeta_inverse"),
    "entropy": ("mean_beta", None, "alpha_lambda"),
    "components": ("mean_i", None, None),
    "unique": ("p_w", "se_w", None),
}


def plot_data(records: Sequence[dict[str, str]], metric: str) -> str:
    """Long-format ``x, series, value, lo, hi`` table for one metric.

    ``x`` is ``n`` when the results span several ``n`` (one series per
    alpha), otherwise ``alpha`` (one series per ``n``).  Estimates carry a
    1.96-standard-error band; analytic references are their own series
    with ``lo = hi = value``.
    """
    if metric not in PLOT_METRICS:
        raise ConfigError(f"unknown metric {metric!r}; choose from {', '.join(PLOT_METRICS)}")
    col, se_col, ref_col = PLOT_METRICS[metric]
    by_n = len({r["n"] for r in records}) > 1
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "series", "value", "lo", "hi"])
    for r in records:
        if not r.get(col):
            continue
        x, series = (r["n"], f"alpha={r['alpha']}") if by_n else (r["alpha"], f"n={r['n']}")
        v = float(r[col])
        se = float(r[se_col]) if se_col and r.get(se_col) else 0.0
        w.writerow([x, series, fmt_float(v), fmt_float(v - 1.96 * se), fmt_float(v + 1.96 * se)])
        if ref_col and r.get(ref_col):
            ref = r[ref_col]
            w.writerow([x, f"{series} {ref_col}", ref, ref, ref])
    return buf.getvalue()
