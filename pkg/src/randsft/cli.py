"""Command line entry point: ``randsft <command> ...``.

Exit codes: 0 success, 1 bad input or configuration, 2 a size or search cap
was exceeded, 3 ``simulate --self-check`` found an oracle disagreement.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import sys
from fractions import Fraction

from . import __version__
from .errors import CapExceeded, ConfigError, ConvergenceError, GraphError, NotIrreducibleError
from .graph_core import is_irreducible, n_block_graph, resolve_graph
from .harness import (
    PLOT_METRICS,
    ExperimentConfig,
    fmt_float,
    plot_data,
    read_results,
    rows_to_csv,
    run_experiment,
    self_check,
)
from .invariants import AtLeast, InvariantCaps, invariant_report
from .limit_laws import emptiness_bounds, i_infinity_pmf, zeta_inverse
from .random_sft import exact_enumerate
from .spectral import perron_data, spectral_radius


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _graph(args):
    g = resolve_graph(args.graph)
    if args.n_block > 1:
        g = n_block_graph(g, args.n_block)
    return g


def _parse_caps(text: str | None) -> InvariantCaps:
    if not text:
        return InvariantCaps()
    fields = {}
    for part in text.split(","):
        key, sep, val = part.partition("=")
        key = key.strip()
        if not sep or key not in InvariantCaps.__dataclass_fields__:
            raise ConfigError(f"bad cap {part!r}; expected name=int with name in z, U, cheeger_vertices")
        try:
            fields[key] = int(val)
        except ValueError:
            raise ConfigError(f"cap {key} needs an integer, got {val!r}") from None
    return InvariantCaps(**fields)


def _jsonable(v):
    if isinstance(v, AtLeast):
        return str(v)
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    if hasattr(v, "tolist"):
        return v.tolist()
    return v


def cmd_analyze(args) -> int:
    g = _graph(args)
    caps = _parse_caps(args.caps)
    rep = invariant_report(g, caps)
    row = rep.as_row()
    if is_irreducible(g):
        sd = perron_data(g)
        row["lam_upper"] = fmt_float(sd.lam_upper)
        row["char_poly"] = "" if sd.char_poly is None else " ".join(map(str, sd.char_poly))
    if args.format == "json":
        out = {k: _jsonable(v) for k, v in row.items()}
        out["caps"] = {"z": caps.z, "U": caps.U, "cheeger_vertices": caps.cheeger_vertices}
        _emit(json.dumps(out, indent=2) + "\n", args.output)
    else:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\n")
        w.writeheader()
        w.writerow(row)
        _emit(buf.getvalue(), args.output)
    return 0


def cmd_limits(args) -> int:
    g = _graph(args)
    a = args.alpha
    lam = spectral_radius(g)
    eb = emptiness_bounds(g, a, z_cap=args.z_cap)
    out = [
        ("lambda", fmt_float(lam)),
        ("alpha_lambda", fmt_float(a * lam)),
        ("zeta_inverse", fmt_float(zeta_inverse(g, a))),
        ("empty_lower", fmt_float(eb.lower)),
        ("empty_upper", fmt_float(eb.upper)),
        ("z", f">={eb.z}" if eb.z_capped else str(eb.z)),
        ("lower_mode", eb.lower_mode),
    ]
    if a * lam < 1.0:
        pmf = i_infinity_pmf(g, a, args.k_max, args.eps)
        out.extend((f"i_inf_{k}", fmt_float(p)) for k, p in enumerate(pmf.probabilities))
        out.append(("i_inf_bound", fmt_float(pmf.bound)))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["quantity", "value"])
    w.writerows(out)
    _emit(buf.getvalue(), args.output)
    return 0


def cmd_simulate(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    overrides = {}
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        cfg = ExperimentConfig(**{**cfg.__dict__, **overrides})
    rows = run_experiment(cfg)
    header = None if args.no_timestamp else f"generated {_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}"
    _emit(rows_to_csv(rows, header), args.output or cfg.output)
    failed = [r for r in rows if r.status != "ok"]
    for r in failed:
        print(f"cell n={r.n} alpha={fmt_float(r.alpha)}: {r.status}", file=sys.stderr)
    if args.self_check:
        bad = self_check(rows)
        if not any(r.oracle_max_sigma is not None for r in rows):
            print("self-check: no cell has oracle columns", file=sys.stderr)
        for msg in bad:
            print(f"self-check: {msg}", file=sys.stderr)
        if bad:
            return 3
    return 2 if failed else 0


def cmd_oracle(args) -> int:
    g = _graph(args)
    ex = exact_enumerate(g, args.alpha)
    rec = {
        "alpha": ex.alpha,
        "edges": ex.edge_count,
        "p_empty": ex.p_empty,
        "p_zero_entropy": ex.p_zero_entropy,
        "p_w": ex.p_w,
        "mean_i": ex.mean_i,
        "var_i": ex.var_i,
        "i_pmf": list(ex.i_pmf),
        "beta_pmf": [[b, p] for b, p in sorted(ex.beta_pmf.items())],
    }
    _emit(json.dumps(rec, indent=2) + "\n", args.output)
    return 0


def cmd_plot_data(args) -> int:
    with open(args.results) as fh:
        records = read_results(fh.read())
    _emit(plot_data(records, args.metric), args.output)
    return 0


class _Parser(argparse.ArgumentParser):
    # usage mistakes are input errors: exit 1, keeping 2 for cap violations
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="randsft", description="Random subshifts of finite type on directed graphs.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def graph_args(sp):
        sp.add_argument("graph", help="golden, full:a, cycle:L, or a graph JSON file")
        sp.add_argument("--n-block", type=int, default=1, metavar="N", help="use the N-block graph")
        sp.add_argument("-o", "--output", help="write here instead of stdout")

    sp = sub.add_parser("analyze", help="structural invariants and spectral data")
    graph_args(sp)
    sp.add_argument("--caps", help="search caps, e.g. z=32,U=16,cheeger_vertices=16")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("limits", help="analytic limit values at one alpha")
    graph_args(sp)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--k-max", type=int, default=12)
    sp.add_argument("--eps", type=float, default=1e-6)
    sp.add_argument("--z-cap", type=int, default=32)
    sp.set_defaults(func=cmd_limits)

    sp = sub.add_parser("simulate", help="run a Monte Carlo sweep from a JSON config")
    sp.add_argument("config")
    sp.add_argument("-o", "--output")
    sp.add_argument("--threads", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--no-timestamp", action="store_true", help="omit the '# generated' header line")
    sp.add_argument("--self-check", action="store_true", help="fail if any estimate is over 4 standard errors from the exact oracle")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("oracle", help="exact distribution by enumerating every edge subset")
    graph_args(sp)
    sp.add_argument("--alpha", type=float, required=True)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("plot-data", help="long-format table from a results CSV")
    sp.add_argument("results")
    sp.add_argument("--metric", choices=tuple(PLOT_METRICS), required=True)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_plot_data)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors, --help and --version
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return args.func(args)
    except CapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, GraphError, NotIrreducibleError, ConvergenceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
