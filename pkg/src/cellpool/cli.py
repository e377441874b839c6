"""Command-line front end: ``cellpool analytic|sweep|breakeven|verify|simulate``.

Every command prints a table by default; ``--format csv|json`` switches to
machine output. Machine output always carries a provenance block (tool
version, command, a hash of the effective inputs, seeds) and never wall
times, so identical inputs give identical bytes.

Exit codes: 0 success, 2 usage, 3 validation, 4 numerical failure,
5 failed check.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .analytic import (SWEEP_AXES, QuadratureConfig, QuadratureError, breakeven_ratio, sweep,
                       throughput)
from .ingest import ConfigError, IngestError, load_config
from .oracle import (SampleBudgetError, empirical_association_prob, empirical_nearest_distance_cdf,
                     estimate_rate, nearest_distance_law)
from .params import OperatorParams, RadioParams, Strategy, dbm_to_watt
from .simulator import ThroughputReport, compare_strategies, emit_cdf, run_scenario

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_NUMERICAL = 4
EXIT_CHECK = 5

SEED_ENV = "CELLPOOL_SEED"
DEFAULT_CONFIG = Path(__file__).parent / "data" / "synthetic_16_13.yaml"


@dataclass
class OutputEnvelope:
    """A result table plus the provenance needed to reproduce it."""

    command: str
    columns: list[str]
    rows: list[list[Any]]
    inputs: dict
    seeds: list[int] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def provenance(self) -> dict:
        blob = json.dumps(self.inputs, sort_keys=True, default=str).encode()
        return {
            "tool": "cellpool",
            "version": __version__,
            "command": self.command,
            "config_hash": hashlib.sha256(blob).hexdigest()[:16],
            "seeds": list(self.seeds),
            "inputs": self.inputs,
        }

    def to_json(self) -> str:
        doc = {"provenance": self.provenance,
               "payload": {"columns": self.columns, "rows": self.rows, **self.extra}}
        return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# provenance: " + json.dumps(self.provenance, sort_keys=True) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_csv_cell(v) for v in row])
        return buf.getvalue()

    def to_table(self) -> str:
        cells = [[_table_cell(v) for v in row] for row in self.rows]
        widths = [max([len(c)] + [len(r[i]) for r in cells]) for i, c in enumerate(self.columns)]
        lines = ["  ".join(c.rjust(w) for c, w in zip(self.columns, widths))]
        lines.append("  ".join("-" * w for w in widths))
        lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
        return "\n".join(lines) + "\n"

    def render(self, fmt: str) -> str:
        return {"json": self.to_json, "csv": self.to_csv, "table": self.to_table}[fmt]()


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return v


def _table_cell(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "yes" if v else "NO"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return f"{v:.6g}" if abs(v) < 1e4 else f"{v:.1f}"
    return str(v)


def read_csv_payload(text: str) -> tuple[dict, list[dict]]:
    """Parse CSV written by ``OutputEnvelope.to_csv`` into (provenance, rows)."""
    lines = text.splitlines()
    provenance = {}
    if lines and lines[0].startswith("# provenance: "):
        provenance = json.loads(lines[0][len("# provenance: "):])
        lines = lines[1:]
    return provenance, list(csv.DictReader(lines))


# -- shared flags ---------------------------------------------------------------

def _default_seed() -> int | None:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _available_threads() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return max(1, os.cpu_count() or 1)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return value


def _common(parser: argparse.ArgumentParser):
    parser.add_argument("--format", choices=("table", "csv", "json"), default="table")
    parser.add_argument("--output", "-o", type=Path, help="write the result here instead of stdout")
    parser.add_argument("--threads", type=_positive_int, default=None,
                        help="worker threads (default: available CPUs)")


def _radio_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--tx-power-dbm", type=float, default=46.0)
    parser.add_argument("--noise-dbm-hz", type=float, default=-174.0)
    parser.add_argument("--alpha", type=float, default=3.76, help="path-loss exponent (> 2)")


def _operator_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--lambda1", type=float, default=4e-8, help="OP1 BS density, per m^2")
    parser.add_argument("--lambda2", type=float, default=4e-8, help="OP2 BS density, per m^2")
    parser.add_argument("--bandwidth1", type=float, default=10e6, help="OP1 bandwidth, Hz")
    parser.add_argument("--bandwidth2", type=float, default=10e6, help="OP2 bandwidth, Hz")
    parser.add_argument("--eta1", type=float, default=None,
                        help="OP1 user density, per m^2 (default: 100 users per cell)")
    parser.add_argument("--eta2", type=float, default=None,
                        help="OP2 user density, per m^2 (default: 100 users per cell)")


def _operators(args) -> tuple[OperatorParams, OperatorParams]:
    eta1 = 100.0 * args.lambda1 if args.eta1 is None else args.eta1
    eta2 = 100.0 * args.lambda2 if args.eta2 is None else args.eta2
    return (OperatorParams(args.lambda1, args.bandwidth1, eta1),
            OperatorParams(args.lambda2, args.bandwidth2, eta2))


def _radio(args) -> RadioParams:
    return RadioParams(dbm_to_watt(args.tx_power_dbm), dbm_to_watt(args.noise_dbm_hz), args.alpha)


def _inputs(args, *names) -> dict:
    return {n: getattr(args, n) for n in names}


def _strategies(value: str) -> list[Strategy]:
    if value == "all":
        return [Strategy.NOCOOP, Strategy.FLEXROAM, Strategy.MERGER]
    return [Strategy.parse(v) for v in value.split(",")]


_OPERATOR_INPUTS = ("lambda1", "lambda2", "bandwidth1", "bandwidth2", "eta1", "eta2",
                    "tx_power_dbm", "noise_dbm_hz", "alpha")


# -- commands -------------------------------------------------------------------

def cmd_analytic(args) -> OutputEnvelope:
    op1, op2 = _operators(args)
    radio = _radio(args)
    quad = QuadratureConfig(rel_tol=args.rel_tol)
    rows = []
    for strategy in _strategies(args.strategy):
        for k in (1, 2):
            r = throughput(strategy, op1, op2, radio, quad, k)
            rows.append([strategy.value, k, r.throughput_bps / 1e3, r.spectral_rate_nats,
                         r.error_estimate])
    return OutputEnvelope(
        "analytic",
        ["strategy", "operator", "throughput_kbps", "spectral_rate_nats", "error_estimate"],
        rows, _inputs(args, "strategy", "rel_tol", *_OPERATOR_INPUTS))


def _ratio_grid(args) -> list[float]:
    if args.ratios:
        return [float(x) for x in args.ratios.split(",")]
    lo, hi, n = args.grid
    n = int(n)
    if n < 1:
        raise ValueError("--grid needs at least one point")
    if n == 1:
        return [lo]
    if not (lo > 0 and hi > 0):
        raise ValueError("--grid is geometric and needs positive end points")
    return [lo * (hi / lo) ** (i / (n - 1)) for i in range(n)]


def cmd_sweep(args) -> OutputEnvelope:
    op1, op2 = _operators(args)
    radio = _radio(args)
    quad = QuadratureConfig(rel_tol=args.rel_tol)
    ratios = _ratio_grid(args)
    strategies = _strategies(args.strategy)
    if Strategy.NOCOOP not in strategies:
        strategies = [Strategy.NOCOOP] + strategies
    rows = sweep(strategies, op1, op2, args.axis, ratios, radio, quad, workers=args.threads)
    base = {(r.ratio, r.operator): r.throughput_bps for r in rows if r.strategy is Strategy.NOCOOP}
    out = []
    failures = []
    for r in rows:
        ref = base.get((r.ratio, r.operator), math.nan)
        gain = r.throughput_bps / ref - 1 if r.error is None and ref > 0 else math.nan
        out.append([r.ratio, r.strategy.value, r.operator, r.throughput_bps / 1e3,
                    r.spectral_rate_nats, gain, r.error])
        if r.error is not None:
            failures.append(r)
    env = OutputEnvelope(
        "sweep",
        ["ratio", "strategy", "operator", "throughput_kbps", "spectral_rate_nats",
         "gain_vs_nocoop", "error"],
        out, {**_inputs(args, "axis", "strategy", "rel_tol", *_OPERATOR_INPUTS), "ratios": ratios})
    env.extra["failed_rows"] = len(failures)
    return env


def cmd_breakeven(args) -> OutputEnvelope:
    op1, op2 = _operators(args)
    radio = _radio(args)
    quad = QuadratureConfig(rel_tol=args.rel_tol)
    strategy = Strategy.parse(args.strategy)
    if strategy is Strategy.NOCOOP:
        raise ValueError("breakeven needs a cooperative strategy")
    root = breakeven_ratio(strategy, op1, op2, args.axis, args.operator, tuple(args.bracket),
                           radio, quad, xtol=args.xtol)
    return OutputEnvelope(
        "breakeven", ["strategy", "axis", "operator", "breakeven_ratio"],
        [[strategy.value, args.axis, args.operator, root]],
        _inputs(args, "strategy", "axis", "operator", "bracket", "xtol", "rel_tol", *_OPERATOR_INPUTS))


VERIFY_CHECKS = ("rate", "association", "distance")


def cmd_verify(args) -> OutputEnvelope:
    from scipy import stats

    seed = args.seed
    op1, op2 = _operators(args)
    radio = _radio(args)
    # fault-injection hook for tests: the quadrature engine sees a wrong exponent
    quad_radio = replace(radio, path_loss_exponent=radio.path_loss_exponent * args.corrupt_alpha)
    quad = QuadratureConfig(rel_tol=args.rel_tol)
    checks = [c.strip() for c in args.checks.split(",")]
    unknown = sorted(set(checks) - set(VERIFY_CHECKS))
    if unknown:
        raise ValueError(f"unknown checks {unknown}; choose from {list(VERIFY_CHECKS)}")
    rows = []
    if "rate" in checks:
        for strategy in (Strategy.NOCOOP, Strategy.FLEXROAM, Strategy.MERGER):
            ref = throughput(strategy, op1, op2, quad_radio, quad, 1).spectral_rate_nats
            est = estimate_rate(strategy, op1, op2, radio, args.samples, seed, workers=args.threads)
            rows.append([f"rate:{strategy.value}", est.mean, ref, est.low, est.high,
                         None, est.contains(ref)])
    lam1, lam2 = op1.bs_density, op2.bs_density
    if "association" in checks:
        est = empirical_association_prob(lam1, lam2, args.samples, seed)
        p = lam1 / (lam1 + lam2)
        sigma = math.sqrt(p * (1 - p) / args.samples)
        rows.append(["association", est.mean, p, p - 3 * sigma, p + 3 * sigma, None,
                     abs(est.mean - p) <= 3 * sigma])
    if "distance" in checks:
        d, _ = empirical_nearest_distance_cdf(lam1, lam2, args.samples, seed)
        res = stats.kstest(d, lambda r: nearest_distance_law(r, lam1 + lam2))
        rows.append(["distance_ks", float(res.statistic), None, None, None, float(res.pvalue),
                     bool(res.pvalue > 0.01)])
    env = OutputEnvelope(
        "verify", ["check", "estimate", "reference", "low", "high", "p_value", "passed"],
        rows, _inputs(args, "checks", "samples", "seed", "rel_tol", "corrupt_alpha",
                      *_OPERATOR_INPUTS), seeds=[seed])
    env.extra["all_passed"] = all(r[-1] for r in rows)
    return env


def _simulation_config(args):
    path = args.config or DEFAULT_CONFIG
    config = load_config(path)
    overrides = {}
    if args.frames is not None:
        overrides["frames"] = args.frames
    if args.runs is not None:
        overrides["runs"] = args.runs
    if args.users_per_cell is not None:
        overrides["users_per_cell"] = (args.users_per_cell, args.users_per_cell)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.strategy not in ("compare", None):
        overrides["strategy"] = Strategy.parse(args.strategy)
    return replace(config, **overrides) if overrides else config, str(path)


def _report_rows(reports: dict[Strategy, ThroughputReport]):
    rows = []
    for s, rep in reports.items():
        for i in range(rep.throughput.size):
            rows.append([s.value, int(rep.run[i]), i, int(rep.operator[i]), float(rep.throughput[i])])
    return rows


def cmd_simulate(args) -> OutputEnvelope:
    config, path = _simulation_config(args)
    if args.strategy in ("compare", None):
        comparison, reports = compare_strategies(config, workers=args.threads)
        rows = [[r.strategy.value, r.operator, r.mean_bps / 1e3, r.gain_vs_nocoop,
                 r.median_bps / 1e3, r.median_gain_vs_nocoop] for r in comparison]
        columns = ["strategy", "operator", "mean_kbps", "gain_vs_nocoop", "median_kbps",
                   "median_gain_vs_nocoop"]
    else:
        rep = run_scenario(config, workers=args.threads)
        reports = {rep.strategy: rep}
        rows = [[rep.strategy.value, op, (rep.mean if op == "all" else rep.operator_mean(int(op))) / 1e3,
                 None, rep.median() / 1e3 if op == "all" else None, None] for op in ("1", "2", "all")]
        columns = ["strategy", "operator", "mean_kbps", "gain_vs_nocoop", "median_kbps",
                   "median_gain_vs_nocoop"]
    first = next(iter(reports.values()))
    seeds = [config.seed, *first.metadata["run_seeds"]]
    inputs = {"config_file": path, "config_hash": config.digest(), "strategy": args.strategy or "compare",
              "config": json.loads(json.dumps(config.to_dict(), default=str))}
    env = OutputEnvelope("simulate", columns, rows, inputs, seeds=seeds)
    env.extra["run_mean_kbps"] = {s.value: [m / 1e3 for m in rep.run_means()] for s, rep in reports.items()}
    env.extra["counters"] = {s.value: {k: rep.metadata[k] for k in ("evaluations", "tiles")}
                             for s, rep in reports.items()}
    if args.out_dir is not None:
        users = OutputEnvelope("simulate/users", ["strategy", "run", "user", "operator", "throughput_bps"],
                               _report_rows(reports), inputs, seeds=seeds)
        cdf_rows = [[s.value, x, y] for s, rep in reports.items() for x, y in emit_cdf(rep, args.cdf_points)]
        cdf = OutputEnvelope("simulate/cdf", ["strategy", "throughput_bps", "cdf"], cdf_rows, inputs,
                             seeds=seeds)
        _write_outputs(args.out_dir, {"summary.json": env.to_json(), "users.csv": users.to_csv(),
                                      "cdf.csv": cdf.to_csv()})
    return env


def _write_outputs(out_dir: Path, files: dict[str, str]):
    """Write all files or none: stage in a scratch directory, then move."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".cellpool-", dir=out_dir))
    try:
        for name, text in files.items():
            (stage / name).write_text(text)
        for name in files:
            os.replace(stage / name, out_dir / name)
    finally:
        shutil.rmtree(stage, ignore_errors=True)


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cellpool", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cellpool {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", help="per-operator throughput from the stochastic-geometry model")
    p.add_argument("--strategy", default="all", help="nocoop, flexroam, merger, a comma list or all")
    _operator_flags(p)
    _radio_flags(p)
    p.add_argument("--rel-tol", type=float, default=1e-7)
    _common(p)
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("sweep", help="throughput and gains over a grid of OP2/OP1 ratios")
    p.add_argument("--axis", choices=SWEEP_AXES, required=True)
    grid = p.add_mutually_exclusive_group(required=True)
    grid.add_argument("--ratios", help="comma-separated OP2/OP1 ratios")
    grid.add_argument("--grid", nargs=3, type=float, metavar=("LO", "HI", "N"),
                      help="N geometrically spaced ratios from LO to HI")
    p.add_argument("--strategy", default="all")
    _operator_flags(p)
    _radio_flags(p)
    p.add_argument("--rel-tol", type=float, default=1e-7)
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("breakeven", help="ratio at which an operator stops gaining from cooperation")
    p.add_argument("--axis", choices=SWEEP_AXES, required=True)
    p.add_argument("--strategy", choices=("flexroam", "merger"), required=True)
    p.add_argument("--operator", type=int, choices=(1, 2), required=True)
    p.add_argument("--bracket", nargs=2, type=float, required=True, metavar=("LO", "HI"))
    p.add_argument("--xtol", type=float, default=1e-6)
    _operator_flags(p)
    _radio_flags(p)
    p.add_argument("--rel-tol", type=float, default=1e-7)
    _common(p)
    p.set_defaults(func=cmd_breakeven)

    p = sub.add_parser("verify", help="quadrature against Monte Carlo and distributional checks")
    p.add_argument("--checks", default=",".join(VERIFY_CHECKS))
    p.add_argument("--samples", type=_positive_int, default=200_000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--corrupt-alpha", type=float, default=1.0, help=argparse.SUPPRESS)
    _operator_flags(p)
    _radio_flags(p)
    p.add_argument("--rel-tol", type=float, default=1e-7)
    _common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="frame-level OFDMA simulation")
    p.add_argument("--config", type=Path, default=None,
                   help="scenario YAML (default: the bundled 16+13 fixture)")
    p.add_argument("--strategy", choices=("compare", "nocoop", "flexroam", "merger"), default="compare")
    p.add_argument("--frames", type=_positive_int)
    p.add_argument("--runs", type=_positive_int)
    p.add_argument("--users-per-cell", type=float)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", type=Path, default=None,
                   help="write summary.json, users.csv and cdf.csv here")
    p.add_argument("--cdf-points", type=_positive_int, default=200)
    _common(p)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        if getattr(args, "seed", "absent") is None:
            env_seed = _default_seed()
            args.seed = env_seed if env_seed is not None else (None if args.command == "simulate" else 0)
        if args.threads is None:
            args.threads = _available_threads()
        env = args.func(args)
    except (ConfigError, IngestError, ValueError) as exc:
        print(f"cellpool: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (QuadratureError, SampleBudgetError, FloatingPointError) as exc:
        print(f"cellpool: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    text = env.render(args.format)
    if args.output is not None:
        args.output.write_text(text)
    else:
        sys.stdout.write(text)
    if args.command == "verify" and not env.extra["all_passed"]:
        failed = [r[0] for r in env.rows if not r[-1]]
        print(f"cellpool: failed checks: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK
    if args.command == "sweep" and env.extra["failed_rows"]:
        print(f"cellpool: {env.extra['failed_rows']} sweep rows failed", file=sys.stderr)
        errors = [r[-1] for r in env.rows if r[-1]]
        return EXIT_NUMERICAL if any(e.startswith("QuadratureError") for e in errors) else EXIT_VALIDATION
    return EXIT_OK


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
