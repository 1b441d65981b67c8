"""Command-line entry point: ``agent-thermo {eos,sweep,verify,simulate,market}``.

Exit codes: 0 success (all checks passed), 1 verification failure, 2 usage or
domain error.  Output is CSV (default for tabular commands) or JSON (default
for ``verify``), written to stdout or ``--out``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import random
import sys
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

from .eos import chemical_potential, polarization_entropy, temperature_from_utility
from .exact import entropy_of_magnetization, exact_chain, utility_exact
from .market import OUTPUT_HEADER, CalibrationParams, MarketDataError, ingest_windows, window_record
from .model import (
    DEFAULT_REFERENCE,
    DEFAULT_THRESHOLD_X,
    DomainError,
    ModelParams,
    as_field,
    reduced_field,
    require_positive_temperature,
)
from .montecarlo import RngSpec, analytic_observables, estimate_observables, plugin_bias
from .verify import (
    CheckReport,
    PathSpec,
    check_convergence_order,
    check_field_derivative,
    check_temperature_derivative,
    integrate_gibbs_duhem,
    make_report,
    migration_experiment,
    paper_vs_exact_report,
    rectangle_path,
    taylor_checks,
)

SCHEMA_VERSION = 1
SEED_ENV = "AGENT_THERMO_SEED"
SUITES = ("all", "derivatives", "gibbs-duhem", "taylor", "migration", "paper-vs-exact")

STATE_COLUMNS = (
    "T",
    "B",
    "x",
    "m",
    "U",
    "M",
    "S",
    "mu",
    "G",
    "m_exact",
    "U_exact",
    "M_exact",
    "S_exact",
    "mu_exact",
    "G_exact",
    "rel_gap_M",
    "rel_gap_mu",
    "within_linear_regime",
)
CHECK_COLUMNS = ("name", "measured", "expected", "abs_err", "rel_err", "tolerance", "mode", "passed")
SIMULATE_COLUMNS = ("observable", "mean", "std_error", "n_samples", "analytic", "bias", "z_score")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    threshold_x: float = DEFAULT_THRESHOLD_X
    tolerances: Dict[str, float] = field(default_factory=dict)
    rng: RngSpec = RngSpec()
    output_format: Optional[str] = None
    output_path: Optional[str] = None

    def __post_init__(self):
        if not 0 < self.threshold_x < 1:
            raise DomainError("threshold-x must lie in (0, 1)", "threshold_x")
        for name, tol in self.tolerances.items():
            if not tol >= 0:
                raise DomainError(f"tolerance for {name!r} must be nonnegative", "tolerances")

    def tolerance(self, name: str, default: float) -> float:
        return self.tolerances.get(name, self.tolerances.get("*", default))


# ---------------------------------------------------------------------------
# rendering


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _json_value(value):
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_value(v) for v in value]
    return value


def render_csv(columns: Sequence[str], rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(col)) for col in columns])
    return buf.getvalue()


def render_json(payload: dict) -> str:
    return json.dumps(_json_value(payload), indent=2) + "\n"


def _emit(config: RunConfig, text: str) -> None:
    if config.output_path:
        with open(config.output_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _params_dict(config: RunConfig) -> dict:
    return dict(asdict(config.params), threshold_x=config.threshold_x)


# ---------------------------------------------------------------------------
# state records shared by eos and sweep


def _rel_gap(approx, exact):
    if approx is None or exact is None:
        return None
    if exact == 0:
        return 0.0 if approx == 0 else math.inf
    return (approx - exact) / exact


def state_record(
    T: float, p: ModelParams, B: Optional[float] = None, m: Optional[float] = None, threshold: float = DEFAULT_THRESHOLD_X
) -> dict:
    """Linearized and exact chains at (T, B) or, when ``m`` is given, at (T, M = m M0).

    In the (T, B) form the linearized magnetization is gamma B / T; when it
    overshoots M0 the linearized S, mu and G are left empty.  In the (T, m)
    form both chains share M; B is the field the Curie law assigns to it.
    """
    require_positive_temperature(T)
    if (B is None) == (m is None):
        raise UsageError("give exactly one of field or m")
    if m is None:
        x = reduced_field(T, B, p)
        M = p.gamma * as_field(B).raw / T
        exact = exact_chain(T, B, p)
        m_exact = exact.magnetization / p.m_max
        M_exact, S_exact, mu_exact = exact.magnetization, exact.entropy, exact.chem_potential
        U_exact = exact.utility
    else:
        if abs(m) > 1:
            raise DomainError(f"|m| must not exceed 1, got {m!r}", "m")
        M = m * p.m_max
        B = M * T / p.gamma
        x = p.mu_b * B / (p.k * T)
        m_exact, M_exact = m, M
        S_exact = entropy_of_magnetization(M, p)
        mu_exact = T * S_exact / p.n_agents
        # exact-chain field for this magnetization: kT atanh(m) / mu_b
        U_exact = M * p.k * T * math.atanh(m) / p.mu_b if abs(m) < 1 else math.copysign(math.inf, m)
    S = mu = G = None
    if abs(M) <= p.m_max:
        S = polarization_entropy(T, M, DEFAULT_REFERENCE, p)
        mu = chemical_potential(T, M, p)
        G = p.n_agents * mu
    return {
        "T": T,
        "B": B,
        "x": x,
        "m": M / p.m_max,
        "U": M * B,
        "M": M,
        "S": S,
        "mu": mu,
        "G": G,
        "m_exact": m_exact,
        "U_exact": U_exact,
        "M_exact": M_exact,
        "S_exact": S_exact,
        "mu_exact": mu_exact,
        "G_exact": p.n_agents * mu_exact,
        "rel_gap_M": _rel_gap(M, M_exact),
        "rel_gap_mu": _rel_gap(mu, mu_exact),
        "within_linear_regime": abs(x) <= threshold,
    }


def _tabular(config: RunConfig, columns, rows, extra: dict) -> str:
    if (config.output_format or "csv") == "json":
        return render_json(dict(schema_version=SCHEMA_VERSION, params=_params_dict(config), **extra, rows=rows))
    return render_csv(columns, rows)


# ---------------------------------------------------------------------------
# commands


def cmd_eos(config: RunConfig, T: Optional[float], B: float, U: Optional[float] = None) -> str:
    if U is not None:
        if T is not None:
            raise UsageError("give either --temp or --utility, not both")
        T = temperature_from_utility(U, B, config.params)
    if T is None:
        T = 1.0
    record = state_record(T, config.params, B=B, threshold=config.threshold_x)
    if (config.output_format or "csv") == "json":
        return render_json({"schema_version": SCHEMA_VERSION, "params": _params_dict(config), "record": record})
    return render_csv(STATE_COLUMNS, [record])


def _grid(lo: float, hi: float, steps: int) -> List[float]:
    if not lo < hi:
        raise UsageError(f"invalid range: lo ({lo!r}) must be below hi ({hi!r})")
    if steps < 2:
        raise UsageError("steps must be >= 2")
    values = [lo + (hi - lo) * i / (steps - 1) for i in range(steps)]
    values[-1] = hi
    return values


def cmd_sweep(
    config: RunConfig,
    axis: str,
    lo: float,
    hi: float,
    steps: int,
    T: float = 1.0,
    B: float = 0.0,
    m: Optional[float] = None,
) -> str:
    p = config.params
    rows = []
    for value in _grid(lo, hi, steps):
        if axis == "T":
            row = state_record(value, p, B=None if m is not None else B, m=m, threshold=config.threshold_x)
        elif axis == "B":
            row = state_record(T, p, B=value, threshold=config.threshold_x)
        elif axis == "m":
            row = state_record(T, p, m=value, threshold=config.threshold_x)
        else:
            raise UsageError(f"unknown axis {axis!r}")
        rows.append(row)
    return _tabular(config, STATE_COLUMNS, rows, {"axis": axis})


def _derivative_checks(config: RunConfig, T: float, B: float) -> List[CheckReport]:
    p = config.params
    U = utility_exact(T, B, p)
    u0 = p.mu_b * B * p.n_agents
    return [
        check_temperature_derivative(U, B, p, h=1e-5 * u0, tolerance=config.tolerance("temperature_derivative", 1e-6)),
        check_field_derivative(U, B, p, h=1e-5 * B, tolerance=config.tolerance("field_derivative", 1e-6)),
        check_convergence_order("temperature", U, B, p, tolerance=config.tolerance("temperature_derivative_order", 0.2)),
        check_convergence_order("field", U, B, p, tolerance=config.tolerance("field_derivative_order", 0.2)),
    ]


def _gibbs_duhem_checks(config: RunConfig, n_loops: int) -> List[CheckReport]:
    p = config.params
    tol_loop = config.tolerance("gibbs_duhem_loop", 1e-8)
    tol_path = config.tolerance("gibbs_duhem_path", 1e-8)
    reports = [
        integrate_gibbs_duhem(rectangle_path(1.0, 2.0, 0.0, 0.1, p, 1000), DEFAULT_REFERENCE, p, tol_loop),
        integrate_gibbs_duhem(PathSpec.from_reduced([(1.0, 0.0), (2.0, 0.0)], p, 1000), DEFAULT_REFERENCE, p, tol_path),
        integrate_gibbs_duhem(
            PathSpec.from_reduced([(1.0, 0.0), (1.0, 0.5), (2.0, 0.5), (2.0, 0.0)], p, 1000), DEFAULT_REFERENCE, p, tol_path
        ),
    ]
    rnd = random.Random(config.rng.seed * 1_000_003 + config.rng.stream)
    for _ in range(n_loops):
        t_lo, t_hi = sorted(rnd.uniform(0.05, 10.0) for _ in range(2))
        m_lo, m_hi = sorted(rnd.uniform(-1.0, 1.0) for _ in range(2))
        reports.append(integrate_gibbs_duhem(rectangle_path(t_lo, t_hi, m_lo, m_hi, p, 200), DEFAULT_REFERENCE, p, tol_loop))
    return reports


def _taylor_checks(config: RunConfig, T: float, B: float) -> List[CheckReport]:
    xs = [0.0, 0.01, 0.05, 0.1, 0.2, 0.5, 0.9]
    x_state = abs(reduced_field(T, B, config.params))
    if x_state < 1 and x_state not in xs:
        xs.append(x_state)
    reports = taylor_checks(xs, config.threshold_x)
    if "taylor" in config.tolerances or "*" in config.tolerances:
        tol = config.tolerance("taylor", 0.0)
        reports = [make_report(r.name, r.measured, r.expected, min(tol, r.tolerance), "abs", metadata=r.metadata) for r in reports]
    return reports


def _migration_checks(config: RunConfig, T: float, m: float) -> List[CheckReport]:
    p = config.params
    reports = [
        migration_experiment(T, m, 10**6, dn, p, "linear", config.tolerance("migration_linear", 0.0)) for dn in (1, 1000)
    ]
    for n in (10**2, 10**4, 10**6):
        reports.append(migration_experiment(T, m, n, 1, p, "exact", config.tolerance("migration_exact", 1.0 / n)))
    return reports


def _paper_vs_exact_checks(config: RunConfig, T: float, B: float) -> List[CheckReport]:
    reports = paper_vs_exact_report(T, B, config.params, config.threshold_x)
    out = []
    for r in reports:
        if r.mode != "report" and (r.name in config.tolerances or "*" in config.tolerances):
            r = make_report(r.name, r.measured, r.expected, config.tolerance(r.name, r.tolerance), r.mode, metadata=r.metadata)
        out.append(r)
    return out


def run_suite(config: RunConfig, suite: str, T: float = 1.0, B: float = 0.01, m: float = 0.0, n_loops: int = 100) -> List[CheckReport]:
    if suite not in SUITES:
        raise UsageError(f"unknown suite {suite!r}")
    require_positive_temperature(T)
    reports: List[CheckReport] = []
    if suite in ("all", "derivatives"):
        reports += _derivative_checks(config, T, B)
    if suite in ("all", "gibbs-duhem"):
        reports += _gibbs_duhem_checks(config, n_loops)
    if suite in ("all", "taylor"):
        reports += _taylor_checks(config, T, B)
    if suite in ("all", "migration"):
        reports += _migration_checks(config, T, m)
    if suite in ("all", "paper-vs-exact"):
        reports += _paper_vs_exact_checks(config, T, B)
    return reports


def cmd_verify(config: RunConfig, suite: str, T: float = 1.0, B: float = 0.01, m: float = 0.0, n_loops: int = 100):
    """Returns (rendered report, exit code)."""
    reports = run_suite(config, suite, T, B, m, n_loops)
    passed = all(r.passed for r in reports)
    x = reduced_field(T, B, config.params)
    regime = {"x": x, "threshold_x": config.threshold_x, "within_linear_regime": abs(x) <= config.threshold_x}
    if not regime["within_linear_regime"]:
        print(
            f"warning: state lies outside the linear regime (|x| = {abs(x):g} > {config.threshold_x:g})",
            file=sys.stderr,
        )
    if (config.output_format or "json") == "csv":
        text = render_csv(CHECK_COLUMNS, [r.to_dict() for r in reports])
    else:
        text = render_json(
            {
                "schema_version": SCHEMA_VERSION,
                "params": _params_dict(config),
                "suite": suite,
                "state": {"T": T, "B": B, "m": m},
                "regime": regime,
                "checks": [r.to_dict() for r in reports],
                "passed": passed,
            }
        )
    return text, 0 if passed else 1


def cmd_simulate(config: RunConfig, T: float, B: float, n_samples: int) -> str:
    p = config.params
    summaries = estimate_observables(T, B, p, n_samples, config.rng)
    analytic = analytic_observables(T, B, p)
    bias = plugin_bias(p)
    rows = []
    for s in summaries:
        ref = analytic[s.observable] + bias[s.observable]
        z = (s.mean - ref) / s.std_error if s.std_error > 0 else (0.0 if s.mean == ref else math.inf)
        rows.append(
            {
                "observable": s.observable,
                "mean": s.mean,
                "std_error": s.std_error,
                "n_samples": s.n_samples,
                "analytic": analytic[s.observable],
                "bias": bias[s.observable],
                "z_score": z,
            }
        )
    extra = {"rng": {"seed": config.rng.seed, "stream": config.rng.stream, "generator": "Philox4x64"}, "T": T, "B": B}
    return _tabular(config, SIMULATE_COLUMNS, rows, extra)


def cmd_market(config: RunConfig, trades: str, prices: str, window: str, calib: CalibrationParams, annualization=None) -> str:
    windows = ingest_windows(trades, prices, window, annualization)
    rows = [window_record(w, calib) for w in sorted(windows, key=lambda w: w.window_start)]
    return _tabular(config, OUTPUT_HEADER, rows, {"calibration": asdict(calib)})


# ---------------------------------------------------------------------------
# argument parsing


def _parse_tolerance(text: str):
    name, sep, value = text.rpartition("=")
    if not sep:
        name = "*"
    try:
        return name, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad tolerance {text!r}; use VALUE or NAME=VALUE") from None


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model and output")
    g.add_argument("--n", type=int, default=100, help="number of agents N (default 100)")
    g.add_argument("--mu-b", type=float, default=1.0, help="utility per agent per unit field (default 1)")
    g.add_argument("--k", type=float, default=1.0, help="currency per unit information (default 1 USD)")
    g.add_argument("--seed", type=int, default=None, help=f"RNG seed (fallback: ${SEED_ENV}, then 0)")
    g.add_argument("--stream", type=int, default=0, help="RNG stream index")
    g.add_argument("--format", choices=("csv", "json"), default=None)
    g.add_argument("--out", default=None, metavar="PATH")
    g.add_argument("--threshold-x", type=float, default=DEFAULT_THRESHOLD_X)
    g.add_argument(
        "--tolerance",
        type=_parse_tolerance,
        action="append",
        default=[],
        metavar="[NAME=]VALUE",
        help="override a check tolerance (bare VALUE applies to every check)",
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="agent-thermo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eos", parents=[common], help="evaluate one state in both chains")
    p.add_argument("--temp", type=float, default=None)
    p.add_argument("--utility", type=float, default=None, help="give U instead of T (exact inversion)")
    p.add_argument("--field", type=float, default=0.01)

    p = sub.add_parser("sweep", parents=[common], help="grid over T, B or m")
    p.add_argument("--axis", choices=("T", "B", "m"), required=True)
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--steps", type=int, default=11)
    p.add_argument("--temp", type=float, default=1.0)
    p.add_argument("--field", type=float, default=0.0)
    p.add_argument("--m", type=float, default=None, help="hold m = M/M0 fixed on a T sweep")

    p = sub.add_parser("verify", parents=[common], help="run verification suites")
    p.add_argument("--suite", choices=SUITES, default="all")
    p.add_argument("--temp", type=float, default=1.0)
    p.add_argument("--field", type=float, default=0.01)
    p.add_argument("--m", type=float, default=0.0, help="reduced magnetization for migration checks")
    p.add_argument("--loops", type=int, default=100, help="randomized Gibbs-Duhem loops")

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo estimates with z-scores")
    p.add_argument("--temp", type=float, default=1.0)
    p.add_argument("--field", type=float, default=0.01)
    p.add_argument("--samples", type=int, default=1000)

    p = sub.add_parser("market", parents=[common], help="trade/price CSVs to chemical potential per window")
    p.add_argument("--trades", required=True)
    p.add_argument("--prices", required=True)
    p.add_argument("--window", required=True, help="e.g. 300s, 5min, 1h, 1d")
    p.add_argument("--temp-per-vol", type=float, default=1.0, help="calibration c in T = c * sigma")
    p.add_argument("--annualization", type=float, default=None, help="multiply sigma by sqrt of this")
    return parser


def _resolve_seed(flag: Optional[int]) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return 0


def config_from_args(args) -> RunConfig:
    return RunConfig(
        params=ModelParams(args.n, args.mu_b, args.k),
        threshold_x=args.threshold_x,
        tolerances=dict(args.tolerance),
        rng=RngSpec(_resolve_seed(args.seed), args.stream),
        output_format=args.format,
        output_path=args.out,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    code = 0
    try:
        config = config_from_args(args)
        if args.command == "eos":
            text = cmd_eos(config, args.temp, args.field, args.utility)
        elif args.command == "sweep":
            text = cmd_sweep(config, args.axis, args.lo, args.hi, args.steps, args.temp, args.field, args.m)
        elif args.command == "verify":
            text, code = cmd_verify(config, args.suite, args.temp, args.field, args.m, args.loops)
        elif args.command == "simulate":
            text = cmd_simulate(config, args.temp, args.field, args.samples)
        else:
            calib = CalibrationParams(args.temp_per_vol, args.k)
            text = cmd_market(config, args.trades, args.prices, args.window, calib, args.annualization)
        _emit(config, text)
    except (DomainError, UsageError, MarketDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
