"""Command-line front end.

Each subcommand loads the configuration, runs one analysis and writes
plot-ready files to the output directory.  Reports contain no timestamps or
timings, so the same configuration and seed reproduce them byte for byte
whatever the thread count.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import OUT_DIR_ENV, RunConfig, apply_overrides, load_config
from .drivers import (
    DEFAULT_FUNNEL_QUANTILES,
    BasisRiskModel,
    FixedCalamity,
    LapseDriverModel,
    RiskModels,
    TrendModel,
    calibrate_basis,
    calibrate_calamity,
    calibrate_trend,
    funnel,
    simulate_paths,
)
from .engine import fit, life_expectancy_regression, own_funds_distribution, regression_slices, risk_measures, survival_funnel
from .errors import EXIT_CODES, ConfigError, DataFileError, LsmcError
from .nested import NestedConfig, compare, nested_scr
from .portfolio import AssumptionSet, Portfolio, build_grid, project_grid_best_estimate
from .projection import SimulationBatch, build_batch, reference_rates
from .standard_formula import standard_formula_scr
from .synthetic import reference_book, toy_book

SCHEMA_VERSION = "1.0"
COMMANDS = ("scr-lsmc", "scr-standard", "funnel", "life-expectancy", "validate-nested", "simulate-export")
FUNNEL_COMPONENTS = ("mort", "lapse", "trend")
MIN_SCR_SIMS = 1000

CONVENTIONS = {
    "sign": "own-funds changes are positive for gains; SCR = max(0, -quantile) of the one-year own-funds change",
    "quantile_estimator": "lower order statistic x_(k), k = max(1, floor(n * (1 - level)))",
    "tvar": "minus the mean of own-funds changes at or below the quantile",
    "discounting": "discount[t] applies to the net cash flow at the end of projection year t",
    "regression": "no intercept; response = PV of years 2..T deviations, regressors = first-year factors minus 1",
    "own_funds_change": "experience variance of year 1 plus the fitted assumption change",
    "rng": "Philox substreams keyed by (seed, driver, block of 1024 paths); independent of thread count",
    "funnel_quantiles": "inverse empirical CDF, averaging order statistics when n*p is integral",
    "af_mort": "portfolio factor against the claims-weighted best-estimate rate of each year",
}


def build_models(cfg: RunConfig) -> RiskModels:
    t, b, c = cfg.trend, cfg.basis, cfg.calamity
    trend = TrendModel(t.sigma) if t.sigma is not None else calibrate_trend(t.quantile, t.factor, t.year)
    basis = BasisRiskModel(b.sigma) if b.sigma is not None else calibrate_basis(b.share_best_estimate, b.share_adverse, b.multiplier)
    calamity = calibrate_calamity(c.quantile_a, c.rate_a, c.quantile_b, c.rate_b) if c.enabled else FixedCalamity(0.0)
    return RiskModels(trend, calamity, basis, LapseDriverModel(cfg.lapse.sigma))


def load_book(cfg: RunConfig) -> tuple[Portfolio, AssumptionSet]:
    d = cfg.data
    if d.book == "reference":
        return reference_book(horizon=d.horizon or 60)
    if d.book == "toy":
        return toy_book(horizon=d.horizon or 10)
    return Portfolio.from_csv(d.portfolio), AssumptionSet.from_csv(d.mortality, d.lapse, d.discount, d.horizon)


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def write_json(path: Path, payload: dict):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_clean(payload), fh, indent=2, allow_nan=False)
        fh.write("\n")


def write_rows(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def write_funnel(path: Path, table):
    header = ["year"] + [f"q{p:g}" for p in table.quantiles] + ["mean"]
    write_rows(path, header, ([year, *values, mean] for year, values, mean in table.rows()))


class Run:
    """One command execution: configuration, inputs, collected warnings and outputs."""

    def __init__(self, command: str, cfg: RunConfig):
        self.command = command
        self.cfg = cfg
        self.out = Path(cfg.output.directory)
        self.files: list[str] = []
        self.portfolio, self.assumptions = load_book(cfg)
        self.grid = build_grid(self.portfolio, self.assumptions)
        self.models = build_models(cfg)

    def header(self) -> dict:
        be = project_grid_best_estimate(self.grid)
        return {
            "schema_version": SCHEMA_VERSION,
            "package_version": __version__,
            "command": self.command,
            "config": self.cfg.as_dict(),
            "calibration": self.models.describe(),
            "conventions": CONVENTIONS,
            "portfolio": {
                "model_points": len(self.portfolio),
                "horizon": self.assumptions.horizon,
                "pvofp_det": float(be.ncf @ self.assumptions.discount),
                "best_estimate_ncf": be.ncf,
            },
        }

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def paths(self, n=None):
        sim = self.cfg.simulation
        return simulate_paths(
            self.models,
            self.assumptions,
            n or sim.n_sims,
            sim.seed,
            reference_rates=reference_rates(self.grid),
            threads=sim.threads,
        )

    def batch(self) -> SimulationBatch:
        sim = self.cfg.simulation
        return build_batch(
            self.portfolio, self.assumptions, self.paths(), regressors=sim.regressors, recenter=sim.recenter, threads=sim.threads
        )

    def lsmc(self, batch: SimulationBatch):
        reg_cfg = self.cfg.regression
        reg = fit(batch, reg_cfg.basis, robust=reg_cfg.robust_se, method=reg_cfg.method)
        dist = own_funds_distribution(batch, reg)
        risk = risk_measures(dist, self.cfg.risk.level)
        alt_basis = "linear_plus_quadratic" if reg_cfg.basis == "linear" else "linear"
        alt = fit(batch, alt_basis, robust=reg_cfg.robust_se, method=reg_cfg.method)
        alt_risk = risk_measures(own_funds_distribution(batch, alt), self.cfg.risk.level)
        section = {
            "regression": reg.as_dict(),
            "risk": risk.as_dict(),
            "diagnostics": {
                "alternative_basis": {"basis": alt_basis, "regression": alt.as_dict(), "scr": alt_risk.scr},
                "clip_count": batch.clip_count,
                "clip_rate": batch.clip_rate,
                "centering": "batch mean" if batch.recentered else "best estimate",
                "mean_ev": float(batch.ev.mean()),
                "mean_y": float(batch.y.mean()),
                "mean_own_funds_change": float(dist.samples.mean()),
                "own_funds_standard_error": dist.standard_error(),
                "regressor_means": dict(zip(batch.regressor_names, batch.x.mean(axis=0).tolist())),
                "regression_slices": regression_slices(reg, batch),
            },
        }
        return section, dist, risk

    def standard_formula(self) -> dict:
        sf = self.cfg.standard_formula
        mags = {k: getattr(sf, k) for k in ("lapse_mass", "lapse_up", "lapse_down", "mortality_up", "catastrophe")}
        return standard_formula_scr(self.portfolio, self.assumptions, mags, sf.correlation).as_dict()


def cmd_scr_lsmc(run: Run) -> tuple[dict, str]:
    _check_sims(run)
    batch = run.batch()
    section, dist, risk = run.lsmc(batch)
    write_rows(run.path("distribution.csv"), ("path", "own_funds_change"), enumerate(dist.samples.tolist()))
    return {"n_sims": batch.n_sims, "lsmc": section, "standard_formula": run.standard_formula()}, f"SCR (LSMC) = {risk.scr:,.2f}"


def cmd_scr_standard(run: Run) -> tuple[dict, str]:
    sf = run.standard_formula()
    return {"standard_formula": sf}, f"SCR (standard formula) = {sf['scr']:,.2f}"


def cmd_funnel(run: Run) -> tuple[dict, str]:
    paths = run.paths()
    summary = {}
    for component in FUNNEL_COMPONENTS:
        table = funnel(paths, component, DEFAULT_FUNNEL_QUANTILES)
        write_funnel(run.path(f"funnel_{component}.csv"), table)
        width = table.width()
        summary[component] = {"width_0.05_0.95_final_year": float(width[-1]), "max_width": float(width.max())}
    return {"n_sims": len(paths), "quantiles": DEFAULT_FUNNEL_QUANTILES, "funnels": summary}, "funnels written"


def cmd_life_expectancy(run: Run) -> tuple[dict, str]:
    batch = run.batch()
    le_cfg = run.cfg.life_expectancy
    le = life_expectancy_regression(batch, le_cfg.quantile, le_cfg.stress_factor)
    write_funnel(run.path("funnel_survival.csv"), survival_funnel(batch))
    return {"n_sims": batch.n_sims, "life_expectancy": le.as_dict()}, (
        f"LE best estimate {le.e_be:.4f}; {le.level:g} quantile {le.quantile:.4f}; stress {le.stress_le:.4f}"
    )


def cmd_validate_nested(run: Run) -> tuple[dict, str]:
    _check_sims(run)
    n = run.cfg.nested
    ncfg = NestedConfig(n.n_outer, n.n_inner, n.seed, n.time_budget)
    level = run.cfg.risk.level
    if not ncfg.recommended(level):
        msg = f"nested run {n.n_outer}x{n.n_inner} is below the recommended size for level {level:g}"
        warnings.warn(msg)
    batch = run.batch()
    section, _, risk = run.lsmc(batch)
    nested = nested_scr(run.portfolio, run.assumptions, run.models, ncfg, level, threads=run.cfg.simulation.threads)
    cmp = compare(risk, nested.report)
    return {"n_sims": batch.n_sims, "lsmc": section, "nested": nested.as_dict(), "comparison": cmp}, (
        f"SCR LSMC {cmp['scr_lsmc']:,.2f} vs nested {cmp['scr_nested']:,.2f}; "
        f"gap {cmp['relative_gap']:.2%} ({cmp['gap_in_standard_errors']:.2f} SE)"
    )


def cmd_simulate_export(run: Run) -> tuple[dict, str]:
    batch = run.batch()
    batch.to_csv(run.path("batch.csv"))
    summary = {
        "n_sims": batch.n_sims,
        "regressors": list(batch.regressor_names),
        "regressor_means": batch.x.mean(axis=0),
        "mean_ev": float(batch.ev.mean()),
        "mean_y": float(batch.y.mean()),
        "clip_count": batch.clip_count,
        "columns": ["path", "af_mort_1", "af_lapse_1", "ev", "y"],
    }
    return {"batch": summary}, f"{batch.n_sims} paths exported"


HANDLERS = {
    "scr-lsmc": cmd_scr_lsmc,
    "scr-standard": cmd_scr_standard,
    "funnel": cmd_funnel,
    "life-expectancy": cmd_life_expectancy,
    "validate-nested": cmd_validate_nested,
    "simulate-export": cmd_simulate_export,
}


def _check_sims(run: Run):
    if run.cfg.simulation.n_sims < MIN_SCR_SIMS:
        warnings.warn(f"n_sims = {run.cfg.simulation.n_sims} is below {MIN_SCR_SIMS}; the SCR estimate is unreliable")


def execute(command: str, cfg: RunConfig) -> dict:
    """Run ``command`` and write its outputs; returns the report payload."""
    if command not in HANDLERS:
        raise ConfigError(f"unknown command {command!r}")
    cfg.validate()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        run = Run(command, cfg)
        try:
            run.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise DataFileError(f"cannot create output directory {run.out}: {exc}") from None
        body, summary = HANDLERS[command](run)
    report = run.header()
    report.update(body)
    report["warnings"] = sorted({str(w.message) for w in caught})
    name = "le_report.json" if command == "life-expectancy" else "report.json"
    report["outputs"] = sorted(run.files + [name])
    write_json(run.path(name), report)
    report["_summary"] = summary
    return report


def _exit_code_help() -> str:
    lines = ["exit codes:"]
    lines += [f"  {code:>2}  {text}" for code, text in sorted(EXIT_CODES.items())]
    return "\n".join(lines)


EPILOG = f"""\
configuration precedence (lowest first):
  built-in defaults < --config file < ${OUT_DIR_ENV} (output directory only) < command-line flags

outputs (in the output directory):
  scr-lsmc         report.json, distribution.csv
  scr-standard     report.json
  funnel           report.json, funnel_mort.csv, funnel_lapse.csv, funnel_trend.csv
  life-expectancy  le_report.json, funnel_survival.csv
  validate-nested  report.json
  simulate-export  report.json, batch.csv

on failure a JSON object {{"error", "exit_code", "message"}} is printed to stderr.

"""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lsmc-life",
        description="One-year life-insurance capital by least-squares Monte Carlo.",
        epilog=EPILOG + _exit_code_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("-c", "--config", help="INI configuration file")
    parser.add_argument("--seed", type=int, help="simulation seed")
    parser.add_argument("--sims", type=int, help="number of simulated paths")
    parser.add_argument("--level", type=float, help="VaR confidence level, e.g. 0.995")
    parser.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")
    parser.add_argument("--out", help="output directory")
    return parser


def _fail(exc: Exception, code: int) -> int:
    payload = {"error": type(exc).__name__, "exit_code": code, "message": str(exc)}
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return ConfigError.exit_code if exc.code else 0
    try:
        cfg = load_config(args.config)
        apply_overrides(cfg, seed=args.seed, sims=args.sims, level=args.level, threads=args.threads, out=args.out)
        report = execute(args.command, cfg)
    except LsmcError as exc:
        return _fail(exc, exc.exit_code)
    except OSError as exc:
        return _fail(exc, DataFileError.exit_code)
    except ValueError as exc:
        return _fail(exc, 1)
    for w in report["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    print(report["_summary"])
    print("wrote " + ", ".join(report["outputs"]) + f" to {cfg.output.directory}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
