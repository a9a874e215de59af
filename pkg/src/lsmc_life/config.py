"""Run configuration: an INI file with typed keys.

Precedence, lowest first: built-in defaults, the configuration file, the
``LSMC_OUT_DIR`` environment variable (output directory only), command-line
flags.  Relative data paths are resolved against the configuration file's
directory.

Example::

    [data]
    book = files
    portfolio = portfolio.csv
    mortality = mortality.csv
    lapse = lapse.csv
    discount = discount.csv

    [simulation]
    n_sims = 100000
    seed = 20240601
"""

from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import get_type_hints

from .errors import ConfigError

OUT_DIR_ENV = "LSMC_OUT_DIR"

BOOKS = ("reference", "toy", "files")
REGRESSOR_SETS = ("observable", "combined", "latent")
BASES = ("linear", "linear_plus_quadratic")


@dataclass
class DataSection:
    book: str = "reference"
    portfolio: str = ""
    mortality: str = ""
    lapse: str = ""
    discount: str = ""
    horizon: int | None = None


@dataclass
class TrendSection:
    quantile: float = 0.95
    factor: float = 1.45
    year: int = 40
    sigma: float | None = None


@dataclass
class CalamitySection:
    enabled: bool = True
    quantile_a: float = 0.98
    rate_a: float = 0.0004
    quantile_b: float = 0.999
    rate_b: float = 0.005


@dataclass
class BasisSection:
    share_best_estimate: float = 0.35
    share_adverse: float = 0.39
    multiplier: float = 2.0
    sigma: float | None = None


@dataclass
class LapseSection:
    sigma: float = 0.05


@dataclass
class SimulationSection:
    n_sims: int = 100_000
    seed: int = 20240601
    threads: int = 1
    regressors: str = "observable"
    recenter: bool = False


@dataclass
class RegressionSection:
    basis: str = "linear"
    robust_se: bool = False
    method: str = "qr"


@dataclass
class RiskSection:
    level: float = 0.995


@dataclass
class LifeExpectancySection:
    quantile: float = 0.005
    stress_factor: float = 1.15


@dataclass
class NestedSection:
    n_outer: int = 5000
    n_inner: int = 1000
    seed: int = 1
    time_budget: float | None = 600.0


@dataclass
class StandardFormulaSection:
    lapse_mass: float = 0.40
    lapse_up: float = 0.50
    lapse_down: float = 0.50
    mortality_up: float = 0.15
    catastrophe: float = 0.0015
    correlation: float = 0.25


@dataclass
class OutputSection:
    directory: str = "out"


@dataclass
class RunConfig:
    data: DataSection = field(default_factory=DataSection)
    trend: TrendSection = field(default_factory=TrendSection)
    calamity: CalamitySection = field(default_factory=CalamitySection)
    basis: BasisSection = field(default_factory=BasisSection)
    lapse: LapseSection = field(default_factory=LapseSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)
    regression: RegressionSection = field(default_factory=RegressionSection)
    risk: RiskSection = field(default_factory=RiskSection)
    life_expectancy: LifeExpectancySection = field(default_factory=LifeExpectancySection)
    nested: NestedSection = field(default_factory=NestedSection)
    standard_formula: StandardFormulaSection = field(default_factory=StandardFormulaSection)
    output: OutputSection = field(default_factory=OutputSection)

    # execution-only settings; they cannot change any reported number
    EXECUTION_KEYS = (("simulation", "threads"), ("output", "directory"))

    def validate(self):
        d = self.data
        if d.book not in BOOKS:
            raise ConfigError(f"data.book must be one of {BOOKS}, got {d.book!r}")
        if d.book == "files":
            for key in ("portfolio", "mortality", "lapse", "discount"):
                value = getattr(d, key)
                if not value:
                    raise ConfigError(f"data.{key} is required when data.book = files")
                if not Path(value).is_file():
                    raise ConfigError(f"data.{key}: file not found: {value}")
        if self.simulation.regressors not in REGRESSOR_SETS:
            raise ConfigError(f"simulation.regressors must be one of {REGRESSOR_SETS}")
        if self.regression.basis not in BASES:
            raise ConfigError(f"regression.basis must be one of {BASES}")
        if self.regression.method not in ("qr", "normal"):
            raise ConfigError("regression.method must be qr or normal")
        if self.simulation.n_sims < 2:
            raise ConfigError("simulation.n_sims must be at least 2")
        if self.simulation.threads < 1:
            raise ConfigError("simulation.threads must be at least 1")
        if self.simulation.seed < 0 or self.nested.seed < 0:
            raise ConfigError("seeds must be non-negative")
        if not 0 < self.risk.level < 1:
            raise ConfigError("risk.level must lie in (0, 1)")
        if not 0 < self.life_expectancy.quantile < 1:
            raise ConfigError("life_expectancy.quantile must lie in (0, 1)")
        if self.nested.n_outer < 1 or self.nested.n_inner < 1:
            raise ConfigError("nested.n_outer and nested.n_inner must be positive")
        return self

    def as_dict(self, *, include_execution: bool = False) -> dict:
        out = dataclasses.asdict(self)
        if not include_execution:
            for section, key in self.EXECUTION_KEYS:
                out[section].pop(key)
        return out


def _parse_value(raw: str, typ, where: str):
    raw = raw.strip()
    optional = typ in (int | None, float | None)
    if optional and raw.lower() in ("", "none"):
        return None
    base = {int | None: int, float | None: float}.get(typ, typ)
    try:
        if base is bool:
            if raw.lower() in ("1", "yes", "true", "on"):
                return True
            if raw.lower() in ("0", "no", "false", "off"):
                return False
            raise ValueError(raw)
        return base(raw.replace("_", "")) if base in (int, float) else base(raw)
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {base.__name__}") from None


def _section_types(cls) -> dict:
    return get_type_hints(cls)


def load_config(path=None, *, env=None) -> RunConfig:
    """Defaults overlaid with ``path`` (if given) and the output-directory variable."""
    cfg = RunConfig()
    env = os.environ if env is None else env
    if path is not None:
        path = Path(path)
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from None
        except configparser.Error as exc:
            raise ConfigError(f"malformed configuration {path}: {exc}") from None
        sections = _section_types(RunConfig)
        for name in parser.sections():
            if name not in sections:
                raise ConfigError(f"unknown section [{name}]")
            section = getattr(cfg, name)
            types = _section_types(type(section))
            for key, raw in parser.items(name):
                if key not in types:
                    raise ConfigError(f"unknown key {name}.{key}")
                setattr(section, key, _parse_value(raw, types[key], f"{name}.{key}"))
        base = path.resolve().parent
        for key in ("portfolio", "mortality", "lapse", "discount"):
            value = getattr(cfg.data, key)
            if value and not Path(value).is_absolute():
                setattr(cfg.data, key, str(base / value))
    if env.get(OUT_DIR_ENV):
        cfg.output.directory = env[OUT_DIR_ENV]
    return cfg


def apply_overrides(cfg: RunConfig, *, seed=None, sims=None, level=None, threads=None, out=None) -> RunConfig:
    """Command-line flags win over every other source."""
    if seed is not None:
        cfg.simulation.seed = seed
    if sims is not None:
        cfg.simulation.n_sims = sims
    if level is not None:
        cfg.risk.level = level
    if threads is not None:
        cfg.simulation.threads = threads
    if out is not None:
        cfg.output.directory = str(out)
    return cfg


def write_config(cfg: RunConfig, path):
    """Write ``cfg`` back as an INI file that :func:`load_config` reads unchanged."""
    parser = configparser.ConfigParser(interpolation=None)
    for name, values in cfg.as_dict(include_execution=True).items():
        parser[name] = {k: "" if v is None else str(v).lower() if isinstance(v, bool) else str(v) for k, v in values.items()}
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)
