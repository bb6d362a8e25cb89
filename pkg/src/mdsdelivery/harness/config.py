"""Experiment configuration: a strict INI document with documented defaults.

Schema (every key optional except the sweep)::

    [radio]       num_sbs num_users sbs_antennas user_antennas edge_bandwidth
                  noise_power_dbm sbs_power fronthaul_capacity alpha_e alpha_f tau0
    [library]     num_files file_size zipf_gamma fragments
    [cache]       strategy (probc | fcd)  capacity (mu)
    [geometry]    area_half_width exclusion_radius shadowing_db antenna_gain_dbi
    [experiment]  algorithms trials seed output
    [sweep]       parameter values
    [penalty]     lam0 eta every lam_max
    [stop]        rel_tol patience binarity_tol max_iters
    [solver]      engine tol

``sbs_power`` is one value in watts applied to every SBS, so sweeping
``num_sbs`` keeps the configuration consistent.  ``tau0`` may be ``auto``
(1e-6 * C_F).  The sweep names one key of the radio, library, cache or
geometry sections, e.g. ``parameter = capacity``.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..network import Library, RadioParams, dbm_to_watt
from ..optimizer import PenaltySchedule, StopRule

ALGORITHMS = ("mds-bcu", "mds-gbsc", "uncoded1", "uncoded2", "na")
STRATEGIES = ("probc", "fcd")
ENGINES = ("native", "clarabel")


class ConfigError(ValueError):
    """Invalid or unparsable experiment configuration."""


@dataclass(frozen=True)
class RadioSection:
    num_sbs: int = 3
    num_users: int = 5
    sbs_antennas: int = 5
    user_antennas: int = 3
    edge_bandwidth: float = 10e6
    noise_power_dbm: float = -102.0
    sbs_power: float = 1.0
    fronthaul_capacity: float = 10e6
    alpha_e: float = 1.0
    alpha_f: float = 1.0
    tau0: float | None = None


@dataclass(frozen=True)
class LibrarySection:
    num_files: int = 100
    file_size: float = 100e6
    zipf_gamma: float = 1.0
    fragments: int = 5


@dataclass(frozen=True)
class CacheSection:
    strategy: str = "probc"
    capacity: float = 0.2


@dataclass(frozen=True)
class GeometrySection:
    area_half_width: float = 1000.0
    exclusion_radius: float = 10.0
    shadowing_db: float = 7.0
    antenna_gain_dbi: float = 5.0


@dataclass(frozen=True)
class ExperimentSection:
    algorithms: tuple[str, ...] = ("mds-bcu",)
    trials: int = 20
    seed: int = 0
    output: str = "results.csv"


@dataclass(frozen=True)
class SweepSection:
    parameter: str = ""
    values: tuple[float, ...] = ()


@dataclass(frozen=True)
class SolverSection:
    engine: str = "native"
    tol: float = 1e-8


SWEEPABLE = {f.name: sec for sec, cls in (("radio", RadioSection), ("library", LibrarySection),
                                            ("cache", CacheSection), ("geometry", GeometrySection))
             for f in fields(cls) if f.name != "strategy"}


@dataclass(frozen=True)
class ExperimentConfig:
    radio: RadioSection = field(default_factory=RadioSection)
    library: LibrarySection = field(default_factory=LibrarySection)
    cache: CacheSection = field(default_factory=CacheSection)
    geometry: GeometrySection = field(default_factory=GeometrySection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    penalty: PenaltySchedule = field(default_factory=PenaltySchedule)
    stop: StopRule = field(default_factory=StopRule)
    solver: SolverSection = field(default_factory=SolverSection)

    def __post_init__(self):
        validate(self)

    def at(self, value) -> "ExperimentConfig":
        """This configuration with the sweep parameter set to ``value``."""
        name = self.sweep.parameter
        sec = SWEEPABLE[name]
        part = getattr(self, sec)
        typ = type(getattr(part, name)) if getattr(part, name) is not None else float
        cast = int if typ is int else float
        if cast is int and float(value) != int(float(value)):
            raise ConfigError(f"sweep value {value!r} for {name} must be an integer")
        return replace(self, **{sec: replace(part, **{name: cast(value)})})

    def radio_params(self) -> RadioParams:
        r = self.radio
        return RadioParams(num_sbs=r.num_sbs, num_users=r.num_users, sbs_antennas=r.sbs_antennas,
                           user_antennas=r.user_antennas, edge_bandwidth=r.edge_bandwidth,
                           noise_power=dbm_to_watt(r.noise_power_dbm), sbs_power=(r.sbs_power,) * r.num_sbs,
                           fronthaul_capacity=r.fronthaul_capacity, alpha_e=r.alpha_e, alpha_f=r.alpha_f,
                           tau0=r.tau0)

    def library_params(self) -> Library:
        lb = self.library
        return Library(num_files=lb.num_files, file_size=lb.file_size, zipf_gamma=lb.zipf_gamma,
                       fragments=lb.fragments)


_SECTIONS = {"radio": RadioSection, "library": LibrarySection, "cache": CacheSection,
             "geometry": GeometrySection, "experiment": ExperimentSection, "sweep": SweepSection,
             "penalty": PenaltySchedule, "stop": StopRule, "solver": SolverSection}


def validate(cfg: ExperimentConfig) -> None:
    ex = cfg.experiment
    if not ex.algorithms:
        raise ConfigError("at least one algorithm required")
    for a in ex.algorithms:
        if a not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {a!r}; choose from {', '.join(ALGORITHMS)}")
    if ex.trials < 1:
        raise ConfigError("trials must be >= 1")
    if cfg.cache.strategy not in STRATEGIES:
        raise ConfigError(f"unknown caching strategy {cfg.cache.strategy!r}")
    if not 0.0 <= cfg.cache.capacity <= 1.0:
        raise ConfigError("cache capacity must lie in [0, 1]")
    if cfg.solver.engine not in ENGINES:
        raise ConfigError(f"unknown solver engine {cfg.solver.engine!r}")
    if not cfg.sweep.parameter or not cfg.sweep.values:
        raise ConfigError("exactly one sweep parameter required")
    if cfg.sweep.parameter not in SWEEPABLE:
        raise ConfigError(f"cannot sweep {cfg.sweep.parameter!r}; choose from {', '.join(sorted(SWEEPABLE))}")


def _convert(text: str, typ: str, where: str):
    # field annotations are strings under postponed evaluation
    t = text.strip()
    try:
        if typ == "int":
            return int(t)
        if typ == "float":
            return float(t)
        if typ == "float | None":
            return None if t.lower() in ("auto", "none", "") else float(t)
        if typ == "str":
            return t
        if typ == "tuple[str, ...]":
            return tuple(x.strip() for x in t.split(",") if x.strip())
        if typ == "tuple[float, ...]":
            return tuple(float(x) for x in t.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot read {text!r} ({exc})") from None
    raise ConfigError(f"{where}: unsupported field type {typ}")


def parse_text(text: str, source: str = "<config>") -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, strict=True, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    parts = {}
    for sec in cp.sections():
        if sec not in _SECTIONS:
            raise ConfigError(f"{source}: unknown section [{sec}]")
        cls = _SECTIONS[sec]
        types = {f.name: str(f.type) for f in fields(cls)}
        kw = {}
        for key, raw in cp.items(sec):
            if key not in types:
                raise ConfigError(f"{source}: unknown key {key!r} in [{sec}] (line {_line_of(text, sec, key)})")
            kw[key] = _convert(raw, types[key], f"{source} [{sec}] {key} (line {_line_of(text, sec, key)})")
        try:
            parts[sec] = cls(**kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{source} [{sec}]: {exc}") from None
    try:
        return ExperimentConfig(**parts)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def _line_of(text: str, section: str, key: str) -> int:
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
        elif current == section and s.split("=", 1)[0].split(":", 1)[0].strip() == key:
            return no
    return 0


def parse_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    return parse_text(text, str(p))


def _format(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, tuple):
        return ", ".join(_format(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize(cfg: ExperimentConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    for sec in _SECTIONS:
        cp[sec] = {k: _format(v) for k, v in dataclasses.asdict(getattr(cfg, sec)).items()}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
