"""
Experiment configuration: flat `key = value` files with Table I defaults for every omitted key.

    # corner user, one reflection
    ptx = 30 dBm
    n0bf = -117 dBm
    k = 1
    tau_db = 0, 3, 6, 9
    locations = corner, center, typical
    location.desk = 4.5, -2
"""

import math
import os
from dataclasses import dataclass, field, replace
from enum import Enum, auto
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from .analytic import MAX_SUPPORTED_ORDER
from .channel import NetworkParams, ParameterError
from .geometry import InvalidLocationError, Point, check_location
from .quadrature import COVERAGE_SPEC, QuadratureSpec
from .simulator import TYPICAL, Location, Mode

THREADS_VARIABLE = "VLCOV_THREADS"

TYPICAL_NAME = "typical"


class ConfigError(ValueError):
    """A problem with a configuration, reported with the (1-based) line it comes from when there is one."""

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class Engine(Enum):
    ANALYTIC = auto()
    MC = auto()
    BOTH = auto()

    def runs_analytic(self) -> bool:
        return self is not Engine.MC

    def runs_mc(self) -> bool:
        return self is not Engine.ANALYTIC


def default_taus() -> Tuple[float, ...]:
    """tau_dB = 0, 1, ..., 30 in linear units."""
    return tuple(10 ** (db / 10) for db in range(31))


def default_rhos() -> Tuple[float, ...]:
    """20 log-spaced rates in [1e7, 1e10] bit/s."""
    return tuple(10 ** (7 + 3 * i / 19) for i in range(20))


def named_locations(a: float) -> Dict[str, Point]:
    """The four reference receivers of a room of half side a."""
    return {
        "corner": (a, a),
        "edge": (a, 0.0),
        "halfway": (a / math.sqrt(2), a / math.sqrt(2)),
        "center": (0.0, 0.0),
    }


def default_locations(a: float) -> Tuple[Tuple[str, Location], ...]:
    return tuple(named_locations(a).items()) + ((TYPICAL_NAME, TYPICAL),)


@dataclass(frozen=True)
class ExperimentConfig:
    params: NetworkParams = field(default_factory=NetworkParams)
    """Physical parameters, including the reflection order k (max_order) and eta"""
    locations: Tuple[Tuple[str, Location], ...] = field(default_factory=lambda: default_locations(9.0))
    taus: Tuple[float, ...] = field(default_factory=default_taus)
    """SINR thresholds, linear"""
    rhos: Tuple[float, ...] = field(default_factory=default_rhos)
    """Rate thresholds, bit/s"""
    engine: Engine = Engine.BOTH
    trials: int = 100_000
    seed: int = 0
    mode: Mode = Mode.INDEPENDENT
    grid_n: int = 8
    """Gauss points per dimension of the typical user average"""
    quadrature: QuadratureSpec = COVERAGE_SPEC
    workers: int = 1
    output: Optional[str] = None

    def with_changes(self, **changes: object) -> 'ExperimentConfig':
        return replace(self, **changes)  # type: ignore

    @property
    def K(self) -> int:
        return self.params.max_order

    def effective_workers(self) -> int:
        """The worker count, capped by the VLCOV_THREADS environment variable."""
        cap = os.environ.get(THREADS_VARIABLE)
        if cap is None:
            return self.workers
        try:
            return max(1, min(self.workers, int(cap)))
        except ValueError:
            raise ConfigError(f"{THREADS_VARIABLE} must be an integer, got {cap!r}")

    def validate(self, lines: Optional[Dict[str, int]] = None) -> None:
        """
        :param lines: the line each key was read from, for error reporting
        :raises ConfigError: on the first invalid setting
        """
        lines = lines or {}
        for name, location in self.locations:
            if location is TYPICAL:
                continue
            try:
                check_location(location, self.params.a)  # type: ignore
            except InvalidLocationError as e:
                raise ConfigError(str(e), lines.get(f"location.{name}", lines.get("a")))
        if not self.locations:
            raise ConfigError("At least one location is needed", lines.get("locations"))
        if self.engine.runs_analytic() and any(tau < 1 for tau in self.taus):
            raise ConfigError(f"The analytic engine needs thresholds tau >= 1 (0 dB), got {min(self.taus):g}",
                              lines.get("taus"))
        if any(b <= a for a, b in zip(self.taus, self.taus[1:])) or any(tau <= 0 for tau in self.taus):
            raise ConfigError("SINR thresholds must be positive and increasing", lines.get("taus"))
        if any(b <= a for a, b in zip(self.rhos, self.rhos[1:])) or any(rho <= 0 for rho in self.rhos):
            raise ConfigError("Rate thresholds must be positive and increasing", lines.get("rho"))
        if self.engine.runs_analytic() and self.K > MAX_SUPPORTED_ORDER:
            raise ConfigError(f"The analytic engine supports reflection orders up to {MAX_SUPPORTED_ORDER}, "
                              f"got k = {self.K}", lines.get("k", lines.get("engine")))
        if self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed}", lines.get("seed"))
        if self.trials < 1:
            raise ConfigError(f"trials must be at least 1, got {self.trials}", lines.get("trials"))
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}", lines.get("workers"))
        if self.grid_n < 2:
            raise ConfigError(f"grid_n must be at least 2, got {self.grid_n}", lines.get("grid_n"))


_PARAM_KEYS = {
    "a": "a", "h": "h", "lambda": "density", "lambda_u": "user_density", "psi_half": "psi_half", "a_pd": "pd_area",
    "responsivity": "responsivity", "g_f": "filter_gain", "g_c": "concentrator_gain", "ptx": "tx_power",
    "n0bf": "noise_power", "bandwidth": "bandwidth", "zeta1": "zeta1", "zeta2": "zeta2", "eta": "eta",
}

_QUADRATURE_KEYS = {"rel_tol": float, "abs_tol": float, "max_panels": int, "panel_order": int}

_OTHER_KEYS = {"k", "mode", "engine", "trials", "seed", "tau_db", "tau", "rho", "locations", "typical", "grid_n",
               "workers", "output"}

_POWER_UNITS: Dict[str, Callable[[float], float]] = {
    "w": lambda value: value,
    "mw": lambda value: value / 1000,
    "dbm": lambda value: 10 ** ((value - 30) / 10),
}

_ANGLE_UNITS: Dict[str, Callable[[float], float]] = {
    "deg": lambda value: value,
    "rad": math.degrees,
}


def _number(text: str, line: int, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key} expects a number, got {text!r}", line)


def _integer(text: str, line: int, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key} expects an integer, got {text!r}", line)


def _quantity(text: str, line: int, key: str, units: Dict[str, Callable[[float], float]]) -> float:
    parts = text.split()
    if len(parts) == 1:
        return _number(parts[0], line, key)
    if len(parts) != 2 or parts[1].lower() not in units:
        raise ConfigError(f"{key} accepts the units {', '.join(units)}, got {text!r}", line)
    return units[parts[1].lower()](_number(parts[0], line, key))


def _numbers(text: str, line: int, key: str) -> List[float]:
    return [_number(item.strip(), line, key) for item in text.split(",") if item.strip()]


def _choice(text: str, line: int, key: str, enum: type) -> Enum:
    try:
        return enum[text.strip().upper()]
    except KeyError:
        options = ", ".join(member.name.lower() for member in enum)
        raise ConfigError(f"{key} must be one of {options}, got {text!r}", line)


def _boolean(text: str, line: int, key: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("yes", "true", "1", "on"):
        return True
    if lowered in ("no", "false", "0", "off"):
        return False
    raise ConfigError(f"{key} expects yes or no, got {text!r}", line)


def parse_config(text: str) -> ExperimentConfig:
    """
    Parse configuration text. See the module documentation for the format.

    :raises ConfigError: for unknown keys, bad units or values and constraint violations, with the line number
    """
    entries: Dict[str, Tuple[str, int]] = {}
    custom: Dict[str, Tuple[Point, int]] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"Expected 'key = value', got {content!r}", number)
        key, value = (part.strip() for part in content.split("=", 1))
        key = key.lower()
        if key.startswith("location."):
            name = key[len("location."):]
            coordinates = _numbers(value, number, key)
            if not name or len(coordinates) != 2:
                raise ConfigError(f"{key} expects a name and two coordinates 'y1, y2'", number)
            custom[name] = ((coordinates[0], coordinates[1]), number)
            continue
        if key not in _PARAM_KEYS and key not in _QUADRATURE_KEYS and key not in _OTHER_KEYS:
            raise ConfigError(f"Unknown key {key!r}", number)
        entries[key] = (value, number)
    return _build(entries, custom)


def _build(entries: Dict[str, Tuple[str, int]], custom: Dict[str, Tuple[Point, int]]) -> ExperimentConfig:
    lines: Dict[str, int] = {key: line for key, (_, line) in entries.items()}
    lines.update({f"location.{name}": line for name, (_, line) in custom.items()})

    param_values: Dict[str, Union[float, int]] = {}
    for key, attribute in _PARAM_KEYS.items():
        if key not in entries:
            continue
        value, line = entries[key]
        if key in ("ptx", "n0bf"):
            param_values[attribute] = _quantity(value, line, key, _POWER_UNITS)
        elif key == "psi_half":
            param_values[attribute] = _quantity(value, line, key, _ANGLE_UNITS)
        else:
            param_values[attribute] = _number(value, line, key)
    if "k" in entries:
        value, line = entries["k"]
        param_values["max_order"] = _integer(value, line, "k")
    try:
        params = NetworkParams(**param_values)  # type: ignore
    except ParameterError as e:
        raise ConfigError(str(e), lines.get(e.name))

    changes: Dict[str, object] = {"params": params}
    if "mode" in entries:
        changes["mode"] = _choice(*entries["mode"], "mode", Mode)
    if "engine" in entries:
        changes["engine"] = _choice(*entries["engine"], "engine", Engine)
    for key in ("trials", "seed", "grid_n", "workers"):
        if key in entries:
            value, line = entries[key]
            changes[key] = _integer(value, line, key)
    if "output" in entries:
        changes["output"] = entries["output"][0] or None
    if "tau_db" in entries:
        value, line = entries["tau_db"]
        changes["taus"] = tuple(10 ** (db / 10) for db in _numbers(value, line, "tau_db"))
        lines["taus"] = line
    if "tau" in entries:
        value, line = entries["tau"]
        if "tau_db" in entries:
            raise ConfigError("Give thresholds either as tau or as tau_db, not both", line)
        changes["taus"] = tuple(_numbers(value, line, "tau"))
        lines["taus"] = line
    if "rho" in entries:
        value, line = entries["rho"]
        changes["rhos"] = tuple(_numbers(value, line, "rho"))

    quadrature = COVERAGE_SPEC
    for key, convert in _QUADRATURE_KEYS.items():
        if key in entries:
            value, line = entries[key]
            number = _integer(value, line, key) if convert is int else _number(value, line, key)
            try:
                quadrature = quadrature.with_changes(**{key: number})
            except AssertionError:
                raise ConfigError(f"{key} = {value} is not a valid quadrature setting", line)
    changes["quadrature"] = quadrature

    changes["locations"] = _locations(entries, custom, params.a)
    config = ExperimentConfig().with_changes(**changes)
    config.validate(lines)
    return config


def _locations(entries: Dict[str, Tuple[str, int]], custom: Dict[str, Tuple[Point, int]],
               a: float) -> Tuple[Tuple[str, Location], ...]:
    known: Dict[str, Location] = dict(named_locations(a))
    known.update({name: point for name, (point, _) in custom.items()})
    known[TYPICAL_NAME] = TYPICAL
    if "locations" in entries:
        value, line = entries["locations"]
        names = [name.strip().lower() for name in value.split(",") if name.strip()]
        unknown = [name for name in names if name not in known]
        if unknown:
            raise ConfigError(f"Unknown locations {', '.join(unknown)}", line)
        return tuple((name, known[name]) for name in names)
    include_typical = True
    if "typical" in entries:
        include_typical = _boolean(*entries["typical"], "typical")
    names = list(named_locations(a)) + [name for name in custom if name not in named_locations(a)]
    if include_typical:
        names.append(TYPICAL_NAME)
    return tuple((name, known[name]) for name in names)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Read a configuration file.

    :raises ConfigError: when the file cannot be read or is invalid
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigError(f"Cannot read {path}: {e}")
    return parse_config(text)


def _join(values: Sequence[float]) -> str:
    return ", ".join(repr(float(value)) for value in values)


def dump_config(config: ExperimentConfig) -> str:
    """The effective configuration in the file format, in linear units, so that parsing it gives back `config`."""
    params = config.params
    reverse = {attribute: key for key, attribute in _PARAM_KEYS.items()}
    lines = ["# effective vlcov configuration"]
    for attribute, key in reverse.items():
        lines.append(f"{key} = {float(getattr(params, attribute))!r}")
    lines.append(f"k = {params.max_order}")
    lines.append(f"mode = {config.mode.name.lower()}")
    lines.append(f"engine = {config.engine.name.lower()}")
    lines.append(f"trials = {config.trials}")
    lines.append(f"seed = {config.seed}")
    lines.append(f"grid_n = {config.grid_n}")
    lines.append(f"workers = {config.workers}")
    lines.append(f"tau = {_join(config.taus)}")
    lines.append(f"rho = {_join(config.rhos)}")
    quadrature = config.quadrature
    lines.append(f"rel_tol = {quadrature.rel_tol!r}")
    lines.append(f"abs_tol = {quadrature.abs_tol!r}")
    lines.append(f"max_panels = {quadrature.max_panels}")
    lines.append(f"panel_order = {quadrature.panel_order}")
    for name, location in config.locations:
        if location is not TYPICAL:
            y1, y2 = location  # type: ignore
            lines.append(f"location.{name} = {float(y1)!r}, {float(y2)!r}")
    lines.append(f"locations = {', '.join(name for name, _ in config.locations)}")
    if config.output is not None:
        lines.append(f"output = {config.output}")
    return "\n".join(lines) + "\n"
