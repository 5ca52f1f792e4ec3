"""Run configuration: defaults, an optional key=value file, then CLI flags.

The config file is INI-style.  Keys in ``[common]`` apply to every command;
a section named after the command (``[swap]``, ``[schmidt]``...) overrides
them.  Command-line flags override both.
"""

from __future__ import annotations

import configparser
import dataclasses
import json
import math
from dataclasses import dataclass, field

from .errors import ConfigError

COMMANDS = ("spectrum", "schmidt", "gfactor", "swap", "pme", "teleport", "oracle-check")
SWEEP_VARS = {
    "spectrum": (),
    "schmidt": ("tau", "srfactor"),
    "gfactor": ("H", "A"),
    "swap": ("eta_r", "eta_t"),
    "pme": ("eta_r", "eta_t"),
    "teleport": ("d0", "eta_r", "eta_t"),
    "oracle-check": (),
}


@dataclass(frozen=True)
class SweepSpec:
    var: str
    start: float
    stop: float
    points: int
    scale: str = "lin"

    def __post_init__(self):
        if self.points < 2:
            raise ConfigError(f"sweep {self.var}: need at least 2 points")
        if not self.start < self.stop:
            raise ConfigError(f"sweep {self.var}: start must be below stop")
        if self.scale not in ("lin", "log"):
            raise ConfigError(f"sweep {self.var}: scale must be lin or log")
        if self.scale == "log" and self.start <= 0:
            raise ConfigError(f"sweep {self.var}: log sweeps need a positive start")

    @classmethod
    def parse(cls, text: str) -> "SweepSpec":
        """``var:start:stop:points[:lin|log]``."""
        parts = text.split(":")
        if len(parts) not in (4, 5):
            raise ConfigError(f"bad sweep {text!r}; expected var:start:stop:points[:lin|log]")
        try:
            return cls(parts[0].strip().replace("-", "_"), float(parts[1]), float(parts[2]),
                       int(parts[3]), parts[4].strip() if len(parts) == 5 else "lin")
        except ValueError as exc:
            raise ConfigError(f"bad sweep {text!r}: {exc}") from None

    def values(self):
        n = self.points
        if self.scale == "log":
            a, b = math.log(self.start), math.log(self.stop)
            return [math.exp(a + (b - a) * k / (n - 1)) for k in range(n)]
        return [self.start + (self.stop - self.start) * k / (n - 1) for k in range(n)]

    def to_text(self):
        return f"{self.var}:{self.start!r}:{self.stop!r}:{self.points}:{self.scale}"


@dataclass
class RunConfig:
    command: str
    tau: float = 0.25
    srfactor: float = 5.0
    gamma3: float = 1.0
    grid_extent: float = 1200.0
    grid_panels: int | None = None
    grid_order: int = 6
    eta_r: float = 1.0
    eta_t: float = 1.0
    eta_eff: float = 1.0
    detector: str = "nrpd"
    d0: float = 1.0 / math.sqrt(2.0)
    lambdas: tuple | None = None
    sweep: list = field(default_factory=list)
    modes: int = 0
    modes_out: str | None = None
    rows: int = 20
    H: float = 1.0
    A: float = 1.0
    N: int = 1000
    window: float = 40.0
    points: int = 81
    tol: float = 1e-10
    eta2: float = 0.01
    out: str = "-"
    format: str = "csv"

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        positive = ("tau", "gamma3", "grid_extent", "eta_r", "window", "H", "A", "tol")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.srfactor < 1:
            raise ConfigError("srfactor must be >= 1")
        for name in ("eta_t", "eta_eff", "d0"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if not 0 < self.eta2 < 1:
            raise ConfigError("eta2 must lie in (0, 1)")
        if self.grid_panels is not None and self.grid_panels < 1:
            raise ConfigError("grid_panels must be >= 1")
        if self.grid_order < 2:
            raise ConfigError("grid_order must be >= 2")
        if self.detector not in ("nrpd", "pnrd", "both"):
            raise ConfigError("detector must be nrpd, pnrd or both")
        if self.format not in ("csv", "jsonl"):
            raise ConfigError("format must be csv or jsonl")
        if self.points < 2 or self.rows < 1 or self.modes < 0 or self.N < 1:
            raise ConfigError("points >= 2, rows >= 1, modes >= 0 and N >= 1 are required")
        if self.lambdas is not None:
            lam = self.lambdas
            if not lam or any(x < 0 for x in lam) or abs(sum(lam) - 1) > 1e-8:
                raise ConfigError("lambdas must be non-negative and sum to 1")
        allowed = SWEEP_VARS[self.command]
        seen = set()
        for s in self.sweep:
            if s.var not in allowed:
                raise ConfigError(f"command {self.command} cannot sweep {s.var!r} (allowed: {allowed})")
            if s.var in seen:
                raise ConfigError(f"duplicate sweep variable {s.var}")
            seen.add(s.var)
        return self

    def detectors(self):
        return ["nrpd", "pnrd"] if self.detector == "both" else [self.detector]

    def resolved(self) -> dict:
        """JSON-friendly snapshot of every field, as recorded in output headers."""
        d = dataclasses.asdict(self)
        d["sweep"] = [s.to_text() for s in self.sweep]
        d["lambdas"] = list(self.lambdas) if self.lambdas is not None else None
        return d

    def resolved_json(self) -> str:
        return json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name, raw):
    """Convert a string (from a file) or a flag value to the field's type."""
    if name == "sweep":
        items = raw if isinstance(raw, list) else [t for t in str(raw).replace(",", " ").split() if t]
        return [s if isinstance(s, SweepSpec) else SweepSpec.parse(s) for s in items]
    if name == "lambdas":
        if raw is None or isinstance(raw, tuple):
            return raw
        try:
            return tuple(float(t) for t in str(raw).replace(",", " ").split())
        except ValueError:
            raise ConfigError(f"bad lambdas {raw!r}") from None
    if isinstance(raw, str) and raw.strip().lower() in ("", "none"):
        if name in ("grid_panels", "modes_out"):
            return None
    f = _FIELDS[name]
    typ = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    try:
        if typ.startswith("int"):
            return int(raw)
        if typ.startswith("float"):
            return float(raw)
        return str(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def _normalize_key(key: str) -> str:
    key = key.strip().replace("-", "_")
    for name in _FIELDS:
        if name.lower() == key.lower():
            return name
    raise ConfigError(f"unknown config key {key!r}")


def read_config_file(path: str, command: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep H, A, N case
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    values = {}
    for section in ("common", command):
        if parser.has_section(section):
            for key, raw in parser.items(section):
                name = _normalize_key(key)
                if name == "command":
                    raise ConfigError("'command' cannot be set from a config file")
                values[name] = _coerce(name, raw)
    return values


def build_config(command: str, file_path: str | None = None, overrides: dict | None = None) -> RunConfig:
    values = read_config_file(file_path, command) if file_path else {}
    for name, raw in (overrides or {}).items():
        if raw is not None:
            values[name] = _coerce(name, raw)
    return RunConfig(command=command, **values).validate()
