"""Experiment configuration files (INI sections, one key per line).

Example::

    [experiment]
    name = prop-pro3-lipschitz
    kind = strong

    [driver]
    alpha = 1.5
    density = isotropic

    [coefficients]
    family = lipschitz

    [ladder]
    n_log2 = 4..10

    [statistics]
    p = 1
    paths = 5000
    seed = 20160622
"""
from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .coefficients import builtin
from .error_stats import BATCHES, TEST_FUNCTIONS
from .levy_measure import ConfigurationError, StableIndex, density_from_name
from .path_driver import MODES, DriverSpec

KINDS = ("strong", "weak", "moment", "increment", "oracle")


class ConfigError(ValueError):
    """Invalid experiment configuration; ``line`` anchors the offending key when known."""

    def __init__(self, message: str, line: Optional[int] = None, source: str = "<config>"):
        self.line = line
        self.source = source
        self.message = message
        where = f"{source}:{line}" if line else source
        super().__init__(f"{where}: {message}")


@dataclass
class ExperimentConfig:
    name: str
    kind: str
    alpha: float
    claim: str = ""
    density: str = "isotropic"
    dimension: int = 1
    truncated: bool = False
    small_jump_mode: str = "gaussian_surrogate"
    epsilon: float = 1e-3
    base_log2: int = 14
    exact_marginals: bool = False
    family: str = "lipschitz"
    x0: float = 0.0
    n_log2: list[int] = field(default_factory=list)
    t_log2: list[int] = field(default_factory=list)
    p: list[float] = field(default_factory=lambda: [1.0])
    paths: int = 1000
    seed: int = 0
    batches: int = BATCHES
    phi: str = "min-abs-sqrt"
    jumps_per_sample: float = 64.0
    predicted: Optional[float] = None
    tolerance: Optional[float] = None
    diff_tolerance: float = 0.1
    output_dir: str = ""

    # -- derived objects -------------------------------------------------

    def driver_spec(self) -> DriverSpec:
        density = density_from_name(self.density, self.dimension)
        return DriverSpec(StableIndex(self.alpha, self.truncated), density, self.epsilon, self.small_jump_mode,
                          self.base_log2, self.exact_marginals)

    def coefficients(self):
        return builtin(self.family, self.dimension, x0=self.x0, alpha=self.alpha)

    @property
    def ns(self) -> list[int]:
        return [2**k for k in self.n_log2]

    @property
    def ts(self) -> list[float]:
        return [2.0**k for k in self.t_log2]

    # -- serialisation ---------------------------------------------------

    def to_text(self) -> str:
        return serialize(self)

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(serialize(self, include_output=False).encode("utf-8")).hexdigest()[:16]

    def as_dict(self) -> dict:
        return asdict(self)


# key -> (section, parser)
_SCHEMA = {
    "name": ("experiment", str),
    "kind": ("experiment", str),
    "claim": ("experiment", str),
    "predicted": ("experiment", float),
    "tolerance": ("experiment", float),
    "diff_tolerance": ("experiment", float),
    "alpha": ("driver", float),
    "density": ("driver", str),
    "dimension": ("driver", int),
    "truncated": ("driver", bool),
    "small_jump_mode": ("driver", str),
    "epsilon": ("driver", float),
    "base_log2": ("driver", int),
    "exact_marginals": ("driver", bool),
    "family": ("coefficients", str),
    "x0": ("coefficients", float),
    "n_log2": ("ladder", "intlist"),
    "t_log2": ("ladder", "intlist"),
    "p": ("statistics", "floatlist"),
    "paths": ("statistics", int),
    "seed": ("statistics", int),
    "batches": ("statistics", int),
    "phi": ("statistics", str),
    "jumps_per_sample": ("statistics", float),
    "output_dir": ("output", str),
}
_SECTIONS = ("experiment", "driver", "coefficients", "ladder", "statistics", "output")


def _int_list(text: str) -> list[int]:
    text = text.strip()
    m = re.fullmatch(r"(-?\d+)\s*\.\.\s*(-?\d+)", text)
    if m:
        a, b = int(m.group(1)), int(m.group(2))
        return list(range(a, b + 1)) if a <= b else list(range(a, b - 1, -1))
    return [int(v) for v in re.split(r"[,\s]+", text) if v]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in re.split(r"[,\s]+", text.strip()) if v]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    out, section = {}, None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
        elif section and "=" in line and not line.startswith(("#", ";")):
            out[(section, line.split("=", 1)[0].strip())] = i
    return out


def parse(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse and validate a config text; raises :class:`ConfigError`."""
    lines = _key_lines(text)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None), source) from exc
    values = {}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]", None, source)
        for key, raw in cp.items(section):
            if key not in _SCHEMA or _SCHEMA[key][0] != section:
                raise ConfigError(f"unknown key {key!r} in [{section}]", lines.get((section, key)), source)
            kind = _SCHEMA[key][1]
            try:
                if kind == "intlist":
                    values[key] = _int_list(raw)
                elif kind == "floatlist":
                    values[key] = _float_list(raw)
                elif kind is bool:
                    values[key] = _bool(raw)
                else:
                    values[key] = kind(raw.strip())
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}", lines.get((section, key)), source) from exc
    for req in ("name", "kind", "alpha"):
        if req not in values:
            raise ConfigError(f"missing required key {req!r} in [{_SCHEMA[req][0]}]", None, source)
    cfg = ExperimentConfig(**values)
    validate(cfg, lambda key: lines.get((_SCHEMA[key][0], key)), source)
    return cfg


def load(path) -> ExperimentConfig:
    path = Path(path)
    return parse(path.read_text(encoding="utf-8"), str(path))


def validate(cfg: ExperimentConfig, line_of=lambda key: None, source: str = "<config>") -> None:
    def fail(key, msg):
        raise ConfigError(msg, line_of(key), source)

    if cfg.kind not in KINDS:
        fail("kind", f"kind must be one of {KINDS}")
    if not 1.0 <= cfg.alpha < 2.0:
        fail("alpha", "alpha must lie in [1, 2)")
    if cfg.small_jump_mode not in MODES:
        fail("small_jump_mode", f"small_jump_mode must be one of {MODES}")
    try:
        density = density_from_name(cfg.density, cfg.dimension)
    except ConfigurationError as exc:
        fail("density", str(exc))
    if cfg.alpha == 1.0 and not cfg.truncated and not density.symmetric:
        fail("density", "alpha = 1 with the nontruncated driver requires a symmetric density: "
                        "the (sym) condition rho(-y) = rho(y)")
    if not cfg.p:
        fail("p", "at least one moment order p is required")
    for p in cfg.p:
        if p <= 0:
            fail("p", "moment orders must be positive")
        if not cfg.truncated and p >= cfg.alpha and cfg.kind != "weak":
            fail("p", f"p = {p:g} >= alpha = {cfg.alpha:g}: only the moments p < alpha exist for the nontruncated driver")
    if cfg.paths < cfg.batches:
        fail("paths", f"paths must be at least batches = {cfg.batches}")
    try:
        cfg.driver_spec()
    except ConfigurationError as exc:
        fail("exact_marginals" if cfg.exact_marginals else "epsilon", str(exc))
    try:
        cfg.coefficients()
    except (KeyError, ValueError) as exc:
        fail("family", str(exc))
    if cfg.kind == "moment":
        if len(cfg.t_log2) < 4:
            fail("t_log2", "moment experiments need at least 4 dyadic times")
        if any(k > 0 or -k > cfg.base_log2 for k in cfg.t_log2):
            fail("t_log2", "times must be dyadic points of the base grid in (0, 1]")
    else:
        if len(cfg.n_log2) < 4:
            fail("n_log2", "rate fits need at least 4 ladder points")
        if any(k < 0 for k in cfg.n_log2):
            fail("n_log2", "ladder exponents must be nonnegative")
        margin = 1 if cfg.kind == "increment" else 3
        if max(cfg.n_log2) > cfg.base_log2 - margin:
            fail("n_log2", f"max ladder exponent must be <= base_log2 - {margin}")
    if cfg.kind == "weak" and cfg.phi not in TEST_FUNCTIONS:
        fail("phi", f"unknown test function; known: {sorted(TEST_FUNCTIONS)}")
    if cfg.kind == "oracle" and cfg.small_jump_mode != "drop":
        fail("small_jump_mode", "the event-driven oracle needs small_jump_mode = drop")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


def serialize(cfg: ExperimentConfig, include_output: bool = True) -> str:
    """Canonical text form; ``parse(serialize(cfg)) == cfg``."""
    out = []
    by_section = {s: [] for s in _SECTIONS}
    for f in fields(cfg):
        if f.name == "output_dir" and not include_output:
            continue
        value = getattr(cfg, f.name)
        if value is None or (isinstance(value, list) and not value) or (isinstance(value, str) and value == "" and f.name != "name"):
            continue
        by_section[_SCHEMA[f.name][0]].append(f"{f.name} = {_fmt(value)}")
    for s in _SECTIONS:
        if by_section[s]:
            out.append(f"[{s}]")
            out.extend(by_section[s])
            out.append("")
    return "\n".join(out)
