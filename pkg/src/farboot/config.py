"""Experiment configuration: a sectioned key-value file ([model], [estimator], [run], [output]).

Every key is optional; missing keys take the defaults below. Lists are comma
separated. An empty value for ``estimator.q`` means "estimate from a pilot series".
"""

from __future__ import annotations

import configparser
import re
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from farboot.errors import ConfigurationError

__all__ = [
    "ModelSection",
    "EstimatorSection",
    "RunSection",
    "OutputSection",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "config_to_text",
    "DEFAULT_CONFIG_TEXT",
]


@dataclass(frozen=True)
class ModelSection:
    grid_points: int = 101
    basis_size: int = 12
    operator: str = "linear_diagonal"
    rho_scale: float = 0.5
    rho_decay: float = 0.2
    saturation_scale: float = 0.5
    innovation_scale: float = 0.3
    innovation_decay: float = 0.5
    coeff_law: str = "uniform"
    lip_cap: float = 25.0
    burn_in: int = 100


@dataclass(frozen=True)
class EstimatorSection:
    kernel: str = "quadratic"
    c_h: float = 0.85
    c_b: float = 2.0
    b_rate: float = 0.5
    q: typing.Optional[float] = 4.0
    r0: float = 30.0
    c_r: float = 5.0
    min_neighbors: int = 1


@dataclass(frozen=True)
class RunSection:
    n: tuple[int, ...] = (100, 200, 400)
    replications: int = 300
    draws: int = 300
    spread_series: int = 10
    seeds: int = 5
    target_amplitude: float = 0.05
    target_width: float = 0.1
    directions: tuple[str, ...] = ("e1", "e2", "e1+e2")
    probes: int = 50
    probe_scale: float = 0.5
    mallows_atoms: int = 500
    x0: str = "first"
    threads: int = 1


@dataclass(frozen=True)
class OutputSection:
    directory: str = "out"
    formats: tuple[str, ...] = ("csv", "json")


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSection = field(default_factory=ModelSection)
    estimator: EstimatorSection = field(default_factory=EstimatorSection)
    run: RunSection = field(default_factory=RunSection)
    output: OutputSection = field(default_factory=OutputSection)

    def __post_init__(self) -> None:
        _validate(self)

    def with_overrides(self, **sections: dict) -> ExperimentConfig:
        """Return a copy with ``section={key: value}`` overrides applied."""
        kw = {}
        for name, changes in sections.items():
            kw[name] = replace(getattr(self, name), **changes)
        return replace(self, **kw)


_SECTIONS = {
    "model": ModelSection,
    "estimator": EstimatorSection,
    "run": RunSection,
    "output": OutputSection,
}


def _fail(msg: str, source: str = "<config>", line: int | None = None) -> typing.NoReturn:
    where = f"{source}:{line}" if line is not None else source
    raise ConfigurationError(f"{where}: {msg}")


def _validate(cfg: ExperimentConfig, source: str = "<config>", lines: dict | None = None) -> None:
    lines = lines or {}

    def check(ok: bool, section: str, key: str, msg: str) -> None:
        if not ok:
            _fail(f"[{section}] {key}: {msg}", source, lines.get((section, key)))

    m, e, r, o = cfg.model, cfg.estimator, cfg.run, cfg.output
    check(m.grid_points >= 3, "model", "grid_points", "must be >= 3")
    check(1 <= m.basis_size < m.grid_points, "model", "basis_size", "must satisfy 1 <= K < grid_points")
    check(m.operator in ("linear_diagonal", "nonlinear_saturating"), "model", "operator", "unknown operator")
    check(0 <= m.rho_scale < 1, "model", "rho_scale", "must lie in [0, 1)")
    check(m.rho_decay >= 0, "model", "rho_decay", "must be >= 0")
    check(m.saturation_scale > 0, "model", "saturation_scale", "must be positive")
    check(m.innovation_scale >= 0, "model", "innovation_scale", "must be >= 0")
    check(m.innovation_decay > 0, "model", "innovation_decay", "must be positive")
    check(m.coeff_law in ("uniform", "truncated_gaussian"), "model", "coeff_law", "unknown law")
    check(m.lip_cap > 0, "model", "lip_cap", "must be positive")
    check(m.burn_in >= 0, "model", "burn_in", "must be >= 0")
    check(e.kernel in ("uniform", "quadratic"), "estimator", "kernel", "unknown kernel")
    check(e.c_h > 0, "estimator", "c_h", "must be positive")
    check(e.c_b > 0, "estimator", "c_b", "must be positive")
    check(0 < e.b_rate < 1, "estimator", "b_rate", "must lie in (0, 1)")
    check(e.q is None or e.q > 0, "estimator", "q", "must be positive or empty")
    check(e.r0 > 0, "estimator", "r0", "must be positive")
    check(e.c_r >= 0, "estimator", "c_r", "must be >= 0")
    check(len(r.n) >= 1 and all(v >= 2 for v in r.n), "run", "n", "need at least one n >= 2")
    check(list(r.n) == sorted(set(r.n)), "run", "n", "must be strictly ascending")
    check(r.replications >= 1, "run", "replications", "must be >= 1")
    check(r.draws >= 1, "run", "draws", "must be >= 1")
    check(r.spread_series >= 0, "run", "spread_series", "must be >= 0")
    check(r.seeds >= 1, "run", "seeds", "must be >= 1")
    check(r.target_width > 0, "run", "target_width", "must be positive")
    check(
        len(r.directions) >= 1 and all(re.fullmatch(r"e\d+(\+e\d+)*", d) for d in r.directions),
        "run",
        "directions",
        "entries must look like e1 or e1+e2",
    )
    check(
        all(1 <= int(k) <= m.basis_size for d in r.directions for k in re.findall(r"\d+", d)),
        "run",
        "directions",
        "basis index out of range",
    )
    check(r.probes >= 1, "run", "probes", "must be >= 1")
    check(r.probe_scale > 0, "run", "probe_scale", "must be positive")
    check(r.mallows_atoms >= 1, "run", "mallows_atoms", "must be >= 1")
    check(r.x0 in ("first", "zero"), "run", "x0", "must be 'first' or 'zero'")
    check(r.threads >= 0, "run", "threads", "must be >= 0")
    check(all(f in ("csv", "json") for f in o.formats), "output", "formats", "only csv and json")


def _convert(raw: str, tp, what: str):
    origin = typing.get_origin(tp)
    if origin is typing.Union:  # Optional[float]
        if raw.strip() == "":
            return None
        tp = next(a for a in typing.get_args(tp) if a is not type(None))
    if origin is tuple:
        inner = typing.get_args(tp)[0]
        return tuple(_convert(p.strip(), inner, what) for p in raw.split(",") if p.strip())
    try:
        if tp is int:
            return int(raw)
        if tp is float:
            return float(raw)
    except ValueError:
        raise ValueError(f"expected {tp.__name__}, got {raw!r}") from None
    return raw.strip()


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    out, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            out.setdefault((section, ""), i)
        elif section and s and not s.startswith(("#", ";")):
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip()
            out[(section, key)] = i
    return out


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        _fail(str(exc).splitlines()[0], source, line)
    lines = _key_lines(text)
    sections = {}
    for name in parser.sections():
        if name not in _SECTIONS:
            _fail(f"unknown section [{name}]", source, lines.get((name, "")))
    for name, cls in _SECTIONS.items():
        kwargs = {}
        hints = typing.get_type_hints(cls)
        known = {f.name for f in fields(cls)}
        if parser.has_section(name):
            for key, raw in parser.items(name):
                if key not in known:
                    _fail(f"[{name}] unknown key {key!r}", source, lines.get((name, key)))
                try:
                    kwargs[key] = _convert(raw, hints[key], f"{name}.{key}")
                except ValueError as exc:
                    _fail(f"[{name}] {key}: {exc}", source, lines.get((name, key)))
        sections[name] = cls(**kwargs)
    cfg = object.__new__(ExperimentConfig)
    for name, sec in sections.items():
        object.__setattr__(cfg, name, sec)
    _validate(cfg, source, lines)
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"{path}: cannot read config ({exc.strerror})") from exc
    return parse_config(text, str(path))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def config_to_text(cfg: ExperimentConfig) -> str:
    out = []
    for name in _SECTIONS:
        sec = getattr(cfg, name)
        out.append(f"[{name}]")
        out.extend(f"{f.name} = {_fmt(getattr(sec, f.name))}" for f in fields(sec))
        out.append("")
    return "\n".join(out)


DEFAULT_CONFIG_TEXT = config_to_text(ExperimentConfig())
