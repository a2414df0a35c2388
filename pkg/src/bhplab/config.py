"""Experiment configuration: flat ``key = value`` lines with dotted section names.

Example::

    experiment = "theorem_flmain"
    seed = 0
    domain.type = "sawtooth"
    domain.L = 0.05
    operator.kind = "laplace"
    rhs.type = "random"
    rhs.lo = -1
    rhs.hi = 0
    grid.h = 1/128
    grid.levels = 2

Values are Python literals; numeric values may use ``+ - * / **``.
Lines starting with ``#`` are comments.  Unknown keys are errors.
"""

from __future__ import annotations

import ast
import operator as _op
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .operators import OperatorSpec
from .solver import DEFAULT_TOL

EXPERIMENTS = ("solver_validate", "barrier_verify", "growth", "harnack", "bhp_certify",
               "theorem_flmain", "theorem_flpmain", "theorem_nta")
DOMAIN_TYPES = ("flat", "cone", "sawtooth", "l_shape", "slit_square", "mask")
RHS_TYPES = ("constant", "random", "table")


@dataclass
class DomainBlock:
    type: str = "sawtooth"
    L: float = 0.05
    period: float = 0.5
    R: float = 1.0
    mask: str | None = None


@dataclass
class OperatorBlock:
    kind: str = "laplace"
    lam: float = 1.0
    Lam: float = 1.0
    M: float = 0.0
    p: float = 2.0
    sign: str = "minus"
    directions: int = 8
    delta: float | None = None


@dataclass
class RhsBlock:
    type: str = "random"
    value: float = -1.0
    lo: float | None = None
    hi: float | None = None
    seed: int | None = None
    table: str | None = None


@dataclass
class GridBlock:
    h: float = 1 / 128
    levels: int = 2


@dataclass
class SolverBlock:
    tol: float | None = None
    max_iter: int = 100_000


@dataclass
class ScheduleBlock:
    beta: float | None = 1.5
    alpha: float = 0.5
    zeta: float | None = None
    c_star: float = 0.1
    slack: float = 0.5
    r0: float | None = None
    first_ratio: float | None = 0.25
    floor_factor: float = 2.0
    max_samples: int = 512


@dataclass
class OutputBlock:
    path: str = "out"


@dataclass
class ExperimentConfig:
    experiment: str = "theorem_flmain"
    seed: int = 0
    domain: DomainBlock = field(default_factory=DomainBlock)
    operator: OperatorBlock = field(default_factory=OperatorBlock)
    rhs: RhsBlock = field(default_factory=RhsBlock)
    grid: GridBlock = field(default_factory=GridBlock)
    solver: SolverBlock = field(default_factory=SolverBlock)
    schedule: ScheduleBlock = field(default_factory=ScheduleBlock)
    output: OutputBlock = field(default_factory=OutputBlock)
    base_dir: str = "."

    @property
    def tol(self) -> float:
        return self.solver.tol if self.solver.tol is not None else DEFAULT_TOL[self.operator.kind]

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def levels(self) -> list[float]:
        return [self.grid.h / 2 ** k for k in range(self.grid.levels)]


class ConfigError(ValueError):
    pass


_BIN = {ast.Add: _op.add, ast.Sub: _op.sub, ast.Mult: _op.mul, ast.Div: _op.truediv,
        ast.Pow: _op.pow}


def _eval(node):
    if isinstance(node, ast.Constant):
        return node.value
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BIN:
        return _BIN[type(node.op)](_eval(node.left), _eval(node.right))
    if isinstance(node, (ast.Tuple, ast.List)):
        return tuple(_eval(e) for e in node.elts)
    raise ConfigError(f"unsupported expression: {ast.dump(node)}")


def parse_value(text: str):
    try:
        return _eval(ast.parse(text.strip(), mode="eval").body)
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse value {text.strip()!r}") from exc


_SECTIONS = ("domain", "operator", "rhs", "grid", "solver", "schedule", "output")
_TOP = ("experiment", "seed")


_FLOAT_KEYS = {"tol", "delta", "lo", "hi", "beta", "zeta", "r0", "first_ratio"}
_INT_KEYS = {"seed"}


def _coerce(name: str, value, default):
    if value is None:
        return None
    if isinstance(default, bool):
        return bool(value)
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer")
        return value
    if isinstance(default, float) or name.split(".")[-1] in _FLOAT_KEYS:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{name} must be a number")
        return float(value)
    return value


def parse_text(text: str, base_dir: str = ".") -> ExperimentConfig:
    cfg = ExperimentConfig(base_dir=str(base_dir))
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        val = parse_value(value)
        if "." in key:
            section, name = key.split(".", 1)
            if section not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section {section!r}")
            block = getattr(cfg, section)
            if name not in {f.name for f in fields(block)}:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            default = getattr(type(block)(), name)
            if name in _INT_KEYS:
                default = 0
            setattr(block, name, _coerce(key, val, default))
        else:
            if key not in _TOP:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            setattr(cfg, key, _coerce(key, val, getattr(ExperimentConfig(), key)))
    if "experiment" not in seen:
        raise ConfigError("missing required key 'experiment'")
    validate(cfg)
    return cfg


def parse_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_text(text, base_dir=str(path.parent))


def validate(cfg: ExperimentConfig) -> None:
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}")
    d = cfg.domain
    if d.type not in DOMAIN_TYPES:
        raise ConfigError(f"unknown domain type {d.type!r}")
    if d.L < 0:
        raise ConfigError("L must be non-negative")
    if d.R <= 0:
        raise ConfigError("R must be positive")
    if d.type == "mask":
        if not d.mask:
            raise ConfigError("domain.type = 'mask' needs domain.mask")
        if not cfg.resolve(d.mask).is_file():
            raise ConfigError(f"mask file not found: {cfg.resolve(d.mask)}")
    try:
        operator_spec(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    r = cfg.rhs
    if r.type not in RHS_TYPES:
        raise ConfigError(f"unknown rhs type {r.type!r}")
    if r.type == "random" and r.seed is None and cfg.seed is None:
        raise ConfigError("random rhs needs a seed")
    if r.type == "table":
        if not r.table:
            raise ConfigError("rhs.type = 'table' needs rhs.table")
        if not cfg.resolve(r.table).is_file():
            raise ConfigError(f"rhs table not found: {cfg.resolve(r.table)}")
    if r.lo is not None and r.hi is not None and r.lo > r.hi:
        raise ConfigError("rhs.lo must not exceed rhs.hi")
    if not cfg.grid.h > 0:
        raise ConfigError("grid.h must be positive")
    if cfg.grid.levels < 1:
        raise ConfigError("grid.levels must be at least 1")
    if cfg.solver.tol is not None and not cfg.solver.tol > 0:
        raise ConfigError("solver.tol must be positive")
    s = cfg.schedule
    if not 0 < s.c_star < 0.5:
        raise ConfigError("schedule.c_star must lie in (0, 1/2)")
    if s.slack < 0:
        raise ConfigError("schedule.slack must be non-negative")
    if not 0 < s.alpha <= 1:
        raise ConfigError("schedule.alpha must lie in (0, 1]")


def operator_spec(cfg: ExperimentConfig) -> OperatorSpec:
    o = cfg.operator
    return OperatorSpec(o.kind, lam=o.lam, Lam=o.Lam, M=o.M, p=o.p, pucci_sign=o.sign,
                        reg_delta=o.delta, directions=o.directions)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return "(" + ", ".join(_fmt(x) for x in v) + ("," if len(v) == 1 else "") + ")"
    return repr(v)


def emit_config(cfg: ExperimentConfig) -> str:
    """Text that :func:`parse_text` turns back into an equal config."""
    lines = [f"experiment = {cfg.experiment!r}", f"seed = {cfg.seed!r}"]
    for section in _SECTIONS:
        block = getattr(cfg, section)
        for f in fields(block):
            v = getattr(block, f.name)
            if v is not None:
                lines.append(f"{section}.{f.name} = {_fmt(v)}")
    return "\n".join(lines) + "\n"


def config_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d.pop("base_dir", None)
    return d


__all__ = ["ExperimentConfig", "ConfigError", "parse_config", "parse_text", "emit_config",
           "validate", "operator_spec", "config_dict", "EXPERIMENTS"]
