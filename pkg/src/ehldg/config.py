"""Run configuration: a flat INI file with section headers.

Grammar (``;`` starts a comment, unknown keys are rejected)::

    [run]        schema = 1, case = line|point|manufactured|obstacle, seed, output
    [domain]     x = lo, hi   y = lo, hi (2D only)   cells = n[, m]
    [discretization] degree, a_k, beta, theta, weight_by_coefficient
    [penalty]    eps_p, schedule = comma list (may be empty), enabled
    [solver]     method, max_sweeps, omega, tol_residual, force_tol, force_gain, max_outer
    [physics]    paper_defaults, eta0, Rx, G0, U, W, alpha, p0, h00_init, log_base, lam_override, ph_override
    [manufactured] expression, coefficient
    [obstacle]   name
    [sweep]      eps_p = comma list
"""
from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional

from .assembly import FormParams
from .errors import ConfigError
from .params import PhysicalInputs, paper_defaults
from .penalty import PenaltyConfig
from .solver import SolveConfig

SCHEMA_VERSION = 1
CASES = ("line", "point", "manufactured", "obstacle")

_SOLVER_KEYS = {"method": str, "max_sweeps": int, "omega": float, "tol_residual": float, "force_tol": float,
                "force_gain": float, "max_outer": int, "divergence_window": int}
_PHYS_KEYS = ("eta0", "Rx", "G0", "U", "W", "alpha", "p0", "h00_init")
_ALLOWED = {
    "run": {"schema", "case", "seed", "output"},
    "domain": {"x", "y", "cells"},
    "discretization": {"degree", "a_k", "beta", "theta", "weight_by_coefficient"},
    "penalty": {"eps_p", "schedule", "enabled"},
    "solver": set(_SOLVER_KEYS),
    "physics": {"paper_defaults", "log_base", "lam_override", "ph_override", *(k.lower() for k in _PHYS_KEYS)},
    "manufactured": {"expression", "coefficient"},
    "obstacle": {"name"},
    "sweep": {"eps_p"},
}


@dataclass(frozen=True)
class RunConfig:
    case: str
    bounds: tuple
    cells: tuple
    degree: int = 1
    form: FormParams = FormParams()
    penalty: PenaltyConfig = PenaltyConfig()
    solve: SolveConfig = SolveConfig()
    physics: PhysicalInputs = field(default_factory=paper_defaults)
    paper_defaults: bool = True
    log_base: str = "e"
    lam_override: Optional[float] = None
    ph_override: Optional[float] = None
    expression: str = "sin(pi*x)*exp(x)"
    coefficient: str = "constant"
    obstacle: str = "contact"
    sweep_eps: tuple = ()
    seed: int = 0
    output: str = "out"

    @property
    def dim(self) -> int:
        return len(self.bounds)


def _fail(section, key, msg):
    raise ConfigError(f"[{section}] {key}: {msg}")


def _get(cp, section, key, conv, default=None, required=False):
    if not cp.has_option(section, key):
        if required:
            _fail(section, key, "missing required field")
        return default
    raw = cp.get(section, key).strip()
    try:
        return conv(raw)
    except (ValueError, TypeError) as exc:
        _fail(section, key, f"cannot parse {raw!r} ({exc})")


def _floats(raw: str) -> tuple:
    if not raw.strip():
        return ()
    return tuple(float(v) for v in raw.split(","))


def _ints(raw: str) -> tuple:
    return tuple(int(v) for v in raw.split(","))


def _bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str.lower
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    for sec in cp.sections():
        if sec not in _ALLOWED:
            raise ConfigError(f"unknown section [{sec}]")
        extra = set(cp.options(sec)) - _ALLOWED[sec]
        if extra:
            raise ConfigError(f"[{sec}] unknown keys: {', '.join(sorted(extra))}")

    schema = _get(cp, "run", "schema", int, SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        _fail("run", "schema", f"unsupported schema version {schema}")
    case = _get(cp, "run", "case", str, required=True)
    if case not in CASES:
        _fail("run", "case", f"must be one of {', '.join(CASES)}")
    if not cp.has_section("domain"):
        raise ConfigError("[domain] missing required section (domain)")
    x = _get(cp, "domain", "x", _floats, required=True)
    y = _get(cp, "domain", "y", _floats, None)
    bounds = (x,) if y is None else (x, y)
    for name, b in zip("xy", bounds):
        if len(b) != 2 or not b[0] < b[1]:
            _fail("domain", name, "expected 'lo, hi' with lo < hi")
    cells = _get(cp, "domain", "cells", _ints, required=True)
    if len(cells) == 1 and len(bounds) == 2:
        cells = cells * 2
    if len(cells) != len(bounds) or min(cells) < 1:
        _fail("domain", "cells", "one positive count per axis")
    want_dim = {"line": 1, "point": 2, "obstacle": 1}.get(case)
    if want_dim is not None and len(bounds) != want_dim:
        _fail("domain", "y", f"case {case} needs a {want_dim}D domain")

    try:
        form = FormParams(
            a_k=_get(cp, "discretization", "a_k", float, 10.0),
            beta=_get(cp, "discretization", "beta", float, 1.0),
            theta=_get(cp, "discretization", "theta", float, 0.0 if case in ("line", "point") else 1.0),
            weight_by_coefficient=_get(cp, "discretization", "weight_by_coefficient", _bool,
                                       case in ("line", "point")),
        )
    except ValueError as exc:
        raise ConfigError(f"[discretization] {exc}") from exc
    if form.theta not in (-1.0, 0.0, 1.0):
        _fail("discretization", "theta", "must be -1, 0 or 1")
    degree = _get(cp, "discretization", "degree", int, 1)
    if degree < 1:
        _fail("discretization", "degree", "must be >= 1")

    try:
        sched = _get(cp, "penalty", "schedule", _floats, ())
        penalty = PenaltyConfig(
            eps_p=_get(cp, "penalty", "eps_p", float, 1e-6),
            schedule=sched or None,
            enabled=_get(cp, "penalty", "enabled", _bool, case != "manufactured"),
        )
    except ValueError as exc:
        raise ConfigError(f"[penalty] {exc}") from exc

    kw = {}
    for key, conv in _SOLVER_KEYS.items():
        v = _get(cp, "solver", key, conv)
        if v is not None:
            kw[key] = v
    if case in ("manufactured", "obstacle"):
        kw.setdefault("omega", 1.0)
    try:
        solve = SolveConfig(**kw)
    except ValueError as exc:
        raise ConfigError(f"[solver] {exc}") from exc

    use_defaults = _get(cp, "physics", "paper_defaults", _bool, True)
    base = paper_defaults()
    vals = {}
    for k in _PHYS_KEYS:
        v = _get(cp, "physics", k.lower(), float)
        if v is None and not use_defaults and case in ("line", "point"):
            _fail("physics", k, "required when paper_defaults = false")
        vals[k] = getattr(base, k) if v is None else v
    try:
        physics = PhysicalInputs(**vals)
    except ValueError as exc:
        raise ConfigError(f"[physics] {exc}") from exc
    log_base = _get(cp, "physics", "log_base", str, "e")
    if log_base not in ("e", "10"):
        _fail("physics", "log_base", "must be 'e' or '10'")
    lam_override = _get(cp, "physics", "lam_override", float)
    if lam_override is not None and not lam_override > 0:
        _fail("physics", "lam_override", "must be > 0")
    ph_override = _get(cp, "physics", "ph_override", float)
    if ph_override is not None and not ph_override > 0:
        _fail("physics", "ph_override", "must be > 0")

    coefficient = _get(cp, "manufactured", "coefficient", str, "constant")
    if coefficient not in ("constant", "nonlinear"):
        _fail("manufactured", "coefficient", "must be constant or nonlinear")
    obstacle = _get(cp, "obstacle", "name", str, "contact")
    if obstacle not in ("flat", "contact"):
        _fail("obstacle", "name", "must be flat or contact")
    sweep_eps = _get(cp, "sweep", "eps_p", _floats, ())
    if any(not v > 0 for v in sweep_eps):
        _fail("sweep", "eps_p", "entries must be > 0")

    return RunConfig(
        case=case, bounds=bounds, cells=cells, degree=degree, form=form, penalty=penalty, solve=solve,
        physics=physics, paper_defaults=use_defaults, log_base=log_base, lam_override=lam_override,
        ph_override=ph_override,
        expression=_get(cp, "manufactured", "expression", str, RunConfig.expression),
        coefficient=coefficient, obstacle=obstacle, sweep_eps=sweep_eps,
        seed=_get(cp, "run", "seed", int, 0), output=_get(cp, "run", "output", str, "out"),
    )


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _g(v: float) -> str:
    return "%.17g" % v


def dump_config(cfg: RunConfig) -> str:
    """Fully resolved config text; ``parse_config(dump_config(c)) == c``."""
    lines = ["[run]", f"schema = {SCHEMA_VERSION}", f"case = {cfg.case}", f"seed = {cfg.seed}",
             f"output = {cfg.output}", "", "[domain]", f"x = {_g(cfg.bounds[0][0])}, {_g(cfg.bounds[0][1])}"]
    if cfg.dim == 2:
        lines.append(f"y = {_g(cfg.bounds[1][0])}, {_g(cfg.bounds[1][1])}")
    lines += [f"cells = {', '.join(str(c) for c in cfg.cells)}", "", "[discretization]",
              f"degree = {cfg.degree}", f"a_k = {_g(cfg.form.a_k)}", f"beta = {_g(cfg.form.beta)}",
              f"theta = {_g(cfg.form.theta)}", f"weight_by_coefficient = {str(cfg.form.weight_by_coefficient).lower()}",
              "", "[penalty]", f"eps_p = {_g(cfg.penalty.eps_p)}",
              f"schedule = {', '.join(_g(v) for v in (cfg.penalty.schedule or ()))}",
              f"enabled = {str(cfg.penalty.enabled).lower()}", "", "[solver]"]
    for key in _SOLVER_KEYS:
        v = getattr(cfg.solve, key)
        lines.append(f"{key} = {_g(v) if isinstance(v, float) else v}")
    lines += ["", "[physics]", f"paper_defaults = {str(cfg.paper_defaults).lower()}", f"log_base = {cfg.log_base}"]
    if cfg.lam_override is not None:
        lines.append(f"lam_override = {_g(cfg.lam_override)}")
    if cfg.ph_override is not None:
        lines.append(f"ph_override = {_g(cfg.ph_override)}")
    for k in _PHYS_KEYS:
        lines.append(f"{k.lower()} = {_g(getattr(cfg.physics, k))}")
    lines += ["", "[manufactured]", f"expression = {cfg.expression}", f"coefficient = {cfg.coefficient}",
              "", "[obstacle]", f"name = {cfg.obstacle}", "", "[sweep]",
              f"eps_p = {', '.join(_g(v) for v in cfg.sweep_eps)}", ""]
    return "\n".join(lines)


def defaults_text() -> str:
    """Line-contact configuration at the paper operating point."""
    cfg = RunConfig(case="line", bounds=((-4.0, 2.0),), cells=(256,), degree=1,
                    form=FormParams(theta=0.0, weight_by_coefficient=True))
    return dump_config(cfg)
