"""Convergence studies: manufactured solutions, obstacle problems and rate tables."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import sympy

from . import mesh as meshmod
from .assembly import ConstantCoefficient, FormParams
from .dgspace import DgField, DgSpace, broken_norm, broken_norm_nu, l2_error
from .errors import EhlError
from .penalty import OFF, PenaltyConfig, continuation_schedule
from .solver import SolveConfig, solve_inner

CSV_HEADER = ("h", "p", "eps_p", "err_l2", "err_energy", "err_energy_nu", "rate_l2", "rate_energy", "status")

_X, _Y = sympy.symbols("x y", real=True)


class PolynomialCoefficient:
    """Model nonlinear diffusion ``eps(u) = c0 + c2 u^2`` (no transport)."""

    uses_film = False
    transport = None

    def __init__(self, c0: float = 1.0, c2: float = 1.0):
        if c0 <= 0 or c2 < 0:
            raise ValueError("need c0 > 0 and c2 >= 0 for a positive coefficient")
        self.c0, self.c2 = float(c0), float(c2)

    def diffusion(self, u, h=None, x=None):
        u = np.asarray(u, dtype=float)
        return self.c0 + self.c2 * u**2, 2.0 * self.c2 * u, np.zeros_like(u)

    def symbolic(self, u):
        return self.c0 + self.c2 * u**2


@dataclass(frozen=True)
class ManufacturedCase:
    """Smooth exact solution with the forcing derived symbolically.

    ``expression`` is a sympy-parsable string in ``x`` (and ``y`` in 2D)
    that vanishes on the boundary of ``bounds``.
    """

    name: str
    expression: str
    bounds: tuple = ((0.0, 1.0),)
    coefficient: str = "constant"  # or "nonlinear"

    def __post_init__(self):
        if self.coefficient not in ("constant", "nonlinear"):
            raise ValueError(f"unknown coefficient mode {self.coefficient!r}")
        object.__setattr__(self, "bounds", tuple((float(a), float(b)) for a, b in self.bounds))
        expr = self._expr()
        if expr.free_symbols - set(self._symbols):
            raise ValueError(f"expression uses symbols outside {self._symbols}")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def _symbols(self):
        return (_X,) if self.dim == 1 else (_X, _Y)

    def _expr(self):
        return sympy.sympify(self.expression, locals={"x": _X, "y": _Y})

    def coeffs(self):
        return ConstantCoefficient(1.0) if self.coefficient == "constant" else PolynomialCoefficient()

    def exact(self) -> Callable:
        return _lambdify(self._symbols, self._expr())

    def exact_gradient(self) -> list:
        e = self._expr()
        return [_lambdify(self._symbols, sympy.diff(e, s)) for s in self._symbols]

    def forcing(self) -> Callable:
        """``f = -div(eps(u) grad u)`` for the exact ``u``."""
        u = self._expr()
        eps = sympy.Integer(1) if self.coefficient == "constant" else PolynomialCoefficient().symbolic(u)
        f = -sum(sympy.diff(eps * sympy.diff(u, s), s) for s in self._symbols)
        return _lambdify(self._symbols, sympy.simplify(f))


def _lambdify(symbols, expr):
    fn = sympy.lambdify(symbols, expr, modules="numpy")

    def call(*xs):
        return np.broadcast_to(np.asarray(fn(*xs), dtype=float), np.shape(xs[0]))

    return call


SMOOTH_1D = ManufacturedCase("smooth-1d", "sin(pi*x)*exp(x)")
SMOOTH_2D = ManufacturedCase("smooth-2d", "sin(pi*x)*sin(pi*y)*exp(x)", ((0.0, 1.0), (0.0, 1.0)))
ROUGH_1D = ManufacturedCase("rough-1d", "x**(5/2)*(1 - x)")


@dataclass(frozen=True)
class ObstacleCase:
    """``-u'' = f`` on (0, 1), ``u >= 0``, ``u(0) = u(1) = 0`` with known solution."""

    name: str
    exact: Callable
    exact_grad: Callable
    source: Callable
    max_abs_f: float


def obstacle_case(name: str = "contact", a: float = 0.5) -> ObstacleCase:
    """Built-in obstacle problems.

    ``flat``: ``f = -1``; the constraint binds everywhere and ``u = 0``.
    ``contact``: ``u = x (a - x)^2 / a^2`` on ``(0, a)`` and ``0`` beyond,
    with ``f = (4a - 6x)/a^2`` on ``(0, a)`` and ``f = -1`` on ``(a, 1)``.
    The solution is C^1 at the free boundary ``x = a``.
    """
    if name == "flat":
        zero = lambda x: np.zeros_like(x)  # noqa: E731
        return ObstacleCase("flat", zero, zero, lambda x: -np.ones_like(x), 1.0)
    if name != "contact":
        raise ValueError(f"unknown obstacle case {name!r}")
    if not 0 < a < 1:
        raise ValueError("free boundary must lie inside (0, 1)")

    def u(x):
        return np.where(x < a, x * (a - x) ** 2 / a**2, 0.0)

    def du(x):
        return np.where(x < a, (a - x) * (a - 3.0 * x) / a**2, 0.0)

    def f(x):
        return np.where(x < a, (4.0 * a - 6.0 * x) / a**2, -1.0)

    return ObstacleCase("contact", u, du, f, max(4.0 / a, 2.0 / a, 1.0))


# --------------------------------------------------------------------------
# rate tables
# --------------------------------------------------------------------------
@dataclass
class RateRow:
    h: float
    p: int
    eps_p: float
    err_l2: float = math.nan
    err_energy: float = math.nan
    err_energy_nu: float = math.nan
    rate_l2: float = math.nan
    rate_energy: float = math.nan
    status: str = "ok"


@dataclass
class RateTable:
    case: str
    config_hash: str
    rows: list = field(default_factory=list)

    def group(self, p: int, eps_p: float = 0.0) -> list:
        return [r for r in self.rows if r.p == p and r.eps_p == eps_p]

    def rates(self, p: int, kind: str = "l2", eps_p: float = 0.0) -> np.ndarray:
        return np.array([getattr(r, "rate_" + kind) for r in self.group(p, eps_p)][1:])

    def finalize(self):
        """Order rows by (p, eps_p, -h) and fill rates between neighbours of a group."""
        self.rows.sort(key=lambda r: (r.p, r.eps_p, -r.h))
        for a, b in zip(self.rows, self.rows[1:]):
            b.rate_l2 = b.rate_energy = math.nan
            if (a.p, a.eps_p) == (b.p, b.eps_p) and b.h < a.h and a.status == b.status == "ok":
                b.rate_l2 = _pair_rate(a.err_l2, b.err_l2, a.h, b.h)
                b.rate_energy = _pair_rate(a.err_energy, b.err_energy, a.h, b.h)
        return self

    def to_csv(self, stream=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([_fmt(r.h), r.p, _fmt(r.eps_p), _fmt(r.err_l2), _fmt(r.err_energy), _fmt(r.err_energy_nu),
                        _fmt(r.rate_l2), _fmt(r.rate_energy), r.status])
        text = buf.getvalue()
        if stream is not None:
            stream.write(text)
        return text

    @classmethod
    def from_csv(cls, text: str, case: str = "", config_hash: str = "") -> "RateTable":
        rows = list(csv.reader(io.StringIO(text)))
        if tuple(rows[0]) != CSV_HEADER:
            raise ValueError(f"unexpected rate table header {rows[0]}")
        out = cls(case, config_hash)
        for r in rows[1:]:
            vals = [_parse(v) for v in r[:-1]]
            out.rows.append(RateRow(vals[0], int(vals[1]), *vals[2:], status=r[-1]))
        return out


def _fmt(v: float) -> str:
    return "" if isinstance(v, float) and math.isnan(v) else "%.17g" % v


def _parse(v: str) -> float:
    return math.nan if v == "" else float(v)


def _pair_rate(e0, e1, h0, h1):
    if not (e0 > 0 and e1 > 0):
        return math.nan
    return math.log(e0 / e1) / math.log(h0 / h1)


def estimate_rate(errors: Sequence[float], hs: Sequence[float]) -> float:
    """Least-squares slope of ``log e`` against ``log h``."""
    e = np.asarray(errors, dtype=float)
    h = np.asarray(hs, dtype=float)
    if e.shape != h.shape or e.size < 2:
        raise ValueError("need at least two (error, h) pairs of equal length")
    if np.any(~(e > 0)) or np.any(~(h > 0)):
        raise ValueError("errors and mesh sizes must be positive")
    if np.ptp(np.log(h)) == 0:
        raise ValueError("mesh sizes must not all coincide")
    slope, _ = np.polyfit(np.log(h), np.log(e), 1)
    return float(slope)


def config_hash(obj) -> str:
    text = json.dumps(obj, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# --------------------------------------------------------------------------
# drivers
# --------------------------------------------------------------------------
LINEAR_SOLVE = SolveConfig(method="newton", omega=1.0, tol_residual=1e-10, max_sweeps=50)


def _cells_for(case_dim: int, n: int) -> tuple:
    return (n,) * case_dim


def solve_manufactured(case: ManufacturedCase, n: int, p: int, params: FormParams,
                       cfg: SolveConfig = LINEAR_SOLVE) -> DgField:
    m = meshmod.build(meshmod.DomainSpec(case.bounds, _cells_for(case.dim, n)), p)
    space = DgSpace(m)
    return solve_inner(space.zeros(), None, cfg, params, OFF, case.coeffs(), source=case.forcing()).state


def _errors(u: DgField, exact, grad, params: FormParams):
    kw = dict(reference=exact, reference_grad=grad)
    return (l2_error(u, exact), broken_norm(u, params.a_k, params.beta, **kw),
            broken_norm_nu(u, params.a_k, params.beta, **kw))


def run_h_sweep(case: ManufacturedCase, degrees: Sequence[int] = (1, 2), levels: int = 4, base_cells: int = 8,
                params: FormParams = FormParams(theta=1.0), cfg: SolveConfig = LINEAR_SOLVE) -> RateTable:
    """Errors on ``levels`` nested meshes with ``base_cells * 2^k`` cells per axis."""
    if levels < 1 or not degrees:
        raise ValueError("need at least one level and one degree")
    table = RateTable(case.name, config_hash([asdict(case), list(degrees), levels, base_cells, asdict(params)]))
    exact, grad = case.exact(), case.exact_gradient()
    for p in degrees:
        for k in range(levels):
            n = base_cells * 2**k
            h = 1.0 / n * max(b - a for a, b in case.bounds)
            row = RateRow(h, int(p), 0.0)
            try:
                u = solve_manufactured(case, n, int(p), params, cfg)
                row.err_l2, row.err_energy, row.err_energy_nu = _errors(u, exact, grad, params)
            except EhlError:
                row.status = "failed"
            table.rows.append(row)
    return table.finalize()


def run_p_sweep(case: ManufacturedCase, cells: int = 8, degrees: Sequence[int] = (1, 2, 3, 4, 5),
                params: FormParams = FormParams(theta=1.0), cfg: SolveConfig = LINEAR_SOLVE) -> RateTable:
    """Errors at fixed mesh size for increasing degree (one row per degree, no h-rates)."""
    table = RateTable(case.name, config_hash([asdict(case), list(degrees), cells, asdict(params), "p"]))
    exact, grad = case.exact(), case.exact_gradient()
    h = max(b - a for a, b in case.bounds) / cells
    for p in degrees:
        row = RateRow(h, int(p), 0.0)
        try:
            u = solve_manufactured(case, cells, int(p), params, cfg)
            row.err_l2, row.err_energy, row.err_energy_nu = _errors(u, exact, grad, params)
        except EhlError:
            row.status = "failed"
        table.rows.append(row)
    return table.finalize()


@dataclass(frozen=True)
class PenaltyRow:
    eps_p: float
    err_l2: float
    min_u: float
    status: str = "ok"


def solve_obstacle(case: ObstacleCase, cells: int, degree: int, pen: PenaltyConfig,
                   params: FormParams = FormParams(theta=1.0), cfg: SolveConfig = LINEAR_SOLVE) -> DgField:
    """Penalized solve, continued in decades from ``eps_p = 1e-2`` down to ``pen.eps_p``.

    Starting a semismooth Newton iteration directly at a tiny ``eps_p`` moves
    the active set by about one element per step; the continuation avoids that.
    """
    space = DgSpace(meshmod.build(meshmod.DomainSpec(((0.0, 1.0),), (cells,)), degree))
    state = space.zeros()
    stages = (pen.eps_p,)
    if pen.enabled and pen.eps_p < 1e-2:
        stages = continuation_schedule(1e-2, pen.eps_p)
    for eps in stages:
        state = solve_inner(state, None, cfg, params, pen.at(eps), ConstantCoefficient(1.0), source=case.source).state
    return state


def run_penalty_sweep(case: ObstacleCase, eps_list: Sequence[Optional[float]], cells: int = 256, degree: int = 1,
                      params: FormParams = FormParams(theta=1.0), cfg: SolveConfig = LINEAR_SOLVE) -> list:
    """One solve per penalty value; ``None`` switches the penalty off."""
    rows = []
    for eps in eps_list:
        pen = OFF if eps is None else PenaltyConfig(eps_p=float(eps))
        try:
            u = solve_obstacle(case, cells, degree, pen, params, cfg)
            minu = float(np.min(u.at_quadrature()))
            rows.append(PenaltyRow(math.inf if eps is None else float(eps), l2_error(u, case.exact), minu))
        except EhlError:
            rows.append(PenaltyRow(math.inf if eps is None else float(eps), math.nan, math.nan, "failed"))
    return rows
