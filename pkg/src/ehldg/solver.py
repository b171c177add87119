"""Nonlinear driver: damped Picard / Newton sweeps, penalty continuation and
the force-balance loop on the film offset ``h00``.

Stage order, from the outside in: penalty continuation, force balance,
Picard/Newton.  Progress lines have the stable form
``iter=<n> stage=<s> res=<e> force=<e> minu=<e>``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import assembly
from .assembly import FormParams
from .dgspace import DgField, DgSpace, integral, interpolate
from .errors import ConvergenceError, EvaluationError, FilmCollapseError, LinearSolveError
from .penalty import PenaltyConfig, xi

log = logging.getLogger("ehldg.solver")


@dataclass(frozen=True)
class SolveConfig:
    max_sweeps: int = 200
    omega: float = 0.3
    tol_residual: float = 1e-9
    tol_increment: float = 1e-12
    method: str = "newton"  # "picard", "newton", "hybrid" or "ptc"
    ptc_dt0: float = 1.0
    ptc_growth: float = 10.0
    newton_switch: float = 1e-3
    divergence_window: int = 25
    force_tol: float = 1e-5
    force_gain: float = 0.1
    max_retries: int = 12
    max_outer: int = 60
    max_backtracks: int = 30
    nonmonotone: int = 1  # line-search window: compare against the max of the last few merits

    def __post_init__(self):
        if not 0 < self.omega <= 1:
            raise ValueError(f"omega must lie in (0, 1], got {self.omega!r}")
        for name in ("tol_residual", "tol_increment", "force_tol", "force_gain", "newton_switch"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.method not in ("picard", "newton", "hybrid", "ptc"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.max_sweeps < 1 or self.max_outer < 1:
            raise ValueError("iteration limits must be >= 1")


@dataclass
class InnerResult:
    state: DgField
    iterations: int
    residual: float
    increment: float
    history: list = field(default_factory=list)


@dataclass(frozen=True)
class SolveReport:
    pressure: DgField
    film: np.ndarray
    h00_final: float
    iterations: tuple  # (stage eps_p, outer steps, inner sweeps)
    residual: float
    force_residual: float
    min_pressure: float
    complementarity: float
    complementarity_residual: float
    clamped: bool
    kind: str = "line"

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "h00": self.h00_final,
            "residual": self.residual,
            "force_residual": self.force_residual,
            "min_pressure": self.min_pressure,
            "complementarity": self.complementarity,
            "complementarity_residual": self.complementarity_residual,
            "clamped": self.clamped,
            "integral": integral(self.pressure),
            "iterations": [list(t) for t in self.iterations],
        }


def _log_line(n, stage, res, force, minu):
    msg = f"iter={n} stage={stage} res={res:.6e} force={force:.6e} minu={minu:.6e}"
    log.info(msg)
    return msg


def _scaled_norm(R: np.ndarray, diag: np.ndarray) -> float:
    d = np.abs(diag)
    d = np.where(d > 0, d, 1.0)
    return float(np.max(np.abs(R) / d)) if R.size else 0.0


def _merit(R: np.ndarray, diag: np.ndarray) -> float:
    d = np.abs(diag)
    d = np.where(d > 0, d, 1.0)
    return float(np.linalg.norm(R / d))


def _diag(A):
    return A.diagonal() if sp.issparse(A) else np.diag(A).copy()


def _solve(A, b):
    try:
        if sp.issparse(A):
            x = spla.spsolve(A.tocsc(), b)
        else:
            x = la.solve(A, b, check_finite=True)
    except (la.LinAlgError, RuntimeError, ValueError) as exc:
        raise LinearSolveError(f"linear solve failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise LinearSolveError("linear solve produced non-finite values")
    return x


def _film(kernel, c, h00):
    return None if kernel is None else kernel.film(c, h00)


def solve_inner(initial: DgField, h00: Optional[float], cfg: SolveConfig, params: FormParams,
                pen: PenaltyConfig, coeffs, kernel=None, source=None, stage: str = "inner",
                on_line: Optional[Callable[[str], None]] = None) -> InnerResult:
    """Drive the nonlinear residual to ``cfg.tol_residual`` at fixed ``h00``.

    The residual is measured row-wise scaled by the Jacobian diagonal.
    Picard sweeps are damped by ``omega``; Newton steps are backtracked
    until the film stays positive and the scaled residual decreases.
    """
    space = initial.space
    c = initial.coeffs.copy()
    history = []
    best = math.inf
    since_best = 0
    use_newton = cfg.method in ("newton", "ptc")
    inc = math.inf
    dt = cfg.ptc_dt0
    prev = math.inf
    merits = []
    for it in range(1, cfg.max_sweeps + 1):
        st = DgField(space, c)
        J, R = assembly.assemble_newton(st, kernel, coeffs, params, pen, source, h00,
                                        derivative_terms=use_newton)
        diag = _diag(J)
        res = _scaled_norm(R, diag)
        history.append(res)
        merits.append(_merit(R, diag))
        if on_line is not None:
            minu = float(np.min(space.vol.E @ c))
            on_line(_log_line(it - 1, stage, res, math.nan, minu))
        # a vanishing increment only counts as convergence close to the residual tolerance
        stalled = cfg.method != "ptc" and inc <= cfg.tol_increment and res <= math.sqrt(cfg.tol_residual)
        if res <= cfg.tol_residual or stalled:
            return InnerResult(st, it - 1, res, inc, history)
        if res < best * (1 - 1e-12):
            best, since_best = res, 0
        else:
            since_best += 1
            if since_best >= cfg.divergence_window:
                raise ConvergenceError(f"{stage}: residual stagnated at {res:.3e} after {it - 1} sweeps", history, st)
        if cfg.method == "hybrid" and not use_newton and res < cfg.newton_switch:
            use_newton = True
            continue
        try:
            ref = max(merits[-cfg.nonmonotone:])
            c, dt = _step(space, c, J, R, diag, dt, prev, res, ref, use_newton, kernel, coeffs, params, pen, source, h00, cfg)
        except ConvergenceError as exc:
            exc.state = exc.state or st
            exc.history = history
            raise
        prev = res
        inc = float(np.max(np.abs(c - st.coeffs)))
    raise ConvergenceError(f"{stage}: no convergence in {cfg.max_sweeps} sweeps (res={history[-1]:.3e})", history,
                           DgField(space, c))


def _step(space, c, J, R, diag, dt, prev, res, ref, use_newton, kernel, coeffs, params, pen, source, h00, cfg):
    if cfg.method == "ptc":
        return _ptc_step(space, c, J, R, diag, dt, prev, res, kernel, coeffs, params, pen, source, h00, cfg)
    if use_newton:
        delta = _solve(J, -R)
        try:
            return _backtrack(space, c, delta, ref, diag, kernel, coeffs, params, pen, source, h00, cfg), dt
        except ConvergenceError:
            # kinks in the laws can stall the line search; fall back to one damped pseudo-time step
            trial, _ = _ptc_step(space, c, J, R, diag, cfg.ptc_dt0, math.inf, res, kernel, coeffs, params, pen,
                                 source, h00, cfg)
            return trial, dt
    # damped Picard: J holds the frozen-coefficient matrix here
    target = _solve(J, J @ c - R)
    delta = cfg.omega * (target - c)
    return _backtrack(space, c, delta, math.inf, diag, kernel, coeffs, params, pen, source, h00, cfg), dt


def _ptc_step(space, c, J, R, diag, dt, prev, res, kernel, coeffs, params, pen, source, h00, cfg):
    """Pseudo-transient Newton step ``(J + |diag J|/dt) d = -R``.

    ``dt`` follows switched evolution relaxation (at least doubling while
    the residual does not grow) and is cut by 4 whenever
    the trial state collapses the film or blows the residual up.
    """
    if math.isfinite(prev) and res > 0:
        ratio = prev / res
        # SER, but at least doubling while the residual does not grow
        grow = max(ratio, 0.1) if ratio < 1 else max(2.0 * ratio, 2.0)
        dt = min(dt * min(grow, cfg.ptc_growth), 1e30)
    d = np.abs(diag)
    d = np.where(d > 0, d, 1.0)
    m0 = _merit(R, diag)
    for _ in range(cfg.max_backtracks):
        A = J + (sp.diags(d / dt) if sp.issparse(J) else np.diag(d / dt))
        trial = c + _solve(A, -R)
        try:
            Rt = assembly.residual(DgField(space, trial), kernel, coeffs, params, pen, source, h00)
        except EvaluationError:
            dt *= 0.25
            continue
        if _merit(Rt, diag) < 10.0 * m0:
            return trial, dt
        dt *= 0.25
    raise ConvergenceError("pseudo-transient step failed: film collapse or residual blow-up", [res])


def _backtrack(space, c, delta, res0, diag, kernel, coeffs, params, pen, source, h00, cfg):
    alpha = 1.0
    for _ in range(cfg.max_backtracks):
        trial = c + alpha * delta
        try:
            R = assembly.residual(DgField(space, trial), kernel, coeffs, params, pen, source, h00)
        except EvaluationError:
            alpha *= 0.5
            continue
        if not math.isfinite(res0) or _merit(R, diag) < res0:
            return trial
        alpha *= 0.5
    raise ConvergenceError("line search failed to reduce the residual", [res0])


def hertz_guess(space: DgSpace, target: float = math.pi / 2) -> DgField:
    """Truncated Hertz profile ``sqrt(1 - r^2)^+`` scaled to the force target."""
    if space.dim == 1:
        f = lambda x: np.sqrt(np.maximum(1.0 - x**2, 0.0))  # noqa: E731
    else:
        f = lambda x, y: np.sqrt(np.maximum(1.0 - x**2 - y**2, 0.0))  # noqa: E731
    u = interpolate(f, space)
    s = integral(u)
    return DgField(space, u.coeffs * (target / s))


def diagnostics(state: DgField, kernel, coeffs, params, pen, source, h00):
    space = state.space
    V = space.vol
    u = V.E @ state.coeffs
    R = assembly.residual(state, kernel, coeffs, params, pen, source, h00)
    J, _ = assembly.assemble_newton(state, kernel, coeffs, params, pen, source, h00, derivative_terms=False)
    res = _scaled_norm(R, _diag(J))
    viol = float(np.sum(V.w * np.abs(xi(u))))
    # operator residual without the penalty term, projected back through the mass matrix
    Rop = R - assembly._penalty_vector(space, u, pen)
    m = space.mass_diagonal()
    r_vals = V.E @ (Rop / m)
    comp = float(np.sum(V.w * np.maximum(u, 0.0) * np.abs(np.minimum(r_vals, 0.0))))
    return res, float(u.min()), viol, comp


def solve_with_force_balance(space: DgSpace, kernel, coeffs, cfg: SolveConfig, params: FormParams,
                             pen: PenaltyConfig, h00_init: float, target: float,
                             initial: Optional[DgField] = None,
                             on_line: Optional[Callable[[str], None]] = None, source=None) -> SolveReport:
    """Close ``int u = target`` by secant updates on ``h00``.

    Penalty continuation is the outermost loop.  Each inner solve is warm
    started from the previous converged state.  Raising ``h00`` must lower
    ``int u``; a violation of this monotonicity aborts with a diagnostic.
    """
    state = initial if initial is not None else hertz_guess(space, target)
    h00 = float(h00_init)
    iterations = []
    for eps_p in pen.stages:
        p_stage = pen.at(eps_p)
        stage = f"eps{eps_p:.0e}"
        pts = []  # (h00, F)
        sweeps = 0
        states = []
        retries = 0
        for outer in range(cfg.max_outer):
            try:
                start = _warm_start(states, state, h00, kernel, space, target)
                res = solve_inner(start, h00, cfg, params, p_stage, coeffs, kernel, source, stage=stage, on_line=on_line)
            except (EvaluationError, ConvergenceError, LinearSolveError) as exc:
                # pull the offset back towards the last converged value
                if not pts or retries >= cfg.max_retries:
                    raise
                retries += 1
                if on_line is not None:
                    on_line(f"# retry h00={h00:.17g}: {exc}")
                h00 = 0.5 * (h00 + pts[-1][0])
                continue
            sweeps += res.iterations
            state = res.state
            F = integral(state) - target
            if on_line is not None:
                on_line(_log_line(outer, stage + "/force", res.residual, F, float(np.min(space.vol.E @ state.coeffs))))
            for h_prev, F_prev in pts:
                if (h00 - h_prev) * (F - F_prev) > 0 and abs(F - F_prev) > 10 * cfg.force_tol:
                    raise ConvergenceError(
                        f"force balance not monotone in h00: ({h_prev:.6e}, {F_prev:.6e}) -> ({h00:.6e}, {F:.6e})",
                        [p[1] for p in pts] + [F], state)
            pts.append((h00, F))
            states.append((h00, state))
            if abs(F) <= cfg.force_tol:
                break
            h00 = _next_offset(pts, cfg)
            if any(abs(h00 - p[0]) <= 1e-13 * max(1.0, abs(h00)) for p in pts):
                raise ConvergenceError(
                    f"force balance: bracket collapsed at h00={h00:.17g} with |F|={abs(F):.3e} above "
                    f"force_tol={cfg.force_tol:.1e} (force is discontinuous in h00 at this scale)",
                    [p[1] for p in pts], state)
        else:
            raise ConvergenceError(f"force balance: no convergence in {cfg.max_outer} outer steps",
                                   [p[1] for p in pts], state)
        iterations.append((eps_p, len(pts) - 1, sweeps))

    res, minu, viol, comp = diagnostics(state, kernel, coeffs, params, pen, source, h00)
    film = kernel.film(state.coeffs, h00)[0] if kernel is not None else np.zeros(0)
    clamped = bool(getattr(coeffs, "clamped", lambda u, h: False)(space.vol.E @ state.coeffs, film))
    return SolveReport(
        pressure=state, film=film, h00_final=h00, iterations=tuple(iterations), residual=res,
        force_residual=integral(state) - target, min_pressure=minu, complementarity=viol,
        complementarity_residual=comp, clamped=clamped, kind=getattr(kernel, "kind", "line"),
    )


def _warm_start(states, fallback, h00, kernel, space, target):
    """Nearest converged state whose film stays positive at ``h00``.

    The Hertz profile is tried last; a start with a collapsed film raises.
    """
    cands = [st for _, st in sorted(states, key=lambda t: abs(t[0] - h00))]
    cands += [fallback, hertz_guess(space, target)]
    for st in cands:
        if kernel is None:
            return st
        hv, hf = kernel.film(st.coeffs, h00)
        if hv.min() > 0 and hf.min() > 0:
            return st
    raise FilmCollapseError(f"no start state keeps the film positive at h00={h00:.6e}")


def _next_offset(pts, cfg: SolveConfig) -> float:
    """Secant on the bracketing pair when available, relaxation otherwise."""
    h, F = pts[-1]
    if len(pts) == 1:
        return h + cfg.force_gain * F
    h0, F0 = pts[-2]
    lo = [p for p in pts if p[1] < 0]
    hi = [p for p in pts if p[1] > 0]
    if lo and hi:
        a = max(hi, key=lambda p: p[0])[0]  # F > 0: h00 too small
        b = min(lo, key=lambda p: p[0])[0]
        guess = h - F * (h - h0) / (F - F0) if F != F0 else math.nan
        if min(a, b) < guess < max(a, b):
            return guess
        return 0.5 * (a + b)
    h0, F0 = pts[-2]
    if F != F0:
        step = -F * (h - h0) / (F - F0)
        cap = 4.0 * abs(h - h0) + cfg.force_gain * abs(F)
        return h + float(np.clip(step, -cap, cap))
    return h + cfg.force_gain * F
