"""Interior-penalty DG forms for the penalized Reynolds-type operator.

For a frozen state ``Phi`` the operator applied to trial ``u`` and test ``v`` is

    sum_K int eps(Phi) grad u . grad v
  - sum_e int [v] {eps(Phi) du/dn}  - theta sum_e int [u] {eps(Phi) dv/dn}
  + sum_e a_k p_e^2 / |e|^beta int [u][v]
  - sum_K int q(Phi) (b . grad v) + sum_e int {q(Phi)} (b . [v])
  + (1/eps_p) sum_K int xi(Phi) v

with ``q = rho h`` the transported quantity along the unit direction ``b``.
``theta = 1`` is SIPG, ``0`` IIPG, ``-1`` NIPG.  Boundary faces impose
``u = 0`` weakly through the jump terms.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .dgspace import DgField, DgSpace
from .errors import MeshMismatchError
from .penalty import PenaltyConfig, xi, xi_derivative


@dataclass(frozen=True)
class FormParams:
    a_k: float = 10.0
    beta: float = 1.0
    theta: float = 0.0
    direction: tuple = (1.0, 0.0)
    weight_by_coefficient: bool = False  # scale the jump penalty by (1 + {eps})

    def __post_init__(self):
        if not self.a_k > 0:
            raise ValueError(f"a_k must be > 0, got {self.a_k!r}")
        if not self.beta >= 1:
            raise ValueError(f"beta must be >= 1, got {self.beta!r}")
        d = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(d)
        if n == 0:
            raise ValueError("transport direction must be non-zero")
        object.__setattr__(self, "direction", tuple(float(v) for v in d / n))

    def direction_vector(self, dim: int) -> np.ndarray:
        d = np.zeros(dim)
        k = min(dim, len(self.direction))
        d[:k] = self.direction[:k]
        n = np.linalg.norm(d)
        return d / n if n > 0 else d


class ConstantCoefficient:
    """``eps == value`` with no transport term (model Poisson problems)."""

    uses_film = False
    transport = None

    def __init__(self, value: float = 1.0):
        self.value = float(value)

    def diffusion(self, u, h=None, x=None):
        one = np.full(np.shape(u), self.value)
        zero = np.zeros(np.shape(u))
        return one, zero, zero


@dataclass
class _State:
    u_v: np.ndarray
    u_m: np.ndarray
    u_p: np.ndarray
    h_v: Optional[np.ndarray]
    h_f: Optional[np.ndarray]


def _state(space: DgSpace, c: np.ndarray, film) -> _State:
    F = space.face
    h_v, h_f = (None, None) if film is None else film
    return _State(space.vol.E @ c, F.Em @ c, F.Ep @ c, h_v, h_f)


def _source_vector(space: DgSpace, source) -> np.ndarray:
    if source is None:
        return np.zeros(space.ndofs)
    V = space.vol
    if callable(source):
        f = np.broadcast_to(np.asarray(source(*V.x.T), dtype=float), (len(V.w),))
    else:
        f = np.asarray(source, dtype=float)
    return V.E.T @ (V.w * f)


def _coefficients(space, coeffs, st: _State):
    V, F = space.vol, space.face
    ev = coeffs.diffusion(st.u_v, st.h_v, V.x)
    em = coeffs.diffusion(st.u_m, st.h_f, F.x)
    ep = coeffs.diffusion(st.u_p, st.h_f, F.x)
    return ev, em, ep


def _transport(space, coeffs, st: _State):
    if getattr(coeffs, "transport", None) is None:
        return None
    V, F = space.vol, space.face
    return (coeffs.transport(st.u_v, st.h_v, V.x), coeffs.transport(st.u_m, st.h_f, F.x),
            coeffs.transport(st.u_p, st.h_f, F.x))


def _face_sigma(space, params: FormParams, em=None, ep=None):
    F = space.face
    s = F.sigma(params.a_k, params.beta)
    if params.weight_by_coefficient and em is not None:
        s = s * (1.0 + F.am * em + F.ap * ep)
    return s


def diffusion_matrix(space: DgSpace, eps_v, eps_m, eps_p, params: FormParams) -> sp.csr_matrix:
    """IP-DG matrix for a coefficient given at volume and (two-sided) face points."""
    V, F = space.vol, space.face
    K = sum(G.T @ sp.diags(V.w * eps_v) @ G for G in V.G)
    J = F.J
    flux = sp.diags(F.am * eps_m) @ F.Dm + sp.diags(F.ap * eps_p) @ F.Dp
    Wf = sp.diags(F.w)
    K = K - J.T @ Wf @ flux
    if params.theta != 0.0:
        K = K - params.theta * (flux.T @ Wf @ J)
    sigma = _face_sigma(space, params, eps_m, eps_p)
    K = K + J.T @ sp.diags(F.w * sigma) @ J
    return sp.csr_matrix(K)


def penalty_block(space: DgSpace) -> sp.csr_matrix:
    """Face-penalty block ``sum_e a p^2/|e|^beta int [u][v]`` for ``a_k = 1``."""
    F = space.face
    return sp.csr_matrix(F.J.T @ sp.diags(F.w * F.sigma(1.0, 1.0)) @ F.J)


def transport_vector(space: DgSpace, q_v, q_m, q_p, params: FormParams) -> np.ndarray:
    V, F = space.vol, space.face
    b = params.direction_vector(space.dim)
    Gb = sum(b[d] * V.G[d] for d in range(space.dim) if b[d] != 0)
    bn = F.normal @ b
    avg = F.am * q_m + F.ap * q_p
    return -(Gb.T @ (V.w * q_v)) + F.J.T @ (F.w * bn * avg)


def _penalty_vector(space, u_v, pen: PenaltyConfig):
    if not pen.enabled:
        return np.zeros(space.ndofs)
    V = space.vol
    return pen.weight * (V.E.T @ (V.w * xi(u_v)))


def _penalty_matrix(space, u_v, pen: PenaltyConfig):
    V = space.vol
    if not pen.enabled:
        return sp.csr_matrix((space.ndofs, space.ndofs))
    return sp.csr_matrix(V.E.T @ sp.diags(V.w * pen.weight * xi_derivative(u_v)) @ V.E)


def _check(state: DgField, space: Optional[DgSpace] = None):
    if space is not None and state.space is not space:
        raise MeshMismatchError("state and kernel live on different spaces")


def assemble_picard(state: DgField, film, coeffs, params: FormParams, pen: PenaltyConfig,
                    source=None, penalty_mode: str = "semi-implicit"):
    """Linear system ``A u = b`` of the frozen-coefficient map at ``state``.

    ``film`` is ``(h_vol, h_face)`` frozen at the state (``None`` when the
    coefficient does not use a film).  ``penalty_mode='semi-implicit'`` moves
    ``(1/eps_p) xi'(Phi) u`` into the matrix; ``'explicit'`` keeps
    ``(1/eps_p) xi(Phi)`` on the right-hand side.
    """
    space = state.space
    c = state.coeffs
    st = _state(space, c, film)
    ev, em, ep = _coefficients(space, coeffs, st)
    A = diffusion_matrix(space, ev[0], em[0], ep[0], params)
    b = _source_vector(space, source)
    tr = _transport(space, coeffs, st)
    if tr is not None:
        b = b - transport_vector(space, tr[0][0], tr[1][0], tr[2][0], params)
    if pen.enabled:
        if penalty_mode == "semi-implicit":
            P = _penalty_matrix(space, st.u_v, pen)
            A = A + P
            V = space.vol
            lag = xi(st.u_v) - xi_derivative(st.u_v) * st.u_v
            b = b - pen.weight * (V.E.T @ (V.w * lag))
        elif penalty_mode == "explicit":
            b = b - _penalty_vector(space, st.u_v, pen)
        else:
            raise ValueError(f"unknown penalty_mode {penalty_mode!r}")
    if not np.all(np.isfinite(b)) or not np.all(np.isfinite(A.data)):
        raise FloatingPointError("non-finite entries in the Picard system")
    return sp.csr_matrix(A), b


def residual(state: DgField, kernel, coeffs, params: FormParams, pen: PenaltyConfig, source=None,
             h00: Optional[float] = None) -> np.ndarray:
    """Nonlinear residual ``<T(u; u), v_i> + (1/eps_p)<xi(u), v_i> - <f, v_i>``."""
    space = state.space
    c = state.coeffs
    film = None if kernel is None else kernel.film(c, h00)
    st = _state(space, c, film)
    ev, em, ep = _coefficients(space, coeffs, st)
    R = diffusion_matrix(space, ev[0], em[0], ep[0], params) @ c
    tr = _transport(space, coeffs, st)
    if tr is not None:
        R = R + transport_vector(space, tr[0][0], tr[1][0], tr[2][0], params)
    R = R + _penalty_vector(space, st.u_v, pen) - _source_vector(space, source)
    return R


def _dcoef(d_u, d_h, Etrace, Dfilm):
    M = sp.diags(d_u) @ Etrace
    if Dfilm is None or not np.any(d_h):
        return sp.csr_matrix(M)
    return M.toarray() + d_h[:, None] * Dfilm


def assemble_newton(state: DgField, kernel, coeffs, params: FormParams, pen: PenaltyConfig, source=None,
                    h00: Optional[float] = None, derivative_terms: bool = True):
    """Jacobian and residual of the nonlinear form at ``state``.

    With a deformation kernel the film couples every coefficient to every
    quadrature point and the Jacobian is returned dense; otherwise it is a
    sparse CSR matrix.  ``derivative_terms=False`` drops every coefficient
    derivative, leaving the (semi-implicit) Picard matrix.
    """
    space = state.space
    if kernel is not None:
        _check(state, kernel.space)
    V, F = space.vol, space.face
    c = state.coeffs
    film = None if kernel is None else kernel.film(c, h00)
    st = _state(space, c, film)
    ev, em, ep = _coefficients(space, coeffs, st)
    K = diffusion_matrix(space, ev[0], em[0], ep[0], params)
    R = K @ c
    tr = _transport(space, coeffs, st)
    if tr is not None:
        R = R + transport_vector(space, tr[0][0], tr[1][0], tr[2][0], params)
    R = R + _penalty_vector(space, st.u_v, pen) - _source_vector(space, source)
    Jac = K + _penalty_matrix(space, st.u_v, pen)
    dense = kernel is not None
    if dense:
        Jac = Jac.toarray()
    if not derivative_terms:
        return Jac, R

    Dv = None if kernel is None else kernel.D_vol
    Df = None if kernel is None else kernel.D_face
    J = F.J
    Jc = J @ c
    dev = _dcoef(ev[1], ev[2], V.E, Dv)
    dem = _dcoef(em[1], em[2], F.Em, Df)
    dep = _dcoef(ep[1], ep[2], F.Ep, Df)
    extra = []
    # volume diffusion: d/dc [eps_v] grad(u) . grad(v)
    for G in V.G:
        extra.append(G.T @ _rowscale(V.w * (G @ c), dev))
    # consistency flux and its symmetrisation
    flux_d = _rowscale(F.am * (F.Dm @ c), dem) + _rowscale(F.ap * (F.Dp @ c), dep)
    extra.append(-(J.T @ _rowscale(F.w, flux_d)))
    if params.theta != 0.0:
        y = F.w * Jc
        extra.append(-params.theta * (F.Dm.T @ _rowscale(F.am * y, dem) + F.Dp.T @ _rowscale(F.ap * y, dep)))
    if params.weight_by_coefficient:
        s0 = F.sigma(params.a_k, params.beta)
        extra.append(J.T @ _rowscale(F.w * s0 * Jc, _rowscale(F.am, dem) + _rowscale(F.ap, dep)))
    if tr is not None:
        (qv, qv_u, qv_h), (qm, qm_u, qm_h), (qp, qp_u, qp_h) = tr
        b = params.direction_vector(space.dim)
        Gb = sum(b[d] * V.G[d] for d in range(space.dim) if b[d] != 0)
        bn = F.normal @ b
        dqv = _dcoef(qv_u, qv_h, V.E, Dv)
        dqm = _dcoef(qm_u, qm_h, F.Em, Df)
        dqp = _dcoef(qp_u, qp_h, F.Ep, Df)
        extra.append(-(Gb.T @ _rowscale(V.w, dqv)))
        extra.append(J.T @ _rowscale(F.w * bn, _rowscale(F.am, dqm) + _rowscale(F.ap, dqp)))
    for M in extra:
        if dense:
            Jac = Jac + (M.toarray() if sp.issparse(M) else np.asarray(M))
        else:
            Jac = Jac + M
    if not dense:
        Jac = sp.csr_matrix(Jac)
    return Jac, R


def _rowscale(s, M):
    if sp.issparse(M):
        return sp.diags(s) @ M
    return s[:, None] * M


def norm_matrix(space: DgSpace, a_k: float, beta: float) -> sp.csr_matrix:
    """Gram matrix of the broken energy norm: ``|||v|||^2 = c^T N c``."""
    V, F = space.vol, space.face
    N = sum(G.T @ sp.diags(V.w) @ G for G in V.G)
    N = N + F.J.T @ sp.diags(F.w * F.sigma(a_k, beta)) @ F.J
    return sp.csr_matrix(N)


def coercivity_probe(space: DgSpace, params: FormParams, coeffs=None, n_probes: int = 200, seed: int = 0,
                     exact: bool = True) -> float:
    """Smallest ``<T v, v> / |||v|||^2`` over random probes (pure diffusion).

    With ``exact=True`` the minimising generalized eigenvector is added to
    the probe set, so the returned value is the true minimum.
    """
    coeffs = coeffs or ConstantCoefficient(1.0)
    u0 = np.zeros(space.ndofs)
    st = _state(space, u0, None)
    ev, em, ep = _coefficients(space, coeffs, st)
    K = diffusion_matrix(space, ev[0], em[0], ep[0], params)
    S = (0.5 * (K + K.T)).toarray()
    N = norm_matrix(space, params.a_k, params.beta).toarray()
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((space.ndofs, n_probes))
    if exact:
        import scipy.linalg as la

        w, vecs = la.eigh(S, N, subset_by_index=[0, 0])
        X = np.column_stack([X, vecs[:, 0]])
    num = np.einsum("ij,ij->j", X, S @ X)
    den = np.einsum("ij,ij->j", X, N @ X)
    return float(np.min(num / den))
