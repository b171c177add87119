"""Lubricant laws, Reynolds coefficient, elastic film thickness and force balance."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .dgspace import DgField, DgSpace, gauss_legendre, integral, legendre, tabulate
from .errors import EvaluationError, FilmCollapseError, MeshMismatchError
from .params import DerivedParams, PhysicalInputs

DENSITY_A = 0.59e9
DENSITY_B = 1.34

FORCE_TARGET = {"line": math.pi / 2.0, "point": 3.0 * math.pi / 2.0}


@dataclass(frozen=True)
class Lubricant:
    """Roelands viscosity and Dowson-Higginson density in dimensionless pressure.

    ``epsilon_star`` is clamped to ``[eps_min, eps_max]`` when ``clamp`` is set.
    """

    pH: float
    z: float
    alpha: float
    p0: float
    lam: float
    density_a: float = DENSITY_A
    density_b: float = DENSITY_B
    clamp: bool = True
    eps_min: float = 1e-12
    eps_max: float = 1e12

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.z)):
            raise EvaluationError("lubricant needs lambda > 0 and finite z")
        if self.clamp and not 0 < self.eps_min < self.eps_max:
            raise EvaluationError("clamp bounds must satisfy 0 < eps_min < eps_max")

    @classmethod
    def from_params(cls, derived: DerivedParams, inputs: PhysicalInputs, **kw) -> "Lubricant":
        return cls(pH=derived.pH, z=derived.z, alpha=inputs.alpha, p0=inputs.p0, lam=derived.lam, **kw)

    # -- viscosity --------------------------------------------------------
    def _base(self, u):
        u = np.asarray(u, dtype=float)
        base = 1.0 + u * self.pH / self.p0
        if np.any(base <= 0):
            bad = u[base <= 0] if u.ndim else u
            raise EvaluationError("viscosity base 1 + u pH/p0 must be positive", value=bad)
        return base

    def viscosity(self, u):
        base = self._base(u)
        with np.errstate(over="ignore"):
            eta = np.exp(self.alpha * self.p0 / self.z * (base**self.z - 1.0))
        if not np.all(np.isfinite(eta)):
            raise EvaluationError("viscosity overflow", value=u)
        return eta

    def viscosity_du(self, u):
        base = self._base(u)
        return self.viscosity(u) * self.alpha * self.pH * base ** (self.z - 1.0)

    # -- density ----------------------------------------------------------
    def density(self, u):
        u = np.asarray(u, dtype=float)
        den = self.density_a + u * self.pH
        if np.any(den == 0):
            raise EvaluationError("density denominator vanishes", value=u)
        return (self.density_a + self.density_b * u * self.pH) / den

    def density_du(self, u):
        u = np.asarray(u, dtype=float)
        den = self.density_a + u * self.pH
        return self.pH * self.density_a * (self.density_b - 1.0) / den**2

    # -- Reynolds coefficient ----------------------------------------------
    def epsilon_star(self, u, h):
        return self.epsilon_partials(u, h)[0]

    def epsilon_partials(self, u, h):
        """``eps = rho h^3 / (eta lambda)`` and its partial derivatives.

        Returns ``(eps, d eps/du, d eps/dh, clamped_mask)``.  Pressures enter
        the constitutive laws through ``max(u, 0)`` (cavitated lubricant).
        """
        h = np.asarray(h, dtype=float)
        if np.any(h <= 0):
            raise FilmCollapseError("film thickness must be positive", value=h[h <= 0] if h.ndim else h)
        up = np.maximum(np.asarray(u, dtype=float), 0.0)
        pos = np.asarray(u, dtype=float) > 0
        rho, drho = self.density(up), self.density_du(up)
        eta, deta = self.viscosity(up), self.viscosity_du(up)
        eps = rho * h**3 / (eta * self.lam)
        eps_u = np.where(pos, eps * (drho / rho - deta / eta), 0.0)
        eps_h = 3.0 * eps / h
        clamped = np.zeros(eps.shape, dtype=bool)
        if self.clamp:
            clamped = (eps < self.eps_min) | (eps > self.eps_max)
            eps = np.clip(eps, self.eps_min, self.eps_max)
            eps_u = np.where(clamped, 0.0, eps_u)
            eps_h = np.where(clamped, 0.0, eps_h)
        return eps, eps_u, eps_h, clamped


class ReynoldsCoefficients:
    """Adapter exposing the lubricant to the DG assembly.

    Diffusion coefficient ``epsilon*(u, h)``; transported quantity ``rho(u) h``.
    """

    uses_film = True

    def __init__(self, lubricant: Lubricant):
        self.lubricant = lubricant

    def diffusion(self, u, h, x=None):
        eps, eps_u, eps_h, clamped = self.lubricant.epsilon_partials(u, h)
        return eps, eps_u, eps_h

    def clamped(self, u, h) -> bool:
        return bool(np.any(self.lubricant.epsilon_partials(u, h)[3]))

    def transport(self, u, h, x=None):
        lub = self.lubricant
        up = np.maximum(u, 0.0)
        rho = lub.density(up)
        rho_u = np.where(u > 0, lub.density_du(up), 0.0)
        return rho * h, rho_u * h, rho


def viscosity(u, lubricant: Lubricant):
    return lubricant.viscosity(u)


def density(u, lubricant: Lubricant):
    return lubricant.density(u)


def epsilon_star(u, h, lubricant: Lubricant):
    return lubricant.epsilon_star(u, h)


# --------------------------------------------------------------------------
# deformation kernels
# --------------------------------------------------------------------------
def _log_moments(k_max: int, tau: np.ndarray) -> np.ndarray:
    """``L_k(tau) = int_{-1}^{1} log|tau - t| P_k(t) dt`` for ``|tau| <= ~2``.

    The interval is split at the singularity and ``P_k(tau +/- s)`` expanded in
    powers of ``s``; ``int_0^L s^m log s ds`` is integrated in closed form.
    """
    tau = np.asarray(tau, dtype=float)
    out = np.zeros((tau.size, k_max + 1))
    # power coefficients a[k, j] of P_k
    a = np.zeros((k_max + 1, k_max + 1))
    for k in range(k_max + 1):
        a[k, : k + 1] = np.polynomial.legendre.leg2poly(np.eye(k + 1)[k])

    def antider(m, L):
        with np.errstate(divide="ignore", invalid="ignore"):
            val = L ** (m + 1) * (np.log(L) / (m + 1) - 1.0 / (m + 1) ** 2)
        return np.where(L > 0, val, 0.0)

    def piece(sign, lo, hi):
        # int_lo^hi log(s) P_k(tau + sign*s) ds
        res = np.zeros((tau.size, k_max + 1))
        for m in range(k_max + 1):
            # c_m(tau) = sign^m sum_{j>=m} a_kj C(j,m) tau^(j-m)
            cm = np.zeros((tau.size, k_max + 1))
            for j in range(m, k_max + 1):
                cm += np.outer(tau ** (j - m), a[:, j] * math.comb(j, m))
            res += sign**m * cm * (antider(m, hi) - antider(m, lo))[:, None]
        return res

    inside = np.abs(tau) <= 1.0
    right = tau > 1.0
    left = tau < -1.0
    zero = np.zeros_like(tau)
    # tau inside: t in [tau, 1] -> s in [0, 1 - tau]; t in [-1, tau] -> s in [0, tau + 1]
    r_in = piece(1.0, zero, np.where(inside, 1.0 - tau, 0.0)) + piece(-1.0, zero, np.where(inside, tau + 1.0, 0.0))
    r_right = piece(-1.0, np.where(right, tau - 1.0, 0.0), np.where(right, tau + 1.0, 0.0))
    r_left = piece(1.0, np.where(left, -1.0 - tau, 0.0), np.where(left, 1.0 - tau, 0.0))
    out[inside] = r_in[inside]
    out[right] = r_right[right]
    out[left] = r_left[left]
    return out


def log_moments(k_max: int, tau, near: float = 1.5, far_points: int = 40) -> np.ndarray:
    """``int_{-1}^{1} log|tau - t| P_k(t) dt`` for ``k = 0..k_max`` at every ``tau``."""
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    out = np.empty((tau.size, k_max + 1))
    close = np.abs(tau) <= near
    if np.any(close):
        out[close] = _log_moments(k_max, tau[close])
    if np.any(~close):
        t, w = np.polynomial.legendre.leggauss(far_points)
        P, _ = legendre(k_max, t)
        out[~close] = np.log(np.abs(tau[~close, None] - t[None, :])) @ (w[:, None] * P)
    return out


def _duffy_rule(n: int):
    t, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    U, V = np.meshgrid(t, t, indexing="ij")
    W = np.outer(w, w)
    return U.ravel(), V.ravel(), W.ravel()


def _inverse_distance_near(target, lo, hi, p, n):
    """``int_K phi_k(x') / |x - x'| dx'`` for targets close to or inside ``K``.

    The rectangle is cut at the target's projection onto ``K``; each piece
    has the projection as a corner and is split into two triangles mapped by
    a Duffy transform, which cancels the ``1/r`` singularity.
    """
    U, V, W = _duffy_rule(n)
    c = np.clip(target, lo, hi)  # (nt, 2)
    res = 0.0
    ext = hi - lo
    for sx in (lo[0], hi[0]):
        for sy in (lo[1], hi[1]):
            Lx = sx - c[:, 0]
            Ly = sy - c[:, 1]
            area = np.abs(Lx * Ly)
            for tri in (0, 1):
                if tri == 0:
                    px = c[:, 0, None] + Lx[:, None] * U
                    py = c[:, 1, None] + Ly[:, None] * U * V
                else:
                    px = c[:, 0, None] + Lx[:, None] * U * V
                    py = c[:, 1, None] + Ly[:, None] * U
                dx = px - target[:, 0, None]
                dy = py - target[:, 1, None]
                r = np.sqrt(dx * dx + dy * dy)
                jac = area[:, None] * U[None, :] * W[None, :]
                with np.errstate(divide="ignore", invalid="ignore"):
                    kern = np.where(jac > 0, jac / r, 0.0)
                xi = 2.0 * (px - lo[0]) / ext[0] - 1.0
                eta = 2.0 * (py - lo[1]) / ext[1] - 1.0
                phi, _ = tabulate(p, np.column_stack([xi.ravel(), eta.ravel()]))
                phi = phi.reshape(len(target), len(U), -1)
                res = res + np.einsum("tq,tqk->tk", kern, phi)
    return res


@dataclass(frozen=True)
class DeformationKernel:
    """Dense map from pressure coefficients to elastic deformation.

    ``D_vol`` acts at the volume quadrature points, ``D_face`` at the face
    quadrature points.  ``film = h00 + geometry + D @ coeffs``.
    """

    space: DgSpace
    kind: str
    D_vol: np.ndarray
    D_face: np.ndarray
    geom_vol: np.ndarray
    geom_face: np.ndarray
    h00: float = 0.0

    def with_offset(self, h00: float) -> "DeformationKernel":
        return replace(self, h00=float(h00))

    def film(self, coeffs: np.ndarray, h00: Optional[float] = None):
        h00 = self.h00 if h00 is None else h00
        return h00 + self.geom_vol + self.D_vol @ coeffs, h00 + self.geom_face + self.D_face @ coeffs

    @property
    def shape(self):
        return self.D_vol.shape


def _geometry(x: np.ndarray) -> np.ndarray:
    return 0.5 * np.sum(x**2, axis=1)


def build_kernel(space: DgSpace, kind: Optional[str] = None, sign: Optional[float] = None,
                 h00: float = 0.0, near_points: int = 16) -> DeformationKernel:
    """Deformation matrices for the line (log) or point (1/r) kernel.

    Default signs follow the film-thickness formulas: the line contact
    subtracts ``(1/pi) int log|x - x'| u``, the point contact adds
    ``(2/pi^2) int u / r``.
    """
    kind = kind or ("line" if space.dim == 1 else "point")
    if (kind == "line") != (space.dim == 1):
        raise MeshMismatchError(f"{kind} contact needs a {'1D' if kind == 'line' else '2D'} space")
    targets = np.vstack([space.vol.x, space.face.x])
    if kind == "line":
        s = -1.0 if sign is None else float(sign)
        D = _line_matrix(space, targets[:, 0]) * (s / math.pi)
    else:
        s = 1.0 if sign is None else float(sign)
        D = _point_matrix(space, targets, near_points) * (s * 2.0 / math.pi**2)
    nv = len(space.vol.x)
    D_vol, D_face = np.ascontiguousarray(D[:nv]), np.ascontiguousarray(D[nv:])
    D_vol.setflags(write=False)
    D_face.setflags(write=False)
    return DeformationKernel(space, kind, D_vol, D_face, _geometry(space.vol.x), _geometry(space.face.x), h00)


def _line_matrix(space: DgSpace, x: np.ndarray) -> np.ndarray:
    m = space.mesh
    D = np.zeros((len(x), space.ndofs))
    for e in range(m.n_elements):
        p = int(m.degree[e])
        hw = 0.5 * m.elem_extent[e, 0]
        mid = m.elem_lo[e, 0] + hw
        L = log_moments(p, (x - mid) / hw)
        L[:, 0] += 2.0 * math.log(hw)
        D[:, space.offsets[e]:space.offsets[e + 1]] = hw * L
    return D


def _point_matrix(space: DgSpace, x: np.ndarray, near_points: int) -> np.ndarray:
    m = space.mesh
    D = np.zeros((len(x), space.ndofs))
    for e in range(m.n_elements):
        p = int(m.degree[e])
        lo, hi = m.elem_lo[e], m.elem_hi[e]
        diam = m.elem_size[e]
        gap = np.sqrt(np.sum((x - np.clip(x, lo, hi)) ** 2, axis=1))
        near = gap < 1.5 * diam
        cols = slice(space.offsets[e], space.offsets[e + 1])
        if np.any(~near):
            rule = gauss_legendre(p + 10, 2)
            phi, _ = tabulate(p, rule.points)
            xq = lo + 0.5 * (rule.points + 1.0) * (hi - lo)
            wq = rule.weights * m.elem_measure[e] / 4.0
            far = x[~near]
            r = np.sqrt((far[:, None, 0] - xq[None, :, 0]) ** 2 + (far[:, None, 1] - xq[None, :, 1]) ** 2)
            D[~near, cols] = (wq[None, :] / r) @ phi
        if np.any(near):
            D[near, cols] = _inverse_distance_near(x[near], lo, hi, p, near_points)
    return D


def film_thickness(pressure: DgField, kernel: DeformationKernel, h00: Optional[float] = None) -> np.ndarray:
    """Film thickness at the volume quadrature points of ``pressure``."""
    if pressure.space is not kernel.space:
        raise MeshMismatchError("pressure and kernel live on different spaces")
    return kernel.film(pressure.coeffs, h00)[0]


def force_balance_residual(pressure: DgField, kind: str = "line", target: Optional[float] = None) -> float:
    """``int u - pi/2`` (line) or ``int int u - 3 pi/2`` (point)."""
    if target is None:
        target = FORCE_TARGET[kind]
    return integral(pressure) - target
