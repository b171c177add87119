"""Broken polynomial spaces on structured meshes.

Each element carries a tensor Legendre basis ``P_i(xi) P_j(eta)`` of degree
``p_i`` per axis on the master cell ``[-1, 1]^dim``.  A :class:`DgSpace`
pre-tabulates the basis at every volume and face quadrature point as sparse
evaluation operators, so that forms reduce to weighted sparse products:

``vol.E @ c``            values at volume points
``vol.G[d] @ c``         physical derivative along axis ``d``
``face.Em @ c``          trace from the minus element
``face.Ep @ c``          trace from the plus element (zero rows on boundary)
``face.Dm / face.Dp``    normal derivatives along the minus-side normal
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .errors import MeshMismatchError
from .mesh import Mesh


# --------------------------------------------------------------------------
# quadrature and basis
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (n, dim) on [-1, 1]^dim
    weights: np.ndarray
    order: int  # polynomial degree integrated exactly per axis

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@lru_cache(maxsize=None)
def gauss_legendre(n: int, dim: int = 1) -> QuadratureRule:
    x, w = np.polynomial.legendre.leggauss(n)
    if dim == 1:
        pts, wts = x[:, None], w
    else:
        # x index fastest, matching the element numbering
        X, Y = np.meshgrid(x, x, indexing="xy")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        wts = np.outer(w, w).ravel()
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(pts, wts, 2 * n - 1)


def composite_gauss(n: int, sub: int, dim: int = 1) -> QuadratureRule:
    """Gauss rule with ``n`` points on each of ``sub`` equal sub-intervals per axis."""
    x, w = np.polynomial.legendre.leggauss(n)
    edges = np.linspace(-1.0, 1.0, sub + 1)
    xs = (0.5 * (edges[:-1, None] + edges[1:, None]) + 0.5 * (edges[1:, None] - edges[:-1, None]) * x).ravel()
    ws = np.tile(w / sub, sub)
    if dim == 1:
        return QuadratureRule(xs[:, None], ws, 2 * n - 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    return QuadratureRule(np.column_stack([X.ravel(), Y.ravel()]), np.outer(ws, ws).ravel(), 2 * n - 1)


def legendre(p: int, x: np.ndarray):
    """Values and derivatives of ``P_0..P_p`` at ``x``; arrays of shape (len(x), p+1)."""
    x = np.asarray(x, dtype=float)
    P = np.zeros((x.size, p + 1))
    dP = np.zeros((x.size, p + 1))
    P[:, 0] = 1.0
    if p >= 1:
        P[:, 1] = x
        dP[:, 1] = 1.0
    for k in range(1, p):
        P[:, k + 1] = ((2 * k + 1) * x * P[:, k] - k * P[:, k - 1]) / (k + 1)
        dP[:, k + 1] = dP[:, k - 1] + (2 * k + 1) * P[:, k]
    return P, dP


def n_local(p: int, dim: int) -> int:
    return (p + 1) ** dim


def tabulate(p: int, xi: np.ndarray):
    """Tensor basis on the master cell.

    Returns ``vals`` (npts, nloc) and ``grads`` (dim, npts, nloc) with respect
    to master coordinates.  Local index ``k = j * (p + 1) + i`` for ``P_i(xi) P_j(eta)``.
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    dim = xi.shape[1]
    Px, dPx = legendre(p, xi[:, 0])
    if dim == 1:
        return Px, dPx[None]
    Py, dPy = legendre(p, xi[:, 1])
    vals = (Py[:, :, None] * Px[:, None, :]).reshape(len(xi), -1)
    gx = (Py[:, :, None] * dPx[:, None, :]).reshape(len(xi), -1)
    gy = (dPy[:, :, None] * Px[:, None, :]).reshape(len(xi), -1)
    return vals, np.stack([gx, gy])


def _mass_diag(p: int, dim: int) -> np.ndarray:
    """Diagonal of the master-cell mass matrix of the tensor Legendre basis."""
    m1 = 2.0 / (2.0 * np.arange(p + 1) + 1.0)
    if dim == 1:
        return m1
    return np.outer(m1, m1).ravel()


# --------------------------------------------------------------------------
# discrete space
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class VolumeOperators:
    x: np.ndarray  # (nq, dim)
    w: np.ndarray
    elem: np.ndarray
    E: sp.csr_matrix
    G: tuple  # physical derivative operators per axis


@dataclass(frozen=True)
class FaceOperators:
    x: np.ndarray
    w: np.ndarray
    face: np.ndarray
    normal: np.ndarray  # minus-side outward normal at each point
    boundary: np.ndarray
    degree: np.ndarray  # face degree p_k per point
    measure: np.ndarray  # |e_k| per point
    Em: sp.csr_matrix
    Ep: sp.csr_matrix
    Dm: sp.csr_matrix
    Dp: sp.csr_matrix

    @property
    def am(self) -> np.ndarray:
        return np.where(self.boundary, 1.0, 0.5)

    @property
    def ap(self) -> np.ndarray:
        return np.where(self.boundary, 0.0, 0.5)

    @property
    def J(self) -> sp.csr_matrix:
        """Scalar jump along the minus normal: ``v_minus - v_plus`` (``v`` on the boundary)."""
        return (self.Em - self.Ep).tocsr()

    def sigma(self, a_k: float, beta: float) -> np.ndarray:
        return a_k * self.degree.astype(float) ** 2 / self.measure**beta


class DgSpace:
    """Discontinuous space over ``mesh`` with pre-tabulated quadrature operators.

    ``extra_points`` raises the number of Gauss points per axis above the
    default ``p + 2`` (exact for degree ``2p + 3``).
    """

    def __init__(self, mesh: Mesh, extra_points: int = 0):
        self.mesh = mesh
        self.dim = mesh.dim
        self.extra_points = int(extra_points)
        self.degree = mesh.degree
        self.nloc = (mesh.degree + 1) ** self.dim
        self.offsets = np.concatenate([[0], np.cumsum(self.nloc)])
        self.ndofs = int(self.offsets[-1])
        self.vol = self._volume_operators()
        self.face = self._face_operators()

    def npoints(self, p: int) -> int:
        return int(p) + 2 + self.extra_points

    def dofs(self, e: int) -> np.ndarray:
        return np.arange(self.offsets[e], self.offsets[e + 1])

    def to_master(self, e: int, x: np.ndarray) -> np.ndarray:
        m = self.mesh
        return 2.0 * (np.atleast_2d(x) - m.elem_lo[e]) / m.elem_extent[e] - 1.0

    def to_physical(self, e: int, xi: np.ndarray) -> np.ndarray:
        m = self.mesh
        return m.elem_lo[e] + 0.5 * (np.atleast_2d(xi) + 1.0) * m.elem_extent[e]

    # -- operator construction ---------------------------------------
    def _volume_operators(self) -> VolumeOperators:
        m = self.mesh
        xs, ws, es = [], [], []
        rows, cols, vals = [], [], []
        grads = [[] for _ in range(self.dim)]
        nq = 0
        for e in range(m.n_elements):
            p = int(m.degree[e])
            rule = gauss_legendre(self.npoints(p), self.dim)
            phi, dphi = tabulate(p, rule.points)
            nqe, nl = phi.shape
            xs.append(self.to_physical(e, rule.points))
            ws.append(rule.weights * m.elem_measure[e] / 2.0**self.dim)
            es.append(np.full(nqe, e))
            r = np.repeat(np.arange(nq, nq + nqe), nl)
            c = np.tile(self.dofs(e), nqe)
            rows.append(r)
            cols.append(c)
            vals.append(phi.ravel())
            for d in range(self.dim):
                grads[d].append((dphi[d] * (2.0 / m.elem_extent[e, d])).ravel())
            nq += nqe
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        shape = (nq, self.ndofs)
        E = sp.csr_matrix((np.concatenate(vals), (rows, cols)), shape=shape)
        G = tuple(sp.csr_matrix((np.concatenate(g), (rows, cols)), shape=shape) for g in grads)
        return VolumeOperators(np.concatenate(xs), np.concatenate(ws), np.concatenate(es), E, G)

    def _face_points(self, f: int):
        m = self.mesh
        if self.dim == 1:
            return m.face_lo[f][None, :], np.ones(1)
        n = self.npoints(int(m.face_degree[f]))
        t, w = np.polynomial.legendre.leggauss(n)
        lo, hi = m.face_lo[f], m.face_hi[f]
        x = lo + 0.5 * (t[:, None] + 1.0) * (hi - lo)
        return x, w * m.face_measure[f] / 2.0

    def _face_operators(self) -> FaceOperators:
        m = self.mesh
        xs, ws, fs = [], [], []
        blocks = {k: ([], [], []) for k in ("Em", "Ep", "Dm", "Dp")}
        nq = 0
        for f in range(m.n_faces):
            x, w = self._face_points(f)
            nqf = len(w)
            n = m.face_normal[f]
            for side, e in (("m", m.face_minus[f]), ("p", m.face_plus[f])):
                if e < 0:
                    continue
                p = int(m.degree[e])
                xi = np.clip(self.to_master(e, x), -1.0, 1.0)
                phi, dphi = tabulate(p, xi)
                dn = sum(dphi[d] * (2.0 / m.elem_extent[e, d]) * n[d] for d in range(self.dim))
                r = np.repeat(np.arange(nq, nq + nqf), phi.shape[1])
                c = np.tile(self.dofs(e), nqf)
                for key, data in (("E" + side, phi), ("D" + side, dn)):
                    blocks[key][0].append(r)
                    blocks[key][1].append(c)
                    blocks[key][2].append(data.ravel())
            xs.append(x)
            ws.append(w)
            fs.append(np.full(nqf, f))
            nq += nqf
        shape = (nq, self.ndofs)

        def mat(key):
            r, c, v = blocks[key]
            if not r:
                return sp.csr_matrix(shape)
            return sp.csr_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))), shape=shape)

        face = np.concatenate(fs)
        return FaceOperators(
            x=np.concatenate(xs),
            w=np.concatenate(ws),
            face=face,
            normal=m.face_normal[face],
            boundary=m.face_boundary[face],
            degree=m.face_degree[face],
            measure=m.face_measure[face],
            Em=mat("Em"),
            Ep=mat("Ep"),
            Dm=mat("Dm"),
            Dp=mat("Dp"),
        )

    def gradient(self, coeffs: np.ndarray) -> np.ndarray:
        """Physical gradient at volume points, shape (nq, dim)."""
        return np.column_stack([G @ coeffs for G in self.vol.G])

    def mass_diagonal(self) -> np.ndarray:
        m = self.mesh
        out = np.empty(self.ndofs)
        for e in range(m.n_elements):
            out[self.offsets[e]:self.offsets[e + 1]] = (
                _mass_diag(int(m.degree[e]), self.dim) * m.elem_measure[e] / 2.0**self.dim
            )
        return out

    def zeros(self) -> "DgField":
        return DgField(self, np.zeros(self.ndofs))

    def __repr__(self):
        return f"DgSpace({self.mesh!r}, ndofs={self.ndofs})"


@dataclass
class DgField:
    space: DgSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.ndofs,):
            raise MeshMismatchError(
                f"coefficient vector has shape {self.coeffs.shape}, space needs ({self.space.ndofs},)"
            )
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("DgField coefficients must be finite")

    @property
    def mesh(self) -> Mesh:
        return self.space.mesh

    def block(self, e: int) -> np.ndarray:
        s = self.space
        return self.coeffs[s.offsets[e]:s.offsets[e + 1]]

    def at_quadrature(self) -> np.ndarray:
        return self.space.vol.E @ self.coeffs

    def at_faces(self):
        f = self.space.face
        return f.Em @ self.coeffs, f.Ep @ self.coeffs

    def copy(self) -> "DgField":
        return DgField(self.space, self.coeffs.copy())

    def __call__(self, x) -> np.ndarray:
        return evaluate_points(self, x)


def _check_same(field: DgField, space: DgSpace):
    if field.space is not space and field.space.mesh is not space.mesh:
        raise MeshMismatchError("field lives on a different mesh")


# --------------------------------------------------------------------------
# evaluation and projection
# --------------------------------------------------------------------------
def evaluate(field: DgField, element: int, local_point):
    """Value and physical gradient at a master-cell point of ``element``."""
    s = field.space
    m = s.mesh
    if not 0 <= element < m.n_elements:
        raise IndexError(f"element {element} out of range [0, {m.n_elements})")
    xi = np.asarray(local_point, dtype=float).reshape(1, s.dim)
    if np.any(np.abs(xi) > 1.0 + 1e-12):
        raise ValueError("local point must lie in the master cell [-1, 1]^dim")
    phi, dphi = tabulate(int(m.degree[element]), xi)
    c = field.block(element)
    value = float(phi[0] @ c)
    grad = np.array([dphi[d, 0] @ c * 2.0 / m.elem_extent[element, d] for d in range(s.dim)])
    return value, grad


def locate(mesh: Mesh, x: np.ndarray) -> np.ndarray:
    """Element index containing each physical point (closed cells, left-biased)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != mesh.dim:
        x = x.reshape(-1, mesh.dim)
    idx = []
    for d, b in enumerate(mesh.breakpoints):
        i = np.searchsorted(b, x[:, d], side="right") - 1
        idx.append(np.clip(i, 0, len(b) - 2))
    if mesh.dim == 1:
        return idx[0]
    return idx[1] * mesh.shape[0] + idx[0]


def evaluate_points(field: DgField, x) -> np.ndarray:
    s = field.space
    x = np.asarray(x, dtype=float).reshape(-1, s.dim)
    elems = locate(s.mesh, x)
    out = np.empty(len(x))
    for e in np.unique(elems):
        sel = elems == e
        phi, _ = tabulate(int(s.mesh.degree[e]), s.to_master(e, x[sel]))
        out[sel] = phi @ field.block(e)
    return out


def _call(f: Callable, x: np.ndarray) -> np.ndarray:
    out = f(*x.T)
    return np.broadcast_to(np.asarray(out, dtype=float), (len(x),))


def interpolate(f: Callable, space: DgSpace, points: Optional[int] = None, subdivisions: Optional[int] = None) -> DgField:
    """Elementwise L2 projection of ``f(x)`` / ``f(x, y)`` onto the local basis.

    A composite Gauss rule is used so that functions with kinks inside an
    element (truncated Hertzian profiles) are still integrated accurately.
    """
    m = space.mesh
    dim = space.dim
    if subdivisions is None:
        subdivisions = 32 if dim == 1 else 3
    coeffs = np.empty(space.ndofs)
    for p in np.unique(m.degree):
        p = int(p)
        elems = np.flatnonzero(m.degree == p)
        rule = composite_gauss(points or p + 4, subdivisions, dim)
        phi, _ = tabulate(p, rule.points)
        xq = m.elem_lo[elems][:, None, :] + 0.5 * (rule.points[None] + 1.0) * m.elem_extent[elems][:, None, :]
        fq = _call(f, xq.reshape(-1, dim)).reshape(len(elems), -1)
        c = (fq * rule.weights) @ phi / _mass_diag(p, dim)
        for k, e in enumerate(elems):
            coeffs[space.offsets[e]:space.offsets[e + 1]] = c[k]
    return DgField(space, coeffs)


# --------------------------------------------------------------------------
# traces
# --------------------------------------------------------------------------
def _face_rows(space: DgSpace, face: int) -> np.ndarray:
    return np.flatnonzero(space.face.face == face)


def trace_pair(field: DgField, face: int):
    """One-sided values at the quadrature points of ``face``.

    Returns ``(minus, plus)``; ``plus`` is ``None`` on a boundary face.
    """
    s = field.space
    rows = _face_rows(s, face)
    vm = s.face.Em[rows] @ field.coeffs
    if s.mesh.face_boundary[face]:
        return vm, None
    return vm, s.face.Ep[rows] @ field.coeffs


def jump(field: DgField, face: int) -> np.ndarray:
    """Vector jump ``v_m N_m + v_p N_p`` (``v N`` on the boundary), shape (nq, dim)."""
    vm, vp = trace_pair(field, face)
    n = field.space.mesh.face_normal[face]
    scalar = vm if vp is None else vm - vp
    return scalar[:, None] * n[None, :]


def average(field: DgField, face: int) -> np.ndarray:
    vm, vp = trace_pair(field, face)
    return vm if vp is None else 0.5 * (vm + vp)


# --------------------------------------------------------------------------
# norms
# --------------------------------------------------------------------------
def _difference_data(space: DgSpace, field: Optional[DgField], reference, reference_grad):
    """Values/gradients of ``reference - field`` at volume and face points."""
    V, F = space.vol, space.face
    c = np.zeros(space.ndofs) if field is None else field.coeffs
    uv = V.E @ c
    gv = space.gradient(c)
    um, up = F.Em @ c, F.Ep @ c
    dm, dp = F.Dm @ c, F.Dp @ c
    if reference is not None:
        rv = _call(reference, V.x)
        rf = _call(reference, F.x)
        uv, um, up = rv - uv, rf - um, rf - up
        # a continuous reference has no jump across interior faces
        up = np.where(F.boundary, 0.0, up)
        if reference_grad is not None:
            gref_v = np.column_stack([_call(g, V.x) for g in reference_grad])
            gref_f = np.column_stack([_call(g, F.x) for g in reference_grad])
            gv = gref_v - gv
            dnf = np.sum(gref_f * F.normal, axis=1)
            dm, dp = dnf - dm, dnf - dp
        else:
            raise ValueError("reference_grad is required with reference")
    return uv, gv, um, up, dm, dp


def broken_norm(field: Optional[DgField], a_k: float = 10.0, beta: float = 1.0, *, reference=None,
                reference_grad=None, space: Optional[DgSpace] = None) -> float:
    """Mesh-dependent energy norm.

    ``|||v|||^2 = sum_K |v|_{1,K}^2 + sum_e a_k p_e^2 / |e|^beta int_e [v]^2``

    With ``reference`` (and its gradient components ``reference_grad``) the
    norm of ``reference - field`` is returned.
    """
    return float(np.sqrt(_broken_parts(field, a_k, beta, reference, reference_grad, space)[:2].sum()))


def broken_norm_nu(field: Optional[DgField], a_k: float = 10.0, beta: float = 1.0, *, reference=None,
                   reference_grad=None, space: Optional[DgSpace] = None) -> float:
    """:func:`broken_norm` plus ``sum_e |e|^beta / p_e^2 int_e {dv/dnu}^2``."""
    return float(np.sqrt(_broken_parts(field, a_k, beta, reference, reference_grad, space).sum()))


def _broken_parts(field, a_k, beta, reference, reference_grad, space):
    if a_k <= 0 or beta < 1:
        raise ValueError("broken norms need a_k > 0 and beta >= 1")
    space = space or field.space
    F = space.face
    _, gv, um, up, dm, dp = _difference_data(space, field, reference, reference_grad)
    grad_part = np.sum(space.vol.w * np.sum(gv**2, axis=1))
    jmp = um - up
    jump_part = np.sum(F.w * F.sigma(a_k, beta) * jmp**2)
    avg = F.am * dm + F.ap * dp
    flux_part = np.sum(F.w * F.measure**beta / F.degree.astype(float) ** 2 * avg**2)
    return np.array([grad_part, jump_part, flux_part])


def l2_norm(field: DgField) -> float:
    v = field.at_quadrature()
    return float(np.sqrt(np.sum(field.space.vol.w * v**2)))


def l2_error(field: DgField, reference: Callable, points: Optional[int] = None, subdivisions: int = 4) -> float:
    """``||reference - field||_{L2}`` on a composite Gauss rule per element.

    The rule is independent of the assembly quadrature so that smooth,
    non-polynomial references are integrated to near roundoff.
    """
    s = field.space
    m = s.mesh
    total = 0.0
    for p in np.unique(m.degree):
        p = int(p)
        elems = np.flatnonzero(m.degree == p)
        rule = composite_gauss(points or p + 6, subdivisions, s.dim)
        phi, _ = tabulate(p, rule.points)
        xq = m.elem_lo[elems][:, None, :] + 0.5 * (rule.points[None] + 1.0) * m.elem_extent[elems][:, None, :]
        rq = _call(reference, xq.reshape(-1, s.dim)).reshape(len(elems), -1)
        c = np.stack([field.block(e) for e in elems])
        d = rq - c @ phi.T
        total += float(np.sum((d**2 @ rule.weights) * m.elem_measure[elems] / 2.0**s.dim))
    return float(np.sqrt(total))


def integral(field: DgField) -> float:
    return float(np.sum(field.space.vol.w * field.at_quadrature()))
