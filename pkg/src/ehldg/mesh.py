"""Structured interval / rectangle partitions with explicit face topology.

Elements are numbered x-fastest (``e = iy * nx + ix``).  Every face stores a
*minus* element, whose outward unit normal is ``face_normal``, and a *plus*
element (``-1`` on the boundary).  In 2D all x-normal faces come first,
followed by the y-normal faces.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import MeshError


@dataclass(frozen=True)
class DomainSpec:
    bounds: tuple  # ((lo, hi),) or ((xlo, xhi), (ylo, yhi))
    cells: tuple

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        cells = tuple(int(c) for c in np.atleast_1d(self.cells))
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "cells", cells)
        if len(bounds) not in (1, 2):
            raise MeshError(f"only 1D and 2D domains are supported, got dim={len(bounds)}")
        if len(cells) != len(bounds):
            raise MeshError("cells must give one count per axis")
        for (lo, hi), n in zip(bounds, cells):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise MeshError(f"invalid axis bounds ({lo}, {hi})")
            if n < 1:
                raise MeshError(f"cell count must be >= 1, got {n}")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def measure(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.bounds]))


class Mesh:
    """Immutable tensor-product partition; build with :func:`build`."""

    def __init__(self, breakpoints: Sequence[np.ndarray], degree):
        self.breakpoints = tuple(np.asarray(b, dtype=float) for b in breakpoints)
        for b in self.breakpoints:
            b.setflags(write=False)
        self.dim = len(self.breakpoints)
        self.shape = tuple(len(b) - 1 for b in self.breakpoints)
        self.n_elements = int(np.prod(self.shape))

        degree = np.asarray(degree, dtype=int)
        if degree.ndim == 0:
            degree = np.full(self.n_elements, int(degree))
        if degree.shape != (self.n_elements,):
            raise MeshError(f"degree must be scalar or length {self.n_elements}")
        if np.any(degree < 1):
            raise MeshError("polynomial degree must be >= 1 on every element")
        self.degree = degree

        self._build_elements()
        self._build_faces()
        for arr in vars(self).values():
            if isinstance(arr, np.ndarray):
                arr.setflags(write=False)

    # -- construction -------------------------------------------------
    def _build_elements(self):
        if self.dim == 1:
            (bx,) = self.breakpoints
            self.elem_lo = bx[:-1, None].copy()
            self.elem_hi = bx[1:, None].copy()
        else:
            bx, by = self.breakpoints
            nx, ny = self.shape
            ix = np.tile(np.arange(nx), ny)
            iy = np.repeat(np.arange(ny), nx)
            self.elem_lo = np.column_stack([bx[ix], by[iy]])
            self.elem_hi = np.column_stack([bx[ix + 1], by[iy + 1]])
        self.elem_extent = self.elem_hi - self.elem_lo
        self.elem_size = np.sqrt(np.sum(self.elem_extent**2, axis=1))
        self.elem_measure = np.prod(self.elem_extent, axis=1)

    def _build_faces(self):
        minus, plus, normal, measure, lo, hi = [], [], [], [], [], []
        if self.dim == 1:
            n = self.shape[0]
            bx = self.breakpoints[0]
            size = self.elem_size
            for k in range(n + 1):
                if k == 0:
                    minus.append(0); plus.append(-1); normal.append([-1.0])
                    measure.append(size[0])
                elif k == n:
                    minus.append(n - 1); plus.append(-1); normal.append([1.0])
                    measure.append(size[n - 1])
                else:
                    minus.append(k - 1); plus.append(k); normal.append([1.0])
                    # points carry no measure; use the smaller neighbour size
                    measure.append(min(size[k - 1], size[k]))
                lo.append([bx[k]]); hi.append([bx[k]])
        else:
            bx, by = self.breakpoints
            nx, ny = self.shape
            eid = lambda i, j: j * nx + i  # noqa: E731
            for j in range(ny):
                for k in range(nx + 1):
                    if k == 0:
                        minus.append(eid(0, j)); plus.append(-1); normal.append([-1.0, 0.0])
                    elif k == nx:
                        minus.append(eid(nx - 1, j)); plus.append(-1); normal.append([1.0, 0.0])
                    else:
                        minus.append(eid(k - 1, j)); plus.append(eid(k, j)); normal.append([1.0, 0.0])
                    measure.append(by[j + 1] - by[j])
                    lo.append([bx[k], by[j]]); hi.append([bx[k], by[j + 1]])
            for k in range(ny + 1):
                for i in range(nx):
                    if k == 0:
                        minus.append(eid(i, 0)); plus.append(-1); normal.append([0.0, -1.0])
                    elif k == ny:
                        minus.append(eid(i, ny - 1)); plus.append(-1); normal.append([0.0, 1.0])
                    else:
                        minus.append(eid(i, k - 1)); plus.append(eid(i, k)); normal.append([0.0, 1.0])
                    measure.append(bx[i + 1] - bx[i])
                    lo.append([bx[i], by[k]]); hi.append([bx[i + 1], by[k]])
        self.face_minus = np.array(minus, dtype=int)
        self.face_plus = np.array(plus, dtype=int)
        self.face_normal = np.array(normal, dtype=float)
        self.face_measure = np.array(measure, dtype=float)
        self.face_lo = np.array(lo, dtype=float)
        self.face_hi = np.array(hi, dtype=float)
        self.face_boundary = self.face_plus < 0
        self.face_axis = np.argmax(np.abs(self.face_normal), axis=1)
        pm = self.degree[self.face_minus]
        pp = np.where(self.face_boundary, pm, self.degree[np.maximum(self.face_plus, 0)])
        self.face_degree = np.maximum(pm, pp)
        if np.any(self.face_measure <= 0):
            raise MeshError("face with non-positive measure")

    # -- queries ------------------------------------------------------
    @property
    def n_faces(self) -> int:
        return len(self.face_minus)

    @property
    def bounds(self) -> tuple:
        return tuple((float(b[0]), float(b[-1])) for b in self.breakpoints)

    @property
    def h(self) -> float:
        return float(self.elem_size.max())

    def normal_plus(self, face: int) -> np.ndarray:
        return -self.face_normal[face]

    def elements_of_face(self, face: int):
        return int(self.face_minus[face]), (None if self.face_boundary[face] else int(self.face_plus[face]))

    def __repr__(self):
        return f"Mesh(dim={self.dim}, shape={self.shape}, degree={sorted(set(self.degree.tolist()))})"


def build(spec: DomainSpec, degree=1) -> Mesh:
    breakpoints = [np.linspace(lo, hi, n + 1) for (lo, hi), n in zip(spec.bounds, spec.cells)]
    return Mesh(breakpoints, degree)


def refine_uniform(mesh: Mesh) -> Mesh:
    """Split every cell in half along each axis; children inherit the degree."""
    new_bp = []
    for b in mesh.breakpoints:
        fine = np.empty(2 * len(b) - 1)
        fine[0::2] = b
        fine[1::2] = 0.5 * (b[:-1] + b[1:])
        new_bp.append(fine)
    if mesh.dim == 1:
        degree = np.repeat(mesh.degree, 2)
    else:
        nx, ny = mesh.shape
        d = mesh.degree.reshape(ny, nx)
        degree = np.repeat(np.repeat(d, 2, axis=0), 2, axis=1).ravel()
    return Mesh(new_bp, degree)
