"""Dimensionless groups of the line- and point-contact EHL models.

All downstream code works with the dimensionless pressure ``u`` and the
groups returned by :func:`derive`; the raw physical inputs only enter here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Optional

from .errors import ParameterDomainError

CONTACT_KINDS = ("line", "point")


@dataclass(frozen=True)
class PhysicalInputs:
    """Raw model inputs.

    ``eta0`` [Pa s], ``Rx`` [m], ``alpha`` [1/Pa] and ``p0`` [Pa] are
    dimensional; ``G0``, ``U``, ``W`` and ``h00_init`` are dimensionless.
    ``z_override`` replaces the Roelands exponent computed from ``eta0``.
    """

    eta0: float
    Rx: float
    G0: float
    U: float
    W: float
    alpha: float
    p0: float
    h00_init: float
    z_override: Optional[float] = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if not math.isfinite(v):
                raise ParameterDomainError(f"{f.name} must be finite, got {v!r}")
        for name in ("eta0", "Rx", "W", "alpha"):
            if getattr(self, name) <= 0:
                raise ParameterDomainError(f"{name} must be > 0, got {getattr(self, name)!r}")


@dataclass(frozen=True)
class DerivedParams:
    E_prime: float
    b: float
    pH: float
    z: float
    lam: float
    contact_kind: str = "line"

    def __post_init__(self):
        if self.contact_kind not in CONTACT_KINDS:
            raise ParameterDomainError(f"unknown contact kind {self.contact_kind!r}")
        for name in ("E_prime", "b", "pH", "z", "lam"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ParameterDomainError(f"derived {name} must be finite and > 0, got {v!r}")


def paper_defaults() -> PhysicalInputs:
    """Operating point used throughout the line-contact model."""
    return PhysicalInputs(
        eta0=0.04,
        Rx=0.02,
        G0=3500.0,
        U=7.3e-11,
        W=1.3e-4,
        alpha=1.59e-8,
        p0=1.98e-8,
        h00_init=0.0000015042,
    )


def _checked(name: str, value: float) -> float:
    if not math.isfinite(value) or value <= 0:
        raise ParameterDomainError(f"formula for {name} produced {value!r}")
    return value


def roelands_exponent(eta0: float, alpha: float, log_base: str = "e") -> float:
    """``z = alpha / (5.1e-9 (log eta0 + 9.67))``; natural log unless ``log_base='10'``."""
    if eta0 <= 0:
        raise ParameterDomainError(f"formula for z: log of non-positive eta0={eta0!r}")
    if log_base == "e":
        lg = math.log(eta0)
    elif log_base == "10":
        lg = math.log10(eta0)
    else:
        raise ParameterDomainError(f"log_base must be 'e' or '10', got {log_base!r}")
    return _checked("z", alpha / (5.1e-9 * (lg + 9.67)))


def derive(inputs: PhysicalInputs, kind: str = "line", log_base: str = "e") -> DerivedParams:
    if kind not in CONTACT_KINDS:
        raise ParameterDomainError(f"unknown contact kind {kind!r}")
    E = _checked("E = G0/alpha", inputs.G0 / inputs.alpha)
    # half-width exactly as printed: 4 Rx / sqrt(W / 2 pi)
    b = _checked("b = 4 Rx / sqrt(W/(2 pi))", 4.0 * inputs.Rx / math.sqrt(inputs.W / (2.0 * math.pi)))
    pH = _checked("pH = E b / (4 Rx)", E * b / (4.0 * inputs.Rx))
    if inputs.z_override is not None:
        z = _checked("z (override)", float(inputs.z_override))
    else:
        z = roelands_exponent(inputs.eta0, inputs.alpha, log_base)
    lam = _checked("lambda = 12 E Rx^3 U / (b^3 pH)", 12.0 * E * inputs.Rx**3 * inputs.U / (b**3 * pH))
    return DerivedParams(E_prime=E, b=b, pH=pH, z=z, lam=lam, contact_kind=kind)
