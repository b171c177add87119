"""Exterior penalty for the non-negativity constraint ``u >= 0``."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

DEFAULT_EPS_P = 1e-6


def xi(u):
    """Negative part ``u^- = u - max(u, 0) = (u - |u|) / 2``."""
    u = np.asarray(u, dtype=float)
    return 0.5 * (u - np.abs(u))


def xi_derivative(u, at_zero: float = 0.5):
    """Derivative of :func:`xi`; ``at_zero`` picks the subgradient at ``u == 0``."""
    u = np.asarray(u, dtype=float)
    return np.where(u < 0, 1.0, np.where(u > 0, 0.0, at_zero))


@dataclass(frozen=True)
class PenaltyConfig:
    eps_p: float = DEFAULT_EPS_P
    schedule: Optional[Sequence[float]] = None
    enabled: bool = True

    def __post_init__(self):
        if not self.eps_p > 0:
            raise ValueError(f"eps_p must be > 0, got {self.eps_p!r}")
        if self.schedule is not None:
            s = tuple(float(v) for v in self.schedule)
            if any(v <= 0 for v in s):
                raise ValueError("penalty schedule entries must be > 0")
            if any(b >= a for a, b in zip(s, s[1:])):
                raise ValueError("penalty schedule must be strictly decreasing")
            object.__setattr__(self, "schedule", s)

    @property
    def stages(self) -> tuple:
        """Penalty values visited in order; the last one is ``eps_p``."""
        if not self.schedule:
            return (self.eps_p,)
        s = tuple(v for v in self.schedule if v > self.eps_p)
        return s + (self.eps_p,)

    @property
    def weight(self) -> float:
        return 1.0 / self.eps_p if self.enabled else 0.0

    def at(self, eps_p: float) -> "PenaltyConfig":
        return PenaltyConfig(eps_p=eps_p, enabled=self.enabled)


def continuation_schedule(start: float = 1e-2, stop: float = 1e-6, factor: float = 10.0) -> tuple:
    """Geometric sequence from ``start`` down to exactly ``stop``."""
    if not (start > 0 and stop > 0 and factor > 1):
        raise ValueError("need start, stop > 0 and factor > 1")
    out = []
    k = 0
    while start / factor**k > stop * (1 + 1e-9):
        out.append(start / factor**k)
        k += 1
    return tuple(out) + (float(stop),)


OFF = PenaltyConfig(enabled=False)
