"""Integrands ``f(x, z, A)`` of nonlocal integral functionals.

Arrays follow the grid layout: ``x`` has shape ``(n, *shape)``, ``z`` has
``shape`` and ``A`` has ``(n, *shape)``.  ``f_A`` returns ``(n, *shape)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

__all__ = [
    "Integrand",
    "quadratic",
    "power",
    "double_well",
    "two_phase",
    "SourceLike",
]

SourceLike = Optional[Callable[[np.ndarray], np.ndarray]]


def _sq(A):
    return np.sum(A ** 2, axis=0)


def _zero_z(x, z, A):
    return np.zeros_like(z)


@dataclass(frozen=True)
class Integrand:
    name: str
    f: Callable
    f_z: Callable
    f_A: Callable
    p: float
    c: float
    C: float
    x_dependence: str = "none"
    period: Optional[float] = None
    depends_on_z: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("growth exponent must exceed 1")
        if self.x_dependence not in ("none", "explicit", "periodic"):
            raise ValueError(f"unknown x dependence {self.x_dependence!r}")
        if self.x_dependence == "periodic" and not (self.period and self.period > 0):
            raise ValueError("periodic integrands need a positive period")

    def eval(self, x, z, A):
        return self.f(x, z, A)

    def dz(self, x, z, A):
        return self.f_z(x, z, A)

    def dA(self, x, z, A):
        return self.f_A(x, z, A)

    def scaled(self, eps: float) -> "Integrand":
        """``f(x / eps, z, A)`` for a periodic integrand with unit period."""
        if self.x_dependence != "periodic":
            raise ValueError("only periodic integrands can be rescaled")
        f, fz, fA = self.f, self.f_z, self.f_A
        return replace(
            self,
            name=f"{self.name}[eps={eps:g}]",
            f=lambda x, z, A: f(x / eps, z, A),
            f_z=lambda x, z, A: fz(x / eps, z, A),
            f_A=lambda x, z, A: fA(x / eps, z, A),
            period=self.period * eps,
            params={**self.params, "eps": eps},
        )

    def growth_violations(self, rng: np.random.Generator, samples: int = 200, dim: int = 1,
                          scale: float = 5.0) -> int:
        """Count random triples violating ``c|A|^p - C <= f <= C(1 + |z|^p + |A|^p)``."""
        x = rng.uniform(-2, 2, size=(dim, samples))
        z = rng.normal(scale=scale, size=samples)
        A = rng.normal(scale=scale, size=(dim, samples))
        val = self.f(x, z, A)
        a = np.sqrt(_sq(A))
        lo = self.c * a ** self.p - self.C
        hi = self.C * (1 + np.abs(z) ** self.p + a ** self.p)
        slack = 1e-12 * (1 + np.abs(val))
        return int(np.sum((val < lo - slack) | (val > hi + slack)))


def _source(source, x):
    if source is None:
        return 0.0
    return source(x)


def quadratic(coef: float = 1.0, source: SourceLike = None) -> Integrand:
    """``coef |A|^2 - 2 q(x) z``."""
    def f(x, z, A):
        return coef * _sq(A) - 2.0 * _source(source, x) * z

    def fz(x, z, A):
        return -2.0 * _source(source, x) * np.ones_like(z)

    def fA(x, z, A):
        return 2.0 * coef * A

    return Integrand("quadratic", f, fz, fA, p=2.0, c=coef, C=max(coef, 1.0),
                     x_dependence="none" if source is None else "explicit",
                     depends_on_z=source is not None, params={"coef": coef, "source": source is not None})


def power(p: float = 4.0, source: SourceLike = None) -> Integrand:
    """``|A|^p / p - q(x) z``."""
    def f(x, z, A):
        return _sq(A) ** (p / 2) / p - _source(source, x) * z

    def fz(x, z, A):
        return -_source(source, x) * np.ones_like(z)

    def fA(x, z, A):
        return _sq(A) ** (p / 2 - 1) * A

    return Integrand(f"power{p:g}", f, fz, fA, p=p, c=1.0 / p, C=1.0,
                     x_dependence="none" if source is None else "explicit",
                     depends_on_z=source is not None, params={"p": p, "source": source is not None})


def double_well() -> Integrand:
    """``(|A|^2 - 1)^2``, non-convex with wells on the unit sphere."""
    def f(x, z, A):
        return (_sq(A) - 1.0) ** 2

    def fA(x, z, A):
        return 4.0 * (_sq(A) - 1.0) * A

    return Integrand("double_well", f, _zero_z, fA, p=4.0, c=0.5, C=1.0)


def two_phase(a=(1.0, 4.0), period: float = 1.0, source: SourceLike = None) -> Integrand:
    """``a(x)|A|^2 - 2 q(x) z`` with ``a`` switching between two values on half periods.

    The phases are laminated along the first coordinate.
    """
    a0, a1 = float(a[0]), float(a[1])

    def coef(x):
        frac = np.mod(x[0] / period, 1.0)
        return np.where(frac < 0.5, a0, a1)

    def f(x, z, A):
        return coef(x) * _sq(A) - 2.0 * _source(source, x) * z

    def fz(x, z, A):
        return -2.0 * _source(source, x) * np.ones_like(z)

    def fA(x, z, A):
        return 2.0 * coef(x) * A

    return Integrand("two_phase", f, fz, fA, p=2.0, c=min(a0, a1), C=max(a0, a1, 1.0),
                     x_dependence="periodic", period=period, depends_on_z=source is not None,
                     params={"a": [a0, a1], "period": period, "source": source is not None})
