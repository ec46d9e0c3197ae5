"""Complementary-value problems: functional, first variation, descent, linear oracle."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from ..grid import DomainMask, GridFunction, PeriodicGrid
from ..kernel import CutoffProfile
from ..nlops import nl_divergence, nl_gradient
from .integrands import Integrand

__all__ = [
    "InadmissibleError",
    "VariationalProblem",
    "MinimizeResult",
    "functional_eval",
    "functional_gradient",
    "minimize",
    "descent",
    "solve_quadratic",
    "affine_datum",
]


class InadmissibleError(ValueError):
    """Field violates the complementary-value condition."""


@dataclass(frozen=True, eq=False)
class VariationalProblem:
    """``F(u) = sum_Omega f(x, u, D^s u) h^n`` over fields with ``u = g`` off ``Omega_{-delta}``.

    ``g`` defaults to zero.  Nodes outside ``Omega_delta`` are fixed as well;
    they never influence ``D^s u`` on ``Omega``.
    """

    integrand: Integrand
    mask: DomainMask
    s: float
    g: Optional[GridFunction] = None
    b0: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.s <= 1.0:
            raise ValueError(f"s must lie in [0, 1], got {self.s}")
        if self.g is None:
            object.__setattr__(self, "g", GridFunction(self.grid, np.zeros(self.grid.shape)))
        elif self.g.grid != self.grid or self.g.components != 1:
            raise ValueError("boundary datum must be a scalar field on the problem grid")

    @property
    def grid(self) -> PeriodicGrid:
        return self.mask.grid

    @property
    def delta(self) -> float:
        return self.mask.delta

    @property
    def free(self) -> np.ndarray:
        return self.mask.inner

    def with_s(self, s: float) -> "VariationalProblem":
        return VariationalProblem(self.integrand, self.mask, s, self.g, self.b0)

    def embed(self, free_values: np.ndarray) -> GridFunction:
        u = np.array(self.g.scalar)
        u[self.free] = free_values
        return GridFunction(self.grid, u)

    def check_admissible(self, u: GridFunction, tol: float = 1e-12):
        if u.grid != self.grid:
            raise InadmissibleError("field lives on a different grid")
        viol = np.abs(u.scalar - self.g.scalar)[~self.free]
        if viol.size and viol.max() > tol:
            raise InadmissibleError(f"complementary values violated by {viol.max():.2e}")

    def grad(self, u: GridFunction) -> GridFunction:
        return nl_gradient(u, self.s, self.delta, b0=self.b0)


def _pieces(u: GridFunction, prob: VariationalProblem):
    D = prob.grad(u).values
    om = prob.mask.omega
    x = prob.grid.coordinates[:, om]
    return D, om, x, u.scalar[om], D[:, om]


def functional_eval(u: GridFunction, prob: VariationalProblem, *, check: bool = True) -> float:
    if check:
        prob.check_admissible(u)
    _, _, x, z, A = _pieces(u, prob)
    vals = prob.integrand.eval(x, z, A)
    return float(np.sum(vals) * prob.grid.cell_volume)


def functional_gradient(u: GridFunction, prob: VariationalProblem, *, check: bool = True) -> GridFunction:
    """``L^2`` first variation ``f_z 1_Omega - div(1_Omega f_A)`` on free nodes, zero elsewhere.

    The directional derivative along an admissible ``v`` is ``sum grad * v h^n``.
    """
    if check:
        prob.check_admissible(u)
    D, om, x, z, A = _pieces(u, prob)
    n = prob.grid.dim
    flux = np.zeros_like(D)
    flux[:, om] = prob.integrand.dA(x, z, A)
    out = -nl_divergence(GridFunction(prob.grid, flux), prob.s, prob.delta, b0=prob.b0).scalar
    if prob.integrand.depends_on_z:
        out[om] += prob.integrand.dz(x, z, A)
    out[~prob.free] = 0.0
    return GridFunction(prob.grid, out)


@dataclass
class MinimizeResult:
    u: GridFunction
    value: float
    trace: list
    converged: bool
    grad_norm: float
    iterations: int
    message: str = ""
    extra: dict = field(default_factory=dict)


def descent(fun, grad, x0: np.ndarray, *, weight: float = 1.0, tol: float = 1e-8, max_iter: int = 5000,
            c1: float = 1e-4, shrink: float = 0.5, max_backtrack: int = 60):
    """Gradient descent with Barzilai-Borwein trial steps and Armijo backtracking.

    ``weight`` is the quadrature weight of the inner product (``h^n``), so
    ``grad`` is an ``L^2`` gradient and ``tol`` bounds its ``L^2`` norm.
    Near roundoff level the Armijo test on function values is replaced by
    the approximate (derivative-based) Armijo condition of Hager and Zhang;
    such steps never increase ``F`` by more than ``1e-12 |F|``.

    Returns ``(x, F, trace, converged, grad_norm, iterations, message)``.
    """
    x = np.array(x0, dtype=float)
    F = fun(x)
    g = grad(x)
    gn = math.sqrt(float(g @ g) * weight)
    trace = [(0, F)]
    alpha = 1.0 / max(gn, 1.0)
    x_prev = g_prev = None
    it = 0
    message = "converged"
    while gn > tol:
        if it >= max_iter:
            message = f"max_iter reached with gradient norm {gn:.3e}"
            break
        if x_prev is not None:
            dx, dg = x - x_prev, g - g_prev
            curv = float(dx @ dg)
            if curv > 0:
                alpha = float(dx @ dx) / curv
        slope = -float(g @ g) * weight
        step = alpha
        accepted = False
        for _ in range(max_backtrack):
            x_new = x - step * g
            F_new = fun(x_new)
            if F_new <= F + c1 * step * slope:
                accepted = True
                break
            if abs(F_new - F) <= 1e-12 * max(abs(F), 1e-300) or abs(F_new - F) <= 1e-300:
                g_new = grad(x_new)
                if -float(g_new @ g) * weight <= (1 - 2 * c1) * -slope:
                    accepted = True
                    break
            step *= shrink
        if not accepted:
            message = f"line search stalled with gradient norm {gn:.3e}"
            break
        x_prev, g_prev = x, g
        x, F = x_new, F_new
        g = grad(x)
        gn = math.sqrt(float(g @ g) * weight)
        it += 1
        trace.append((it, F))
    return x, F, trace, gn <= tol, gn, it, message


def minimize(prob: VariationalProblem, tol: float = 1e-8, max_iter: int = 5000,
             u0: Optional[GridFunction] = None) -> MinimizeResult:
    """Projected descent on the affine set ``{u = g off Omega_{-delta}}``.

    Iterates are parametrised by their free-node values, so the collar
    always carries ``g`` exactly.  Non-convergence is reported through a
    warning and ``converged = False``.
    """
    free = prob.free
    h_n = prob.grid.cell_volume

    def fun(v):
        return functional_eval(prob.embed(v), prob, check=False)

    def grad(v):
        return functional_gradient(prob.embed(v), prob, check=False).scalar[free]

    start = prob.g if u0 is None else u0
    if u0 is not None:
        prob.check_admissible(u0)
    x, F, trace, ok, gn, it, msg = descent(fun, grad, start.scalar[free], weight=h_n, tol=tol, max_iter=max_iter)
    if not ok:
        warnings.warn(f"minimize did not converge: {msg}", RuntimeWarning, stacklevel=2)
    return MinimizeResult(prob.embed(x), F, trace, ok, gn, it, msg)


def solve_quadratic(prob: VariationalProblem, rtol: float = 1e-13, maxiter: int = 20000) -> GridFunction:
    """Linear-solve oracle for ``f = a(x)|A|^2 - 2 q(x) z``.

    Solves ``-div(1_Omega a D u) = 1_Omega q`` on the free nodes with
    ``u = g`` elsewhere, by conjugate gradients on the free-node vector.
    The coefficient and source are read off the integrand's derivatives.
    """
    grid, free, om = prob.grid, prob.free, prob.mask.omega
    x = grid.coordinates[:, om]
    n = grid.dim
    zeros_z = np.zeros(int(om.sum()))
    unit = np.zeros((n, zeros_z.size))
    unit[0] = 1.0
    coef = 0.5 * prob.integrand.dA(x, zeros_z, unit)[0]
    q = -0.5 * prob.integrand.dz(x, zeros_z, unit * 0) if prob.integrand.depends_on_z else 0.0 * zeros_z

    def apply_full(u):
        D = nl_gradient(GridFunction(grid, u), prob.s, prob.delta, b0=prob.b0).values
        flux = np.zeros_like(D)
        flux[:, om] = coef * D[:, om]
        return -nl_divergence(GridFunction(grid, flux), prob.s, prob.delta, b0=prob.b0).scalar

    def matvec(v):
        u = np.zeros(grid.shape)
        u[free] = v
        return apply_full(u)[free]

    rhs_full = np.zeros(grid.shape)
    rhs_full[om] = q
    b = rhs_full[free] - apply_full(np.where(free, 0.0, prob.g.scalar))[free]
    m = int(free.sum())
    op = LinearOperator((m, m), matvec=matvec, dtype=float)
    sol, info = cg(op, b, rtol=rtol, atol=0.0, maxiter=maxiter)
    if info != 0:
        warnings.warn(f"conjugate gradients did not converge (info={info})", RuntimeWarning, stacklevel=2)
    return prob.embed(sol)


def affine_datum(mask: DomainMask, slope) -> GridFunction:
    """``g(x) = slope . x`` on a neighbourhood of ``Omega_delta``, tapered before the seam.

    ``D^s g`` on ``Omega`` only sees ``Omega_delta``, where ``g`` is exactly affine.
    """
    grid = mask.grid
    slope = np.atleast_1d(np.asarray(slope, dtype=float))
    if slope.size != grid.dim:
        raise ValueError("slope must have one entry per dimension")
    reach = float(np.max(np.abs(grid.coordinates[:, mask.outer])))
    half = 0.5 * grid.box_length
    taper = CutoffProfile(delta=half - grid.spacing, b0=min((reach + grid.spacing) / (half - grid.spacing), 0.99))
    window = np.ones(grid.shape)
    for j in range(grid.dim):
        window = window * taper(np.abs(grid.coordinates[j]))
    lin = np.tensordot(slope, grid.coordinates, axes=1)
    return GridFunction(grid, lin * window)
