"""Cell problems for the homogenized integrand and the oscillating-coefficient sweep."""
from __future__ import annotations

import math
import warnings

import numpy as np

from ..grid import GridFunction, PeriodicGrid
from ..nlops import classical_divergence, classical_gradient
from .integrands import Integrand
from .problem import descent

__all__ = ["CellResult", "homogenized_integrand", "cell_average"]


class CellResult(float):
    """Float value of ``f_hom(A)`` carrying the corrector and solver status."""

    def __new__(cls, value, corrector=None, converged=True, iterations=0):
        obj = super().__new__(cls, value)
        obj.corrector = corrector
        obj.converged = converged
        obj.iterations = iterations
        return obj


def homogenized_integrand(f_cell: Integrand, A, k: int = 1, *, points_per_cell: int = 64,
                          tol: float = 1e-10, max_iter: int = 20000) -> CellResult:
    """``(1/k^n) min_v int_{kY} f(y, A + grad v) dy`` over ``kY``-periodic grid fields ``v``.

    Uses the classical spectral gradient on a periodic grid with
    ``points_per_cell`` nodes per unit cell.  The integrand must be
    1-periodic in ``y`` and independent of ``z``.
    """
    if k not in (1, 2, 4):
        raise ValueError("cell multiplicity k must be 1, 2 or 4")
    if f_cell.x_dependence == "periodic" and abs(f_cell.period - 1.0) > 1e-12:
        raise ValueError("cell integrands must have unit period")
    if f_cell.depends_on_z:
        raise ValueError("cell problems need integrands independent of z")
    A = np.atleast_1d(np.asarray(A, dtype=float))
    n = A.size
    grid = PeriodicGrid(n, float(k), k * points_per_cell)
    y = grid.coordinates
    z0 = np.zeros(grid.shape)
    A_field = A.reshape((n,) + (1,) * n) * np.ones((n,) + grid.shape)
    vol = grid.cell_volume / k ** n

    def fun(v):
        Dv = classical_gradient(GridFunction(grid, v.reshape(grid.shape))).values
        return float(np.sum(f_cell.eval(y, z0, A_field + Dv)) * vol)

    def grad(v):
        Dv = classical_gradient(GridFunction(grid, v.reshape(grid.shape))).values
        flux = GridFunction(grid, f_cell.dA(y, z0, A_field + Dv))
        # L^2 gradient with respect to the averaged measure
        return (-classical_divergence(flux).scalar).ravel()

    x, F, _, ok, gn, it, msg = descent(fun, grad, np.zeros(grid.points ** n), weight=vol, tol=tol,
                                       max_iter=max_iter)
    if not ok:
        warnings.warn(f"cell problem did not converge: {msg}", RuntimeWarning, stacklevel=2)
    return CellResult(F, GridFunction(grid, x.reshape(grid.shape)), ok, it)


def cell_average(f_cell: Integrand, A, points_per_cell: int = 256) -> float:
    """``bar f(A) = int_Y f(y, A) dy`` by the midpoint rule over one cell."""
    A = np.atleast_1d(np.asarray(A, dtype=float))
    n = A.size
    t = (np.arange(points_per_cell) + 0.5) / points_per_cell
    y = np.stack(np.meshgrid(*([t] * n), indexing="ij"))
    A_field = A.reshape((n,) + (1,) * n) * np.ones(y.shape)
    return float(np.mean(f_cell.eval(y, np.zeros(y.shape[1:]), A_field)))
