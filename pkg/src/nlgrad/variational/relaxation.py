"""Relaxed functionals and an explicit recovery sequence for the double well."""
from __future__ import annotations

import math
import warnings
from dataclasses import replace

import numpy as np

from ..grid import GridFunction
from ..kernel import CutoffProfile
from ..nlops import nl_divergence, nl_gradient, p_translate
from .envelope import EnvelopeError, EnvelopeTable, convex_envelope, sample_integrand
from .integrands import Integrand
from .problem import MinimizeResult, VariationalProblem, descent

__all__ = [
    "envelope_for",
    "relaxed_functional_eval",
    "minimize_relaxed",
    "laminate_sequence",
]


def _require_gradient_only(f: Integrand):
    if f.depends_on_z or f.x_dependence != "none":
        raise ValueError("relaxation is implemented for integrands f(A) only")


def envelope_for(f: Integrand, values_range, dim: int = 1, points: int = 1025) -> EnvelopeTable:
    """Envelope table over ``1.5x`` the given range of gradient values."""
    _require_gradient_only(f)
    lo, hi = float(np.min(values_range)), float(np.max(values_range))
    mid, half = 0.5 * (lo + hi), 0.75 * max(hi - lo, 1e-3)

    def fa(A):
        return f.eval(None, np.zeros(A.shape[1:]), A)

    axes, vals = sample_integrand(fa, mid - half, mid + half, points, dim)
    return convex_envelope(axes, vals)


def relaxed_functional_eval(u: GridFunction, prob: VariationalProblem, env: EnvelopeTable) -> float:
    """``sum_{Omega_{-delta}} f**(Du) + sum_{Omega \\ Omega_{-delta}} f(Du)``, times ``h^n``."""
    _require_gradient_only(prob.integrand)
    prob.check_admissible(u)
    D = prob.grad(u).values
    inner, om = prob.mask.inner, prob.mask.omega
    collar = om & ~inner
    z = np.zeros(int(collar.sum()))
    total = np.sum(env.lookup(D[:, inner])) + np.sum(prob.integrand.eval(None, z, D[:, collar]))
    return float(total * prob.grid.cell_volume)


def _relaxed_density(prob: VariationalProblem, value, slope, D: np.ndarray):
    """Values and ``A``-derivatives of the relaxed integrand on ``Omega`` nodes."""
    f = prob.integrand
    inner, om = prob.mask.inner, prob.mask.omega
    collar = om & ~inner
    val = np.zeros(prob.grid.shape)
    dA = np.zeros_like(D)
    val[inner] = value(D[:, inner])
    dA[:, inner] = slope(D[:, inner])
    z = np.zeros(int(collar.sum()))
    val[collar] = f.eval(None, z, D[:, collar])
    dA[:, collar] = f.dA(None, z, D[:, collar])
    return val, dA


def minimize_relaxed(prob: VariationalProblem, env: EnvelopeTable, tol: float = 1e-8, max_iter: int = 5000,
                     u0: GridFunction | None = None) -> MinimizeResult:
    """Descent on the relaxed functional with the C^1 companion of a 1D envelope table.

    ``value`` of the result is the relaxed functional with the piecewise-linear
    lookup, as returned by ``relaxed_functional_eval``.
    """
    _require_gradient_only(prob.integrand)
    if env.dim != 1:
        raise ValueError("relaxed descent needs a 1D envelope table")
    value, slope = env.smoothed()
    free, h_n = prob.free, prob.grid.cell_volume

    def fun(v):
        D = prob.grad(prob.embed(v)).values
        try:
            return float(np.sum(_relaxed_density(prob, value, slope, D)[0]) * h_n)
        except EnvelopeError:
            # trial steps outside the table are rejected by the line search
            return math.inf

    def grad(v):
        D = prob.grad(prob.embed(v)).values
        flux = GridFunction(prob.grid, _relaxed_density(prob, value, slope, D)[1])
        return -nl_divergence(flux, prob.s, prob.delta, b0=prob.b0).scalar[free]

    start = prob.g if u0 is None else u0
    x, F, trace, ok, gn, it, msg = descent(fun, grad, start.scalar[free], weight=h_n, tol=tol, max_iter=max_iter)
    if not ok:
        warnings.warn(f"relaxed descent did not converge: {msg}", RuntimeWarning, stacklevel=2)
    u = prob.embed(x)
    return MinimizeResult(u, relaxed_functional_eval(u, prob, env), trace, ok, gn, it, msg,
                          extra={"smoothed_value": F})


def _smooth_indicator(x, lo, hi, ramp):
    """1 on ``[lo + ramp, hi - ramp]``, 0 outside ``(lo, hi)``, smooth in between."""
    if ramp <= 0:
        return ((x > lo) & (x < hi)).astype(float)
    c = CutoffProfile(delta=ramp, b0=1e-9)
    return (1.0 - c(x - lo)) * (1.0 - c(hi - x))


def _pwm_wells(A: np.ndarray, active: np.ndarray, cells: int, wells) -> np.ndarray:
    """Pick a well per active node, in blocks of ``cells`` consecutive nodes.

    Wells are assigned to aligned node pairs ``(2k, 2k+1)`` so the slope
    carries (almost) no Nyquist mode, which the spectral derivative drops.
    Each block starts with its share of upper-well pairs; the rounding
    error is carried to the next block, so partial sums of ``w - A`` stay
    within two well gaps of zero.
    """
    wm, wp = wells
    w = np.where(A >= wp, wp, wm).astype(float)
    idx = np.flatnonzero(active)
    if idx.size == 0:
        return w
    pairs = np.split(idx, np.flatnonzero(np.diff(idx // 2)) + 1)
    lam = np.array([np.sum((A[p] - wm) / (wp - wm)) for p in pairs])
    size = np.array([len(p) for p in pairs])
    per_block = max(cells // 2, 1)
    carry = 0.0
    for start in range(0, len(pairs), per_block):
        sl = slice(start, start + per_block)
        target = lam[sl].sum() + carry
        placed = 0.0
        for p, m in zip(pairs[sl], size[sl]):
            # fill with the upper well while it brings us closer to the target
            up = abs(target - placed - m) <= abs(target - placed)
            w[p] = wp if up else wm
            placed += m if up else 0
        carry = target - placed
    return w


def laminate_sequence(u_base: GridFunction, prob: VariationalProblem, cells: int, ramp: float,
                      wells=(-1.0, 1.0)) -> GridFunction:
    """Admissible field whose nonlocal gradient laminates between the two wells (1D).

    Where ``A = D^s u_base`` lies strictly between the wells on ``Omega_{-delta}``,
    the slope ``w - A`` with ``w`` alternating between the wells in blocks of
    ``cells`` nodes is integrated to a bounded sawtooth ``phi`` and added
    through ``P^s``, since ``D^s P^s phi = phi'``.  A smooth cutoff of width
    ``ramp`` vanishing off ``Omega_{-delta}`` restores the complementary values.
    """
    grid = prob.grid
    if grid.dim != 1:
        raise ValueError("laminate_sequence is one dimensional")
    if cells < 2:
        raise ValueError("a laminate block needs at least two cells")
    wm, wp = wells
    A = nl_gradient(u_base, prob.s, prob.delta, b0=prob.b0).values[0]
    x = grid.axis
    inner_x = x[prob.mask.inner]
    chi = _smooth_indicator(x, inner_x.min() - 0.5 * grid.spacing, inner_x.max() + 0.5 * grid.spacing, ramp)
    active = prob.mask.inner & (A > wm) & (A < wp)
    w = _pwm_wells(A, active, cells, wells)
    slope = np.where(active, w - A, 0.0)
    slope = slope - slope.mean()
    phi = GridFunction(grid, _antiderivative(slope, grid))
    v = p_translate(phi, prob.s, prob.delta, b0=prob.b0) if prob.s < 1 else phi
    return GridFunction(grid, u_base.scalar + chi * v.scalar)


def _antiderivative(slope: np.ndarray, grid) -> np.ndarray:
    """Periodic spectral antiderivative of a mean-zero sample."""
    xi = grid.derivative_frequencies[0]
    S = np.fft.fft(slope)
    out = np.zeros_like(S)
    nz = xi != 0
    out[nz] = S[nz] / (2j * math.pi * xi[nz])
    return np.fft.ifft(out).real
