"""Discrete convex envelopes by the linear-time Legendre transform (LLT).

The conjugate of samples ``(x_i, f_i)`` at sorted slopes ``p_k`` is read
off the lower convex hull: each slope picks the hull vertex where it fits
between the neighbouring edge slopes.  Applying the transform twice gives
the biconjugate ``f**``, the largest convex minorant on the grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator, make_interp_spline

__all__ = [
    "EnvelopeError",
    "EnvelopeTable",
    "lower_hull",
    "llt",
    "convex_envelope",
    "sample_integrand",
]


class EnvelopeError(ValueError):
    pass


def lower_hull(x: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Indices of the lower convex hull of sorted points (monotone chain)."""
    idx = []
    for i in range(len(x)):
        while len(idx) >= 2:
            a, b = idx[-2], idx[-1]
            # drop b if it lies on or above the segment a -> i
            if (f[b] - f[a]) * (x[i] - x[a]) >= (f[i] - f[a]) * (x[b] - x[a]):
                idx.pop()
            else:
                break
        idx.append(i)
    return np.array(idx)


def llt(x: np.ndarray, f: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Discrete conjugate ``f*(p_k) = max_i (p_k x_i - f_i)`` for sorted ``x`` and ``p``."""
    h = lower_hull(x, f)
    xh, fh = x[h], f[h]
    if len(h) == 1:
        return p * xh[0] - fh[0]
    edge = np.diff(fh) / np.diff(xh)
    # vertex j maximises p x - f for edge[j-1] <= p <= edge[j]
    j = np.searchsorted(edge, p, side="left")
    return p * xh[j] - fh[j]


def _uniform(axis: np.ndarray) -> bool:
    d = np.diff(axis)
    return axis.ndim == 1 and len(axis) >= 3 and np.all(d > 0) and np.allclose(d, d[0], rtol=1e-10, atol=0)


@dataclass(frozen=True, eq=False)
class EnvelopeTable:
    """Samples of ``f`` and of its biconjugate on a tensor grid in ``A``."""

    axes: tuple
    values: np.ndarray
    envelope: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def spacing(self) -> float:
        return max(float(a[1] - a[0]) for a in self.axes)

    def _check_range(self, A: np.ndarray):
        for j, ax in enumerate(self.axes):
            if np.any(A[j] < ax[0] - 1e-12) or np.any(A[j] > ax[-1] + 1e-12):
                raise EnvelopeError(
                    f"gradient values in [{A[j].min():.3g}, {A[j].max():.3g}] leave the envelope "
                    f"range [{ax[0]:.3g}, {ax[-1]:.3g}]"
                )

    def lookup(self, A) -> np.ndarray:
        """Piecewise (multi)linear interpolation of ``f**``; no extrapolation."""
        A = np.asarray(A, dtype=float)
        if A.shape[0] != self.dim:
            raise EnvelopeError("leading axis of A must match the table dimension")
        self._check_range(A)
        if self.dim == 1:
            return np.interp(A[0], self.axes[0], self.envelope)
        interp = RegularGridInterpolator(self.axes, self.envelope, method="linear")
        pts = np.moveaxis(A, 0, -1)
        return interp(pts)

    def slope(self, A) -> np.ndarray:
        """Derivative of the piecewise-linear 1D envelope (one-sided at nodes)."""
        if self.dim != 1:
            raise EnvelopeError("slope lookup is implemented for 1D tables")
        A = np.asarray(A, dtype=float)
        self._check_range(A)
        ax = self.axes[0]
        d = np.diff(self.envelope) / np.diff(ax)
        k = np.clip(np.searchsorted(ax, A[0], side="right") - 1, 0, len(d) - 1)
        return d[k][None]


    def smoothed(self):
        """C^1 convex companion of the 1D envelope: ``(value, slope)`` callables.

        The slope interpolates the cell slopes of ``f**`` linearly between
        cell midpoints (monotone, hence convex antiderivative); the value is
        its exact antiderivative.  It differs from the piecewise-linear
        lookup by at most a quarter cell times the largest slope jump.
        Descent uses it because the lookup's kinks stall line searches.
        """
        if self.dim != 1:
            raise EnvelopeError("smoothed envelopes are implemented for 1D tables")
        ax, env = self.axes[0], self.envelope
        d = np.diff(env) / np.diff(ax)
        knots = np.concatenate([[ax[0]], 0.5 * (ax[1:] + ax[:-1]), [ax[-1]]])
        vals = np.concatenate([[d[0]], d, [d[-1]]])
        slope = make_interp_spline(knots, vals, k=1)
        value = slope.antiderivative()
        base = env[0]

        def f(A):
            A = np.asarray(A, dtype=float)
            self._check_range(A)
            return base + value(A[0])

        def df(A):
            A = np.asarray(A, dtype=float)
            self._check_range(A)
            return slope(A[0])[None]

        return f, df


def _biconjugate_1d(x, f):
    h = lower_hull(x, f)
    # on the sample grid f** is the hull interpolated linearly; this equals
    # two LLT passes with the dual grid taken at the hull's edge slopes
    if len(h) < 2:
        return np.full_like(f, f[h[0]])
    edge = np.diff(f[h]) / np.diff(x[h])
    # roundoff can leave collinear vertices on the hull; the dual grid must be strictly increasing
    tol = 1e-12 * max(1.0, float(np.abs(edge).max()))
    edge = edge[np.concatenate([[True], np.diff(edge) > tol])]
    fstar = llt(x, f, edge)
    # f**(x_i) = max_k (edge_k x_i - f*(edge_k)), again by a hull/LLT pass over p
    return llt(edge, fstar, x)


def convex_envelope(axes, values) -> EnvelopeTable:
    """Biconjugate of ``values`` sampled on a uniform tensor grid ``axes``.

    1D: exact on the grid.  2D: per-axis LLT passes onto a uniform slope grid
    with as many points as the sample grid and the range of the sampled
    difference quotients; exact up to the slope-grid resolution.
    """
    if isinstance(axes, np.ndarray) and axes.ndim == 1:
        axes = (axes,)
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    values = np.asarray(values, dtype=float)
    if values.shape != tuple(len(a) for a in axes):
        raise EnvelopeError("values do not match the axes")
    if not all(_uniform(a) for a in axes):
        raise EnvelopeError("convex_envelope needs uniform, increasing sample axes")
    if not np.all(np.isfinite(values)):
        raise EnvelopeError("integrand samples must be finite")
    if len(axes) == 1:
        env = _biconjugate_1d(axes[0], values)
    elif len(axes) == 2:
        env = _biconjugate_2d(axes, values)
    else:
        raise EnvelopeError("only 1D and 2D envelopes are supported")
    env = np.minimum(env, values)
    return EnvelopeTable(axes, values, env)


def _conjugate_2d(axes, values, duals):
    x0, x1 = axes
    p0, p1 = duals
    # inner pass along axis 1: g(x0_i, p1) = max_j (p1 x1_j - f(x0_i, x1_j))
    inner = np.stack([llt(x1, row, p1) for row in values])
    # outer pass along axis 0: f*(p0, p1) = max_i (p0 x0_i + g(x0_i, p1))
    return np.stack([llt(x0, -inner[:, k], p0) for k in range(len(p1))], axis=1)


def _biconjugate_2d(axes, values):
    duals = []
    for j, ax in enumerate(axes):
        q = np.diff(values, axis=j) / (ax[1] - ax[0])
        duals.append(np.linspace(q.min(), q.max(), len(ax)))
    fstar = _conjugate_2d(axes, values, duals)
    return _conjugate_2d(tuple(duals), fstar, axes)


def sample_integrand(f, lo, hi, points: int = 1025, dim: int = 1):
    """Sample an ``A``-only integrand on a uniform grid (``f`` acts on ``(n, ...)`` arrays)."""
    ax = np.linspace(lo, hi, points)
    if dim == 1:
        return (ax,), f(ax[None])
    A = np.stack(np.meshgrid(ax, ax, indexing="ij"))
    return (ax, ax), f(A)
