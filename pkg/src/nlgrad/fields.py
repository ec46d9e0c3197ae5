"""Test fields: Gaussian bumps, moment-free bumps and masked random fields."""
from __future__ import annotations

import math

import numpy as np

from .grid import DomainMask, GridFunction, PeriodicGrid
from .kernel import CutoffProfile

__all__ = [
    "gaussian",
    "gaussian_bump",
    "moment_free_bump",
    "plane_wave",
    "random_bandlimited",
    "smooth_window",
    "masked_random_field",
]


def gaussian(width: float = 0.4, center=None):
    """Callable Gaussian ``exp(-|x-c|^2 / (2 width^2))`` on point arrays ``(..., n)``."""

    def f(pts):
        pts = np.asarray(pts, dtype=float)
        c = 0.0 if center is None else np.asarray(center, dtype=float)
        return np.exp(-np.sum((pts - c) ** 2, axis=-1) / (2 * width ** 2))

    return f


def _points(grid: PeriodicGrid) -> np.ndarray:
    return np.moveaxis(grid.coordinates, 0, -1)


def gaussian_bump(grid: PeriodicGrid, width: float = 0.4, center=None) -> GridFunction:
    return GridFunction(grid, gaussian(width, center)(_points(grid)))


def moment_free_bump(grid: PeriodicGrid, width: float = 0.35) -> GridFunction:
    """``Delta^2`` of a Gaussian: mean zero with vanishing moments up to order 3."""
    g = gaussian_bump(grid, width).scalar
    k2 = (2 * math.pi) ** 2 * np.sum(grid.frequencies ** 2, axis=0)
    u = np.fft.ifftn(k2 ** 2 * np.fft.fftn(g)).real
    return GridFunction(grid, u / np.abs(u).max())


def plane_wave(grid: PeriodicGrid, k, phase: float = 0.0) -> GridFunction:
    """``cos(2 pi k.x / L + phase)`` for an integer wavevector ``k``."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    arg = 2 * math.pi * np.tensordot(k, grid.coordinates, axes=1) / grid.box_length
    return GridFunction(grid, np.cos(arg + phase))


def random_bandlimited(grid: PeriodicGrid, rng: np.random.Generator, kmax: float = None,
                       components: int = 1) -> GridFunction:
    """Gaussian random field with Fourier support in ``|xi| <= kmax``.

    ``kmax`` defaults to a quarter of the Nyquist frequency.
    """
    if kmax is None:
        kmax = 0.25 * grid.points / (2 * grid.box_length)
    keep = grid.frequency_magnitude <= kmax
    out = []
    for _ in range(components):
        noise = rng.standard_normal(grid.shape)
        spec = np.fft.fftn(noise) * keep
        out.append(np.fft.ifftn(spec).real)
    vals = np.stack(out)
    return GridFunction(grid, vals / max(np.abs(vals).max(), 1e-300))


def smooth_window(mask: DomainMask, margin: float = None) -> np.ndarray:
    """Smooth function equal to 1 well inside ``Omega_{-delta}`` and 0 outside it.

    Built from the signed distance to the inner set's boundary with the same
    ``exp(-1/t)`` smoothstep as the kernel cutoff.
    """
    grid = mask.grid
    inner = mask.inner
    # distance from each inner node to the nearest non-inner node
    pts = grid.coordinates.reshape(grid.dim, -1).T
    flat = inner.ravel()
    outside = pts[~flat]
    d = np.zeros(flat.size)
    if outside.size:
        ins = pts[flat]
        best = np.full(len(ins), np.inf)
        for start in range(0, len(outside), 4096):
            chunk = outside[start:start + 4096]
            best = np.minimum(best, np.sqrt(((ins[:, None] - chunk[None]) ** 2).sum(-1)).min(1))
        d[flat] = best
    if margin is None:
        margin = 0.5 * mask.delta
    # rises from 0 at distance 0 to 1 at distance `margin`
    ramp = CutoffProfile(delta=margin, b0=1e-9)
    w = 1.0 - ramp(d)
    w[~flat] = 0.0
    return w.reshape(grid.shape)


def masked_random_field(mask: DomainMask, rng: np.random.Generator, kmax: float = None,
                        window: np.ndarray = None) -> GridFunction:
    """Random band-limited field times a smooth window supported in ``Omega_{-delta}``."""
    if window is None:
        window = smooth_window(mask)
    f = random_bandlimited(mask.grid, rng, kmax)
    return GridFunction(mask.grid, f.scalar * window)
