"""Radial kernels of the truncated Riesz gradient and their constants.

Everything here is a pure function of its arguments.  Radii are Euclidean
norms; frequencies follow the ``exp(-2 pi i x.xi)`` Fourier convention, so a
plane wave ``exp(2 pi i k x / L)`` has frequency ``k / L``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

__all__ = [
    "KernelDomainError",
    "CutoffProfile",
    "KernelParams",
    "cutoff_eval",
    "unit_ball_volume",
    "scaling_constant",
    "riesz_constant",
    "q_kernel_eval",
    "d_kernel_eval",
    "grad_r_kernel_eval",
    "q_l1_norm",
    "q_tail_mass",
    "q_hat_radial",
]

PROFILE_ID = "exp-smoothstep"


class KernelDomainError(ValueError):
    """Raised when a kernel routine is called outside its domain."""


def _h(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


@dataclass(frozen=True)
class CutoffProfile:
    """Radial cutoff equal to 1 on ``[0, b0*delta]`` and 0 beyond ``delta``.

    The transition uses the classic ``h(1-t) / (h(t) + h(1-t))`` smoothstep
    with ``h(t) = exp(-1/t)``, which is C-infinity and monotone.
    """

    delta: float = 1.0
    b0: float = 0.5
    profile_id: str = PROFILE_ID

    def __post_init__(self):
        if not self.delta > 0:
            raise KernelDomainError(f"delta must be positive, got {self.delta}")
        if not 0 < self.b0 < 1:
            raise KernelDomainError(f"b0 must lie in (0, 1), got {self.b0}")
        if self.profile_id != PROFILE_ID:
            raise KernelDomainError(f"unknown cutoff profile {self.profile_id!r}")

    @property
    def inner(self) -> float:
        """Radius of the plateau where the cutoff equals one."""
        return self.b0 * self.delta

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        t = (r - self.inner) / ((1.0 - self.b0) * self.delta)
        t = np.clip(t, 0.0, 1.0)
        a, b = _h(1.0 - t), _h(t)
        out = a / (a + b)
        return out if out.ndim else float(out)


def cutoff_eval(r, c: CutoffProfile):
    """Evaluate the cutoff profile ``c`` at radius (or radii) ``r >= 0``."""
    return c(r)


@dataclass(frozen=True)
class KernelParams:
    dim: int
    s: float
    cutoff: CutoffProfile = field(default_factory=CutoffProfile)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise KernelDomainError(f"only dimensions 1 and 2 are supported, got {self.dim}")
        if not 0.0 <= self.s <= 1.0:
            raise KernelDomainError(f"s must lie in [0, 1], got {self.s}")

    @property
    def delta(self) -> float:
        return self.cutoff.delta

    def require_fractional(self):
        # s = 1 means "use the classical gradient"; no kernel exists there.
        if self.s >= 1.0:
            raise KernelDomainError("kernel evaluation requires s < 1 (s = 1 is the classical gradient)")


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def scaling_constant(n: int, s: float) -> float:
    """Normalisation ``c_{n,s}`` of the nonlocal gradient."""
    if n < 1:
        raise KernelDomainError(f"dimension must be >= 1, got {n}")
    if not 0.0 <= s < 1.0:
        raise KernelDomainError(f"scaling constant needs 0 <= s < 1, got {s}")
    log_c = (
        special.gammaln((n + s + 1) / 2)
        - (n / 2) * math.log(math.pi)
        + s * math.log(2.0)
        - special.gammaln((1 - s) / 2)
    )
    return math.exp(log_c)


def riesz_constant(n: int, sigma: float) -> float:
    """Normalisation ``gamma_{n,sigma}`` of the Riesz potential ``I_sigma``."""
    if not 0.0 < sigma < n:
        raise KernelDomainError(f"Riesz constant needs 0 < sigma < n, got sigma={sigma}, n={n}")
    log_g = (
        (n / 2) * math.log(math.pi)
        + sigma * math.log(2.0)
        + special.gammaln(sigma / 2)
        - special.gammaln((n - sigma) / 2)
    )
    return math.exp(log_g)


# ---------------------------------------------------------------------------
# quadrature rules

_PANEL_ORDER = 24


@lru_cache(maxsize=None)
def _gauss_legendre(m: int):
    x, w = special.roots_legendre(m)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


@lru_cache(maxsize=256)
def _gauss_jacobi_left(m: int, beta: float):
    """Nodes/weights on [0, 1] for the weight ``t**beta``."""
    if beta == 0.0:
        x, w = special.roots_legendre(m)
    else:
        x, w = special.roots_jacobi(m, 0.0, beta)
    t = (x + 1) / 2
    w = w * 0.5 ** (1 + beta)
    t.flags.writeable = False
    w.flags.writeable = False
    return t, w


def _composite_nodes(lo: float, hi: float, panels: int):
    x, w = _gauss_legendre(_PANEL_ORDER)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _transition_integral(lo, c: CutoffProfile, power: float, panels: int = 8):
    """``int_lo^delta wbar(t) t**(-power) dt`` for ``lo`` in ``[b0 delta, delta]``.

    Vectorised over ``lo``; each interval gets its own mapped composite rule.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    x, w = _composite_nodes(-1.0, 1.0, panels)
    half = 0.5 * (c.delta - lo)
    mid = 0.5 * (c.delta + lo)
    t = mid[:, None] + half[:, None] * x[None, :]
    vals = c(t) * t ** (-power)
    return half * (vals @ w)


# ---------------------------------------------------------------------------
# kernels


def q_kernel_eval(r, p: KernelParams):
    """Radial kernel ``Q(r) = c_{n,s} int_r^delta wbar(t) t^{-(n+s)} dt``.

    The plateau piece is integrated in closed form; the smooth transition
    piece by composite Gauss-Legendre.
    """
    p.require_fractional()
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise KernelDomainError("Q kernel is only defined for r > 0")
    n, s, c = p.dim, p.s, p.cutoff
    a, delta = c.inner, c.delta
    flat = r_arr.ravel()
    out = np.zeros_like(flat)
    inside = flat < delta
    rr = flat[inside]
    power = n + s
    plateau = np.zeros_like(rr)
    on_plateau = rr < a
    rp = rr[on_plateau]
    if abs(power - 1.0) < 1e-14:
        plateau[on_plateau] = np.log(a / rp)
    else:
        plateau[on_plateau] = (rp ** (1 - power) - a ** (1 - power)) / (power - 1)
    lo = np.maximum(rr, a)
    uniq, inv = np.unique(lo, return_inverse=True)
    trans = _transition_integral(uniq, c, power)[inv]
    out[inside] = scaling_constant(n, s) * (plateau + trans)
    out = out.reshape(r_arr.shape)
    return out if out.ndim else float(out)


def _check_points(x, n):
    x = np.asarray(x, dtype=float)
    if n == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != n:
        raise KernelDomainError(f"points must have trailing dimension {n}")
    norm = np.linalg.norm(x, axis=-1)
    if np.any(norm == 0):
        raise KernelDomainError("kernel is singular at the origin")
    return x, norm


def d_kernel_eval(x, p: KernelParams):
    """Pointwise kernel ``d(x) = -c x w(x) / |x|^{n+s+1}`` (vector valued)."""
    p.require_fractional()
    x, norm = _check_points(x, p.dim)
    cns = scaling_constant(p.dim, p.s)
    fac = -cns * p.cutoff(norm) / norm ** (p.dim + p.s + 1)
    return x * np.asarray(fac)[..., None]


def grad_r_kernel_eval(x, p: KernelParams):
    """Gradient of ``R = Q - I_{1-s}``: ``c (1 - w(x)) x / |x|^{n+s+1}``."""
    p.require_fractional()
    x, norm = _check_points(x, p.dim)
    cns = scaling_constant(p.dim, p.s)
    fac = cns * (1.0 - p.cutoff(norm)) / norm ** (p.dim + p.s + 1)
    return x * np.asarray(fac)[..., None]


def q_tail_mass(p: KernelParams, eps: float) -> float:
    """``||Q||_{L^1}`` restricted to ``|x| >= eps``.

    Uses ``int_{|x|>eps} Q = c omega_n int_eps^delta wbar(r) r^{-s} (1 - (eps/r)^n) dr``.
    """
    p.require_fractional()
    n, s, c = p.dim, p.s, p.cutoff
    a, delta = c.inner, c.delta
    if eps >= delta:
        return 0.0
    eps = max(float(eps), 0.0)
    total = 0.0
    if eps < a:
        total += (a ** (1 - s) - eps ** (1 - s)) / (1 - s)
        if eps > 0:
            if abs(s + n - 1) < 1e-14:
                total -= eps ** n * math.log(a / eps)
            else:
                total -= eps ** n * (eps ** (1 - s - n) - a ** (1 - s - n)) / (s + n - 1)
    lo = max(eps, a)
    xg, wg = _composite_nodes(lo, delta, 8)
    f = c(xg) * xg ** (-s)
    if eps > 0:
        f = f * (1.0 - (eps / xg) ** n)
    total += float(f @ wg)
    return scaling_constant(n, s) * unit_ball_volume(n) * total


def q_l1_norm(p: KernelParams) -> float:
    """``||Q||_{L^1} = c_{n,s} omega_n int_0^delta wbar(r) r^{-s} dr``."""
    return q_tail_mass(p, 0.0)


def _radial_profile(n: int, x):
    # Q-hat(xi) = c int_0^delta wbar(r) r^{-s} H_n(2 pi |xi| r) dr after one
    # integration by parts; H_n(0) equals the unit-ball volume.
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-6
    xs = x[~small]
    if n == 1:
        out[~small] = 2.0 * np.sin(xs) / xs
        out[small] = 2.0 - x[small] ** 2 / 3.0
    else:
        out[~small] = 2.0 * math.pi * special.j1(xs) / xs
        out[small] = math.pi * (1.0 - x[small] ** 2 / 8.0)
    return out


def q_hat_radial(xi_mag, p: KernelParams, *, chunk: int = 4096):
    """Fourier transform of ``Q`` at frequency magnitude(s) ``|xi|``.

    Computed from ``c int_0^delta wbar(r) r^{-s} H_n(2 pi |xi| r) dr`` where
    ``H_1(x) = 2 sin(x)/x`` and ``H_2(x) = 2 pi J_1(x)/x``.  The ``r^{-s}``
    singularity on the plateau is absorbed into a Gauss-Jacobi rule.
    """
    p.require_fractional()
    xi = np.asarray(xi_mag, dtype=float)
    if np.any(xi < 0):
        raise KernelDomainError("frequency magnitudes must be non-negative")
    n, s, c = p.dim, p.s, p.cutoff
    a, delta = c.inner, c.delta
    flat = xi.ravel()
    uniq, inv = np.unique(flat, return_inverse=True)
    kmax = 2 * math.pi * (uniq.max() if uniq.size else 0.0)

    m = 48 + int(math.ceil(0.6 * kmax * a))
    tj, wj = _gauss_jacobi_left(m, -s)
    r_plat = a * tj
    w_plat = a ** (1 - s) * wj
    panels = 6 + int(math.ceil(kmax * (delta - a) / 6.0))
    r_tr, w_tr = _composite_nodes(a, delta, panels)
    w_tr = w_tr * c(r_tr) * r_tr ** (-s)
    nodes = np.concatenate([r_plat, r_tr])
    weights = np.concatenate([w_plat, w_tr])

    vals = np.empty_like(uniq)
    for start in range(0, uniq.size, chunk):
        k = 2 * math.pi * uniq[start:start + chunk]
        vals[start:start + chunk] = _radial_profile(n, np.outer(k, nodes)) @ weights
    vals *= scaling_constant(n, s)
    out = vals[inv].reshape(xi.shape)
    return out if out.ndim else float(out)
