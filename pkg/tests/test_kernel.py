import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from nlgrad.kernel import (
    CutoffProfile,
    KernelDomainError,
    KernelParams,
    cutoff_eval,
    d_kernel_eval,
    grad_r_kernel_eval,
    q_hat_radial,
    q_kernel_eval,
    q_l1_norm,
    q_tail_mass,
    riesz_constant,
    scaling_constant,
    unit_ball_volume,
)

S_VALUES = [0.0, 0.25, 0.5, 0.75, 0.95]


def params(n, s, delta=1.0, b0=0.5):
    return KernelParams(n, s, CutoffProfile(delta, b0))


def quad(f, a, b, points=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return integrate.quad(f, a, b, points=points, limit=400, epsabs=1e-15, epsrel=1e-13)[0]


def q_reference(r, p):
    """Q(r) by adaptive quadrature of c int_r^delta wbar t^{-(n+s)} dt."""
    c = p.cutoff
    f = lambda t: c(t) * t ** (-(p.dim + p.s))
    lo = quad(f, r, c.inner) if r < c.inner else 0.0
    hi = quad(f, max(r, c.inner), c.delta)
    return scaling_constant(p.dim, p.s) * (lo + hi)


def q_hat_reference(xi, p):
    """Fourier transform through the radial Q directly (cos / J0 route)."""
    c = p.cutoff
    k = 2 * math.pi * xi
    if p.dim == 1:
        f = lambda r: 2 * q_kernel_eval(r, p) * math.cos(k * r)
    else:
        f = lambda r: 2 * math.pi * q_kernel_eval(r, p) * special.j0(k * r) * r
    # weak singularity at r = 0 handled by quad's endpoint extrapolation
    return quad(f, 0.0, c.inner, points=None) + quad(f, c.inner, c.delta)


# -- cutoff -----------------------------------------------------------------


def test_cutoff_plateau_and_support():
    c = CutoffProfile(1.0, 0.5)
    r = np.array([0.0, 0.1, 0.5, 1.0, 1.5])
    np.testing.assert_array_equal(c(r), [1.0, 1.0, 1.0, 0.0, 0.0])
    assert cutoff_eval(0.75, c) == pytest.approx(0.5)


@given(st.floats(0.0, 3.0), st.floats(0.0, 3.0),
       st.floats(0.1, 2.0), st.floats(0.05, 0.95))
def test_cutoff_monotone_and_bounded(r1, r2, delta, b0):
    c = CutoffProfile(delta, b0)
    lo, hi = sorted((r1, r2))
    assert 0.0 <= c(hi) <= c(lo) <= 1.0


def test_cutoff_rejects_bad_parameters():
    with pytest.raises(KernelDomainError):
        CutoffProfile(0.0)
    with pytest.raises(KernelDomainError):
        CutoffProfile(1.0, 1.0)
    with pytest.raises(KernelDomainError):
        CutoffProfile(1.0, 0.5, "polynomial")


# -- constants ----------------------------------------------------------------


def test_scaling_constant_endpoint_values():
    assert scaling_constant(1, 0.0) == pytest.approx(1 / math.pi, rel=1e-14)
    assert scaling_constant(2, 0.0) == pytest.approx(1 / (2 * math.pi), rel=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_scaling_constant_limit(n):
    # c_{n,s} / (1 - s) tends to 1 / |B_1| as s -> 1
    ratios = [scaling_constant(n, s) / (1 - s) for s in (0.9, 0.99, 0.999999)]
    target = 1 / unit_ball_volume(n)
    errs = [abs(r - target) for r in ratios]
    assert errs[0] > errs[1] > errs[2]
    assert errs[-1] < 1e-5 * target


def test_riesz_constant_values():
    assert riesz_constant(2, 1.0) == pytest.approx(2 * math.pi, rel=1e-14)
    assert riesz_constant(3, 2.0) == pytest.approx(4 * math.pi, rel=1e-14)
    with pytest.raises(KernelDomainError):
        riesz_constant(1, 1.0)


def test_domain_errors():
    with pytest.raises(KernelDomainError):
        scaling_constant(1, 1.0)
    with pytest.raises(KernelDomainError):
        KernelParams(3, 0.5)
    with pytest.raises(KernelDomainError):
        q_kernel_eval(0.3, params(1, 1.0))
    with pytest.raises(KernelDomainError):
        q_kernel_eval(0.0, params(1, 0.5))
    with pytest.raises(KernelDomainError):
        d_kernel_eval(np.zeros(2), params(2, 0.5))
    with pytest.raises(KernelDomainError):
        q_hat_radial(-1.0, params(1, 0.5))


# -- Q and its derivatives ---------------------------------------------------


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("s", S_VALUES + [0.999])
def test_q_matches_adaptive_quadrature(n, s):
    p = params(n, s)
    for r in (0.01, 0.3, 0.5, 0.7, 0.95):
        assert q_kernel_eval(r, p) == pytest.approx(q_reference(r, p), rel=1e-11)


def test_q_vanishes_beyond_horizon_and_is_decreasing():
    p = params(2, 0.5, delta=0.8)
    r = np.linspace(0.01, 1.2, 300)
    q = q_kernel_eval(r, p)
    assert np.all(q[r >= 0.8] == 0.0)
    assert np.all(q[r < 0.79] > 0.0)
    assert np.all(np.diff(q) <= 0.0)


@pytest.mark.parametrize("n,s", [(1, 0.0), (1, 0.5), (2, 0.25), (2, 0.95)])
def test_d_kernel_is_gradient_of_q(n, s):
    p = params(n, s)
    h = 1e-5
    for r in (0.2, 0.6, 0.85):
        x = np.zeros(n)
        x[0] = r
        fd = (q_kernel_eval(r + h, p) - q_kernel_eval(r - h, p)) / (2 * h)
        assert d_kernel_eval(x, p)[0] == pytest.approx(fd, rel=1e-7)


@given(st.integers(1, 2), st.floats(0.0, 0.99),
       st.lists(st.floats(-2, 2), min_size=2, max_size=2))
@settings(max_examples=60)
def test_d_and_grad_r_are_odd(n, s, pt):
    x = np.array(pt[:n])
    if np.linalg.norm(x) < 1e-3:
        return
    p = params(n, s)
    np.testing.assert_allclose(d_kernel_eval(-x, p), -d_kernel_eval(x, p), rtol=1e-14, atol=0)
    np.testing.assert_allclose(grad_r_kernel_eval(-x, p), -grad_r_kernel_eval(x, p), rtol=1e-14, atol=0)


@pytest.mark.parametrize("n", [1, 2])
def test_grad_r_splits_riesz_kernel(n):
    # grad R = d + c x / |x|^{n+s+1}: the cutoff kernel minus the Riesz one
    p = params(n, 0.4)
    rng = np.random.default_rng(3)
    x = rng.uniform(-1.5, 1.5, size=(20, n))
    r = np.linalg.norm(x, axis=-1)[:, None]
    riesz = scaling_constant(n, 0.4) * x / r ** (n + 1.4)
    np.testing.assert_allclose(grad_r_kernel_eval(x, p), d_kernel_eval(x, p) + riesz, rtol=1e-12, atol=1e-14)


# -- norms ---------------------------------------------------------------------


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("s", S_VALUES)
def test_l1_norm_against_radial_quadrature(n, s):
    p = params(n, s)
    surface = 2.0 if n == 1 else 2 * math.pi
    f = lambda r: surface * q_kernel_eval(r, p) * r ** (n - 1)
    ref = quad(f, 0.0, 0.5) + quad(f, 0.5, 1.0)
    assert q_l1_norm(p) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("s", S_VALUES + [0.999])
@pytest.mark.parametrize("delta,b0", [(1.0, 0.5), (0.5, 0.3)])
def test_l1_norm_envelope(n, s, delta, b0):
    p = params(n, s, delta, b0)
    cw = scaling_constant(n, s) * unit_ball_volume(n) / (1 - s)
    lo, hi = cw * (b0 * delta) ** (1 - s), cw * delta ** (1 - s)
    assert lo <= q_l1_norm(p) <= hi


@pytest.mark.parametrize("n", [1, 2])
def test_l1_norm_limit_and_tail(n):
    p = params(n, 0.999)
    assert 0.95 <= q_l1_norm(p) <= 1.05
    assert q_tail_mass(p, 0.25) <= 0.05
    assert q_tail_mass(p, 1.0) == 0.0


@pytest.mark.parametrize("n", [1, 2])
def test_tail_mass_against_quadrature(n):
    p = params(n, 0.3)
    surface = 2.0 if n == 1 else 2 * math.pi
    f = lambda r: surface * q_kernel_eval(r, p) * r ** (n - 1)
    for eps in (0.1, 0.5, 0.8):
        ref = quad(f, eps, max(eps, 0.5)) + quad(f, max(eps, 0.5), 1.0)
        assert q_tail_mass(p, eps) == pytest.approx(ref, rel=1e-9)


@given(st.floats(0.0, 0.98), st.floats(1e-4, 1e-2))
@settings(max_examples=30)
def test_l1_norm_continuous_in_s(s, ds):
    a, b = q_l1_norm(params(1, s)), q_l1_norm(params(1, s + ds))
    assert abs(a - b) < 50 * ds * max(a, b)


# -- Fourier transform -------------------------------------------------------------


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("s", [0.0, 0.5, 0.95])
def test_q_hat_matches_direct_transform(n, s):
    p = params(n, s)
    xi = np.array([0.0, 0.3, 1.1, 4.0, 9.5])
    got = q_hat_radial(xi, p)
    ref = np.array([q_hat_reference(x, p) for x in xi])
    np.testing.assert_allclose(got, ref, rtol=1e-8, atol=1e-12 * ref[0])


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("s", S_VALUES)
def test_q_hat_zero_is_l1_norm_and_positive(n, s):
    p = params(n, s)
    assert q_hat_radial(0.0, p) == pytest.approx(q_l1_norm(p), rel=1e-12)
    xi = np.linspace(0, 40, 2001)
    assert np.all(q_hat_radial(xi, p) > 0)


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("s", [0.0, 0.5, 0.9])
def test_q_hat_approaches_riesz_symbol(n, s):
    # R-hat = Q-hat - |2 pi xi|^{s-1} decays faster than the symbol itself
    p = params(n, s)
    xi = np.array([4.0, 8.0, 16.0, 32.0])
    rhat = q_hat_radial(xi, p) - (2 * math.pi * xi) ** (s - 1)
    rel = np.abs(rhat) / (2 * math.pi * xi) ** (s - 1)
    assert rel[-1] < 0.1 * rel[0] or rel[-1] < 1e-6


def test_q_hat_shape_and_scalar():
    p = params(2, 0.5)
    grid = np.random.default_rng(0).uniform(0, 3, size=(4, 5))
    assert q_hat_radial(grid, p).shape == (4, 5)
    assert isinstance(q_hat_radial(1.0, p), float)
