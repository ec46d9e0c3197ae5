import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlgrad.fields import gaussian, gaussian_bump, moment_free_bump, plane_wave, random_bandlimited
from nlgrad.grid import GridError, GridFunction, PeriodicGrid, lp_norm
from nlgrad.kernel import CutoffProfile, KernelDomainError, KernelParams, q_hat_radial, q_l1_norm
from nlgrad.nlops import (
    IncompatibleFieldError,
    classical_divergence,
    classical_gradient,
    divergence_multiplier,
    fractional_gradient,
    grad_r_convolution,
    gradient_multiplier,
    leibniz_remainder,
    nl_divergence,
    nl_gradient,
    nl_gradient_direct,
    p_translate,
    q_translate,
    ratio_multiplier_sup,
    reconstruct_from_gradient,
    riesz_transform,
)

S_VALUES = [0.0, 0.25, 0.5, 0.75, 0.95]
G1 = PeriodicGrid(1, 8.0, 128)
G2 = PeriodicGrid(2, 8.0, 64)


def rel(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(np.asarray(b))


def inner(a: GridFunction, b: GridFunction) -> float:
    return float(np.sum(a.values * b.values) * a.grid.cell_volume)


# -- gradient / divergence ---------------------------------------------------------


@pytest.mark.parametrize("grid", [G1, G2])
@pytest.mark.parametrize("s", S_VALUES + [1.0])
def test_gradient_annihilates_constants(grid, s):
    u = GridFunction(grid, np.full(grid.shape, 3.7))
    assert np.abs(nl_gradient(u, s, 1.0).values).max() < 1e-13
    psi = GridFunction(grid, np.full((grid.dim,) + grid.shape, -1.2))
    assert np.abs(nl_divergence(psi, s, 1.0).values).max() < 1e-13


@pytest.mark.parametrize("s", [0.0, 0.5, 0.95])
def test_plane_wave_is_eigenfunction(s):
    k = np.array([3, -5])
    u = plane_wave(G2, k)
    D = nl_gradient(u, s, 1.0)
    xi = k / G2.box_length
    qh = q_hat_radial(np.linalg.norm(xi), KernelParams(2, s))
    # d/dx cos(2 pi k.x/L) = -2 pi (k/L) sin(...)
    expected = -qh * 2 * math.pi * xi[:, None, None] * plane_wave(G2, k, -math.pi / 2).values
    np.testing.assert_allclose(D.values, expected, atol=1e-12)


def test_s_one_is_classical_gradient():
    u = gaussian_bump(G2, 0.5)
    np.testing.assert_allclose(nl_gradient(u, 1.0, 1.0).values, classical_gradient(u).values, atol=1e-14)
    psi = nl_gradient(u, 1.0, 1.0)
    np.testing.assert_allclose(nl_divergence(psi, 1.0).values, classical_divergence(psi).values, atol=1e-13)


def test_gradient_of_gaussian_matches_analytic_at_s_one():
    u = gaussian_bump(G1, 0.4)
    x = G1.axis
    exact = -x / 0.16 * u.scalar
    np.testing.assert_allclose(nl_gradient(u, 1.0).values[0], exact, atol=1e-12)


@pytest.mark.parametrize("grid", [G1, G2])
@pytest.mark.parametrize("s", S_VALUES)
def test_divergence_is_negative_adjoint(grid, s):
    rng = np.random.default_rng(11)
    u = GridFunction(grid, rng.standard_normal(grid.shape))
    psi = GridFunction(grid, rng.standard_normal((grid.dim,) + grid.shape))
    lhs = inner(nl_gradient(u, s, 0.5), psi)
    rhs = -inner(u, nl_divergence(psi, s, 0.5))
    assert abs(lhs - rhs) <= 1e-11 * abs(lhs)


def test_multiplier_tables_read_only_and_adjoint():
    g = gradient_multiplier(G2, 0.3)
    d = divergence_multiplier(G2, 0.3)
    assert not g.values.flags.writeable
    np.testing.assert_array_equal(d.values, -np.conj(g.values))


@given(st.integers(-20, 20), st.sampled_from(S_VALUES))
@settings(max_examples=20, deadline=None)
def test_gradient_commutes_with_grid_shifts(shift, s):
    u = random_bandlimited(G1, np.random.default_rng(abs(shift)))
    shifted = GridFunction(G1, np.roll(u.scalar, shift))
    np.testing.assert_allclose(nl_gradient(shifted, s).values,
                               np.roll(nl_gradient(u, s).values, shift, axis=1), atol=1e-13)


def test_wrong_components_rejected():
    u = gaussian_bump(G2)
    with pytest.raises(GridError):
        nl_divergence(u, 0.5)
    with pytest.raises(GridError):
        nl_gradient(nl_gradient(u, 0.5), 0.5)


def test_seam_clearance_enforced():
    g = PeriodicGrid(1, 2.0, 64)
    with pytest.raises(GridError):
        nl_gradient(gaussian_bump(g, 0.1), 0.5, 1.0)


# -- translation operators ---------------------------------------------------------


@pytest.mark.parametrize("grid", [G1, G2])
@pytest.mark.parametrize("s", S_VALUES)
def test_p_and_q_are_inverse(grid, s):
    u = random_bandlimited(grid, np.random.default_rng(4))
    assert rel(p_translate(q_translate(u, s), s).values, u.values) < 1e-10
    assert rel(q_translate(p_translate(u, s), s).values, u.values) < 1e-10


@pytest.mark.parametrize("grid", [G1, G2])
@pytest.mark.parametrize("s", S_VALUES)
def test_gradient_factors_through_q(grid, s):
    u = random_bandlimited(grid, np.random.default_rng(5))
    lhs = classical_gradient(q_translate(u, s)).values
    assert rel(lhs, nl_gradient(u, s).values) < 1e-12
    # and D^s applied to P v is the classical gradient of v
    v = gaussian_bump(grid, 0.6)
    assert rel(nl_gradient(p_translate(v, s), s).values, classical_gradient(v).values) < 1e-10


@given(st.integers(0, 2 ** 31), st.sampled_from(S_VALUES), st.sampled_from([1.5, 2.0, 4.0]))
@settings(max_examples=20, deadline=None)
def test_q_translate_young_inequality(seed, s, p):
    u = random_bandlimited(G1, np.random.default_rng(seed))
    bound = q_l1_norm(KernelParams(1, s)) * lp_norm(u, p)
    assert lp_norm(q_translate(u, s), p) <= bound * (1 + 1e-10)


def test_translation_rejects_s_one():
    with pytest.raises(KernelDomainError):
        q_translate(gaussian_bump(G1), 1.0)
    with pytest.raises(KernelDomainError):
        p_translate(gaussian_bump(G1), 1.0)


# -- Riesz transform and reconstruction ------------------------------------------------


@given(st.integers(0, 2 ** 31))
@settings(max_examples=15, deadline=None)
def test_riesz_is_contraction(seed):
    rng = np.random.default_rng(seed)
    psi = GridFunction(G2, rng.standard_normal((2,) + G2.shape))
    assert lp_norm(riesz_transform(psi), 2) <= lp_norm(psi, 2) * (1 + 1e-12)


def test_riesz_is_isometry_on_gradients():
    u = random_bandlimited(G2, np.random.default_rng(2))
    u = GridFunction(G2, u.scalar - u.scalar.mean())
    grad = classical_gradient(u)
    r = riesz_transform(grad)
    assert lp_norm(r, 2) == pytest.approx(lp_norm(grad, 2), rel=1e-10)
    assert np.abs(riesz_transform(GridFunction(G2, np.zeros((2,) + G2.shape))).values).max() == 0


def test_riesz_of_plane_wave_gradient_1d():
    # R(d/dx cos) = i sign(xi) * (2 pi i xi) cos^ -> -|2 pi xi| cos
    u = plane_wave(G1, 6)
    r = riesz_transform(classical_gradient(u))
    np.testing.assert_allclose(r.scalar, -2 * math.pi * 6 / 8 * u.scalar, atol=1e-12)


@pytest.mark.parametrize("grid", [G1, G2])
@pytest.mark.parametrize("s", S_VALUES + [1.0])
def test_reconstruction_round_trip(grid, s):
    u = random_bandlimited(grid, np.random.default_rng(6))
    u = GridFunction(grid, u.scalar - u.scalar.mean())
    back = reconstruct_from_gradient(nl_gradient(u, s), s)
    assert rel(back.values, u.values) < 1e-9


def test_reconstruction_of_bump_at_s_zero_and_mean():
    u = gaussian_bump(G2, 0.5)
    back = reconstruct_from_gradient(nl_gradient(u, 0.0), 0.0, mean=float(u.scalar.mean()))
    assert rel(back.values, u.values) < 1e-9
    zero = GridFunction(G2, np.zeros((2,) + G2.shape))
    np.testing.assert_allclose(reconstruct_from_gradient(zero, 0.5, mean=2.5).values, 2.5, atol=1e-14)


def test_reconstruction_rejects_curl():
    x, y = G2.coordinates
    g = np.exp(-(x ** 2 + y ** 2))
    rot = GridFunction(G2, np.stack([-y * g, x * g]))
    with pytest.raises(IncompatibleFieldError):
        reconstruct_from_gradient(rot, 0.5)


# -- ratio multiplier --------------------------------------------------------------


def test_ratio_multiplier_trivial_and_ordering():
    assert ratio_multiplier_sup(0.4, 0.4, G1)["sup"] == 1.0
    with pytest.raises(KernelDomainError):
        ratio_multiplier_sup(0.6, 0.4, G1)


def test_ratio_multiplier_resolution_stable():
    a = ratio_multiplier_sup(0.0, 0.75, PeriodicGrid(1, 8.0, 128))["sup"]
    b = ratio_multiplier_sup(0.0, 0.75, PeriodicGrid(1, 8.0, 256))["sup"]
    assert abs(a - b) <= 0.01 * a


# -- fractional gradient and the gap kernel -------------------------------------------


@pytest.mark.parametrize("grid", [PeriodicGrid(1, 8.0, 256), PeriodicGrid(2, 8.0, 128)])
@pytest.mark.parametrize("s", [0.0, 0.5, 0.95])
def test_gap_identity(grid, s):
    u = moment_free_bump(grid)
    lhs = nl_gradient(u, s) - fractional_gradient(u, s)
    rhs = grad_r_convolution(u, s)
    err = np.linalg.norm(lhs.values - rhs.values)
    assert err <= 1e-6 * np.linalg.norm(nl_gradient(u, s).values)


def test_fractional_gradient_at_one_is_classical():
    u = moment_free_bump(G1)
    np.testing.assert_allclose(fractional_gradient(u, 1.0).values, classical_gradient(u).values, atol=1e-12)


# -- direct oracle -----------------------------------------------------------------


@pytest.mark.parametrize("s", S_VALUES)
@pytest.mark.parametrize("delta", [0.5, 1.0])
def test_direct_oracle_matches_spectral_1d(s, delta):
    g = PeriodicGrid(1, 8.0, 256)
    u = gaussian_bump(g, 0.4, center=[0.1])
    D = nl_gradient(u, s, delta).values[0]
    idx = np.array([70, 100, 128, 131, 150, 190])
    direct = nl_gradient_direct(u, s, delta, g.axis[idx])[:, 0]
    assert np.abs(direct - D[idx]).max() <= 1e-6 * np.abs(D).max()


@pytest.mark.parametrize("s", [0.0, 0.5, 0.95])
def test_direct_oracle_matches_spectral_2d(s):
    u = gaussian_bump(G2, 0.5, center=[0.1, -0.2])
    D = nl_gradient(u, s, 1.0).values
    idx = [(30, 33), (40, 25)]
    pts = np.array([[G2.axis[i], G2.axis[j]] for i, j in idx])
    direct = nl_gradient_direct(u, s, 1.0, pts)
    spec = np.array([D[:, i, j] for i, j in idx])
    assert np.abs(direct - spec).max() <= 1e-6 * np.abs(D).max()


def test_direct_oracle_constant_and_affine():
    g = PeriodicGrid(1, 8.0, 128)
    assert np.abs(nl_gradient_direct(lambda p: np.full(p.shape[:-1], 2.0), 0.5, 1.0, [0.3], grid=g)).max() == 0
    slope = 1.7
    val = nl_gradient_direct(lambda p: slope * p[..., 0], 0.5, 1.0, [0.3, -0.8], grid=g)
    np.testing.assert_allclose(val[:, 0], slope * q_l1_norm(KernelParams(1, 0.5)), rtol=1e-12)
    g2 = PeriodicGrid(2, 8.0, 64)
    val = nl_gradient_direct(lambda p: slope * p[..., 1], 0.25, 1.0, [[0.1, 0.2]], grid=g2)
    np.testing.assert_allclose(val[0], [0.0, slope * q_l1_norm(KernelParams(2, 0.25))], rtol=1e-12, atol=1e-13)


def test_direct_oracle_callable_vs_analytic_gradient_near_one():
    # s close to one: D^s phi approaches grad phi
    g = PeriodicGrid(1, 8.0, 128)
    phi = gaussian(0.4)
    x = np.array([0.2, 0.5])
    val = nl_gradient_direct(phi, 0.999, 1.0, x, grid=g)[:, 0]
    exact = -x / 0.16 * phi(x[:, None])
    np.testing.assert_allclose(val, exact, rtol=2e-2)


# -- Leibniz remainder -----------------------------------------------------------------


def test_leibniz_remainder_scales_with_lipschitz_constant():
    rng = np.random.default_rng(8)
    u = random_bandlimited(G1, rng)
    x = G1.axis
    ratios = []
    for lam in (0.5, 1.0, 2.0):
        chi = GridFunction(G1, np.exp(-(lam * x) ** 2))
        lip = lam * math.sqrt(2) * math.exp(-0.5)
        rem = leibniz_remainder(chi, u, 0.5)
        ratios.append(lp_norm(rem, 2) / (lip * lp_norm(u, 2)))
    assert max(ratios) < 5 * min(ratios)
    const = GridFunction(G1, np.ones(G1.shape))
    assert lp_norm(leibniz_remainder(const, u, 0.5), 2) < 1e-12
