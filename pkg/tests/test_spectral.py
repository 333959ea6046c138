import numpy as np
import pytest
from scipy.integrate import quad_vec

from relaxman.reduction import builtin_reduced
from relaxman.spectral import (green_function, green_values, projections, resolvent,
                               resolvent_kernel_norm, resolvent_scan, semigroup_apply, spectral_factorize,
                               x_half_norm)


def test_toy3_symbol_values(toy3_reduced):
    sd = spectral_factorize(toy3_reduced)
    np.testing.assert_allclose(sd.H, [-1 / 0.46, 1 / 0.3], rtol=1e-12)
    assert sd.nu == pytest.approx(1 / 0.46)
    assert list(sd.lambda_minus) == [0] and list(sd.lambda_plus) == [1]


def test_normalization_U_E_Ut(toy3_reduced, dv_bgk):
    from relaxman.reduction import reduce
    for r in (toy3_reduced, reduce(dv_bgk, "minus")):
        sd = spectral_factorize(r)
        np.testing.assert_allclose(sd.U @ np.linalg.solve(sd.E, sd.U.T), -np.eye(sd.dim), atol=1e-12)
        np.testing.assert_allclose(sd.U @ sd.U_inv, np.eye(sd.dim), atol=1e-12)
        # U diagonalizes the generator S = Gamma^{-1} E
        np.testing.assert_allclose(sd.U @ sd.S @ sd.U_inv, np.diag(sd.H), atol=1e-12)


def test_example47_modes():
    sd = spectral_factorize(builtin_reduced("example47", N=3))
    np.testing.assert_allclose(sd.H, np.exp([1, 2, 3]))
    np.testing.assert_allclose(np.abs(sd.U), np.eye(3), atol=1e-14)
    assert x_half_norm(sd, np.ones(3)) == pytest.approx(np.sqrt(np.e + np.e ** 2 + np.e ** 3))


def test_no_gap_raises():
    from relaxman.reduction import ReducedSystem
    with pytest.raises(ValueError):
        spectral_factorize(ReducedSystem([[1.0]], [[0.0]], None, "plus", "flat"))


def test_projection_algebra(toy3_reduced):
    sd = spectral_factorize(toy3_reduced)
    P = projections(sd)
    np.testing.assert_allclose(P.P_s @ P.P_s, P.P_s, atol=1e-12)
    np.testing.assert_allclose(P.P_s @ P.P_u, 0, atol=1e-12)
    np.testing.assert_allclose(P.P_s @ sd.S, sd.S @ P.P_s, atol=1e-12)
    assert np.trace(P.P_s) == pytest.approx(1.0)


def test_green_saddle_signs(saddle):
    _, sd = saddle
    G = green_function(sd, -1.0)
    assert G[1, 1] == pytest.approx(-np.exp(-1))
    assert G[0, 0] == 0
    G = green_function(sd, 1.0)
    assert G[0, 0] == pytest.approx(np.exp(-1))
    assert G[1, 1] == 0


def test_green_jump_is_identity(toy3_reduced):
    sd = spectral_factorize(toy3_reduced)
    jump = green_function(sd, 0.0) - green_function(sd, -1e-14)
    np.testing.assert_allclose(jump, np.eye(2), atol=1e-12)


def test_kernel_fourier_transform_is_resolvent(toy3_reduced):
    # the convolution kernel E^{-1} U^T diag(H g) U^{-T} transforms to (2 pi i w Gamma - E)^{-1}
    sd = spectral_factorize(toy3_reduced)
    Uit = np.linalg.inv(sd.U).T

    def k(t):
        return np.linalg.solve(sd.E, sd.U.T @ np.diag(sd.H * green_values(sd.H, t)) @ Uit)

    for w in (0.0, 0.3, -1.7):
        f = lambda t: k(t) * np.exp(-2j * np.pi * w * t)
        I = quad_vec(f, 0, 60)[0] + quad_vec(f, -60, 0)[0]
        np.testing.assert_allclose(I, resolvent(toy3_reduced, w), atol=1e-10)


def test_scalar_resolvent_modulus(scalar):
    r, _ = scalar
    for w in (0.0, 0.5, 3.0):
        R = resolvent(r, w)
        assert R[0, 0] == pytest.approx(1 / (2j * np.pi * w + 1))
        assert abs(R[0, 0]) == pytest.approx((1 + 4 * np.pi ** 2 * w ** 2) ** -0.5)


def test_resolvent_identity(toy3_reduced):
    r = toy3_reduced
    R1, R2 = resolvent(r, 0.7), resolvent(r, -2.1)
    lhs = R1 - R2
    rhs = 2j * np.pi * (-2.1 - 0.7) * R1 @ r.Gamma @ R2
    np.testing.assert_allclose(lhs, rhs, atol=1e-13)


def test_semigroup_saddle(saddle):
    _, sd = saddle
    np.testing.assert_allclose(semigroup_apply(sd, 0.0, [0.5, 0.7]), [0.5, 0.0])
    np.testing.assert_allclose(semigroup_apply(sd, 1.0, [1.0, 1.0]), [np.exp(-1), 0.0])
    with pytest.raises(ValueError):
        semigroup_apply(sd, -1.0, [1.0, 0.0])


def test_semigroup_property(toy3_reduced, rng):
    sd = spectral_factorize(toy3_reduced)
    x = rng.normal(size=2)
    a = semigroup_apply(sd, 0.3, semigroup_apply(sd, 0.4, x))
    np.testing.assert_allclose(a, semigroup_apply(sd, 0.7, x), atol=1e-14)


def test_x_half_contraction(toy3_reduced, rng):
    sd = spectral_factorize(toy3_reduced)
    for _ in range(10):
        v0 = sd.from_modes(rng.normal(size=2) * sd.stable)
        for tau in (0.1, 1.0):
            lhs = x_half_norm(sd, semigroup_apply(sd, tau, v0))
            assert lhs <= np.exp(-sd.nu * tau) * x_half_norm(sd, v0) * (1 + 1e-12)


def test_kernel_envelope_geometric():
    sd = spectral_factorize(builtin_reduced("geometric", K=10))
    for t in np.logspace(-3, 0, 31):
        assert resolvent_kernel_norm(sd, t) * np.e * t <= 1 + 1e-12
    assert resolvent_kernel_norm(sd, -1.0) == 0.0


def test_resolvent_scan_tail(toy3_reduced):
    sc = resolvent_scan(toy3_reduced, 50.0, 501)
    assert sc.tail_closes
    assert np.isfinite(sc.weighted_sup)
    assert sc.norm_R.shape == (501,)
