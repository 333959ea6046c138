import numpy as np
import pytest

from relaxman import builtin_model, builtin_reduced, reduce, resolvent, spectral_factorize
from relaxman.multiplier import (GridFunction, apply_K, apply_Km, boundary_value_Km, estimate_Km_norm,
                                 example47_lower_bound, exp_convolve, phi_functions, random_probe,
                                 weight_commutator_residual, weighted_convolution_bound)

# exp(-1/e) - exp(-1): the convolution of e^{e t} against chi[e^-2, e^-1) at t = 0
SINGLE_MODE_TAU0 = 0.32432118638390406


def col(fn):
    return lambda t: fn(t)[:, None]


def test_phi_functions_continuous_across_series_switch():
    z = np.array([-0.1 - 1e-12, -0.1 + 1e-12, 0.1 - 1e-12, 0.1 + 1e-12])
    p1, p2 = phi_functions(z)
    assert abs(p1[0] - p1[1]) < 1e-10 and abs(p1[2] - p1[3]) < 1e-10
    assert abs(p2[0] - p2[1]) < 1e-10 and abs(p2[2] - p2[3]) < 1e-10
    p1, p2 = phi_functions(np.array([0.0, -3.0]))
    np.testing.assert_allclose(p1, [1.0, np.expm1(-3) / -3])
    np.testing.assert_allclose(p2, [0.5, (np.expm1(-3) + 3) / 9])


def test_exp_convolve_exact_on_linear_data():
    # int_0^t e^{-(t-s)} s ds = t - 1 + e^{-t}
    t = np.linspace(0, 3, 7)
    c = exp_convolve(-1.0, t, 0.5, causal=True)
    np.testing.assert_allclose(c, t - 1 + np.exp(-t), atol=1e-14)
    # nonuniform nodes give the same answer
    c2 = exp_convolve(-1.0, t, t, causal=True)
    np.testing.assert_allclose(c2, c, atol=1e-14)


def test_scalar_closed_forms(scalar):
    r, sd = scalar
    f = GridFunction.sample(col(lambda t: np.exp(-t)), 0.0, 20.0, 1e-3, col(lambda t: -np.exp(-t)))
    t = f.tau
    K = apply_K(r, sd, f)
    Km = apply_Km(r, sd, f)
    assert np.max(np.abs(K.values[:, 0] - t * np.exp(-t))) < 1e-6
    assert np.max(np.abs(Km.values[:, 0] - (1 + t) * np.exp(-t))) < 1e-6


def test_Km_of_constant_is_one(scalar):
    r, sd = scalar
    f = GridFunction(0.0, 1e-2, np.ones((501, 1)), np.zeros((501, 1)))
    np.testing.assert_allclose(apply_Km(r, sd, f).values, 1.0, atol=1e-12)


def test_Km_derivative_identity_random(toy3_reduced, rng):
    sd = spectral_factorize(toy3_reduced)
    for _ in range(3):
        f, fp = random_probe(rng, 2)
        g = GridFunction.sample(f, 0.0, 15.0, 1e-3, fp)
        out = apply_Km(toy3_reduced, sd, g)
        fd = np.gradient(out.values, g.dt, axis=0, edge_order=2)
        # interior points only: the window end truncates the anticausal part
        sl = slice(5, g.n // 2)
        assert np.max(np.abs(fd[sl] - out.derivs[sl])) < 1e-4


def test_K_solves_the_equation(toy3_reduced, rng):
    sd = spectral_factorize(toy3_reduced)
    f, fp = random_probe(rng, 2)
    g = GridFunction.sample(f, 0.0, 20.0, 1e-3)
    u = apply_K(toy3_reduced, sd, g)
    fd = np.gradient(u.values, g.dt, axis=0)
    sl = slice(100, g.n - 2000)
    res = fd[sl] @ toy3_reduced.Gamma.T - u.values[sl] @ toy3_reduced.E.T - g.values[sl]
    assert np.abs(res).max() < 1e-5


def test_fft_consistency(toy3_reduced):
    r = toy3_reduced
    sd = spectral_factorize(r)
    errs = []
    for dt in (1e-2, 5e-3):
        L = 40.0
        n = int(2 * L / dt)
        t = -L + dt * np.arange(n)
        fv = np.stack([np.exp(-t ** 2), t * np.exp(-t ** 2 / 2)], 1)
        K = apply_K(r, sd, GridFunction(-L, dt, fv)).values
        w = np.fft.fftfreq(n, dt)
        F = np.fft.fft(fv, axis=0)
        U = np.stack([resolvent(r, wi) @ F[i] for i, wi in enumerate(w)])
        errs.append(np.abs(np.fft.ifft(U, axis=0).real - K).max())
    assert errs[0] < 5e-5
    assert errs[0] / errs[1] > 3.5  # second order


def test_translation_invariance(toy3_reduced, rng):
    sd = spectral_factorize(toy3_reduced)
    f, _ = random_probe(rng, 2)
    dt, shift = 1e-2, 50
    base = GridFunction.sample(lambda t: f(np.abs(t)), -10.0, 10.0, dt)
    moved = GridFunction(base.t0 + shift * dt, dt, base.values)
    a = apply_K(toy3_reduced, sd, base).values
    b = apply_K(toy3_reduced, sd, moved).values
    np.testing.assert_allclose(a, b, atol=1e-14)


def test_weight_commutator_converges(scalar):
    r, sd = scalar
    res = []
    for dt in (1e-3, 5e-4):
        f = GridFunction.sample(col(lambda t: np.exp(-t)), 0, 30, dt)
        psi = GridFunction.sample(col(lambda t: np.exp(-(t / 10) ** 2)), 0, 30, dt,
                                  col(lambda t: -t / 50 * np.exp(-(t / 10) ** 2)))
        res.append(weight_commutator_residual(r, sd, psi, f))
    assert res[0] <= 1e-4
    assert res[0] / res[1] >= 2


def test_weight_commutator_tapered(scalar):
    r, sd = scalar
    a = sd.nu / 2
    f = GridFunction.sample(col(lambda t: np.exp(-t)), 0, 30, 1e-3)
    psi = GridFunction.sample(col(lambda t: np.exp(-a * t)), 0, 30, 1e-3, col(lambda t: -a * np.exp(-a * t)))
    assert weight_commutator_residual(r, sd, psi, f) <= 1e-4


def test_boundary_value_on_saddle(saddle):
    r, sd = saddle
    # forcing only in the unstable coordinate: (K_m f)(0)_2 = int_0^inf e^{-s} e^{-s} ds = 1/2
    f = GridFunction.sample(lambda t: np.stack([0 * t, np.exp(-t)], 1), 0, 40, 1e-3,
                            lambda t: np.stack([0 * t, -np.exp(-t)], 1))
    km0, res = boundary_value_Km(r, sd, f)
    assert np.abs(res).max() < 1e-15
    assert km0[0] == 0.0
    assert km0[1] == pytest.approx(0.5, abs=1e-6)


def test_boundary_residual_vanishes_generally(toy3_reduced, rng):
    sd = spectral_factorize(toy3_reduced)
    f, fp = random_probe(rng, 2)
    g = GridFunction.sample(f, 0.0, 20.0, 1e-2, fp)
    _, res = boundary_value_Km(toy3_reduced, sd, g)
    assert np.abs(res).max() < 1e-12


def test_Km_requires_half_line(scalar):
    r, sd = scalar
    with pytest.raises(ValueError):
        apply_Km(r, sd, GridFunction(-1.0, 0.1, np.ones((5, 1)), np.zeros((5, 1))))
    with pytest.raises(ValueError):
        apply_Km(r, sd, GridFunction(0.0, 0.1, np.ones((5, 1))))


def test_weighted_convolution_bound(toy3_reduced, rng):
    sd = spectral_factorize(toy3_reduced)
    for frac in (0.25, 0.75):
        a = frac * sd.nu
        f, _ = random_probe(rng, 2)
        g = GridFunction.sample(f, 0.0, 30.0, 1e-3)
        assert weighted_convolution_bound(sd, a, g) * (sd.nu - a) <= 1.0
    with pytest.raises(ValueError):
        weighted_convolution_bound(sd, sd.nu, g)


def test_Km_norm_estimate_stable_under_refinement(scalar):
    r, sd = scalar
    n1 = estimate_Km_norm(r, sd, 0.5, 30.0, 2e-3, probes=8)
    n2 = estimate_Km_norm(r, sd, 0.5, 30.0, 1e-3, probes=8)
    assert np.isfinite(n1) and abs(n2 - n1) / n1 < 0.05


def test_example47_single_mode_value():
    res = example47_lower_bound(1)
    assert res.single_mode_tau0 == pytest.approx(SINGLE_MODE_TAU0, abs=1e-12)
    assert res.closed_form_tau0 == pytest.approx(SINGLE_MODE_TAU0, abs=1e-15)


@pytest.mark.parametrize("N", [1, 4, 16])
def test_example47_growth_beats_bound(N):
    res = example47_lower_bound(N)
    assert res.measured_sup >= res.bound


def test_example47_grid_independent():
    a = example47_lower_bound(4)
    b = example47_lower_bound(4, dt=np.exp(-5) / 64)
    assert b.measured_sup >= a.measured_sup - 1e-12
    with pytest.raises(ValueError):
        example47_lower_bound(4, dt=1.0)


def test_grid_function_norms():
    g = GridFunction(0.0, 1e-3, np.exp(-np.arange(20001) * 1e-3)[:, None],
                     -np.exp(-np.arange(20001) * 1e-3)[:, None])
    # |e^{-t}|_{L2} = 1/sqrt(2); with weight e^{0.5 t} it is 1
    assert g.l2() == pytest.approx(np.sqrt(0.5), rel=1e-6)
    assert g.l2(0.5) == pytest.approx(1.0, rel=1e-5)
    assert g.h1() == pytest.approx(1.0, rel=1e-6)
    assert g.linf() == 1.0
