import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from relaxman import builtin_reduced, spectral_factorize
from relaxman.manifold import (ContractionError, GridFunction, SolverConfig, boundary_map, default_config,
                               estimate_constants, fit_decay_rate, flow_parameter, graph_map, manifold_chart,
                               residual_mild, solve_fixed_point, tangency_slope, verify_invariance,
                               window_length)
from relaxman.model import builtin_model
from relaxman.reduction import decompose, reduce
from relaxman.spectral import x_half_norm


def cfg_for(r, sd, dt=1e-2, eps1=0.1, eps2=1.0):
    return default_config(r, sd, dt=dt, eps1=eps1, eps2=eps2)


def test_zero_parameter_gives_zero(coupled_saddle):
    r, sd = coupled_saddle
    pt = solve_fixed_point(r, sd, [0.0, 0.0], cfg_for(r, sd))
    assert pt.trajectory.linf() == 0.0
    np.testing.assert_array_equal(pt.J, 0.0)


def test_linear_saddle_is_semigroup_orbit(saddle):
    r, sd = saddle
    pt = solve_fixed_point(r, sd, [0.05, 0.0], cfg_for(r, sd))
    t = pt.trajectory.tau
    np.testing.assert_allclose(pt.trajectory.values[:, 0], 0.05 * np.exp(-t), atol=1e-15)
    assert pt.iterations == 1
    np.testing.assert_array_equal(pt.J, 0.0)


def test_unstable_parameter_rejected(saddle):
    r, sd = saddle
    with pytest.raises(ValueError, match="stable subspace"):
        solve_fixed_point(r, sd, [0.0, 0.05], cfg_for(r, sd))
    with pytest.raises(ValueError, match="exceeds eps1"):
        solve_fixed_point(r, sd, [0.5, 0.0], cfg_for(r, sd))


def test_scalar_quadratic_closed_form(scalar):
    # u' = -u + u^2 with u(0) = v0 + u(0)^2, so v0 = 0.09 gives u(0) = 0.1
    r, sd = scalar
    cfg = default_config(r, sd, dt=1e-3, eps1=0.1, eps2=0.5)
    pt = solve_fixed_point(r, sd, [0.09], cfg)
    assert pt.u0[0] == pytest.approx(0.1, abs=1e-7)
    t = pt.trajectory.tau
    exact = 0.1 * np.exp(-t) / (1 - 0.1 * (1 - np.exp(-t)))
    assert np.max(np.abs(pt.trajectory.values[:, 0] - exact)) < 1e-5
    assert residual_mild(r, sd, pt.trajectory) < 1e-5
    assert fit_decay_rate(pt.trajectory, (5.0, 15.0)).rate == pytest.approx(1.0, abs=1e-2)
    # stable-only system: J is the boundary correction u0 - v0 = u0^2
    assert pt.J[0] == pytest.approx(pt.u0[0] ** 2, abs=1e-15)


def test_corrupted_trajectory_has_large_residual(scalar):
    r, sd = scalar
    pt = solve_fixed_point(r, sd, [0.09], cfg_for(r, sd, eps2=0.5))
    vals = pt.trajectory.values.copy()
    vals[50:80] += 1e-3
    bad = GridFunction(0.0, pt.trajectory.dt, vals)
    assert residual_mild(r, sd, bad) > 100 * residual_mild(r, sd, pt.trajectory)


def test_coupled_saddle_chart_is_quadratic(coupled_saddle):
    # u1 = a e^{-t}, bounded u2 solves u2' = u2 - u1^2, so u2(0) = a^2 / 3
    r, sd = coupled_saddle
    cfg = cfg_for(r, sd, dt=1e-3)
    a = 0.04
    pt = solve_fixed_point(r, sd, [a, 0.0], cfg)
    np.testing.assert_allclose(pt.J, [0.0, a * a / 3], atol=1e-8)
    s = tangency_slope(r, sd, [1.0, 0.0], [1e-2, 5e-3], cfg)
    assert s[1] / s[0] == pytest.approx(0.5, rel=1e-3)


def shoot_u2(a, T=12.0):
    # brute-force shooting: pick u2(0) so the forward solution stays bounded
    def end(c):
        sol = solve_ivp(lambda t, y: [-y[0], y[1] - y[0] ** 2], (0, T), [a, c], rtol=1e-12, atol=1e-15)
        return sol.y[1, -1]
    return brentq(end, -1.0, 1.0, xtol=1e-15)


def test_graph_map_matches_shooting(coupled_saddle):
    r, sd = coupled_saddle
    cfg = cfg_for(r, sd, dt=1e-3)
    v0, graph = graph_map(r, sd, [0.04, 0.0], cfg)
    assert graph[0] == pytest.approx(0.0, abs=1e-15)
    assert graph[1] == pytest.approx(shoot_u2(0.04), abs=1e-8)
    y, _ = boundary_map(r, sd, v0, cfg)
    np.testing.assert_allclose(y, [0.04, 0.0], atol=1e-12)


def test_graph_map_scalar_recovers_parameter(scalar):
    r, sd = scalar
    cfg = cfg_for(r, sd, dt=1e-3, eps2=0.5)
    y, pt = boundary_map(r, sd, [0.05], cfg)
    # Y_s(v0) = P_s u0 = u0, the small root of u0 - u0^2 = 0.05
    assert y[0] == pytest.approx(pt.u0[0], abs=1e-10)
    assert y[0] == pytest.approx((1 - np.sqrt(0.8)) / 2, abs=1e-8)
    v0, graph = graph_map(r, sd, y, cfg)
    assert v0[0] == pytest.approx(0.05, abs=1e-8)
    assert graph[0] == 0.0


def test_invariance_under_flow(coupled_saddle):
    r, sd = coupled_saddle
    cfg = cfg_for(r, sd, dt=1e-3)
    pt = solve_fixed_point(r, sd, [0.05, 0.0], cfg)
    for tau0 in (0.1, 0.5):
        v1 = flow_parameter(r, sd, pt, tau0)
        assert x_half_norm(sd, v1) < x_half_norm(sd, pt.v0)
        assert verify_invariance(r, sd, pt, tau0, cfg) < 1e-5


def test_uniqueness_from_different_starts(toy3_reduced, rng):
    sd = spectral_factorize(toy3_reduced)
    cfg = default_config(toy3_reduced, sd, dt=1e-2, probes=8)
    v0 = sd.from_modes(np.array([1.0, 0.0]))
    v0 *= 0.8 * cfg.eps1 / x_half_norm(sd, v0)
    a = solve_fixed_point(toy3_reduced, sd, v0, cfg)
    noise = GridFunction(0.0, cfg.dt, 0.1 * cfg.eps2 * rng.normal(size=(cfg.n, 2)) * np.exp(-np.arange(cfg.n) * cfg.dt)[:, None],
                         np.zeros((cfg.n, 2)))
    b = solve_fixed_point(toy3_reduced, sd, v0, cfg, initial=noise)
    assert (a.trajectory - b.trajectory).h1(cfg.alpha) < 2e-10
    assert a.contraction_estimate <= 0.55


def test_measured_radii_respect_contraction_bounds(toy3_reduced):
    sd = spectral_factorize(toy3_reduced)
    cfg = default_config(toy3_reduced, sd, dt=1e-2, probes=8)
    assert cfg.c * cfg.eps2 == pytest.approx(1 / 16)
    assert cfg.c * cfg.eps1 == pytest.approx(cfg.eps2 / 2)
    with pytest.raises(ValueError):
        SolverConfig(cfg.alpha, cfg.nu_tilde, 1.0, 1.0, cfg.T, cfg.dt, c=cfg.c)


def test_window_length(scalar):
    _, sd = scalar
    T = window_length(sd, 1e-10, 1e-3)
    assert np.exp(-sd.nu * T) <= 1e-10
    assert T == pytest.approx(23.026, abs=1e-3)


def test_contraction_error_for_oversized_ball(scalar):
    r, sd = scalar
    cfg = default_config(r, sd, dt=1e-2, eps1=0.3, eps2=5.0)
    with pytest.raises(ContractionError):
        solve_fixed_point(r, sd, [0.3], cfg)


def test_constants_stable_under_reseeding():
    r = builtin_reduced("example47", N=4, coupling=1.0).reversed()
    sd = spectral_factorize(r)
    cs = [estimate_constants(r, sd, [sd.nu / 2], dt=1e-2, probes=64, seed=s).c for s in (0, 1, 2)]
    assert np.all(np.isfinite(cs))
    assert np.max(np.abs(np.array(cs) / np.mean(cs) - 1)) <= 0.1


def test_chart_in_full_coordinates(toy3):
    r = reduce(toy3, "plus")
    sd = spectral_factorize(r)
    cfg = default_config(r, sd, dt=1e-2, eps1=0.05, eps2=0.5)
    b = decompose(toy3, "plus")
    v0 = sd.from_modes(np.array([0.01, 0.0]))
    pt, u = manifold_chart(r, sd, v0, cfg, b, toy3.equilibrium("plus"))
    # the full-space point sits on the constraint A11 w + A12 v = 0 relative to the equilibrium
    d = u - toy3.equilibrium("plus")
    np.testing.assert_allclose(b.v_perp_basis.T @ toy3.A @ d, 0.0, atol=1e-14)
    np.testing.assert_allclose(b.v_basis.T @ d, pt.u0, atol=1e-14)


def test_decay_fit_rate():
    t = np.arange(0, 10, 1e-2)
    g = GridFunction(0.0, 1e-2, (3 * np.exp(-0.7 * t))[:, None])
    fit = fit_decay_rate(g, (1.0, 8.0))
    assert fit.rate == pytest.approx(0.7, abs=1e-10)
    assert not fit.shrunk
    with pytest.raises(ValueError):
        fit_decay_rate(GridFunction(0.0, 1e-2, np.zeros((100, 1))), (0.1, 0.5))
