"""Local stable manifolds of ``Gamma u' = E u + D(u, u)`` by Picard iteration.

For a parameter ``v0`` in the stable subspace the decaying solution is the
fixed point of

    u = T_s(.) P_s v0 + K_m D(u, u)

on a half-line grid.  Its boundary value ``u(0)`` splits as ``v0 + J(v0)``,
and ``J`` is the chart whose graph is the manifold.  Unstable manifolds are
obtained by running the same machinery on ``ReducedSystem.reversed()``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .multiplier import (GridFunction, apply_K, apply_Km, estimate_Km_norm, exp_convolve)
from .reduction import BlockDecomposition, ReducedSystem, lift
from .spectral import SpectralData, projections, semigroup_values, x_half_norm


class ContractionError(RuntimeError):
    """The Picard map failed to contract (radii too large for the measured constants)."""


@dataclass(frozen=True)
class SolverConfig:
    alpha: float
    nu_tilde: float
    eps1: float
    eps2: float
    T: float
    dt: float
    max_iter: int = 40
    fp_tol: float = 1e-10
    c: float | None = None
    max_ratio: float = 0.6

    def __post_init__(self):
        if not 0 <= self.alpha <= self.nu_tilde:
            raise ValueError("need 0 <= alpha <= nu_tilde")
        if self.c is not None:
            if self.c * self.eps2 > 1 / 16 * (1 + 1e-12) or self.c * self.eps1 > self.eps2 / 2 * (1 + 1e-12):
                raise ValueError("radii violate c eps2 <= 1/16 and c eps1 <= eps2/2")

    @property
    def n(self) -> int:
        return int(round(self.T / self.dt)) + 1

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("alpha", "nu_tilde", "eps1", "eps2", "T", "dt", "max_iter", "fp_tol", "c", "max_ratio")}


@dataclass(frozen=True)
class Constants:
    c: float
    km_norm: float
    trajectory_norm: float
    D_norm: float
    per_alpha: dict = field(default_factory=dict)


def window_length(sd: SpectralData, fp_tol: float, dt: float) -> float:
    """Shortest grid-aligned ``T`` with ``e^{-nu T} <= fp_tol``."""
    T = np.log(1 / fp_tol) / sd.nu
    return float(np.ceil(T / dt) * dt)


def trajectory(sd: SpectralData, v0: np.ndarray, tau: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``T_s(tau) P_s v0`` and its time derivative."""
    y = sd.to_modes(np.asarray(v0, dtype=float))
    g = semigroup_values(sd, tau, "stable")
    return sd.from_modes(g * y), sd.from_modes(sd.H * g * y)


def _random_stable(sd: SpectralData, rng: np.random.Generator) -> np.ndarray:
    y = rng.normal(size=sd.dim) * sd.stable
    return sd.from_modes(y)


def estimate_constants(r: ReducedSystem, sd: SpectralData, alpha_list, T: float | None = None,
                       dt: float = 1e-3, probes: int = 64, seed: int = 0,
                       safety: float = 2.0) -> Constants:
    """Probe the norms entering the contraction argument.

    ``c = safety * max(|T_s|, |K_m|, 2 |K_m| |D|)`` where ``|T_s|`` is the
    ``X_{1/2} -> H1_alpha`` norm of ``v0 -> T_s(.) v0`` and ``|K_m|`` the
    ``H1_alpha`` norm of the half-line multiplier, both maximized over random
    probes and over ``alpha_list``.  The ``|D|`` term makes the resulting radii
    sufficient for the quadratic nonlinearity (``H1`` on the half-line is an
    algebra with constant 2).
    """
    if T is None:
        T = window_length(sd, 1e-10, dt)
    rng = np.random.default_rng(seed)
    tau = dt * np.arange(int(round(T / dt)) + 1)
    km = 0.0
    tr = 0.0
    per = {}
    for a in alpha_list:
        k_a = estimate_Km_norm(r, sd, a, T, dt, probes, seed)
        t_a = 0.0
        if sd.lambda_minus.size:
            for _ in range(probes):
                v0 = _random_stable(sd, rng)
                vals, ders = trajectory(sd, v0, tau)
                g = GridFunction(0.0, dt, vals, ders)
                t_a = max(t_a, g.h1(a) / x_half_norm(sd, v0))
        per[float(a)] = {"km_norm": k_a, "trajectory_norm": t_a}
        km = max(km, k_a)
        tr = max(tr, t_a)
    dn = r.D_norm()
    c = safety * max(tr, km, 2 * km * dn)
    return Constants(float(c), float(km), float(tr), float(dn), per)


def default_config(r: ReducedSystem, sd: SpectralData, alpha: float | None = None,
                   dt: float = 1e-3, fp_tol: float = 1e-10, probes: int = 64, seed: int = 0,
                   eps1: float | None = None, eps2: float | None = None,
                   max_iter: int = 40) -> SolverConfig:
    """Window, grid and ball radii; radii come from the measured constant with
    ``c eps2 = 1/16`` and ``c eps1 = eps2 / 2`` unless given explicitly."""
    nu_tilde = sd.nu / 2
    if alpha is None:
        alpha = nu_tilde / 2
    T = window_length(sd, fp_tol, dt)
    c = None
    if eps1 is None or eps2 is None:
        c = estimate_constants(r, sd, [alpha], T, dt, probes, seed).c
        eps2 = 1 / (16 * c) if eps2 is None else eps2
        eps1 = eps2 / (2 * c) if eps1 is None else eps1
    return SolverConfig(alpha, nu_tilde, eps1, eps2, T, dt, max_iter, fp_tol, c)


@dataclass(frozen=True)
class ManifoldPoint:
    v0: np.ndarray
    u0: np.ndarray
    J: np.ndarray
    trajectory: GridFunction
    iterations: int
    contraction_estimate: float
    increments: tuple = ()
    norm: float = 0.0

    def to_dict(self) -> dict:
        return {
            "v0": self.v0.tolist(),
            "u0": self.u0.tolist(),
            "J": self.J.tolist(),
            "iterations": self.iterations,
            "contraction_estimate": self.contraction_estimate,
            "h1_alpha_norm": self.norm,
        }


def _nonlinearity(r: ReducedSystem, u: GridFunction) -> GridFunction:
    f = r.bilinear(u.values, u.values)
    df = 2 * r.bilinear(u.values, u.derivs)
    return GridFunction(0.0, u.dt, f, df)


def chart_value(r: ReducedSystem, sd: SpectralData, u0: np.ndarray) -> np.ndarray:
    """``J = P_u u0 - P_s E^{-1} D(u0, u0)``."""
    P = projections(sd)
    return P.P_u @ u0 - P.P_s @ np.linalg.solve(sd.E, r.bilinear(u0, u0))


def solve_fixed_point(r: ReducedSystem, sd: SpectralData, v0, cfg: SolverConfig,
                      initial: GridFunction | None = None, check_ball: bool = True) -> ManifoldPoint:
    v0 = np.asarray(v0, dtype=float).reshape(sd.dim)
    P = projections(sd)
    if np.linalg.norm(P.P_u @ v0) > 1e-10 * max(1.0, np.linalg.norm(v0)):
        raise ValueError("v0 must lie in the stable subspace")
    if check_ball and x_half_norm(sd, v0) > cfg.eps1 * (1 + 1e-12):
        raise ValueError(f"|v0|_X1/2 = {x_half_norm(sd, v0):.4g} exceeds eps1 = {cfg.eps1:.4g}")
    tau = cfg.dt * np.arange(cfg.n)
    vals, ders = trajectory(sd, v0, tau)
    base = GridFunction(0.0, cfg.dt, vals, ders)
    u = base if initial is None else initial
    if u.n != base.n or u.derivs is None:
        raise ValueError("initial iterate must live on the solver grid with derivatives")
    incs: list[float] = []
    ratio = 0.0
    for k in range(1, cfg.max_iter + 1):
        new = base + apply_Km(r, sd, _nonlinearity(r, u))
        inc = (new - u).h1(cfg.alpha)
        if incs and incs[-1] > 1e-13 * max(1.0, new.h1(cfg.alpha)):
            ratio = max(ratio, inc / incs[-1])
            if ratio > cfg.max_ratio:
                raise ContractionError(f"Picard ratio {ratio:.3f} > {cfg.max_ratio} at iteration {k}")
        incs.append(inc)
        u = new
        if inc <= cfg.fp_tol:
            break
    else:
        raise ContractionError(f"no convergence in {cfg.max_iter} iterations (last increment {incs[-1]:.3e})")
    u0 = u.values[0].copy()
    return ManifoldPoint(v0, u0, chart_value(r, sd, u0), u, k, float(ratio), tuple(incs),
                         float(u.h1(cfg.alpha)))


def manifold_chart(r: ReducedSystem, sd: SpectralData, v0, cfg: SolverConfig,
                   block: BlockDecomposition, equilibrium: np.ndarray, **kw) -> tuple[ManifoldPoint, np.ndarray]:
    """Solve at ``v0`` and return the full-space point ``u_eq + lift(u0)``."""
    pt = solve_fixed_point(r, sd, v0, cfg, **kw)
    return pt, np.asarray(equilibrium, dtype=float) + lift(pt.u0, block)


def boundary_map(r: ReducedSystem, sd: SpectralData, v0, cfg: SolverConfig, **kw) -> tuple[np.ndarray, ManifoldPoint]:
    """``Y_s(v0) = v0 - P_s E^{-1} D(u0, u0)``, which equals ``P_s u0``."""
    pt = solve_fixed_point(r, sd, v0, cfg, **kw)
    P = projections(sd)
    y = pt.v0 - P.P_s @ np.linalg.solve(sd.E, r.bilinear(pt.u0, pt.u0))
    return y, pt


def graph_map(r: ReducedSystem, sd: SpectralData, v1, cfg: SolverConfig, tol: float = 1e-12,
              max_iter: int = 30, **kw) -> tuple[np.ndarray, np.ndarray]:
    """Invert ``Y_s`` near 0 by Newton steps with identity Jacobian, then return
    ``(v0, P_u u0)`` so that the manifold is the graph ``v1 -> P_u u0`` over ``X_s``."""
    v1 = np.asarray(v1, dtype=float)
    v0 = v1.copy()
    P = projections(sd)
    prev = np.inf
    for _ in range(max_iter):
        y, pt = boundary_map(r, sd, v0, cfg, **kw)
        res = y - v1
        err = np.linalg.norm(res)
        if err <= tol * max(1.0, np.linalg.norm(v1)):
            return v0, P.P_u @ pt.u0
        if err > 0.9 * prev:
            raise ContractionError(f"Newton stalled at residual {err:.3e}; v1 too large")
        prev = err
        v0 = P.P_s @ (v0 - res)
    raise ContractionError("Newton iteration cap reached")


def flow_parameter(r: ReducedSystem, sd: SpectralData, point: ManifoldPoint, tau0: float) -> np.ndarray:
    """``v1 = T_s(tau0) v0 + int_0^tau0 T_s(tau0 - s) P_s E^{-1} (D(u,u))'(s) ds``."""
    u = point.trajectory
    k = u.index_of(tau0)
    if k == 0:
        return point.v0.copy()
    dD = 2 * r.bilinear(u.values[: k + 1], u.derivs[: k + 1])
    y = sd.to_modes(np.linalg.solve(sd.E, dD.T).T)
    acc = np.zeros(sd.dim)
    for l in sd.lambda_minus:
        acc[l] = exp_convolve(sd.H[l], y[:, l], u.dt, causal=True)[-1]
    g = semigroup_values(sd, tau0, "stable")
    return sd.from_modes(g * sd.to_modes(point.v0) + acc)


def verify_invariance(r: ReducedSystem, sd: SpectralData, point: ManifoldPoint, tau0: float,
                      cfg: SolverConfig, check_ball: bool = True) -> float:
    """``|u(.; v1) - u(. + tau0; v0)|_{H1}`` on the common window."""
    v1 = flow_parameter(r, sd, point, tau0)
    if check_ball and x_half_norm(sd, v1) > cfg.eps1 * (1 + 1e-12):
        raise ValueError("v1 left the parameter ball")
    k = point.trajectory.index_of(tau0)
    if k == 0:
        return 0.0
    other = solve_fixed_point(r, sd, v1, cfg, check_ball=check_ball)
    shifted = point.trajectory.window(k, retime=True)
    return float((other.trajectory.window(0, shifted.n) - shifted).h1(0.0))


def tangency_slope(r: ReducedSystem, sd: SpectralData, direction, radii, cfg: SolverConfig,
                   **kw) -> np.ndarray:
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    out = []
    for t in radii:
        pt = solve_fixed_point(r, sd, t * d, cfg, **kw)
        out.append(np.linalg.norm(pt.J) / t)
    return np.array(out)


class DecayFit(NamedTuple):
    rate: float
    r2: float
    window: tuple[float, float]
    shrunk: bool


def fit_decay_rate(traj: GridFunction, window: tuple[float, float]) -> DecayFit:
    """Least-squares slope of ``log |u(t)|`` on the window, reported as a decay rate."""
    t = traj.tau
    nrm = np.linalg.norm(traj.values, axis=1)
    lo, hi = window
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    floor = 1e-13 * nrm.max() if nrm.max() > 0 else 0.0
    shrunk = False
    good = sel & (nrm > max(floor, 1e-300))
    if good.sum() < sel.sum():
        shrunk = True
        # keep the initial stretch before the trajectory hits numerical zero
        idx = np.flatnonzero(sel)
        bad = idx[~good[idx]]
        good = sel & (t < t[bad[0]])
    if good.sum() < 3:
        raise ValueError("trajectory vanishes on the fit window")
    x = t[good]
    y = np.log(nrm[good])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(float(-coef[0]), r2, (float(x[0]), float(x[-1])), shrunk)


def residual_mild(r: ReducedSystem, sd: SpectralData, traj: GridFunction,
                  cfg: SolverConfig | None = None) -> float:
    """``|u - T_s(.) P_s u(0) - K D(u, u)|_{L2}``: the variation-of-constants defect."""
    vals, _ = trajectory(sd, traj.values[0], traj.tau)
    f = GridFunction(traj.t0, traj.dt, r.bilinear(traj.values, traj.values))
    kd = apply_K(r, sd, f).values
    return GridFunction(traj.t0, traj.dt, traj.values - vals - kd).l2(0.0)
