"""The Fourier multiplier ``(2 pi i omega Gamma - E)^{-1}`` on grid trajectories.

In mode coordinates the multiplier is a convolution with the scalar kernels
``Phi(t) = H e^{tH}`` (``t > 0``, stable modes) and ``-H e^{tH}`` (``t < 0``,
unstable modes).  These are applied by exact exponential integration of the
piecewise-linear interpolant of the data, so the only discretization error
comes from that interpolant and it does not degrade with stiffness ``|H|``.

Grid data is extended by zero outside the stored window.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.signal import lfilter

from .reduction import ReducedSystem, example47_system
from .spectral import SpectralData, green_values, projections, semigroup_values, spectral_factorize


@dataclass(frozen=True)
class GridFunction:
    """Samples ``values[j] = u(t0 + j dt)`` with an optional derivative channel."""
    t0: float
    dt: float
    values: np.ndarray
    derivs: np.ndarray | None = None
    frame: str = "physical"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        object.__setattr__(self, "values", v)
        if self.derivs is not None:
            d = np.asarray(self.derivs, dtype=float).reshape(v.shape)
            object.__setattr__(self, "derivs", d)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.frame not in ("physical", "spectral"):
            raise ValueError("frame must be 'physical' or 'spectral'")

    @classmethod
    def sample(cls, f: Callable, t0: float, T: float, dt: float,
               fprime: Callable | None = None, frame: str = "physical") -> "GridFunction":
        n = int(round((T - t0) / dt)) + 1
        tau = t0 + dt * np.arange(n)
        vals = np.asarray(f(tau), dtype=float)
        ders = None if fprime is None else np.asarray(fprime(tau), dtype=float)
        if vals.ndim == 2 and vals.shape[0] != n:
            vals = vals.T
            ders = None if ders is None else ders.T
        return cls(t0, dt, vals, ders, frame)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def tau(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    @property
    def T(self) -> float:
        return self.t0 + self.dt * (self.n - 1)

    def with_values(self, values, derivs=None) -> "GridFunction":
        return replace(self, values=values, derivs=derivs)

    def _weighted_sq(self, arr: np.ndarray, alpha: float) -> float:
        w = np.exp(2 * alpha * self.tau)
        return float(np.trapezoid(w * np.sum(arr ** 2, axis=1), dx=self.dt))

    def l2(self, alpha: float = 0.0) -> float:
        return np.sqrt(self._weighted_sq(self.values, alpha))

    def h1(self, alpha: float = 0.0) -> float:
        if self.derivs is None:
            raise ValueError("H1 norm needs the derivative channel")
        return np.sqrt(self._weighted_sq(self.values, alpha) + self._weighted_sq(self.derivs, alpha))

    def linf(self) -> float:
        return float(np.max(np.linalg.norm(self.values, axis=1)))

    def index_of(self, t: float) -> int:
        k = int(round((t - self.t0) / self.dt))
        if not 0 <= k < self.n or abs(self.t0 + k * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not a grid node")
        return k

    def window(self, i0: int, i1: int | None = None, retime: bool = False) -> "GridFunction":
        """Nodes ``i0 .. i1-1``; with ``retime`` the first kept node becomes ``t = 0``."""
        v = self.values[i0:i1]
        d = None if self.derivs is None else self.derivs[i0:i1]
        t0 = 0.0 if retime else self.t0 + i0 * self.dt
        return GridFunction(t0, self.dt, v, d, self.frame)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        d = None
        if self.derivs is not None and other.derivs is not None:
            d = self.derivs - other.derivs
        return replace(self, values=self.values - other.values, derivs=d)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        d = None
        if self.derivs is not None and other.derivs is not None:
            d = self.derivs + other.derivs
        return replace(self, values=self.values + other.values, derivs=d)


# ---------------------------------------------------------------------------
# scalar exponential convolution

def phi_functions(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``phi1(z) = (e^z - 1)/z`` and ``phi2(z) = (e^z - 1 - z)/z^2`` without cancellation."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 0.1
    zs = np.where(small, 1.0, z)
    with np.errstate(over="ignore", invalid="ignore"):
        p1 = np.expm1(zs) / zs
        p2 = (np.expm1(zs) - zs) / zs ** 2
    zz = np.where(small, z, 0.0)
    s1 = np.zeros_like(zz)
    s2 = np.zeros_like(zz)
    term1 = np.ones_like(zz)  # z^k/(k+1)!
    term2 = 0.5 * np.ones_like(zz)  # z^k/(k+2)!
    for k in range(12):
        s1 = s1 + term1
        s2 = s2 + term2
        term1 = term1 * zz / (k + 2)
        term2 = term2 * zz / (k + 3)
    return np.where(small, s1, p1), np.where(small, s2, p2)


def exp_convolve(H: float, g: np.ndarray, step, causal: bool) -> np.ndarray:
    """``c(t) = int e^{H (t - s)} g(s) ds`` over ``s < t`` (causal) or ``s > t``.

    ``g`` holds nodal values of a piecewise-linear function vanishing outside
    the nodes' span.  ``step`` is either a uniform spacing or the array of node
    times (nondecreasing; repeated nodes encode jumps).  The recurrence is
    exact for that interpolant.  ``H`` must be negative for the causal branch
    and positive for the anticausal one.
    """
    g = np.asarray(g, dtype=float)
    n = g.size
    out = np.zeros(n)
    if n < 2:
        return out
    if np.ndim(step) == 0:
        h = np.full(n - 1, float(step))
    else:
        h = np.diff(np.asarray(step, dtype=float))
    z = H * h if causal else -H * h
    a = np.exp(z)
    p1, p2 = phi_functions(z)
    if causal:
        b = h * ((p1 - p2) * g[:-1] + p2 * g[1:])
    else:
        b = h * (p2 * g[:-1] + (p1 - p2) * g[1:])
    uniform = np.ndim(step) == 0
    if causal:
        if uniform:
            out[1:] = lfilter([1.0], [1.0, -a[0]], b)
        else:
            for j in range(n - 1):
                out[j + 1] = a[j] * out[j] + b[j]
    else:
        if uniform:
            out[:-1] = lfilter([1.0], [1.0, -a[0]], b[::-1])[::-1]
        else:
            for j in range(n - 2, -1, -1):
                out[j] = a[j] * out[j + 1] + b[j]
    return out


def mode_convolve(H: np.ndarray, F: np.ndarray, step, kernel: str = "green") -> np.ndarray:
    """Convolve each mode column of ``F`` with its Green kernel (``kernel='green'``)
    or with ``Phi = H * green`` (``kernel='phi'``)."""
    F = np.asarray(F, dtype=float)
    out = np.empty_like(F)
    for l, h in enumerate(H):
        c = exp_convolve(h, F[:, l], step, causal=h < 0)
        sign = 1.0 if h < 0 else -1.0
        out[:, l] = sign * c * (h if kernel == "phi" else 1.0)
    return out


# ---------------------------------------------------------------------------
# the multipliers

def _check(f: GridFunction, sd: SpectralData):
    if f.frame != "physical":
        raise ValueError("multiplier input must be in the physical frame")
    if f.d != sd.dim:
        raise ValueError(f"dimension mismatch: grid has {f.d} components, system {sd.dim}")


def _K_values(sd: SpectralData, f: GridFunction, values: np.ndarray) -> np.ndarray:
    # K f = E^{-1} U^T [Phi * (U^T)^{-1} f]
    Ft = np.linalg.solve(sd.U.T, values.T).T
    Y = mode_convolve(sd.H, Ft, f.dt, kernel="phi")
    return np.linalg.solve(sd.E, sd.U.T @ Y.T).T


def apply_K(r: ReducedSystem, sd: SpectralData, f: GridFunction) -> GridFunction:
    """Bounded solution ``u`` of ``Gamma u' = E u + f`` on the window.

    The derivative channel comes from the equation itself,
    ``u' = Gamma^{-1}(E u + f)``, not from differencing.
    """
    _check(f, sd)
    u = _K_values(sd, f, f.values)
    du = np.linalg.solve(sd.Gamma, (u @ sd.E.T + f.values).T).T
    return GridFunction(f.t0, f.dt, u, du)


def green_apply(sd: SpectralData, f: GridFunction) -> GridFunction:
    """``(G * f)(t) = int G(t - s) f(s) ds`` with the dichotomy Green function."""
    _check(f, sd)
    Y = mode_convolve(sd.H, sd.to_modes(f.values), f.dt)
    return GridFunction(f.t0, f.dt, sd.from_modes(Y))


def adjoint_green_apply(sd: SpectralData, f: GridFunction) -> GridFunction:
    """Convolution with the transposed kernel ``G(t)^T = U^T diag(g) U^{-T}``."""
    _check(f, sd)
    Ft = np.linalg.solve(sd.U.T, f.values.T).T
    Y = mode_convolve(sd.H, Ft, f.dt)
    return GridFunction(f.t0, f.dt, Y @ sd.U)


def _require_half_line(f: GridFunction):
    if abs(f.t0) > 1e-14:
        raise ValueError("the modified multiplier acts on half-line grids starting at t = 0")
    if f.derivs is None:
        raise ValueError("the modified multiplier needs the derivative channel of f")


def semigroup_correction(sd: SpectralData, f0: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """``T_s(tau) P_s E^{-1} f0`` at every time in ``tau``."""
    y = sd.to_modes(np.linalg.solve(sd.E, f0))
    return sd.from_modes(semigroup_values(sd, tau, "stable") * y)


def apply_Km(r: ReducedSystem, sd: SpectralData, f: GridFunction) -> GridFunction:
    """Half-line multiplier ``(K f)|_{t >= 0} - T_s(.) P_s E^{-1} f(0)``.

    Its derivative is ``K`` applied to the derivative channel of ``f``.
    """
    _check(f, sd)
    _require_half_line(f)
    vals = _K_values(sd, f, f.values) - semigroup_correction(sd, f.values[0], f.tau)
    ders = _K_values(sd, f, f.derivs)
    return GridFunction(0.0, f.dt, vals, ders)


def boundary_value_Km(r: ReducedSystem, sd: SpectralData, f: GridFunction) -> tuple[np.ndarray, np.ndarray]:
    """``((K_m f)(0), P_s[(K_m f)(0) + P_s E^{-1} f(0)])``; the second entry must vanish."""
    km0 = apply_Km(r, sd, f).values[0]
    P = projections(sd).P_s
    res = P @ (km0 + P @ np.linalg.solve(sd.E, f.values[0]))
    return km0, res


def weight_commutator_residual(r: ReducedSystem, sd: SpectralData, psi: GridFunction,
                               f: GridFunction) -> float:
    """Sup-norm of ``K(psi f + psi' (G^T * f)) - psi K f`` over the window."""
    if psi.derivs is None:
        raise ValueError("psi needs its derivative channel")
    p = psi.values[:, :1]
    dp = psi.derivs[:, :1]
    gstar = adjoint_green_apply(sd, f).values
    lhs = apply_K(r, sd, f.with_values(p * f.values + dp * gstar)).values
    rhs = p * apply_K(r, sd, f).values
    return float(np.max(np.linalg.norm(lhs - rhs, axis=1)))


def weighted_convolution_bound(sd: SpectralData, alpha: float, f: GridFunction) -> float:
    """``|G * f|_{L2_alpha} / |f|_{L2_alpha}`` measured in mode coordinates."""
    if alpha >= sd.nu or alpha < 0:
        raise ValueError("need 0 <= alpha < nu")
    F = sd.to_modes(f.values)
    fm = GridFunction(f.t0, f.dt, F, frame="spectral")
    den = fm.l2(alpha)
    if den == 0:
        return 0.0
    Y = mode_convolve(sd.H, F, f.dt)
    return GridFunction(f.t0, f.dt, Y, frame="spectral").l2(alpha) / den


# ---------------------------------------------------------------------------
# indicator data on shrinking intervals: sup |K g| grows like sqrt(N)

E47_CONST = np.exp(-1.0) - np.exp(-np.e)


@dataclass(frozen=True)
class Example47Result:
    N: int
    measured_sup: float
    bound: float
    single_mode_tau0: float
    closed_form_tau0: float
    grid: np.ndarray
    norms: np.ndarray

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "bound": self.bound,
            "measured_sup": self.measured_sup,
            "single_mode_tau0": self.single_mode_tau0,
            "closed_form_tau0": self.closed_form_tau0,
            "grid": {"t_max": float(self.grid[-1]), "points": int(self.grid.size),
                     "dt": float(self.grid[1] - self.grid[0]) if self.grid.size > 1 else 0.0},
        }


def example47_lower_bound(N: int, dt: float | None = None) -> Example47Result:
    """Apply the mode convolution to ``g_n = chi_[e^{-(n+1)}, e^{-n})`` and measure
    ``sup |(K g)(t)|`` over ``t in [0, e^{-(N+1)}]``.

    The indicator data is represented exactly (doubled nodes at the jumps), so
    the exponential recurrence reproduces the convolution to roundoff.
    """
    N = int(N)
    if N < 1:
        raise ValueError("N must be >= 1")
    t_end = np.exp(-(N + 1.0))
    if dt is None:
        dt = t_end / 8
    if dt > t_end / 8 * (1 + 1e-12):
        raise ValueError(f"dt={dt:.3e} too coarse: need dt <= e^-(N+1)/8 = {t_end / 8:.3e}")
    M = max(8, int(np.ceil(t_end / dt - 1e-9)))
    grid = np.linspace(0.0, t_end, M + 1)
    r = example47_system(N)
    sd = spectral_factorize(r)
    modes = np.zeros((M + 1, N))
    for l, h in enumerate(sd.H):
        # the physical axis n and the mode axis coincide here (U = I), but go
        # through U anyway: input frame (U^T)^{-1} e_n
        n = int(np.argmax(np.abs(np.linalg.solve(sd.U.T, np.eye(N))[l]))) + 1
        a, b = np.exp(-(n + 1.0)), np.exp(-float(n))
        t = np.concatenate([grid, [a, a, b, b]])
        g = np.concatenate([np.zeros(M + 1), [0.0, 1.0, 1.0, 0.0]])
        order = np.lexsort((np.r_[np.zeros(M + 1), 1, 2, 3, 4], t))
        t, g = t[order], g[order]
        c = exp_convolve(h, g, t, causal=h < 0)
        sign = 1.0 if h < 0 else -1.0
        on_grid = np.isin(order, np.arange(M + 1))
        modes[np.argsort(order[on_grid]), l] = (sign * h * c)[on_grid]
    phys = np.linalg.solve(sd.E, sd.U.T @ modes.T).T
    norms = np.linalg.norm(phys, axis=1)
    n1 = int(np.argmin(np.abs(sd.H - np.e)))
    return Example47Result(
        N=N,
        measured_sup=float(norms.max()),
        bound=float(np.sqrt(N) * E47_CONST),
        single_mode_tau0=float(abs(phys[0, n1])),
        closed_form_tau0=float(np.exp(-np.exp(-1.0)) - np.exp(-1.0)),
        grid=grid,
        norms=norms,
    )


# ---------------------------------------------------------------------------
# probes for operator norms

def random_probe(rng: np.random.Generator, d: int, alpha: float = 0.0, terms: int = 3
                 ) -> tuple[Callable, Callable]:
    """A smooth random vector function decaying faster than ``e^{-alpha t}``,
    with its exact derivative; returned as ``(f, f')`` callables of time arrays."""
    amp = rng.normal(size=(terms, d))
    rate = alpha + rng.uniform(0.3, 2.0, size=terms)
    freq = rng.uniform(0.0, 3.0, size=terms)
    phase = rng.uniform(0, 2 * np.pi, size=terms)

    def f(t):
        t = np.asarray(t)[:, None, None]
        return np.sum(amp * np.exp(-rate[:, None] * t) * np.cos(freq[:, None] * t + phase[:, None]), axis=1)

    def fp(t):
        t = np.asarray(t)[:, None, None]
        e = np.exp(-rate[:, None] * t)
        arg = freq[:, None] * t + phase[:, None]
        return np.sum(amp * e * (-rate[:, None] * np.cos(arg) - freq[:, None] * np.sin(arg)), axis=1)

    return f, fp


def estimate_Km_norm(r: ReducedSystem, sd: SpectralData, alpha: float, T: float, dt: float,
                     probes: int = 64, seed: int = 0) -> float:
    """Largest observed ``|K_m f|_{H1_alpha} / |f|_{H1_alpha}`` over random smooth probes."""
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(probes):
        f, fp = random_probe(rng, sd.dim, alpha)
        fg = GridFunction.sample(f, 0.0, T, dt, fp)
        out = apply_Km(r, sd, fg)
        best = max(best, out.h1(alpha) / fg.h1(alpha))
    return best
