"""Diagonalization of the generator ``S = Gamma^{-1} E`` through ``(-E)^{1/2}``.

With ``Et = (-E)^{1/2}`` the matrix ``-Et Gamma^{-1} Et`` is symmetric, so it has
an orthonormal eigenbasis ``W`` and real eigenvalues ``H``.  Then
``U = W^T Et`` satisfies ``U S U^{-1} = diag(H)`` and ``U E^{-1} U^T = -I``.
Negative entries of ``H`` are the stable (forward decaying) modes, positive
ones the unstable modes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .reduction import ReducedSystem

GAP_TOL = 1e-8


@dataclass(frozen=True)
class SpectralData:
    U: np.ndarray
    U_inv: np.ndarray
    H: np.ndarray
    lambda_minus: np.ndarray
    lambda_plus: np.ndarray
    nu: float
    Gamma: np.ndarray
    E: np.ndarray

    @property
    def alpha(self) -> np.ndarray:
        """Per-mode time constants ``1/H``."""
        return 1.0 / self.H

    @property
    def dim(self) -> int:
        return self.H.size

    @property
    def stable(self) -> np.ndarray:
        return self.H < 0

    @property
    def E_inv(self) -> np.ndarray:
        return np.linalg.inv(self.E)

    @property
    def S(self) -> np.ndarray:
        return np.linalg.solve(self.Gamma, self.E)

    def to_modes(self, x: np.ndarray) -> np.ndarray:
        """Physical coordinates to mode coordinates (``U x``), batched over leading axes."""
        return np.einsum("ij,...j->...i", self.U, x)

    def from_modes(self, y: np.ndarray) -> np.ndarray:
        return np.einsum("ij,...j->...i", self.U_inv, y)

    def functional(self, g: np.ndarray) -> np.ndarray:
        """``U^{-1} diag(g) U`` for per-mode values ``g``."""
        return self.U_inv @ (np.asarray(g)[:, None] * self.U)

    def to_dict(self) -> dict:
        return {
            "H": self.H.tolist(),
            "nu": self.nu,
            "stable_modes": self.lambda_minus.tolist(),
            "unstable_modes": self.lambda_plus.tolist(),
            "U": self.U.tolist(),
        }


@dataclass(frozen=True)
class DichotomyProjections:
    P_s: np.ndarray
    P_u: np.ndarray


def spectral_factorize(r: ReducedSystem, gap_tol: float = GAP_TOL) -> SpectralData:
    Gamma = np.asarray(r.Gamma, dtype=float)
    E = np.asarray(r.E, dtype=float)
    r.validate()
    lam, Q = np.linalg.eigh(-0.5 * (E + E.T))
    if lam.min() <= 0:
        raise ValueError("E must be negative definite")
    Et = (Q * np.sqrt(lam)) @ Q.T
    M = -Et @ np.linalg.solve(Gamma, Et)
    M = 0.5 * (M + M.T)
    H, W = np.linalg.eigh(M)
    if np.abs(H).min() < gap_tol:
        raise ValueError(f"no spectral gap: min|H| = {np.abs(H).min():.3e}")
    # stable modes first (ascending H), then unstable; eigh already sorts ascending
    order = np.argsort(H, kind="stable")
    H = H[order]
    W = W[:, order]
    U = W.T @ Et
    # Et^{-1} W is the exact inverse since W is orthogonal
    U_inv = np.linalg.solve(Et, W)
    idx = np.arange(H.size)
    return SpectralData(U, U_inv, H, idx[H < 0], idx[H > 0], float(np.abs(H).min()), Gamma, E)


def projections(sd: SpectralData) -> DichotomyProjections:
    chi = sd.stable.astype(float)
    P_s = sd.functional(chi)
    return DichotomyProjections(P_s, np.eye(sd.dim) - P_s)


def green_values(H: np.ndarray, tau) -> np.ndarray:
    """Per-mode Green kernel: ``e^{tau H}`` on stable modes for ``tau >= 0``,
    ``-e^{tau H}`` on unstable modes for ``tau < 0``, zero otherwise.

    ``tau`` may be an array; the mode axis is last.
    """
    tau = np.asarray(tau, dtype=float)[..., None]
    stable = H < 0
    g = np.zeros(tau.shape[:-1] + H.shape)
    fwd = (tau >= 0) & stable
    bwd = (tau < 0) & ~stable
    with np.errstate(over="ignore", under="ignore"):
        ex = np.exp(np.where(fwd | bwd, tau * H, -np.inf))
    return np.where(fwd, ex, np.where(bwd, -ex, g))


def green_function(sd: SpectralData, tau: float) -> np.ndarray:
    return sd.functional(green_values(sd.H, tau))


def resolvent(r: ReducedSystem | SpectralData, omega: float) -> np.ndarray:
    """``(2 pi i omega Gamma - E)^{-1}``."""
    Gamma, E = r.Gamma, r.E
    M = 2j * np.pi * omega * Gamma - E
    return np.linalg.solve(M, np.eye(Gamma.shape[0], dtype=complex))


def generator_resolvent(r: ReducedSystem | SpectralData, omega: float) -> np.ndarray:
    """``R(2 pi i omega, S) = (2 pi i omega - S)^{-1}``, equal to ``resolvent(omega) @ Gamma``."""
    return resolvent(r, omega) @ r.Gamma


def resolvent_kernel_norm(sd: SpectralData, t: float) -> float:
    """``max |H| e^{-|H t|}`` over the modes that are causal for the sign of ``t``.

    For ``t > 0`` these are the stable modes, for ``t < 0`` the unstable ones.
    """
    if t == 0:
        raise ValueError("t must be nonzero")
    modes = sd.H[sd.H < 0] if t > 0 else sd.H[sd.H > 0]
    if modes.size == 0:
        return 0.0
    a = np.abs(modes)
    return float(np.max(a * np.exp(-a * abs(t))))


def semigroup_values(sd: SpectralData, tau, side: str = "stable") -> np.ndarray:
    """Per-mode multipliers of the decaying semigroup on the chosen side."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("tau must be nonnegative")
    mask = sd.H < 0 if side == "stable" else sd.H > 0
    if side not in ("stable", "unstable"):
        raise ValueError("side must be 'stable' or 'unstable'")
    rate = -np.abs(sd.H)
    return np.where(mask, np.exp(tau[..., None] * rate), 0.0)


def semigroup_apply(sd: SpectralData, tau, x: np.ndarray, side: str = "stable") -> np.ndarray:
    """``T_s(tau) P_s x`` (or ``T_u(tau) P_u x``); ``tau`` may be an array of times."""
    g = semigroup_values(sd, tau, side)
    return sd.from_modes(g * sd.to_modes(np.asarray(x, dtype=float)))


def x_half_norm(sd: SpectralData, x: np.ndarray) -> float:
    y = sd.to_modes(np.asarray(x, dtype=float))
    return float(np.sqrt(np.sum(np.abs(sd.H) * y ** 2)))


# ---------------------------------------------------------------------------
# resolvent scans

@dataclass(frozen=True)
class ResolventScan:
    omega: np.ndarray
    norm_R: np.ndarray
    norm_R_Gamma: np.ndarray
    weighted_sup: float
    tail_omega: float
    tail_closes: bool
    tail_weighted_bound: float


def resolvent_tail_bound(r: ReducedSystem | SpectralData, omega: float) -> float:
    """Analytic bound on ``|R(omega)|`` valid when ``2 pi |omega| sigma_min(Gamma) > |E|``.

    From ``(2 pi i omega Gamma - E) x = f`` one gets
    ``2 pi |omega| sigma_min(Gamma) |x| <= |f| + |E| |x|``.
    """
    s = np.linalg.svd(r.Gamma, compute_uv=False).min()
    e = np.linalg.norm(r.E, 2)
    den = 2 * np.pi * abs(omega) * s - e
    return float(1.0 / den) if den > 0 else float("inf")


def resolvent_scan(r: ReducedSystem | SpectralData, omega_max: float, points: int) -> ResolventScan:
    omega = np.linspace(-omega_max, omega_max, points)
    nR = np.empty(points)
    nRG = np.empty(points)
    for i, w in enumerate(omega):
        R = resolvent(r, w)
        nR[i] = np.linalg.norm(R, 2)
        nRG[i] = np.linalg.norm(R @ r.Gamma, 2)
    sup = float(np.max((1 + np.abs(omega)) * nRG))
    g = np.linalg.norm(r.Gamma, 2)
    tb = resolvent_tail_bound(r, omega_max)
    closes = np.isfinite(tb)
    if closes:
        # (1+w) |Gamma| / (2 pi w s - e) is decreasing in w once the denominator is positive
        s = np.linalg.svd(r.Gamma, compute_uv=False).min()
        e = np.linalg.norm(r.E, 2)
        tail = float((1 + omega_max) * g / (2 * np.pi * omega_max * s - e))
        tail = max(tail, g / (2 * np.pi * s))
    else:
        tail = float("inf")
    return ResolventScan(omega, nR, nRG, sup, float(omega_max), bool(closes), tail)
