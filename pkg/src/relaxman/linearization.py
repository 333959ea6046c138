"""Invertibility of the weighted linearization ``A d/dtau - Q'(u) -+ eta A`` on L2.

On the Fourier side the operator is the matrix symbol
``L(omega) = 2 pi i omega A - Q'(u) -+ eta A``.  Invertibility with a uniform
bound is certified on a finite omega grid plus an analytic tail estimate
derived from the Kawashima compensator.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh, subspace_angles

from .model import ModelSystem, _side
from .reduction import decompose


def kernel_vs_vperp(m: ModelSystem, cluster_tol: float = 1e-8) -> np.ndarray:
    """For every eigenvalue of ``A``: ``1 - max |P_Vperp w| / |w|`` over its eigenspace.

    Eigenvalues closer than ``cluster_tol`` are grouped and their whole
    eigenspace is compared with ``V_perp`` through the smallest principal angle,
    which is the right test when eigenvectors are not unique.
    """
    lam, W = np.linalg.eigh(m.A)
    Vp = m.v_perp_basis
    margins = np.empty(lam.size)
    i = 0
    while i < lam.size:
        j = i + 1
        while j < lam.size and lam[j] - lam[j - 1] < cluster_tol * max(1.0, abs(lam[j])):
            j += 1
        block = W[:, i:j]
        # cosine of the smallest principal angle between the eigenspace and V_perp
        cos_min_angle = float(np.cos(np.min(subspace_angles(block, Vp))))
        margins[i:j] = 1.0 - cos_min_angle
        i = j
    return np.clip(margins, 0.0, None)


@dataclass(frozen=True)
class PerturbedKernelScan:
    s: np.ndarray
    sigma_min: np.ndarray
    kernel_at_zero: bool
    kernel_dim: int


def perturbed_kernel_scan(m: ModelSystem, side: str, s_values) -> PerturbedKernelScan:
    """``sigma_min(Q'(u) + s A)`` per ``s``.  At ``s = 0`` the V-block value is
    reported instead and the kernel (which is ``V_perp``) is flagged."""
    side = _side(side)
    T = m.Q_prime(m.equilibrium(side))
    Vb = m.v_basis
    s_values = np.asarray(s_values, dtype=float)
    out = np.empty(s_values.size)
    flag = False
    kdim = 0
    for i, s in enumerate(s_values):
        if s == 0.0:
            out[i] = np.linalg.svd(Vb.T @ T @ Vb, compute_uv=False).min()
            sv = np.linalg.svd(T, compute_uv=False)
            kdim = int(np.sum(sv < 1e-10 * max(1.0, sv.max())))
            flag = kdim == m.v_perp_basis.shape[1]
        else:
            out[i] = np.linalg.svd(T + s * m.A, compute_uv=False).min()
    return PerturbedKernelScan(s_values, out, flag, kdim)


def schur_eta_radius(m: ModelSystem, side: str) -> float:
    """Perturbation radius ``delta / (2 (|Atilde| + 1))`` with ``Atilde`` the Schur complement."""
    b = decompose(m, side)
    Atil = b.A22 - b.A21 @ b.coupling()
    return float(m.delta(side) / (2 * (np.linalg.norm(Atil, 2) + 1)))


def empirical_eta1(m: ModelSystem, side: str, s_max: float = 100.0) -> tuple[float, float]:
    """Nearest nonzero roots ``s < 0 < s'`` of ``det(Q'(u) + s A)``.

    These are the generalized eigenvalues of ``(-Q'(u), A)``; ``s = 0`` (the
    ``V_perp`` kernel) is skipped.  ``inf`` is returned if none lies within
    ``s_max``.
    """
    T = m.Q_prime(m.equilibrium(_side(side)))
    T = 0.5 * (T + T.T)
    # det(T + sA) = 0  <=>  A^{-1}(-T) x = s x ; A is invertible (checked in validation)
    s = np.linalg.eigvals(np.linalg.solve(m.A, -T))
    s = s[np.abs(s.imag) < 1e-9].real
    s = s[np.abs(s) > 1e-9]
    pos = s[(s > 0) & (s <= s_max)]
    neg = s[(s < 0) & (s >= -s_max)]
    return (float(neg.max()) if neg.size else -np.inf, float(pos.min()) if pos.size else np.inf)


def eta_star(m: ModelSystem, side: str) -> float:
    """Admissible weight bound: the nearest root radius, capped by ``delta / (2|A|)``."""
    lo, hi = empirical_eta1(m, side)
    radius = min(-lo, hi)
    return float(min(radius, m.delta(side) / (2 * np.linalg.norm(m.A, 2))))


def symbol(m: ModelSystem, side: str, eta: float, omega: float) -> np.ndarray:
    side = _side(side)
    T = m.Q_prime(m.equilibrium(side))
    sgn = 1.0 if side == "plus" else -1.0
    return 2j * np.pi * omega * m.A - T - sgn * eta * m.A


@dataclass(frozen=True)
class InvertibilityScan:
    side: str
    eta: float
    omega_grid: np.ndarray
    sigma_min: np.ndarray
    sup_inverse_norm: float
    tail_certified: bool
    tail_threshold: float
    tail_bound: float
    lipschitz_certified: bool
    detail: dict = field(default_factory=dict)

    @property
    def grid_positive(self) -> bool:
        return bool(np.all(self.sigma_min > 0))

    @property
    def passed(self) -> bool:
        return self.grid_positive and self.tail_certified

    def failures(self, tol: float = 1e-12) -> np.ndarray:
        return self.omega_grid[self.sigma_min <= tol]

    def to_dict(self) -> dict:
        return {
            "side": self.side,
            "eta": self.eta,
            "passed": self.passed,
            "grid_positive": self.grid_positive,
            "tail_certified": self.tail_certified,
            "tail_threshold": self.tail_threshold,
            "tail_bound": self.tail_bound,
            "lipschitz_certified": self.lipschitz_certified,
            "sup_inverse_norm": self.sup_inverse_norm,
            "min_sigma": float(self.sigma_min.min()),
            "omega": self.omega_grid.tolist(),
            "sigma_min": self.sigma_min.tolist(),
            **self.detail,
        }


def tail_estimate(m: ModelSystem, side: str, eta: float) -> tuple[float, float]:
    """Frequency beyond which the Kawashima estimate gives a uniform inverse bound.

    With ``E_eta = Q'(u) +- eta A`` and ``L(omega) u = f`` one has, for
    ``mu = 2 pi |omega|``,
    ``gamma |u| <= |f| (1 + (|K| + eta)/mu) + |u| |E_eta| (|K| + eta)/mu``,
    so for ``mu >= 2 |E_eta| (|K| + eta) / gamma`` the inverse is bounded by
    ``2 (1 + (|K| + eta)/mu) / gamma``.  Returns ``(threshold omega, bound)``.
    """
    side = _side(side)
    T = m.Q_prime(m.equilibrium(side))
    sgn = 1.0 if side == "plus" else -1.0
    E_eta = T + sgn * eta * m.A
    k = np.linalg.norm(m.compensator(side), 2) + eta
    g = m.gamma(side)
    mu = 2 * np.linalg.norm(E_eta, 2) * k / g
    omega_c = mu / (2 * np.pi)
    bound = 2 * (1 + k / mu) / g if mu > 0 else 2 / g
    return float(omega_c), float(bound)


def scan_invertibility(m: ModelSystem, side: str, eta: float, omega_max: float,
                       points: int, check_range: bool = True) -> InvertibilityScan:
    side = _side(side)
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    if check_range and eta > 0:
        es = eta_star(m, side)
        if eta >= es:
            raise ValueError(f"eta={eta} outside the certified range (0, {es:.4g})")
    omega = np.linspace(-omega_max, omega_max, points)
    sig = np.empty(points)
    for i, w in enumerate(omega):
        sig[i] = np.linalg.svd(symbol(m, side, eta, w), compute_uv=False).min()
    with np.errstate(divide="ignore"):
        sup_inv = float(np.max(1.0 / sig)) if np.all(sig > 0) else float("inf")
    detail = {}
    if np.all(m.compensator(side) == 0) or m.gamma(side) <= 0:
        certified, omega_c, bound = False, float("inf"), float("inf")
        detail["tail_reason"] = "no Kawashima data"
    else:
        omega_c, bound = tail_estimate(m, side, eta)
        certified = omega_c <= omega_max
        if not certified:
            detail["tail_reason"] = f"threshold {omega_c:.4g} beyond grid edge {omega_max}"
    # sigma_min is Lipschitz in omega with constant 2 pi |A|
    h = omega[1] - omega[0] if points > 1 else 0.0
    lip = 2 * np.pi * np.linalg.norm(m.A, 2)
    lip_ok = bool(np.all(sig - lip * h / 2 > 0))
    return InvertibilityScan(side, float(eta), omega, sig, sup_inv, bool(certified),
                             float(omega_c), float(bound), lip_ok, detail)
