"""Block decomposition over ``V_perp + V`` and Schur reduction to ``Gamma u' = E u + D(u, u)``."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .model import ModelSystem, _side


@dataclass(frozen=True)
class BlockDecomposition:
    """Compressions of ``A`` and ``Q'(u)`` in the orthonormal ``V_perp`` / ``V`` bases."""
    A11: np.ndarray
    A12: np.ndarray
    A21: np.ndarray
    A22: np.ndarray
    Q22: np.ndarray
    v_perp_basis: np.ndarray
    v_basis: np.ndarray
    side: str
    sigma_min_A11: float
    q_offblock: float

    @property
    def P_V(self) -> np.ndarray:
        return self.v_basis @ self.v_basis.T

    @property
    def P_Vperp(self) -> np.ndarray:
        return self.v_perp_basis @ self.v_perp_basis.T

    def coupling(self) -> np.ndarray:
        """``A11^{-1} A12`` computed through an LU factorization of ``A11``."""
        return lu_solve(lu_factor(self.A11), self.A12)


@dataclass(frozen=True)
class ReducedSystem:
    """``Gamma u' = E u + D(u, u)`` on ``V`` (coordinates in the stored ``V`` basis)."""
    Gamma: np.ndarray
    E: np.ndarray
    D: np.ndarray
    side: str = "plus"
    name: str = "reduced"
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.Gamma, dtype=float))
        E = np.atleast_2d(np.asarray(self.E, dtype=float))
        d = G.shape[0]
        D = np.zeros((d, d, d)) if self.D is None else np.asarray(self.D, dtype=float).reshape(d, d, d)
        for key, arr in (("Gamma", G), ("E", E), ("D", D)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, key, arr)
        if G.shape != (d, d) or E.shape != (d, d):
            raise ValueError("Gamma and E must be square of equal size")

    @property
    def dim(self) -> int:
        return self.Gamma.shape[0]

    def bilinear(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """``D(u, v)`` for arrays of shape ``(..., d)``."""
        return np.einsum("kij,...i,...j->...k", self.D, u, v)

    def D_norm(self) -> float:
        """Upper bound for ``sup |D(u,v)| / (|u||v|)`` via the Frobenius norm of the slices."""
        return float(np.sqrt(np.sum(self.D ** 2)))

    def validate(self, tol: float = 1e-10) -> dict[str, float]:
        scale = max(1.0, np.abs(self.Gamma).max())
        sym = float(np.abs(self.Gamma - self.Gamma.T).max())
        smin = float(np.linalg.svd(self.Gamma, compute_uv=False).min())
        lam = float(np.linalg.eigvalsh(0.5 * (self.E + self.E.T))[-1])
        dsym = float(np.abs(self.D - self.D.transpose(0, 2, 1)).max()) if self.dim else 0.0
        if sym > 1e-12 * scale:
            raise ValueError(f"Gamma not symmetric (defect {sym:.3e})")
        if smin <= tol:
            raise ValueError(f"Gamma numerically singular (sigma_min={smin:.3e})")
        if lam >= 0:
            raise ValueError(f"E not negative definite (lambda_max={lam:.3e})")
        if dsym > 1e-12 * max(1.0, np.abs(self.D).max()):
            raise ValueError("D not symmetric")
        return {"sigma_min_Gamma": smin, "lambda_max_E": lam}

    def reversed(self) -> "ReducedSystem":
        """The system seen under ``tau -> -tau``: stable and unstable modes swap."""
        return ReducedSystem(-self.Gamma, self.E, self.D, self.side, self.name + "-reversed",
                             dict(self.provenance, reversed=True))

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "side": self.side,
            "Gamma": self.Gamma.tolist(),
            "E": self.E.tolist(),
            "D": self.D.tolist(),
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ReducedSystem":
        return cls(d["Gamma"], d["E"], d.get("D"), d.get("side", "plus"),
                   d.get("name", "reduced"), d.get("provenance", {}))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def decompose(m: ModelSystem, side: str, tol: float = 1e-10) -> BlockDecomposition:
    side = _side(side)
    Vp = m.v_perp_basis
    if Vp.shape[1] == 0:
        raise ValueError("V_perp = {0} is not allowed: V must be a proper subspace")
    if Vp.shape[1] >= m.dim:
        raise ValueError("V must be nontrivial")
    Vb = m.v_basis
    A11 = Vp.T @ m.A @ Vp
    A12 = Vp.T @ m.A @ Vb
    A21 = Vb.T @ m.A @ Vp
    A22 = Vb.T @ m.A @ Vb
    smin = float(np.linalg.svd(A11, compute_uv=False).min())
    if smin <= tol:
        raise ValueError(f"A11 is singular (sigma_min={smin:.3e}); the V_perp block must be invertible")
    T = m.Q_prime(m.equilibrium(side))
    Q22 = Vb.T @ T @ Vb
    off = float(max(np.abs(T @ Vp).max(), np.abs(Vp.T @ T).max()))
    return BlockDecomposition(A11, A12, A21, A22, Q22, Vp, Vb, side, smin, off)


def lift(v: np.ndarray, b: BlockDecomposition) -> np.ndarray:
    """Full-space vector ``h + v`` with ``h = -A11^{-1} A12 v`` (``v`` in ``V`` coordinates).

    Works on a single vector or on arrays of shape ``(..., dim V)``.
    """
    v = np.asarray(v, dtype=float)
    h = -np.einsum("ij,...j->...i", b.coupling(), v)
    return np.einsum("ai,...i->...a", b.v_perp_basis, h) + np.einsum("ai,...i->...a", b.v_basis, v)


def schur_reduce(b: BlockDecomposition, B: np.ndarray, side: str | None = None,
                 tol: float = 1e-10, name: str = "reduced") -> ReducedSystem:
    side = b.side if side is None else _side(side)
    Gamma = b.A22 - b.A21 @ b.coupling()
    Gamma = 0.5 * (Gamma + Gamma.T)
    smin = float(np.linalg.svd(Gamma, compute_uv=False).min())
    if smin <= tol:
        raise ValueError(f"Schur complement is singular (sigma_min={smin:.3e})")
    E = 0.5 * (b.Q22 + b.Q22.T)
    d = Gamma.shape[0]
    W = lift(np.eye(d), b)  # row i = lift(e_i)
    full = np.einsum("kab,ia,jb->kij", np.asarray(B, dtype=float), W, W)
    D = np.einsum("ka,aij->kij", b.v_basis.T, full)
    return ReducedSystem(Gamma, E, D, side, name,
                         {"side": side, "sigma_min_A11": b.sigma_min_A11, "sigma_min_Gamma": smin})


def reduce(obj: ModelSystem | ReducedSystem, side: str = "plus", tol: float = 1e-10) -> ReducedSystem:
    """Reduce a full model; an already reduced system is returned unchanged."""
    if isinstance(obj, ReducedSystem):
        return obj
    b = decompose(obj, side, tol)
    r = schur_reduce(b, obj.B, side, tol, name=f"{obj.name}-{_side(side)}")
    return r


# ---------------------------------------------------------------------------
# reduced catalog

def example47_system(N: int, coupling: float = 0.0) -> ReducedSystem:
    """``Gamma = diag(-e^{-n})``, ``E = -I`` for ``n = 1..N`` (all modes unstable).

    ``coupling`` adds the diagonal quadratic term ``D(u, v)_n = coupling u_n v_n``
    so the nonlinear solvers have something to work on.
    """
    N = int(N)
    if N < 1:
        raise ValueError("N must be a positive integer")
    n = np.arange(1, N + 1)
    D = np.zeros((N, N, N))
    D[n - 1, n - 1, n - 1] = coupling
    return ReducedSystem(np.diag(-np.exp(-n.astype(float))), -np.eye(N), D, "plus",
                         f"example47-N{N}", {"N": N, "coupling": coupling})


def builtin_reduced(name: str, **params) -> ReducedSystem:
    """Small reduced systems used throughout tests and demos.

    * ``scalar``: ``u' = -u + q u^2`` (``q`` defaults to 1).
    * ``saddle``: ``Gamma = diag(1, -1)``, ``E = -I``, no nonlinearity.
    * ``coupled-saddle``: the saddle with ``D(u, u) = (0, u_1^2)``.
    * ``geometric``: ``Gamma = diag(2^{-k})``, ``E = -I``, ``k = 0..K`` so the
      symbol runs over ``-2^k``.
    * ``example47`` and the full catalog models (reduced on ``side``).
    """
    if name == "scalar":
        q = float(params.get("q", 1.0))
        return ReducedSystem([[1.0]], [[-1.0]], [[[q]]], "plus", "scalar")
    if name == "saddle":
        return ReducedSystem(np.diag([1.0, -1.0]), -np.eye(2), None, "plus", "saddle")
    if name == "coupled-saddle":
        D = np.zeros((2, 2, 2))
        D[1, 0, 0] = float(params.get("q", 1.0))
        return ReducedSystem(np.diag([1.0, -1.0]), -np.eye(2), D, "plus", "coupled-saddle")
    if name == "geometric":
        K = int(params.get("K", 20))
        return ReducedSystem(np.diag(2.0 ** -np.arange(K + 1)), -np.eye(K + 1), None, "plus",
                             f"geometric-K{K}")
    if name == "example47":
        return example47_system(int(params.get("N", 3)), float(params.get("coupling", 0.0)))
    from .model import builtin_model
    side = params.pop("side", "plus")
    return reduce(builtin_model(name, **params), side)
