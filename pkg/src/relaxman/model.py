"""Finite-dimensional degenerate relaxation systems ``A u' = Q(u)``.

A model stores the symmetric coefficient ``A``, the symmetric bilinear map
``B`` (with ``Q(u) = B(u, u)``) as a rank-3 array indexed
``[out][in1][in2]``, an orthonormal basis of the kernel directions ``V_perp``
of the linearized collision operator, two equilibria and the Kawashima data
(compensators, dissipation and coercivity constants) at each of them.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import minimize_scalar

SIDES = ("plus", "minus")


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def orthonormal_complement(basis: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of ``span(basis)``.

    Standard basis vectors are projected onto the complement and
    Gram-Schmidt-ed in order, so simple splittings (``V_perp = span{e1}``)
    give the obvious coordinate basis for ``V``.
    """
    dim, k = basis.shape
    cols = [c for c in basis.T]
    out = []
    for i in range(dim):
        w = np.zeros(dim)
        w[i] = 1.0
        for _ in range(2):
            for c in cols + out:
                w = w - (c @ w) * c
        nrm = np.linalg.norm(w)
        if nrm > 1e-8:
            out.append(w / nrm)
        if len(out) == dim - k:
            break
    return np.array(out).T.reshape(dim, dim - k)


@dataclass(frozen=True)
class ModelSystem:
    A: np.ndarray
    B: np.ndarray
    v_perp_basis: np.ndarray
    u_plus: np.ndarray
    u_minus: np.ndarray
    K_plus: np.ndarray
    K_minus: np.ndarray
    delta_plus: float
    delta_minus: float
    gamma_plus: float
    gamma_minus: float
    name: str = "custom"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for attr in ("A", "B", "v_perp_basis", "u_plus", "u_minus", "K_plus", "K_minus"):
            arr = np.array(getattr(self, attr), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)
        if self.v_perp_basis.ndim == 1:
            vp = self.v_perp_basis.reshape(-1, 1).copy()
            vp.setflags(write=False)
            object.__setattr__(self, "v_perp_basis", vp)
        self._check_shapes()

    def _check_shapes(self):
        n = self.dim
        if self.A.shape != (n, n):
            raise ValueError(f"A must be {n}x{n}, got {self.A.shape}")
        if self.B.shape != (n, n, n):
            raise ValueError(f"B must be {n}x{n}x{n}, got {self.B.shape}")
        if self.v_perp_basis.shape[0] != n:
            raise ValueError("v_perp_basis rows must match dim")
        for attr in ("u_plus", "u_minus"):
            if getattr(self, attr).shape != (n,):
                raise ValueError(f"{attr} must have length {n}")
        for attr in ("K_plus", "K_minus"):
            if getattr(self, attr).shape != (n, n):
                raise ValueError(f"{attr} must be {n}x{n}")

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def v_basis(self) -> np.ndarray:
        return orthonormal_complement(self.v_perp_basis)

    def equilibrium(self, side: str) -> np.ndarray:
        return self.u_plus if _side(side) == "plus" else self.u_minus

    def compensator(self, side: str) -> np.ndarray:
        return self.K_plus if _side(side) == "plus" else self.K_minus

    def delta(self, side: str) -> float:
        return self.delta_plus if _side(side) == "plus" else self.delta_minus

    def gamma(self, side: str) -> float:
        return self.gamma_plus if _side(side) == "plus" else self.gamma_minus

    def bilinear(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.einsum("kij,...i,...j->...k", self.B, x, y)

    def Q(self, u: np.ndarray) -> np.ndarray:
        return self.bilinear(u, u)

    def Q_prime(self, u: np.ndarray) -> np.ndarray:
        # Q(u) = B(u,u) with B symmetric, so Q'(u)h = 2 B(u,h)
        return 2.0 * np.einsum("kij,i->kj", self.B, u)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "dim": self.dim,
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "v_perp_basis": self.v_perp_basis.tolist(),
            "u_plus": self.u_plus.tolist(),
            "u_minus": self.u_minus.tolist(),
            "K_plus": self.K_plus.tolist(),
            "K_minus": self.K_minus.tolist(),
            "delta": {"plus": self.delta_plus, "minus": self.delta_minus},
            "gamma": {"plus": self.gamma_plus, "minus": self.gamma_minus},
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ModelSystem":
        delta = _pm_pair(d["delta"])
        gamma = _pm_pair(d["gamma"])
        m = cls(
            A=d["A"], B=d["B"], v_perp_basis=d["v_perp_basis"],
            u_plus=d["u_plus"], u_minus=d["u_minus"],
            K_plus=d["K_plus"], K_minus=d["K_minus"],
            delta_plus=delta[0], delta_minus=delta[1],
            gamma_plus=gamma[0], gamma_minus=gamma[1],
            name=d.get("name", "custom"),
        )
        if "dim" in d and int(d["dim"]) != m.dim:
            raise ValueError(f"dim field {d['dim']} disagrees with A ({m.dim})")
        return m

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ModelSystem":
        return cls.from_dict(json.loads(text))

    def replace(self, **changes) -> "ModelSystem":
        d = {
            "A": self.A, "B": self.B, "v_perp_basis": self.v_perp_basis,
            "u_plus": self.u_plus, "u_minus": self.u_minus,
            "K_plus": self.K_plus, "K_minus": self.K_minus,
            "delta_plus": self.delta_plus, "delta_minus": self.delta_minus,
            "gamma_plus": self.gamma_plus, "gamma_minus": self.gamma_minus,
            "name": self.name,
        }
        d.update(changes)
        return ModelSystem(**d)


def _side(side: str) -> str:
    if side in ("plus", "+"):
        return "plus"
    if side in ("minus", "-"):
        return "minus"
    raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")


def _pm_pair(v) -> tuple[float, float]:
    if isinstance(v, dict):
        return float(v["plus"]), float(v["minus"])
    if np.ndim(v) == 0:
        return float(v), float(v)
    a, b = v
    return float(a), float(b)


# ---------------------------------------------------------------------------
# validation

@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    passed: bool
    margin: float
    detail: str = ""

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.passed))
        object.__setattr__(self, "margin", float(self.margin))


@dataclass(frozen=True)
class ValidationReport:
    entries: tuple[HypothesisCheck, ...]

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def __getitem__(self, name: str) -> HypothesisCheck:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "entries": [
                {"name": e.name, "passed": bool(e.passed), "margin": float(e.margin), "detail": e.detail}
                for e in self.entries
            ],
        }


def check_kawashima(T: np.ndarray, A: np.ndarray, K: np.ndarray, gamma: float) -> float:
    """Signed margin ``lambda_min(Re(K A - T)) - gamma``; the condition holds iff >= 0."""
    T, A, K = (np.asarray(M, dtype=float) for M in (T, A, K))
    n = A.shape[0]
    if T.shape != (n, n) or K.shape != (n, n) or A.shape != (n, n):
        raise ValueError("T, A, K must be square matrices of equal size")
    scale = max(1.0, np.abs(K).max())
    if np.abs(K + K.T).max() > 1e-12 * scale:
        raise ValueError("K must be skew-symmetric")
    M = K @ A - T
    return float(np.linalg.eigvalsh(_sym(M))[0] - gamma)


def search_kawashima(T: np.ndarray, A: np.ndarray, sweeps: int = 60, bound: float = 20.0,
                     K0: np.ndarray | None = None) -> tuple[np.ndarray, float]:
    """Coordinate ascent over the skew basis maximizing ``lambda_min(Re(KA - T))``.

    Returns the compensator and the attained minimum eigenvalue (so the
    largest admissible gamma for that K).
    """
    n = A.shape[0]
    iu = np.triu_indices(n, 1)
    p = np.zeros(len(iu[0])) if K0 is None else np.asarray(K0)[iu].copy()

    def build(params):
        K = np.zeros((n, n))
        K[iu] = params
        return K - K.T

    def objective(params):
        return np.linalg.eigvalsh(_sym(build(params) @ A - T))[0]

    best = objective(p)
    for _ in range(sweeps):
        old = best
        for i in range(len(p)):
            def f(x, i=i):
                q = p.copy()
                q[i] = x
                return -objective(q)
            res = minimize_scalar(f, bounds=(-bound, bound), method="bounded",
                                  options={"xatol": 1e-10})
            if -res.fun > best:
                p[i] = res.x
                best = -res.fun
        if best - old < 1e-12:
            break
    return build(p), float(best)


def validate_hypotheses(m: ModelSystem, tol: float = 1e-10) -> ValidationReport:
    """Check the structural, dissipation, invertibility and compensator conditions at both equilibria."""
    n = m.dim
    Vp = m.v_perp_basis
    k = Vp.shape[1]
    if not 1 <= k < n:
        raise ValueError(f"V_perp must have dimension in [1, {n - 1}], got {k}")
    Vb = m.v_basis
    P_perp = Vp @ Vp.T
    entries: list[HypothesisCheck] = []

    # H1: structure of A, B and the splitting
    sym_A = np.abs(m.A - m.A.T).max()
    sym_B = np.abs(m.B - m.B.transpose(0, 2, 1)).max()
    range_B = np.abs(np.einsum("ak,kij->aij", P_perp, m.B)).max()
    ortho = np.abs(Vp.T @ Vp - np.eye(k)).max()
    worst = max(sym_A, sym_B, range_B, ortho)
    entries.append(HypothesisCheck(
        "H1", worst <= tol, tol - worst,
        f"|A-A^T|={sym_A:.3e} |B sym defect|={sym_B:.3e} |P_Vperp B|={range_B:.3e} "
        f"|basis orthonormality defect|={ortho:.3e} dim V_perp={k} < dim={n}",
    ))

    sub: dict[str, list[HypothesisCheck]] = {}
    h3_margins = []
    h3_detail = []
    for side in SIDES:
        u = m.equilibrium(side)
        T = m.Q_prime(u)
        T22 = Vb.T @ T @ Vb
        q_res = float(np.linalg.norm(m.Q(u)))
        asym = np.abs(T - T.T).max()
        leak = np.abs(T @ Vp).max()
        s22 = np.linalg.svd(T22, compute_uv=False).min()
        # equality defects gate the check; once they pass, report the quantitative margin
        defect = max(asym, leak)
        m_i = s22 - tol if defect <= tol else tol - defect
        c_i = HypothesisCheck(
            f"H2(i){side}", m_i > 0, m_i,
            f"self-adjoint defect {asym:.3e}, |T V_perp|={leak:.3e}, sigma_min(T|V)={s22:.6g}",
        )
        lam = float(np.linalg.eigvalsh(_sym(T22))[-1])
        m_ii = -lam - m.delta(side)
        c_ii = HypothesisCheck(
            f"H2(ii){side}", m_ii > 0, m_ii,
            f"lambda_max(Q'22)={lam:.6g} against -delta={-m.delta(side):.6g}",
        )
        m_iii = check_kawashima(T, m.A, m.compensator(side), m.gamma(side))
        c_iii = HypothesisCheck(
            f"H2(iii){side}", m_iii >= 0 and m.gamma(side) > 0, m_iii,
            f"lambda_min(Re(KA-T)) - gamma, gamma={m.gamma(side):.6g}",
        )
        sub[side] = [c_i, c_ii, c_iii]
        h3_margins.append(m_ii if q_res <= tol else tol - q_res)
        h3_detail.append(f"{side}: |Q(u)|={q_res:.3e}, lambda_max(Q'22)={lam:.6g}, delta={m.delta(side):.6g}")

    all_sub = sub["plus"] + sub["minus"]
    h2_margin = min(c.margin for c in all_sub)
    entries.append(HypothesisCheck(
        "H2", all(c.passed for c in all_sub), h2_margin,
        "Kawashima condition at both equilibria (see sub-entries)",
    ))
    h3 = min(h3_margins)
    entries.append(HypothesisCheck("H3", h3 > 0, h3, "; ".join(h3_detail)))

    smin_A = float(np.linalg.svd(m.A, compute_uv=False).min())
    entries.append(HypothesisCheck("H4", smin_A > tol, smin_A, f"sigma_min(A)={smin_A:.6g}"))
    A11 = Vp.T @ m.A @ Vp
    smin_11 = float(np.linalg.svd(A11, compute_uv=False).min())
    entries.append(HypothesisCheck("H5", smin_11 > tol, smin_11, f"sigma_min(A11)={smin_11:.6g}"))

    entries.extend(all_sub)
    return ValidationReport(tuple(entries))


# ---------------------------------------------------------------------------
# catalog

# Compensators found once with search_kawashima and frozen here.
_TOY3_K = np.array([
    [0.0, 40.0 / 41.0, 0.0],
    [-40.0 / 41.0, 0.0, 0.0],
    [0.0, 0.0, 0.0],
])


def _toy3(params: dict) -> ModelSystem:
    A = np.array([[1.0, 0.2, 0.0], [0.2, 0.5, 0.0], [0.0, 0.0, -0.3]])
    B = np.zeros((3, 3, 3))
    # e1 spans V_perp; B(e1, y) = -y/2 on V makes Q'(e1) = -I there
    for j in (1, 2):
        B[j, 0, j] = B[j, j, 0] = -0.5
    # quadratic self-interaction of the V components
    B[1, 1, 2] = B[1, 2, 1] = 0.5
    B[2, 1, 1] = 0.5
    B[2, 2, 2] = -0.25
    u = np.array([1.0, 0.0, 0.0])
    if params.get("zero_equilibria"):
        u = np.zeros(3)
    K = np.asarray(params.get("K", _TOY3_K), dtype=float)
    return ModelSystem(
        A=A, B=B, v_perp_basis=np.array([[1.0], [0.0], [0.0]]),
        u_plus=u, u_minus=u.copy(), K_plus=K, K_minus=K.copy(),
        delta_plus=float(params.get("delta", 0.5)), delta_minus=float(params.get("delta", 0.5)),
        gamma_plus=0.05, gamma_minus=0.05, name="toy3",
    )


def dv_bgk_velocities(N: int) -> np.ndarray:
    """Alternating velocities ``1, -0.75, 1/2, -0.375, ...`` accumulating at 0."""
    j = np.arange(N)
    return np.where(j % 2 == 0, 1.0, -0.75) * 0.5 ** (j // 2)


def _dv_bgk(params: dict) -> ModelSystem:
    N = int(params.get("N", 4))
    if N < 2:
        raise ValueError("dv-bgk needs N >= 2 velocities")
    xi = dv_bgk_velocities(N)
    A = np.diag(xi)
    mvec = np.ones(N) / np.sqrt(N)
    P_V = np.eye(N) - np.outer(mvec, mvec)
    rho_ref = 1.0
    coupling = float(params.get("coupling", 0.1))
    B = np.zeros((N, N, N))
    # relaxation part: -(rho/rho_ref) P_V u, written as a symmetric bilinear map
    for i in range(N):
        for j in range(N):
            B[:, i, j] -= (mvec[i] * P_V[:, j] + mvec[j] * P_V[:, i]) / (2 * rho_ref)
    # weak velocity-weighted interaction among non-equilibrium parts
    for i in range(N):
        for j in range(N):
            B[:, i, j] += coupling * P_V @ (xi * P_V[:, i] * P_V[:, j])
    rho_p, rho_m = 1.0, 1.5
    u_p, u_m = rho_p * mvec, rho_m * mvec
    gamma = float(params.get("gamma", 0.02))
    Ks = {}
    for side, u in (("plus", u_p), ("minus", u_m)):
        T = 2.0 * np.einsum("kij,i->kj", B, u)
        K, _ = search_kawashima(T, A)
        Ks[side] = K
    return ModelSystem(
        A=A, B=B, v_perp_basis=mvec.reshape(-1, 1), u_plus=u_p, u_minus=u_m,
        K_plus=Ks["plus"], K_minus=Ks["minus"],
        delta_plus=0.5 * rho_p / rho_ref, delta_minus=0.5 * rho_m / rho_ref,
        gamma_plus=gamma, gamma_minus=gamma, name="dv-bgk", meta={"velocities": xi.tolist()},
    )


CATALOG = ("example47", "toy3", "dv-bgk")


def builtin_model(name: str, **params):
    """Catalog models.

    ``"example47"`` returns an already reduced system (diagonal ``Gamma`` with
    entries ``-e^{-n}`` and ``E = -I``); the other names return full models.
    """
    if name == "example47":
        from .reduction import example47_system
        N = int(params.get("N", 3))
        return example47_system(N, coupling=float(params.get("coupling", 0.0)))
    if name == "toy3":
        return _toy3(params)
    if name == "dv-bgk":
        return _dv_bgk(params)
    raise ValueError(f"unknown catalog model {name!r}; choose from {CATALOG}")
