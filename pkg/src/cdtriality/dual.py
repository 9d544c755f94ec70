"""Canonical dual function, its derivatives, and recovery of primal critical points.

For a dual point ``s = (tau, sigma)`` the matrix

    G(s) = A + sum_i tau_i B_i + sum_j sigma_j C_j

governs everything: the dual function is

    Pd(s) = -f'G(s)^+ f / 2 - sum_i (tau_i ln tau_i - tau_i)
            - sum_j sigma_j^2 / (2 beta_j) - alpha'tau - theta'sigma

and every stationary point s of Pd yields a stationary point
x = G(s)^+ f of the primal objective with equal value.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import INERTIA_TOL, PINV_CUTOFF, Inertia, sym_eigen
from .problem import ProblemInstance, eval_primal, lambda_map, _as_point

DOM_TOL = 1e-12
COLSPACE_TOL = 1e-9
GAP_TOL = 1e-9
STAT_TOL = 1e-8


class OutsideDomainError(ValueError):
    """The dual point is outside the admissible set where the operation is defined."""


@dataclass(frozen=True)
class DualPoint:
    tau: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tau", np.array(self.tau, dtype=float).ravel())
        object.__setattr__(self, "sigma", np.array(self.sigma, dtype=float).ravel())

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.tau, self.sigma])

    @classmethod
    def from_vector(cls, instance: ProblemInstance, v) -> "DualPoint":
        v = np.asarray(v, dtype=float)
        if v.shape != (instance.m + instance.p,):
            raise ValueError(f"dual vector has shape {v.shape}, expected ({instance.m + instance.p},)")
        return cls(v[: instance.m], v[instance.m:])

    def in_domain(self, instance: ProblemInstance, tol: float = DOM_TOL) -> bool:
        """Membership in the box tau_i >= exp(-alpha_i), sigma_j >= -beta_j theta_j."""
        lb = lower_bounds(instance)
        v = self.vector
        if v.shape != lb.shape:
            return False
        return bool(np.all(self.tau > 0) and np.all(v >= lb - tol * (1.0 + np.abs(lb))))

    def active_bounds(self, instance: ProblemInstance, tol: float = 1e-10) -> list[str]:
        lb = lower_bounds(instance)
        hit = np.abs(self.vector - lb) <= tol * (1.0 + np.abs(lb))
        return [_coord_name(instance, k) for k in np.flatnonzero(hit)]


def _coord_name(instance: ProblemInstance, k: int) -> str:
    return f"tau{k + 1}" if k < instance.m else f"sigma{k - instance.m + 1}"


def lower_bounds(instance: ProblemInstance) -> np.ndarray:
    """Lower end of the dual box: (exp(-alpha), -beta*theta)."""
    return np.concatenate([np.exp(-instance.alphas), -instance.betas * instance.thetas])


def sigma_of_x(instance: ProblemInstance, x) -> DualPoint:
    eps, gamma = lambda_map(instance, x)
    return DualPoint(np.exp(eps), instance.betas * gamma)


@dataclass(frozen=True)
class GMatrix:
    matrix: np.ndarray
    inertia: Inertia
    col_space_ok: bool
    pinv: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)

    @property
    def lam_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def dual_set(self) -> str:
        """'S_plus', 'S_minus', 'boundary' (singular) or 'indefinite'."""
        inert = self.inertia
        if inert.n_zero > 0:
            return "boundary"
        if inert.n_neg == 0:
            return "S_plus"
        if inert.n_pos == 0:
            return "S_minus"
        return "indefinite"


def analyze_matrix(G: np.ndarray, f: np.ndarray, inertia_tol: float = INERTIA_TOL,
                   cutoff: float = PINV_CUTOFF) -> GMatrix:
    """Eigen-analyze a symmetric G once and derive inertia, pseudo-inverse and Col(G) test."""
    lam, Q = sym_eigen(G)
    norm = np.abs(lam).max(initial=0.0)
    band = inertia_tol * (1.0 + norm)
    n_pos = int((lam > band).sum())
    n_neg = int((lam < -band).sum())
    inertia = Inertia(n_pos, lam.size - n_pos - n_neg, n_neg, band)
    keep = np.abs(lam) > cutoff * norm if norm > 0 else np.zeros_like(lam, dtype=bool)
    inv = np.zeros_like(lam)
    inv[keep] = 1.0 / lam[keep]
    P = (Q * inv) @ Q.T
    P = 0.5 * (P + P.T)
    resid = np.linalg.norm(G @ (P @ f) - f)
    ok = bool(resid <= COLSPACE_TOL * (1.0 + np.linalg.norm(f)))
    return GMatrix(matrix=G, inertia=inertia, col_space_ok=ok, pinv=P, eigenvalues=lam, eigenvectors=Q)


def assemble_g(instance: ProblemInstance, s: DualPoint) -> np.ndarray:
    v = s.vector
    if v.shape != (instance.m + instance.p,):
        raise ValueError("dual point does not match the instance's m + p")
    G = instance.A + np.tensordot(v, instance.generators, axes=1)
    return 0.5 * (G + G.T)


def g_matrix(instance: ProblemInstance, s: DualPoint, *, check_domain: bool = True) -> GMatrix:
    if check_domain and not s.in_domain(instance):
        raise OutsideDomainError("dual point violates tau >= exp(-alpha) or sigma >= -beta*theta")
    return analyze_matrix(assemble_g(instance, s), instance.f)


def _admissible(instance: ProblemInstance, s: DualPoint, gm: GMatrix | None) -> GMatrix:
    if gm is None:
        gm = g_matrix(instance, s)
    elif not s.in_domain(instance):
        raise OutsideDomainError("dual point outside the dual box")
    if not gm.col_space_ok:
        raise OutsideDomainError("f is not in the column space of G(s)")
    return gm


def _conjugate_terms(instance: ProblemInstance, s: DualPoint) -> float:
    tau, sigma = s.tau, s.sigma
    v1 = np.sum(tau * np.log(tau) - tau)
    v2 = np.sum(sigma**2 / (2.0 * instance.betas))
    return float(v1 + v2 + instance.alphas @ tau + instance.thetas @ sigma)


def eval_dual(instance: ProblemInstance, s: DualPoint, gm: GMatrix | None = None) -> float:
    gm = _admissible(instance, s, gm)
    f = instance.f
    return float(-0.5 * f @ gm.pinv @ f - _conjugate_terms(instance, s))


def recover_primal(instance: ProblemInstance, s: DualPoint, gm: GMatrix | None = None) -> np.ndarray:
    """Minimum-norm solution of G(s) x = f."""
    gm = _admissible(instance, s, gm)
    return gm.pinv @ instance.f


def grad_dual(instance: ProblemInstance, s: DualPoint, gm: GMatrix | None = None) -> np.ndarray:
    gm = _admissible(instance, s, gm)
    x = gm.pinv @ instance.f
    quad = 0.5 * np.einsum("i,kij,j->k", x, instance.generators, x)
    tail = np.concatenate([np.log(s.tau) + instance.alphas,
                           s.sigma / instance.betas + instance.thetas])
    return quad - tail


def f_matrix(instance: ProblemInstance, x) -> np.ndarray:
    """Columns B_1 x, ..., B_m x, C_1 x, ..., C_p x."""
    x = _as_point(instance, x)
    return (instance.generators @ x).T.reshape(instance.n, instance.m + instance.p)


def d_diagonal(instance: ProblemInstance, s: DualPoint) -> np.ndarray:
    """Diagonal of D = Diag(tau_1..tau_m, beta_1..beta_p)."""
    return np.concatenate([s.tau, instance.betas])


def hess_dual(instance: ProblemInstance, s: DualPoint, gm: GMatrix | None = None) -> np.ndarray:
    gm = _admissible(instance, s, gm)
    x = gm.pinv @ instance.f
    F = f_matrix(instance, x)
    H = -F.T @ gm.pinv @ F - np.diag(1.0 / d_diagonal(instance, s))
    return 0.5 * (H + H.T)


def total_complementary(instance: ProblemInstance, x, s: DualPoint) -> float:
    x = _as_point(instance, x)
    if not s.in_domain(instance):
        raise OutsideDomainError("dual point outside the dual box")
    G = assemble_g(instance, s)
    return float(0.5 * x @ G @ x - _conjugate_terms(instance, s) - instance.f @ x)


def projected_gradient(instance: ProblemInstance, s: DualPoint, g: np.ndarray,
                       tol: float = 1e-10) -> np.ndarray:
    """Gradient with outward-pointing components zeroed at active box bounds."""
    lb = lower_bounds(instance)
    at_bound = np.abs(s.vector - lb) <= tol * (1.0 + np.abs(lb))
    pg = np.array(g, dtype=float)
    pg[at_bound & (pg < 0)] = 0.0
    return pg


@dataclass
class StationaryPair:
    sigma_bar: DualPoint
    x_bar: np.ndarray
    g: GMatrix
    F: np.ndarray
    D: np.ndarray
    pi_value: float
    pid_value: float
    grad_residual: float
    active: tuple[str, ...] = ()

    @property
    def gap(self) -> float:
        return abs(self.pi_value - self.pid_value)

    def admitted(self, stat_tol: float = STAT_TOL, gap_tol: float = GAP_TOL) -> bool:
        return (self.grad_residual <= stat_tol
                and self.gap <= gap_tol * (1.0 + abs(self.pi_value)))


def make_pair(instance: ProblemInstance, s: DualPoint, *, projected: bool = True) -> StationaryPair:
    """Bundle a dual point with its recovered primal point and cached quantities."""
    gm = g_matrix(instance, s)
    x = recover_primal(instance, s, gm)
    g = grad_dual(instance, s, gm)
    if projected:
        g = projected_gradient(instance, s, g)
    return StationaryPair(
        sigma_bar=s,
        x_bar=x,
        g=gm,
        F=f_matrix(instance, x),
        D=d_diagonal(instance, s),
        pi_value=eval_primal(instance, x),
        pid_value=eval_dual(instance, s, gm),
        grad_residual=float(np.abs(g).max(initial=0.0)),
        active=tuple(s.active_bounds(instance)),
    )


def duality_gap(pair: StationaryPair) -> float:
    return pair.gap
