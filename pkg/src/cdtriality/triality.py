"""Extremality verdicts for stationary pairs from the inertia of G, the primal and dual Hessians.

At an admitted pair (s, x) the primal Hessian splits as

    H_p = G(s) + F D F'

and the dual Hessian is H_d = -F' G^+ F - D^-1.  The verdict depends on
which side of the dual set s lies (G positive definite or negative
definite) and on the inertia of H_d:

* G > 0                         -> x is the global minimizer of Pi.
* G < 0, H_d <= 0               -> local max on both sides.
* G < 0, H_d > 0, n = m+p       -> local min on both sides.
* G < 0, H_d > 0, m+p < n       -> x minimizes Pi on an affine slice
                                   x + span(L); Pi itself has a saddle.
* G < 0, H_p > 0, n < m+p       -> s minimizes Pd on s + span(Q).

When G < 0 the inertia identity In(G) + In(H_d) = (0,0,m+p) + In(H_p)
holds, so in the last case H_d is indefinite.  For that reason the
n < m+p branch is keyed on H_p rather than on H_d.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dual import STAT_TOL, GAP_TOL, StationaryPair, hess_dual
from .linalg import (NotNegativeDefiniteError, congruence_diagonalize, inertia_of,
                     numerical_rank)
from .problem import ProblemInstance, hess_primal

DET_TOL = 1e-8

LABELS = ("GlobalMin", "LocalMaxPair", "LocalMinPair", "PrimalSaddle_DualMin",
          "DualSaddle_PrimalMin", "BoundaryDegenerate", "Unclassified")


class UnadmittedPairError(ValueError):
    """The pair fails the stationarity or duality-gap tolerance."""


class SubspacePreconditionError(ValueError):
    """A saddle subspace was requested where its construction does not apply."""


@dataclass(frozen=True)
class Evidence:
    g_inertia: tuple[int, int, int]
    primal_inertia: tuple[int, int, int]
    dual_inertia: tuple[int, int, int] | None
    primal_eig_range: tuple[float, float]
    dual_eig_range: tuple[float, float] | None
    primal_min_abs_eig: float
    rank_F: int
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "g_inertia": list(self.g_inertia),
            "primal_hessian_inertia": list(self.primal_inertia),
            "dual_hessian_inertia": None if self.dual_inertia is None else list(self.dual_inertia),
            "primal_hessian_eig_range": list(self.primal_eig_range),
            "dual_hessian_eig_range": None if self.dual_eig_range is None else list(self.dual_eig_range),
            "primal_hessian_min_abs_eig": self.primal_min_abs_eig,
            "rank_F": self.rank_F,
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class TrialityVerdict:
    label: str
    dual_set: str
    det_nondegenerate: bool
    evidence: Evidence
    subspace: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "dual_set": self.dual_set,
            "det_nondegenerate": self.det_nondegenerate,
            "evidence": self.evidence.to_dict(),
            "subspace": None if self.subspace is None else self.subspace.tolist(),
        }


def _eig_range(M: np.ndarray) -> tuple[float, float]:
    lam = np.linalg.eigvalsh(M)
    return float(lam[0]), float(lam[-1])


def _det_nondegenerate(H: np.ndarray, tol: float = DET_TOL) -> tuple[bool, float]:
    lam = np.linalg.eigvalsh(H)
    smallest = float(np.abs(lam).min())
    return smallest > tol * (1.0 + np.linalg.norm(H, 2)), smallest


def _check_admitted(pair: StationaryPair, stat_tol: float, gap_tol: float) -> None:
    if not pair.admitted(stat_tol, gap_tol):
        raise UnadmittedPairError(
            f"pair not admitted: residual {pair.grad_residual:.3g}, gap {pair.gap:.3g}")


def _primal_hessian(instance: ProblemInstance, pair: StationaryPair) -> np.ndarray:
    return hess_primal(instance, pair.x_bar)


def _dual_hessian(instance: ProblemInstance, pair: StationaryPair) -> np.ndarray | None:
    if not pair.g.col_space_ok:
        return None
    return hess_dual(instance, pair.sigma_bar, pair.g)


def label_consistent(label: str, dual_set: str, evidence: Evidence, n: int, k: int) -> bool:
    """Cross-check a label against the inertia it was derived from.

    ``k`` is m+p.  Returns False when any stored count contradicts the label.
    """
    gp, gz, gn = evidence.g_inertia
    pp, pz, pn = evidence.primal_inertia
    dual = evidence.dual_inertia
    if label == "GlobalMin":
        return dual_set == "S_plus" and gn == 0 and gz == 0 and pn == 0 and pz == 0
    if label in ("Unclassified", "BoundaryDegenerate"):
        return True
    if dual_set != "S_minus" or gp != 0 or gz != 0 or dual is None:
        return False
    dp, dz, dn = dual
    if label == "LocalMaxPair":
        return dp == 0 and dz == 0 and pp == 0 and pz == 0
    if label == "LocalMinPair":
        return n == k and dn == 0 and dz == 0 and pn == 0 and pz == 0
    if label == "PrimalSaddle_DualMin":
        return k < n and dn == 0 and dz == 0
    if label == "DualSaddle_PrimalMin":
        return n < k and pn == 0 and pz == 0
    return False


def classify(instance: ProblemInstance, pair: StationaryPair, *,
             stat_tol: float = STAT_TOL, gap_tol: float = GAP_TOL) -> TrialityVerdict:
    """Label an admitted stationary pair by the refined triality cases."""
    _check_admitted(pair, stat_tol, gap_tol)
    n, k = instance.n, instance.m + instance.p
    gm = pair.g
    dual_set = gm.dual_set
    Hp = _primal_hessian(instance, pair)
    Hd = _dual_hessian(instance, pair)
    nondeg, min_abs = _det_nondegenerate(Hp)
    in_p = inertia_of(Hp)
    in_d = inertia_of(Hd) if Hd is not None else None
    notes = []
    if pair.active:
        notes.append("on dual box bound: " + ", ".join(pair.active))
    if not nondeg:
        notes.append("primal Hessian numerically singular")
    evidence = Evidence(
        g_inertia=gm.inertia.as_tuple(),
        primal_inertia=in_p.as_tuple(),
        dual_inertia=None if in_d is None else in_d.as_tuple(),
        primal_eig_range=_eig_range(Hp),
        dual_eig_range=None if Hd is None else _eig_range(Hd),
        primal_min_abs_eig=min_abs,
        rank_F=numerical_rank(pair.F) if pair.F.size else 0,
        notes=tuple(notes),
    )

    label, subspace = "Unclassified", None
    if pair.active or dual_set == "boundary":
        label = "BoundaryDegenerate"
    elif not nondeg:
        label = "Unclassified"
    elif dual_set == "S_plus":
        label = "GlobalMin"
    elif dual_set == "S_minus" and in_d is not None:
        if in_d.is_nsd:
            label = "LocalMaxPair"
        elif in_d.is_pos_def and n == k:
            label = "LocalMinPair"
        elif in_d.is_pos_def and k < n:
            label = "PrimalSaddle_DualMin"
            subspace = saddle_subspace_primal(instance, pair, check=False)
        elif n < k and in_p.is_pos_def:
            label = "DualSaddle_PrimalMin"
            subspace = saddle_subspace_dual(instance, pair, check=False)

    if not label_consistent(label, dual_set, evidence, n, k):
        evidence = Evidence(**{**evidence.__dict__,
                               "notes": evidence.notes + (f"label {label} contradicted by inertia",)})
        label, subspace = "Unclassified", None
    return TrialityVerdict(label, dual_set, nondeg, evidence, subspace)


def saddle_subspace_primal(instance: ProblemInstance, pair: StationaryPair, *,
                           check: bool = True) -> np.ndarray:
    """Basis L (n x (m+p)) with L' H_p L positive semi-definite.

    Built from the simultaneous diagonalization of G (negative definite)
    and F D F': T'GT = -I, T'FDF'T = diag(a), and L keeps the first m+p
    columns of T, so L' H_p L = diag(a - 1).
    """
    n, k = instance.n, instance.m + instance.p
    if check:
        if not k < n:
            raise SubspacePreconditionError(f"needs m+p < n, got m+p={k}, n={n}")
        if pair.g.dual_set != "S_minus":
            raise SubspacePreconditionError("needs G negative definite")
        Hd = _dual_hessian(instance, pair)
        if Hd is None or not inertia_of(Hd).is_psd:
            raise SubspacePreconditionError("needs the dual Hessian positive semi-definite")
    S = pair.F @ np.diag(pair.D) @ pair.F.T
    try:
        cp = congruence_diagonalize(pair.g.matrix, 0.5 * (S + S.T))
    except NotNegativeDefiniteError as exc:
        raise SubspacePreconditionError(str(exc)) from exc
    return cp.T[:, :k]


def saddle_subspace_dual(instance: ProblemInstance, pair: StationaryPair, *,
                         check: bool = True) -> np.ndarray:
    """Basis Q ((m+p) x n) with Q' H_d Q positive semi-definite.

    The dual Hessian is -D^-1 + F'(-G^-1)F, a negative definite matrix plus
    a PSD matrix of rank at most n, so the same congruence applies with the
    roles of the spaces exchanged.
    """
    n, k = instance.n, instance.m + instance.p
    if check:
        if not n < k:
            raise SubspacePreconditionError(f"needs n < m+p, got n={n}, m+p={k}")
        if pair.g.dual_set != "S_minus":
            raise SubspacePreconditionError("needs G negative definite")
        if not inertia_of(_primal_hessian(instance, pair)).is_psd:
            raise SubspacePreconditionError("needs x to be a local minimizer of Pi")
    S = -pair.F.T @ pair.g.pinv @ pair.F
    try:
        cp = congruence_diagonalize(-np.diag(1.0 / pair.D), 0.5 * (S + S.T))
    except NotNegativeDefiniteError as exc:
        raise SubspacePreconditionError(str(exc)) from exc
    return cp.T[:, :n]
