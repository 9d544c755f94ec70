"""Problem instances for the exponential-plus-quartic class and primal evaluation.

The objective is

    Pi(x) = sum_i exp(x'B_i x/2 - alpha_i)
          + sum_j beta_j/2 * (x'C_j x/2 - theta_j)^2
          + x'Ax/2 - f'x

with every B_i, C_j symmetric positive semi-definite and beta_j > 0.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

SYM_TOL = 1e-10
PSD_TOL = 1e-10
FORMAT_VERSION = 1


class DimensionError(ValueError):
    """Raised when a vector or matrix does not match the instance dimension."""


class InstanceFormatError(ValueError):
    """Raised when an instance document cannot be parsed."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _same(a, b) -> bool:
    """Field-wise equality that compares arrays exactly."""
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.shape(a) == np.shape(b) and bool(np.array_equal(a, b))
    if isinstance(a, tuple) and isinstance(b, tuple):
        return len(a) == len(b) and all(_same(u, v) for u, v in zip(a, b))
    return a == b


class _ArrayEq:
    __hash__ = None

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return all(_same(getattr(self, k), getattr(other, k))
                   for k, f in self.__dataclass_fields__.items() if f.compare)


@dataclass(frozen=True, eq=False)
class ExpTerm(_ArrayEq):
    B: np.ndarray
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "B", _frozen(self.B))
        object.__setattr__(self, "alpha", float(self.alpha))


@dataclass(frozen=True, eq=False)
class QuarticTerm(_ArrayEq):
    C: np.ndarray
    beta: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "C", _frozen(self.C))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "theta", float(self.theta))


@dataclass(frozen=True, eq=False)
class ProblemInstance(_ArrayEq):
    """Immutable data of one instance.

    Construction only normalizes types; structural checks live in
    :func:`validate_instance` so that a malformed instance can still be
    reported on rather than rejected outright.
    """

    A: np.ndarray
    exp_terms: tuple[ExpTerm, ...] = ()
    quartic_terms: tuple[QuarticTerm, ...] = ()
    f: np.ndarray | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        A = np.atleast_2d(np.array(self.A, dtype=float))
        n = A.shape[0]
        f = np.zeros(n) if self.f is None else np.array(self.f, dtype=float).ravel()
        exp_terms = tuple(t if isinstance(t, ExpTerm) else ExpTerm(*t) for t in self.exp_terms)
        quartic_terms = tuple(
            t if isinstance(t, QuarticTerm) else QuarticTerm(*t) for t in self.quartic_terms
        )
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "f", _frozen(f))
        object.__setattr__(self, "exp_terms", exp_terms)
        object.__setattr__(self, "quartic_terms", quartic_terms)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return len(self.exp_terms)

    @property
    def p(self) -> int:
        return len(self.quartic_terms)

    # Stacked views used by the vectorized evaluators.
    @cached_property
    def Bs(self) -> np.ndarray:
        return _frozen(np.array([t.B for t in self.exp_terms]).reshape(self.m, self.n, self.n))

    @cached_property
    def Cs(self) -> np.ndarray:
        return _frozen(np.array([t.C for t in self.quartic_terms]).reshape(self.p, self.n, self.n))

    @cached_property
    def alphas(self) -> np.ndarray:
        return _frozen([t.alpha for t in self.exp_terms])

    @cached_property
    def betas(self) -> np.ndarray:
        return _frozen([t.beta for t in self.quartic_terms])

    @cached_property
    def thetas(self) -> np.ndarray:
        return _frozen([t.theta for t in self.quartic_terms])

    @cached_property
    def generators(self) -> np.ndarray:
        """All B_i followed by all C_j, shape (m+p, n, n)."""
        return _frozen(np.concatenate([self.Bs, self.Cs], axis=0))

    def replace(self, *, A=None, f=None) -> "ProblemInstance":
        return ProblemInstance(
            A=self.A if A is None else A,
            exp_terms=self.exp_terms,
            quartic_terms=self.quartic_terms,
            f=self.f if f is None else f,
            name=self.name,
        )

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "n": self.n,
            "A": self.A.tolist(),
            "exp_terms": [{"B": t.B.tolist(), "alpha": t.alpha} for t in self.exp_terms],
            "quartic_terms": [
                {"C": t.C.tolist(), "beta": t.beta, "theta": t.theta} for t in self.quartic_terms
            ],
            "f": self.f.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ProblemInstance":
        try:
            version = doc.get("format_version", FORMAT_VERSION)
            if version != FORMAT_VERSION:
                raise InstanceFormatError(f"unsupported format_version {version!r}")
            n = int(doc["n"])
            if n < 1:
                raise InstanceFormatError("n must be a positive integer")
            A = doc.get("A")
            A = np.zeros((n, n)) if A is None else np.array(A, dtype=float)
            f = doc.get("f")
            f = np.zeros(n) if f is None else np.array(f, dtype=float)
            exp_terms = [ExpTerm(np.array(t["B"], dtype=float), t["alpha"])
                         for t in doc.get("exp_terms", [])]
            quartic_terms = [QuarticTerm(np.array(t["C"], dtype=float), t["beta"], t["theta"])
                             for t in doc.get("quartic_terms", [])]
        except InstanceFormatError:
            raise
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise InstanceFormatError(f"malformed instance: {exc}") from exc
        shapes = [A.shape] + [t.B.shape for t in exp_terms] + [t.C.shape for t in quartic_terms]
        if any(s != (n, n) for s in shapes) or f.shape != (n,):
            raise InstanceFormatError(f"matrix or vector shape does not match n={n}")
        return cls(A=A, exp_terms=tuple(exp_terms), quartic_terms=tuple(quartic_terms), f=f)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "ProblemInstance":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InstanceFormatError(f"invalid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise InstanceFormatError("instance document must be a JSON object")
        return cls.from_dict(doc)


@dataclass
class ValidationReport:
    ok: bool
    cone_condition: str  # "verified" | "heuristic-pass" | "unverified"
    violations: list[str] = field(default_factory=list)


def _check_symmetric(M: np.ndarray, tol: float = SYM_TOL) -> bool:
    scale = 1.0 + (np.abs(M).max() if M.size else 0.0)
    return bool(np.abs(M - M.T).max(initial=0.0) <= tol * scale)


def validate_instance(instance: ProblemInstance) -> ValidationReport:
    """Check the standing structural assumptions of an instance.

    The cone condition is tested by the all-ones combination: if
    sum(B_i) + sum(C_j) is positive definite the cone of the generators
    contains a positive definite matrix.  For PSD generators the converse
    also holds, but the finding is still reported as ``heuristic-pass``.
    A failed cone test never sets ``ok`` to false on its own.
    """
    n = instance.n
    findings = []
    if instance.A.shape != (n, n):
        findings.append(f"A has shape {instance.A.shape}, expected square")
    if instance.f.shape != (n,):
        findings.append(f"f has length {instance.f.shape[0]}, expected {n}")
    if instance.m + instance.p < 1:
        findings.append("instance needs at least one exponential or quartic term")

    named = [("A", instance.A, False)]
    named += [(f"B{i + 1}", t.B, True) for i, t in enumerate(instance.exp_terms)]
    named += [(f"C{j + 1}", t.C, True) for j, t in enumerate(instance.quartic_terms)]
    shapes_ok = True
    for label, M, needs_psd in named:
        if M.shape != (n, n):
            findings.append(f"{label} has shape {M.shape}, expected ({n}, {n})")
            shapes_ok = False
            continue
        if not np.all(np.isfinite(M)):
            findings.append(f"{label} has non-finite entries")
            continue
        if not _check_symmetric(M):
            findings.append(f"{label} not symmetric")
            continue
        if needs_psd:
            lam_min = np.linalg.eigvalsh(M)[0]
            if lam_min < -PSD_TOL * (1.0 + np.linalg.norm(M, 2)):
                findings.append(f"{label} not PSD (smallest eigenvalue {lam_min:.3g})")
    for j, t in enumerate(instance.quartic_terms):
        if not t.beta > 0:
            findings.append(f"beta{j + 1} must be positive, got {t.beta}")

    cone = "unverified"
    if shapes_ok and instance.m + instance.p >= 1:
        S = instance.generators.sum(axis=0)
        if np.all(np.isfinite(S)) and np.linalg.eigvalsh((S + S.T) / 2)[0] > PSD_TOL * (1.0 + np.linalg.norm(S, 2)):
            cone = "heuristic-pass"
    return ValidationReport(ok=not findings, cone_condition=cone, violations=findings)


def _as_point(instance: ProblemInstance, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (instance.n,):
        raise DimensionError(f"point has shape {x.shape}, instance dimension is {instance.n}")
    return x


def lambda_map(instance: ProblemInstance, x) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(eps, gamma)`` with eps_i = x'B_i x/2 - alpha_i, gamma_j = x'C_j x/2 - theta_j."""
    x = _as_point(instance, x)
    eps = 0.5 * np.einsum("i,kij,j->k", x, instance.Bs, x) - instance.alphas
    gamma = 0.5 * np.einsum("i,kij,j->k", x, instance.Cs, x) - instance.thetas
    return eps, gamma


def eval_primal(instance: ProblemInstance, x) -> float:
    x = _as_point(instance, x)
    eps, gamma = lambda_map(instance, x)
    return float(
        np.exp(eps).sum()
        + (0.5 * instance.betas * gamma**2).sum()
        + 0.5 * x @ instance.A @ x
        - instance.f @ x
    )


def grad_primal(instance: ProblemInstance, x) -> np.ndarray:
    x = _as_point(instance, x)
    eps, gamma = lambda_map(instance, x)
    Bx = instance.Bs @ x
    Cx = instance.Cs @ x
    return np.exp(eps) @ Bx + (instance.betas * gamma) @ Cx + instance.A @ x - instance.f


def hess_primal(instance: ProblemInstance, x) -> np.ndarray:
    x = _as_point(instance, x)
    eps, gamma = lambda_map(instance, x)
    H = instance.A.copy()
    for w, B in zip(np.exp(eps), instance.Bs):
        Bx = B @ x
        H += w * (np.outer(Bx, Bx) + B)
    for beta, g, C in zip(instance.betas, gamma, instance.Cs):
        Cx = C @ x
        H += beta * (np.outer(Cx, Cx) + g * C)
    return 0.5 * (H + H.T)


def instance_from_arrays(
    A,
    B: Sequence = (),
    alpha: Iterable[float] = (),
    C: Sequence = (),
    beta: Iterable[float] = (),
    theta: Iterable[float] = (),
    f=None,
    name: str = "",
) -> ProblemInstance:
    """Convenience constructor from parallel lists of term data."""
    exp_terms = tuple(ExpTerm(b, a) for b, a in zip(B, alpha, strict=True))
    quartic_terms = tuple(QuarticTerm(c, be, th) for c, be, th in zip(C, beta, theta, strict=True))
    return ProblemInstance(A=A, exp_terms=exp_terms, quartic_terms=quartic_terms, f=f, name=name)
