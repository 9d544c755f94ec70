"""Perturbation of degenerate instances: a shifted G and a vanishing-shift homotopy.

When the dual maximizer lies on the singular edge of the region G >= 0 the
minimizers of Pi are typically not unique.  Shifting the instance to
``A - E/n`` and ``f + e/n`` picks one of them: each stage has an interior
maximizer, and the recovered x_n converge as n grows.  The limit is then
polished by Newton's method on the original instance.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dual import GMatrix, DualPoint, analyze_matrix, assemble_g
from .linalg import inertia_of
from .problem import ProblemInstance, grad_primal
from .solver import SolverOptions, primal_newton, solve_plus
from .triality import UnadmittedPairError, classify

HOMOTOPY_TOL = 1e-6
POLISH_TOL = 1e-10
MODES = ("instance_homotopy", "g_shift")


class ScheduleError(ValueError):
    pass


def perturb_g(instance: ProblemInstance, s: DualPoint, alpha: float, D) -> GMatrix:
    """G(s) + alpha * D with fresh inertia and column-space flags."""
    D = np.asarray(D, dtype=float)
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if D.shape != (instance.n, instance.n) or not inertia_of(D).is_pos_def:
        raise ValueError("D must be a symmetric positive definite n x n matrix")
    return analyze_matrix(assemble_g(instance, s) + alpha * D, instance.f)


@dataclass(frozen=True)
class PerturbationSchedule:
    """Stage parameters for :func:`homotopy_solve`.

    ``instance_homotopy`` runs stage n on (A - E/n, f + e/n) for increasing n.
    ``g_shift`` runs stage alpha on (A + alpha E, f) for decreasing alpha.
    """

    mode: str
    sequence: tuple[float, ...]
    direction_E: np.ndarray
    direction_e: np.ndarray
    max_stages: int | None = None
    homotopy_tol: float = HOMOTOPY_TOL

    def __post_init__(self):
        if self.mode not in MODES:
            raise ScheduleError(f"mode must be one of {MODES}")
        seq = tuple(float(v) for v in self.sequence)
        if not seq or any(v <= 0 for v in seq):
            raise ScheduleError("sequence must be non-empty and positive")
        steps = np.diff(seq)
        if self.mode == "instance_homotopy" and np.any(steps <= 0):
            raise ScheduleError("n sequence must be strictly increasing")
        if self.mode == "g_shift" and np.any(steps >= 0):
            raise ScheduleError("alpha sequence must be strictly decreasing")
        E = np.array(self.direction_E, dtype=float)
        e = np.array(self.direction_e, dtype=float).ravel()
        if E.ndim != 2 or E.shape[0] != E.shape[1] or E.shape[0] != e.size:
            raise ScheduleError("direction_E must be n x n and direction_e length n")
        if not inertia_of(E).is_pos_def:
            raise ScheduleError("direction_E must be symmetric positive definite")
        if self.mode == "instance_homotopy" and not np.any(e):
            raise ScheduleError("direction_e must be nonzero")
        if self.max_stages is not None and self.max_stages < 1:
            raise ScheduleError("max_stages must be at least 1")
        if not self.homotopy_tol > 0:
            raise ScheduleError("homotopy_tol must be positive")
        E.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "sequence", seq)
        object.__setattr__(self, "direction_E", E)
        object.__setattr__(self, "direction_e", e)

    @property
    def stages(self) -> tuple[float, ...]:
        return self.sequence if self.max_stages is None else self.sequence[: self.max_stages]

    @classmethod
    def default(cls, instance: ProblemInstance, *, start: int = 32, stages: int = 12,
                mode: str = "instance_homotopy", E=None, e=None) -> "PerturbationSchedule":
        """Doubling schedule start, 2*start, ... with instance-scaled directions."""
        n = instance.n
        if E is None:
            E = np.eye(n) * max(1.0, np.linalg.norm(instance.A, 2))
        if e is None:
            f = instance.f
            e = f / np.linalg.norm(f) if np.any(f) else np.ones(n) / np.sqrt(n)
        if mode == "instance_homotopy":
            seq = tuple(float(start * 2**k) for k in range(stages))
        else:
            seq = tuple(1.0 / (start * 2**k) for k in range(stages))
        return cls(mode, seq, E, e)

    def stage_instance(self, instance: ProblemInstance, value: float) -> ProblemInstance:
        if self.mode == "instance_homotopy":
            return instance.replace(A=instance.A - self.direction_E / value,
                                    f=instance.f + self.direction_e / value)
        return instance.replace(A=instance.A + value * self.direction_E)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "sequence": list(self.sequence),
            "direction_E": self.direction_E.tolist(),
            "direction_e": self.direction_e.tolist(),
            "max_stages": self.max_stages,
            "homotopy_tol": self.homotopy_tol,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PerturbationSchedule":
        return cls(doc["mode"], tuple(doc["sequence"]), np.array(doc["direction_E"]),
                   np.array(doc["direction_e"]), doc.get("max_stages"),
                   doc.get("homotopy_tol", HOMOTOPY_TOL))


@dataclass(frozen=True)
class HomotopyStage:
    value: float
    status: str
    sigma_bar: np.ndarray | None
    x_bar: np.ndarray | None
    gap: float | None
    verdict: str | None

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "status": self.status,
            "sigma_bar": None if self.sigma_bar is None else self.sigma_bar.tolist(),
            "x_bar": None if self.x_bar is None else self.x_bar.tolist(),
            "gap": self.gap,
            "verdict": self.verdict,
        }


@dataclass
class HomotopyTrace:
    stages: list[HomotopyStage] = field(default_factory=list)
    limit_estimate: np.ndarray | None = None
    converged: bool = False
    limit_residual: float | None = None
    mode: str = "instance_homotopy"

    @property
    def limit_stationary(self) -> bool:
        return self.limit_residual is not None and self.limit_residual <= 1e-8

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "stages": [s.to_dict() for s in self.stages],
            "limit_estimate": None if self.limit_estimate is None else self.limit_estimate.tolist(),
            "limit_residual": self.limit_residual,
            "converged": self.converged,
        }


def homotopy_solve(instance: ProblemInstance, schedule: PerturbationSchedule | None = None,
                   opts: SolverOptions | None = None) -> HomotopyTrace:
    """Follow the interior dual maximizer of the shifted instances toward the original."""
    schedule = schedule or PerturbationSchedule.default(instance)
    opts = opts or SolverOptions()
    if schedule.direction_e.size != instance.n:
        raise ScheduleError("schedule dimension does not match the instance")
    trace = HomotopyTrace(mode=schedule.mode)
    warm = None
    last_x = prev_x = None
    for value in schedule.stages:
        stage_inst = schedule.stage_instance(instance, value)
        res = solve_plus(stage_inst, opts, start=warm)
        if res.pair is None:
            trace.stages.append(HomotopyStage(value, res.status, None, None, None, None))
            continue
        pair = res.pair
        try:
            verdict = classify(stage_inst, pair).label
        except UnadmittedPairError:
            verdict = None
        trace.stages.append(HomotopyStage(value, res.status, pair.sigma_bar.vector.copy(),
                                          pair.x_bar.copy(), pair.gap, verdict))
        warm = pair.sigma_bar.vector
        prev_x, last_x = last_x, pair.x_bar
    if last_x is None:
        return trace
    trace.converged = bool(prev_x is not None
                           and np.abs(last_x - prev_x).max() <= schedule.homotopy_tol)
    x, _, _ = primal_newton(instance, last_x, opts, tol=POLISH_TOL)
    trace.limit_estimate = x
    trace.limit_residual = float(np.abs(grad_primal(instance, x)).max())
    return trace
