"""End-to-end solve pipeline and its JSON report."""
from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .dual import StationaryPair, make_pair, sigma_of_x
from .perturbation import HomotopyTrace, PerturbationSchedule, homotopy_solve
from .problem import FORMAT_VERSION, ProblemInstance, eval_primal
from .solver import (CriticalSet, EnumerationCapError, SolverOptions, enumerate_critical,
                     solve_minus, solve_plus)
from .triality import TrialityVerdict, UnadmittedPairError, classify

EXIT_CERTIFIED = 0
EXIT_INPUT_ERROR = 1
EXIT_PERTURBATION = 2
EXIT_NO_CERTIFICATE = 3
SELECTION_TOL = 1e-8


def clean_json(obj):
    """Convert numpy containers and scalars to plain JSON values; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): clean_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean_json(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean_json(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(doc) -> str:
    """Deterministic JSON text; floats use the shortest round-trip representation."""
    return json.dumps(clean_json(doc), indent=2, allow_nan=False) + "\n"


def instance_digest(instance: ProblemInstance) -> str:
    text = json.dumps(instance.to_dict(), sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest()


def pair_to_dict(pair: StationaryPair, verdict: TrialityVerdict | None) -> dict:
    return {
        "sigma_bar": {"tau": pair.sigma_bar.tau, "sigma": pair.sigma_bar.sigma},
        "x_bar": pair.x_bar,
        "pi_value": pair.pi_value,
        "pid_value": pair.pid_value,
        "duality_gap": pair.gap,
        "grad_residual": pair.grad_residual,
        "verdict": None if verdict is None else verdict.to_dict(),
    }


@dataclass
class SolveReport:
    instance: ProblemInstance
    options: SolverOptions
    critical: CriticalSet
    verdicts: list[TrialityVerdict | None]
    global_minimizer: dict | None
    homotopy_trace: HomotopyTrace | None
    timings: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def outcome(self) -> str:
        if self.global_minimizer is None:
            return "no_certificate"
        return "certified" if self.global_minimizer["certificate"] == "triality" else "perturbation"

    @property
    def exit_code(self) -> int:
        return {"certified": EXIT_CERTIFIED, "perturbation": EXIT_PERTURBATION,
                "no_certificate": EXIT_NO_CERTIFICATE}[self.outcome]

    def best_known(self) -> dict | None:
        """Lowest primal value among every critical point the search produced (uncertified)."""
        best = self.critical.best_primal()
        if self.global_minimizer is not None and (best is None
                                                  or self.global_minimizer["value"] <= best.value):
            return {"x": self.global_minimizer["x"], "value": self.global_minimizer["value"]}
        if best is None:
            return None
        return {"x": best.x, "value": best.value}

    def to_dict(self, *, include_timings: bool = True) -> dict:
        doc = {
            "format_version": FORMAT_VERSION,
            "tool_version": __version__,
            "instance_digest": instance_digest(self.instance),
            "seed": self.options.seed,
            "options": self.options.to_dict(),
            "outcome": self.outcome,
            "exit_code": self.exit_code,
            "critical_pairs": [pair_to_dict(p, v) for p, v in zip(self.critical.pairs, self.verdicts)],
            "boundary_points": [
                {"tau": b.point.tau, "sigma": b.point.sigma, "active": list(b.active),
                 "x_bar": b.x_bar, "pid_value": b.pid_value, "pi_value": b.pi_value,
                 "kkt_residual": b.kkt_residual, "converged": b.converged}
                for b in self.critical.boundary_points
            ],
            "global_minimizer": self.global_minimizer,
            "best_known": self.best_known(),
            "homotopy_trace": None if self.homotopy_trace is None else self.homotopy_trace.to_dict(),
            "diagnostics": self.critical.diagnostics,
            "notes": self.notes,
        }
        if include_timings:
            doc["timings"] = self.timings
        return doc

    def to_json(self, *, include_timings: bool = True) -> str:
        return dumps(self.to_dict(include_timings=include_timings))


def collect_critical(instance: ProblemInstance, opts: SolverOptions) -> tuple[CriticalSet, list[str]]:
    """Enumerate when m+p is within the cap, else combine the two targeted searches."""
    try:
        return enumerate_critical(instance, opts), []
    except EnumerationCapError as exc:
        note = f"{exc}; used solve_plus and solve_minus"
    crit = solve_minus(instance, opts)
    plus = solve_plus(instance, opts)
    if plus.boundary is not None:
        crit.boundary_points.append(plus.boundary)
    if plus.pair is not None and plus.pair.admitted():
        crit.pairs.insert(0, plus.pair)
    crit.diagnostics["plus_status"] = plus.status
    return crit, [note]


def _safe_classify(instance, pair):
    try:
        return classify(instance, pair)
    except UnadmittedPairError:
        return None


def solve_instance(instance: ProblemInstance, opts: SolverOptions | None = None, *,
                   perturb: bool = False,
                   schedule: PerturbationSchedule | None = None) -> SolveReport:
    """Search critical pairs, classify them, and fall back to perturbation if asked."""
    opts = opts or SolverOptions()
    timings = {}
    t0 = time.perf_counter()
    crit, notes = collect_critical(instance, opts)
    t1 = time.perf_counter()
    verdicts = [_safe_classify(instance, p) for p in crit.pairs]
    t2 = time.perf_counter()
    timings["search_ms"] = 1e3 * (t1 - t0)
    timings["classify_ms"] = 1e3 * (t2 - t1)

    global_min = None
    winners = [(p, v) for p, v in zip(crit.pairs, verdicts) if v is not None and v.label == "GlobalMin"]
    if winners:
        if len(winners) > 1:
            notes.append(f"{len(winners)} pairs labeled GlobalMin; kept the lowest value")
        pair, _ = min(winners, key=lambda pv: pv[0].pi_value)
        global_min = {"x": pair.x_bar, "value": pair.pi_value, "certificate": "triality",
                      "sigma_bar": pair.sigma_bar.vector, "verdict": "GlobalMin"}

    trace = None
    if global_min is None and perturb:
        trace = homotopy_solve(instance, schedule, opts)
        timings["perturbation_ms"] = 1e3 * (time.perf_counter() - t2)
        if trace.limit_estimate is not None and trace.limit_stationary:
            x = trace.limit_estimate
            global_min = {"x": x, "value": eval_primal(instance, x),
                          "certificate": "perturbation-selected",
                          "verdict": _limit_verdict(instance, x)}
            found = [p.pi_value for p in crit.pairs]
            if found:
                global_min["matches_lowest_critical_value"] = bool(
                    global_min["value"] <= min(found) + SELECTION_TOL * (1.0 + abs(min(found))))
        else:
            notes.append("homotopy did not produce a stationary limit")
    timings["total_ms"] = 1e3 * (time.perf_counter() - t0)
    return SolveReport(instance, opts, crit, verdicts, global_min, trace, timings, notes)


def _limit_verdict(instance: ProblemInstance, x) -> str | None:
    """Classify the polished homotopy limit through its own dual point when that is admissible."""
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            pair = make_pair(instance, sigma_of_x(instance, x))
    except ValueError:
        return None
    verdict = _safe_classify(instance, pair)
    return None if verdict is None else verdict.label
