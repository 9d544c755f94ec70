"""Locating stationary points of the canonical dual function.

Two searches are provided:

* :func:`solve_plus` maximizes the dual over the convex region where
  G(s) is positive semi-definite (and the dual box holds).  The dual is
  concave there, so a projected Newton iteration with an active-set
  treatment of the box bounds and of the G >= 0 boundary is used.
* :func:`solve_minus` runs Newton's method on grad Pd = 0 from a
  deterministic low-discrepancy set of starts and keeps the roots where
  G(s) is negative definite.

:func:`enumerate_critical` merges both and also keeps roots with
indefinite G, so that every dual critical point the starts reach is
reported.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla
from scipy.optimize import nnls
from scipy.stats import qmc

from .dual import (
    DualPoint,
    GMatrix,
    StationaryPair,
    analyze_matrix,
    assemble_g,
    eval_dual,
    grad_dual,
    hess_dual,
    lower_bounds,
    make_pair,
    sigma_of_x,
    _coord_name,
)
from .problem import ProblemInstance, eval_primal, grad_primal, hess_primal, validate_instance

ENUM_CAP = 4
ACTIVE_TOL = 1e-10
G_ACTIVE_TOL = 1e-9
G_FEAS_TOL = 1e-11
EDGE_TOL = 1e-6
PRIMAL_SEED_ITER = 60
PRIMAL_SCALE_MAX = 1.0  # far primal starts only crawl along the exponential wall


class InvalidInstanceError(ValueError):
    pass


class EnumerationCapError(ValueError):
    pass


@dataclass
class SolverOptions:
    stat_tol: float = 1e-10
    max_iter: int = 200
    starts: int = 64
    seed: int = 0
    grid_bounds: list[tuple[float, float]] | None = None
    step_shrink: float = 0.5
    dedup_tol: float = 1e-6
    enum_cap: int = ENUM_CAP
    threads: int | None = None

    def __post_init__(self):
        if not self.stat_tol > 0 or not self.dedup_tol > 0:
            raise ValueError("tolerances must be positive")
        if self.starts < 1:
            raise ValueError("starts must be >= 1")
        if not 0 < self.step_shrink < 1:
            raise ValueError("step_shrink must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    @classmethod
    def from_dict(cls, doc: dict | None) -> "SolverOptions":
        doc = dict(doc or {})
        if "grid_bounds" in doc and doc["grid_bounds"] is not None:
            doc["grid_bounds"] = [tuple(map(float, b)) for b in doc["grid_bounds"]]
        known = {k: doc[k] for k in cls.__dataclass_fields__ if k in doc}
        return cls(**known)

    def to_dict(self) -> dict:
        return {
            "stat_tol": self.stat_tol,
            "max_iter": self.max_iter,
            "starts": self.starts,
            "seed": self.seed,
            "grid_bounds": None if self.grid_bounds is None else [list(b) for b in self.grid_bounds],
            "step_shrink": self.step_shrink,
            "dedup_tol": self.dedup_tol,
            "enum_cap": self.enum_cap,
        }


@dataclass
class BoundaryReport:
    """A constrained maximizer of the dual lying on the edge of the G >= 0 region."""

    point: DualPoint
    active: tuple[str, ...]
    multipliers: np.ndarray
    x_bar: np.ndarray
    pid_value: float
    pi_value: float
    kkt_residual: float
    g: GMatrix
    converged: bool = True


@dataclass
class PlusResult:
    status: str  # "interior" | "boundary" | "not_found"
    pair: StationaryPair | None = None
    boundary: BoundaryReport | None = None
    iterations: int = 0
    history: list[float] = field(default_factory=list)
    message: str = ""


@dataclass(frozen=True)
class PrimalCandidate:
    """A critical point of Pi reached by primal Newton, with no dual certificate attached."""

    x: np.ndarray
    value: float
    grad_residual: float


@dataclass
class CriticalSet:
    pairs: list[StationaryPair] = field(default_factory=list)
    boundary_points: list[BoundaryReport] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    primal_critical: list[PrimalCandidate] = field(default_factory=list)

    def best_primal(self) -> PrimalCandidate | None:
        """Lowest-value primal critical point seen anywhere in the search."""
        cands = list(self.primal_critical)
        cands += [PrimalCandidate(p.x_bar, p.pi_value, 0.0) for p in self.pairs]
        return min(cands, key=lambda c: c.value, default=None)

    def in_set(self, name: str) -> list[StationaryPair]:
        return [p for p in self.pairs if p.g.dual_set == name]


def _check_instance(instance: ProblemInstance) -> None:
    report = validate_instance(instance)
    if not report.ok:
        raise InvalidInstanceError("; ".join(report.violations))


def _thread_count(opts: SolverOptions) -> int:
    if opts.threads is not None:
        return max(1, int(opts.threads))
    env = os.environ.get("CDT_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# Concave maximization over the G >= 0 region
# ---------------------------------------------------------------------------

def initial_plus_point(instance: ProblemInstance, margin: float | None = None) -> np.ndarray:
    """Deterministic start inside the region G(s) > 0.

    Starts from (exp(-alpha) + 1, max(-beta*theta, 0) + 1) and, if needed,
    adds the same amount to every coordinate, which moves G along the sum
    of all generators.
    """
    lb = lower_bounds(instance)
    v = np.concatenate([np.exp(-instance.alphas) + 1.0,
                        np.maximum(-instance.betas * instance.thetas, 0.0) + 1.0])
    if margin is None:
        margin = 0.1 * (1.0 + np.linalg.norm(instance.A, 2))
    S = instance.generators.sum(axis=0)
    s_min = np.linalg.eigvalsh(S)[0]
    g_min = np.linalg.eigvalsh(assemble_g(instance, DualPoint.from_vector(instance, v)))[0]
    if g_min < margin and s_min > 0:
        v = v + (margin - g_min) / s_min
    return np.maximum(v, lb)


def _plus_feasible(instance: ProblemInstance, v: np.ndarray, lb: np.ndarray):
    if np.any(v < lb) or np.any(v[: instance.m] <= 0) or not np.all(np.isfinite(v)):
        return None
    s = DualPoint.from_vector(instance, v)
    gm = analyze_matrix(assemble_g(instance, s), instance.f)
    if gm.lam_min < -G_FEAS_TOL * (1.0 + np.abs(gm.eigenvalues).max()) or not gm.col_space_ok:
        return None
    val = eval_dual(instance, s, gm)
    if not np.isfinite(val):
        return None
    return s, gm, val


def _max_step_psd(G: np.ndarray, dG: np.ndarray) -> float:
    """Largest t with G + t dG still PSD, for positive definite G."""
    try:
        nu = sla.eigh(dG, G, eigvals_only=True)
    except (np.linalg.LinAlgError, ValueError):
        return np.inf
    return -1.0 / nu[0] if nu[0] < 0 else np.inf


def _active_constraints(instance, v, lb, gm: GMatrix):
    """Rows and right-hand sides of the linearized active constraints."""
    rows, rhs, names = [], [], []
    k = instance.m + instance.p
    near = np.abs(v - lb) <= ACTIVE_TOL * (1.0 + np.abs(lb))
    for i in np.flatnonzero(near):
        e = np.zeros(k)
        e[i] = 1.0
        rows.append(e)
        rhs.append(lb[i] - v[i])
        names.append(_coord_name(instance, i))
    band = G_ACTIVE_TOL * (1.0 + np.abs(gm.eigenvalues).max())
    gens = instance.generators
    for idx in np.flatnonzero(gm.eigenvalues <= band):
        q = gm.eigenvectors[:, idx]
        rows.append(np.einsum("i,kij,j->k", q, gens, q))
        rhs.append(-gm.eigenvalues[idx])
        names.append("lambda_min(G)" if idx == 0 else f"lambda_{idx + 1}(G)")
    if rows:
        return np.array(rows), np.array(rhs), names
    return np.zeros((0, k)), np.zeros(0), names


def _kkt_step(H, g, E, r):
    """Maximize g'd + d'Hd/2 subject to E d = r; returns (d, nu) with g + Hd + E'nu = 0."""
    k = g.size
    c = E.shape[0]
    K = np.zeros((k + c, k + c))
    K[:k, :k] = H
    K[:k, k:] = E.T
    K[k:, :k] = E
    rhs = np.concatenate([-g, r])
    try:
        sol = np.linalg.solve(K, rhs)
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:k], sol[k:]


def solve_plus(instance: ProblemInstance, opts: SolverOptions | None = None,
               start=None) -> PlusResult:
    """Maximize the dual function over {s in dual box : G(s) >= 0}.

    Returns an interior stationary pair, a boundary report when the
    maximizer sits on an active bound or on the singular edge of the
    region, or ``not_found``.
    """
    opts = opts or SolverOptions()
    _check_instance(instance)
    lb = lower_bounds(instance)
    v = initial_plus_point(instance) if start is None else np.maximum(np.asarray(start, float), lb)
    state = _plus_feasible(instance, v, lb)
    if state is None and start is not None:
        v = initial_plus_point(instance)
        state = _plus_feasible(instance, v, lb)
    if state is None:
        return PlusResult("not_found", message="no feasible starting point with G(s) >= 0")
    s, gm, val = state
    history = [val]
    for it in range(1, opts.max_iter + 1):
        g = grad_dual(instance, s, gm)
        H = hess_dual(instance, s, gm)
        E, r, names = _active_constraints(instance, v, lb, gm)

        # KKT residual with nonnegative multipliers on the active set.
        if E.shape[0]:
            nu_ls, _ = nnls(E.T, -g)
            resid_vec = g + E.T @ nu_ls
        else:
            nu_ls, resid_vec = np.zeros(0), g
        residual = float(np.abs(resid_vec).max(initial=0.0))
        if residual <= opts.stat_tol:
            return _finish_plus(instance, s, gm, val, names, nu_ls, residual, it - 1, history)

        # Newton step on the active face; release constraints with wrong-signed multipliers.
        keep = list(range(E.shape[0]))
        while True:
            d, nu = _kkt_step(H, g, E[keep], r[keep])
            neg = [j for j, mult in zip(keep, nu) if mult < -1e-12 * (1.0 + np.abs(g).max())]
            if not neg:
                break
            worst = min(neg, key=lambda j: nu[keep.index(j)])
            keep.remove(worst)

        t = 1.0
        if gm.lam_min > G_ACTIVE_TOL * (1.0 + np.abs(gm.eigenvalues).max()):
            dG = np.tensordot(d, instance.generators, axes=1)
            t = min(1.0, _max_step_psd(gm.matrix, 0.5 * (dG + dG.T)))
        accepted = None
        slack = 1e-14 * (1.0 + abs(val))
        while t > 1e-16:
            cand = np.maximum(v + t * d, lb)
            state = _plus_feasible(instance, cand, lb)
            if state is not None:
                gain = state[2] - val
                if gain >= 1e-4 * max(g @ (cand - v), 0.0) - slack and gain >= -slack:
                    accepted = cand, state
                    break
            t *= opts.step_shrink
        if accepted is None:
            if residual <= 1e-8:
                return _finish_plus(instance, s, gm, val, names, nu_ls, residual, it, history)
            return _stalled(instance, s, gm, val, residual, it, history,
                            f"line search failed (residual {residual:.3g})")
        v, (s, gm, val) = accepted
        history.append(val)
        if (gm.lam_min <= EDGE_TOL * (1.0 + np.abs(gm.eigenvalues).max())
                and history[-1] - history[-2] <= 1e-12 * (1.0 + abs(val))):
            return _stalled(instance, s, gm, val, residual, it, history, "no further ascent")
    return _stalled(instance, s, gm, val, residual, opts.max_iter, history,
                    "iteration limit reached")


def _stalled(instance, s, gm, val, residual, iterations, history, message) -> PlusResult:
    # Creeping onto the singular edge of G >= 0 means the supremum sits there.
    if gm.lam_min <= EDGE_TOL * (1.0 + np.abs(gm.eigenvalues).max()):
        x = gm.pinv @ instance.f
        report = BoundaryReport(point=s, active=("lambda_min(G)",), multipliers=np.zeros(1),
                                x_bar=x, pid_value=val, pi_value=eval_primal(instance, x),
                                kkt_residual=residual, g=gm, converged=False)
        return PlusResult("boundary", boundary=report, iterations=iterations, history=history,
                          message=message + "; iterates approach the singular edge of G >= 0")
    return PlusResult("not_found", iterations=iterations, history=history, message=message)


def _finish_plus(instance, s, gm, val, names, nu, residual, iterations, history) -> PlusResult:
    active = tuple(names)
    if not active:
        pair = make_pair(instance, s, projected=False)
        return PlusResult("interior", pair=pair, iterations=iterations, history=history)
    x = gm.pinv @ instance.f
    report = BoundaryReport(
        point=s,
        active=active,
        multipliers=np.asarray(nu, dtype=float),
        x_bar=x,
        pid_value=val,
        pi_value=eval_primal(instance, x),
        kkt_residual=residual,
        g=gm,
    )
    return PlusResult("boundary", boundary=report, iterations=iterations, history=history)


# ---------------------------------------------------------------------------
# Multi-start Newton on grad Pd = 0
# ---------------------------------------------------------------------------

def default_grid_bounds(instance: ProblemInstance, scale: float = 1.0) -> list[tuple[float, float]]:
    lo = lower_bounds(instance)
    widths = np.concatenate([
        10.0 * (1.0 + np.abs(instance.alphas)) * scale,
        10.0 * instance.betas * (1.0 + np.abs(instance.thetas)) * scale,
    ])
    return [(float(a), float(a + w)) for a, w in zip(lo, widths)]


def start_points(instance: ProblemInstance, opts: SolverOptions, bounds) -> np.ndarray:
    """Scrambled Halton points over ``bounds``; deterministic for a given seed."""
    k = instance.m + instance.p
    sampler = qmc.Halton(d=k, scramble=True, seed=opts.seed)
    unit = sampler.random(opts.starts)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    return lo + unit * (hi - lo)


def primal_radius(instance: ProblemInstance, bounds) -> float:
    """Radius of a primal box whose image under sigma_of_x roughly fills ``bounds``.

    Uses x'Sx <= 2 * sum of per-term budgets, S the sum of all generators,
    restricted to the range of S (directions S ignores cost nothing).
    """
    hi = np.array([b[1] for b in bounds])
    budget = np.concatenate([
        np.log(np.maximum(hi[: instance.m], 1e-300)) + instance.alphas,
        hi[instance.m:] / instance.betas + instance.thetas,
    ])
    lam = np.linalg.eigvalsh(instance.generators.sum(axis=0))
    lam = lam[lam > 1e-9 * max(lam[-1], 0.0)]
    total = np.maximum(budget, 0.0).sum()
    if lam.size == 0 or lam[0] <= 0 or total <= 0:
        return 1.0
    return float(np.sqrt(2.0 * total / lam[0]))


def primal_start_points(instance: ProblemInstance, opts: SolverOptions, bounds) -> np.ndarray:
    """Halton points in the primal box of radius :func:`primal_radius`."""
    R = primal_radius(instance, bounds)
    sampler = qmc.Halton(d=instance.n, scramble=True, seed=opts.seed + 1)
    return -R + 2.0 * R * sampler.random(opts.starts)


def primal_newton(instance: ProblemInstance, x0, opts: SolverOptions, tol: float | None = None,
                  max_iter: int | None = None):
    """Damped Newton on grad Pi = 0 with a merit line search on ||grad Pi||.

    Returns ``(x, converged, iterations)``.  Singular Hessians fall back to
    least-squares steps.
    """
    tol = opts.stat_tol if tol is None else tol
    max_iter = opts.max_iter if max_iter is None else max_iter
    x = np.asarray(x0, dtype=float).copy()
    with np.errstate(over="ignore", invalid="ignore"):
        g = grad_primal(instance, x)
        if not np.all(np.isfinite(g)):
            return x, False, 0
        for it in range(max_iter):
            if np.abs(g).max() <= tol:
                return x, True, it
            H = hess_primal(instance, x)
            try:
                d = np.linalg.solve(H, -g)
                if not np.all(np.isfinite(d)):
                    raise np.linalg.LinAlgError
            except np.linalg.LinAlgError:
                d = np.linalg.lstsq(H, -g, rcond=None)[0]
            merit = np.linalg.norm(g)
            t = 1.0
            while t > 1e-12:
                cand = x + t * d
                cg = grad_primal(instance, cand)
                if np.all(np.isfinite(cg)) and np.linalg.norm(cg) <= (1.0 - 1e-4 * t) * merit:
                    x, g = cand, cg
                    break
                t *= opts.step_shrink
            else:
                return x, bool(np.abs(g).max() <= tol), it
    return x, bool(np.abs(g).max() <= tol), max_iter


def newton_root(instance: ProblemInstance, v0, opts: SolverOptions):
    """Damped Newton on grad Pd = 0 with a merit line search on ||grad Pd||.

    Returns ``(v, converged, iterations)``.
    """
    lb = lower_bounds(instance)
    v = np.maximum(np.asarray(v0, dtype=float), lb)

    def grad_at(w):
        s = DualPoint.from_vector(instance, w)
        gm = analyze_matrix(assemble_g(instance, s), instance.f)
        if not gm.col_space_ok:
            return None, None, None
        return s, gm, grad_dual(instance, s, gm)

    s, gm, g = grad_at(v)
    if g is None:
        return v, False, 0
    for it in range(opts.max_iter):
        gnorm = np.abs(g).max()
        if gnorm <= opts.stat_tol:
            return v, True, it
        H = hess_dual(instance, s, gm)
        try:
            d = np.linalg.solve(H + 1e-12 * np.eye(H.shape[0]), -g)
        except np.linalg.LinAlgError:
            d = np.linalg.lstsq(H, -g, rcond=None)[0]
        merit = np.linalg.norm(g)
        t = 1.0
        moved = False
        while t > 1e-10:
            cand = np.maximum(v + t * d, lb)
            if np.all(cand[: instance.m] > 0):
                cs, cgm, cg = grad_at(cand)
                if cg is not None and np.all(np.isfinite(cg)) and \
                        np.linalg.norm(cg) <= (1.0 - 1e-4 * t) * merit:
                    v, s, gm, g = cand, cs, cgm, cg
                    moved = True
                    break
            t *= opts.step_shrink
        if not moved:
            return v, bool(np.abs(g).max() <= opts.stat_tol), it
    return v, bool(np.abs(g).max() <= opts.stat_tol), opts.max_iter


def _dual_from_primal(instance: ProblemInstance, x0, opts: SolverOptions):
    """Primal Newton to a critical x, then dual Newton from sigma_of_x(x)."""
    x, ok, its = primal_newton(instance, x0, opts, tol=max(opts.stat_tol, 1e-9),
                               max_iter=min(opts.max_iter, PRIMAL_SEED_ITER))
    if not ok:
        return x, False, its, None
    with np.errstate(over="ignore", invalid="ignore"):
        v0 = sigma_of_x(instance, x).vector
    if not np.all(np.isfinite(v0)):
        return v0, False, its, x
    v, ok, more = newton_root(instance, v0, opts)
    return v, ok, its + more, x


def _run_starts(instance: ProblemInstance, opts: SolverOptions, starts):
    """Run each ``(kind, start)``; results keep the input order."""
    def work(item):
        kind, v0 = item
        if kind == "primal":
            return _dual_from_primal(instance, v0, opts)
        return newton_root(instance, v0, opts) + (None,)

    threads = _thread_count(opts)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(work, starts))
    return [work(v0) for v0 in starts]


def _dedup_add(pairs: list[StationaryPair], pair: StationaryPair, tol: float) -> bool:
    v = pair.sigma_bar.vector
    for other in pairs:
        if np.abs(other.sigma_bar.vector - v).max() < tol:
            return False
    pairs.append(pair)
    return True


def _multistart(instance, opts, scales, keep):
    pairs: list[StationaryPair] = []
    primal: list[PrimalCandidate] = []
    diag = {"starts": 0, "converged": 0, "rejected": 0, "failures": 0, "iterations": 0}
    for scale in scales:
        if opts.grid_bounds is None:
            bounds = default_grid_bounds(instance, scale)
        else:
            bounds = [(lo, lo + (hi - lo) * scale) for lo, hi in opts.grid_bounds]
        starts = [("dual", v) for v in start_points(instance, opts, bounds)]
        if scale <= PRIMAL_SCALE_MAX:
            starts += [("primal", x) for x in primal_start_points(instance, opts, bounds)]
        results = _run_starts(instance, opts, starts)
        for v, ok, its, x in results:
            if x is not None:
                _primal_add(instance, primal, x, opts.dedup_tol)
            diag["starts"] += 1
            diag["iterations"] += its
            if not ok:
                diag["failures"] += 1
                continue
            diag["converged"] += 1
            try:
                pair = make_pair(instance, DualPoint.from_vector(instance, v), projected=False)
            except ValueError:
                diag["rejected"] += 1
                continue
            if not pair.admitted() or not keep(pair):
                diag["rejected"] += 1
                continue
            _dedup_add(pairs, pair, opts.dedup_tol)
    return pairs, primal, diag


def _primal_add(instance, primal: list[PrimalCandidate], x: np.ndarray, tol: float) -> None:
    for other in primal:
        if np.abs(other.x - x).max() < tol:
            return
    primal.append(PrimalCandidate(x.copy(), eval_primal(instance, x),
                                  float(np.abs(grad_primal(instance, x)).max())))


def solve_minus(instance: ProblemInstance, opts: SolverOptions | None = None) -> CriticalSet:
    """Dual critical points with G(s) negative definite, via multi-start Newton."""
    opts = opts or SolverOptions()
    _check_instance(instance)
    pairs, primal, diag = _multistart(instance, opts, [1.0], lambda p: p.g.dual_set == "S_minus")
    return CriticalSet(pairs=pairs, diagnostics=diag, primal_critical=primal)


def enumerate_critical(instance: ProblemInstance, opts: SolverOptions | None = None) -> CriticalSet:
    """All dual critical points reachable from the multi-start grid, any inertia of G."""
    opts = opts or SolverOptions()
    _check_instance(instance)
    k = instance.m + instance.p
    if k > opts.enum_cap:
        raise EnumerationCapError(
            f"m+p = {k} exceeds the enumeration cap {opts.enum_cap}; "
            "call solve_plus / solve_minus directly")
    result = CriticalSet()
    plus = solve_plus(instance, opts)
    if plus.pair is not None and plus.pair.admitted():
        result.pairs.append(plus.pair)
    if plus.boundary is not None:
        result.boundary_points.append(plus.boundary)
    pairs, primal, diag = _multistart(instance, opts, [1.0, 4.0, 16.0], lambda p: True)
    result.primal_critical = primal
    for pair in pairs:
        _dedup_add(result.pairs, pair, opts.dedup_tol)
    diag["plus_status"] = plus.status
    diag["plus_iterations"] = plus.iterations
    result.diagnostics = diag
    return result
