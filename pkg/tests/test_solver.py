import numpy as np
import pytest
from scipy.optimize import brentq

from cdtriality import (EnumerationCapError, InvalidInstanceError, SolverOptions, enumerate_critical,
                        instance_from_arrays, solve_minus, solve_plus)
from cdtriality.solver import initial_plus_point


def close(v, w, tol=1e-8):
    return np.abs(np.asarray(v) - np.asarray(w)).max() <= tol


def find(pairs, sigma_bar, tol=1e-8):
    return [p for p in pairs if close(p.sigma_bar.vector, sigma_bar, tol)]


@pytest.mark.parametrize("key", ["ex1", "ex2"])
def test_solve_plus_reaches_global_pair(catalog, key):
    entry = catalog[key]
    res = solve_plus(entry.instance)
    assert res.status == "interior"
    assert close(res.pair.sigma_bar.vector, entry.expected[0].sigma_bar)
    assert close(res.pair.x_bar, entry.expected[0].x_bar)


def test_solve_plus_ex4_boundary(catalog):
    res = solve_plus(catalog["ex4"].instance)
    assert res.status == "boundary" and res.pair is None
    assert close(res.boundary.point.vector, [np.exp(-2.0), 0.0])
    assert "tau1" in res.boundary.active


@pytest.mark.parametrize("key", ["ex1", "ex2", "ex3"])
def test_solve_plus_history_monotone(catalog, key):
    h = np.array(solve_plus(catalog[key].instance).history)
    assert np.all(np.diff(h) >= -1e-12 * (1 + np.abs(h[:-1])))


@pytest.mark.parametrize("key", ["ex1", "ex2", "ex3"])
def test_solve_plus_unique_from_random_starts(catalog, key):
    inst = catalog[key].instance
    rng = np.random.default_rng(5)
    base = initial_plus_point(inst)
    found = []
    for _ in range(32):
        res = solve_plus(inst, start=base + rng.uniform(0.0, 5.0, base.size))
        assert res.status == "interior"
        found.append(res.pair.sigma_bar.vector)
    found = np.array(found)
    assert np.abs(found - found[0]).max() <= 1e-6


def test_solve_minus_ex2(catalog):
    entry = catalog["ex2"]
    crit = solve_minus(entry.instance)
    assert len(find(crit.pairs, entry.expected[1].sigma_bar)) == 1
    assert all(p.g.dual_set == "S_minus" for p in crit.pairs)


def test_solve_minus_ex3(catalog):
    entry = catalog["ex3"]
    crit = solve_minus(entry.instance)
    for e in entry.expected[1:]:
        assert len(find(crit.pairs, e.sigma_bar)) == 1


def test_solve_minus_empty_for_ex4(catalog):
    assert solve_minus(catalog["ex4"].instance).pairs == []


def test_enumerate_ex1_single_plus_point(catalog):
    crit = enumerate_critical(catalog["ex1"].instance)
    plus = crit.in_set("S_plus")
    assert len(plus) == 1 and close(plus[0].sigma_bar.vector, catalog["ex1"].expected[0].sigma_bar)


def test_enumerate_ex2(catalog):
    entry = catalog["ex2"]
    crit = enumerate_critical(entry.instance)
    assert len(crit.pairs) >= 2
    assert find(crit.in_set("S_plus"), entry.expected[0].sigma_bar)
    assert find(crit.in_set("S_minus"), entry.expected[1].sigma_bar)


def ex3_roots():
    """Roots of the separable Example 3 dual, found by a 1-D sign scan and bisection."""
    def scan(fun, lo, hi, poles):
        grid = np.linspace(lo, hi, 400_001)
        grid = grid[np.min(np.abs(grid[:, None] - np.array(poles)), axis=1) > 1e-6]
        vals = fun(grid)
        roots = []
        for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
            if np.sign(fa) != np.sign(fb) and not any(a < q < b for q in poles):
                roots.append(brentq(fun, a, b, xtol=1e-15))
        return roots
    tau = scan(lambda t: 2.0 / (t - 16.0) ** 2 - np.log(t) - 2.0, np.exp(-2.0), 60.0, [16.0])
    sig = scan(lambda s: 2.0 / (s - 4.0) ** 2 - s - 2.0, -2.0, 60.0, [4.0])
    return tau, sig


def test_ex3_root_oracle_and_full_enumeration(catalog):
    tau, sig = ex3_roots()
    assert len(tau) == 3 and len(sig) == 3
    crit = enumerate_critical(catalog["ex3"].instance)
    assert len(crit.pairs) == 9 == catalog["ex3"].extras["critical_count"]
    for t in tau:
        for s in sig:
            assert len(find(crit.pairs, [t, s], 1e-8)) == 1
    sets = sorted(p.g.dual_set for p in crit.pairs)
    assert sets.count("S_plus") == 1 and sets.count("S_minus") == 4 and sets.count("indefinite") == 4


def test_returned_pairs_are_stationary(catalog):
    opts = SolverOptions()
    for key in ("ex1", "ex2", "ex3"):
        for p in enumerate_critical(catalog[key].instance, opts).pairs:
            assert p.grad_residual <= 1e-8
            assert p.gap <= 1e-9 * (1 + abs(p.pi_value))


def test_enumeration_is_deterministic(catalog):
    a = enumerate_critical(catalog["ex3"].instance, SolverOptions(seed=3))
    b = enumerate_critical(catalog["ex3"].instance, SolverOptions(seed=3))
    assert len(a.pairs) == len(b.pairs)
    for p, q in zip(a.pairs, b.pairs):
        assert np.array_equal(p.sigma_bar.vector, q.sigma_bar.vector)
        assert np.array_equal(p.x_bar, q.x_bar)


def test_thread_count_does_not_change_results(catalog, monkeypatch):
    monkeypatch.setenv("CDT_THREADS", "1")
    a = enumerate_critical(catalog["ex2"].instance)
    monkeypatch.setenv("CDT_THREADS", "3")
    b = enumerate_critical(catalog["ex2"].instance)
    assert [p.sigma_bar.vector.tolist() for p in a.pairs] == [p.sigma_bar.vector.tolist() for p in b.pairs]


def test_enumeration_cap():
    C = [np.eye(2)] * 5
    inst = instance_from_arrays(np.eye(2), C=C, beta=[1.0] * 5, theta=[0.0] * 5, f=[1.0, 0.0])
    with pytest.raises(EnumerationCapError):
        enumerate_critical(inst)


def test_invalid_instance_rejected():
    inst = instance_from_arrays(np.eye(2), [np.diag([1.0, -1.0])], [0.0], f=[1.0, 0.0])
    with pytest.raises(InvalidInstanceError):
        solve_plus(inst)


def test_option_validation():
    with pytest.raises(ValueError):
        SolverOptions(stat_tol=0.0)
    with pytest.raises(ValueError):
        SolverOptions(starts=0)
    with pytest.raises(ValueError):
        SolverOptions(step_shrink=1.0)
    assert SolverOptions.from_dict(SolverOptions(seed=9).to_dict()) == SolverOptions(seed=9)
