import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdtriality import (DualPoint, OutsideDomainError, duality_gap, eval_dual, eval_primal,
                        g_matrix, grad_dual, hess_dual, hess_primal, make_pair, recover_primal,
                        total_complementary)
from cdtriality.dual import assemble_g, d_diagonal, f_matrix, lower_bounds

from helpers import fd_gradient, fd_jacobian, random_instance, rel_err


def dp(v, m=1):
    v = np.asarray(v, float)
    return DualPoint(v[:m], v[m:])


def expected_point(entry, k):
    e = entry.expected[k]
    return dp(e.sigma_bar), np.array(e.x_bar)


def test_ex1_g_formula(catalog):
    inst = catalog["ex1"].instance
    for tau, sig in ((1.0, 0.5), (2.0, -0.3), (0.5, 3.0)):
        assert np.allclose(assemble_g(inst, dp([tau, sig])), np.diag([1 + tau + sig, -1 + 2 * tau + sig]))


def test_box_corner_g(catalog):
    inst = catalog["ex2"].instance
    lb = lower_bounds(inst)
    G = assemble_g(inst, dp(lb))
    assert np.allclose(G, inst.A + lb[0] * inst.Bs[0] + lb[1] * inst.Cs[0])


def test_ex2_second_point_in_minus_set(catalog):
    s, _ = expected_point(catalog["ex2"], 1)
    gm = g_matrix(catalog["ex2"].instance, s)
    assert gm.dual_set == "S_minus" and np.all(np.diag(gm.matrix) < 0)


def ex1_printed(tau, sig):
    return -0.5 * (1 / (1 + tau + sig) + 1 / (2 * tau + sig - 1)) - tau * np.log(tau) - 0.5 * sig**2 - sig


def ex4_printed(tau, sig):
    return -tau * np.log(tau) - tau - 0.5 * sig**2 - 2 * sig


def test_specialized_dual_formulas(catalog):
    rng = np.random.default_rng(0)
    for _ in range(6):
        tau, sig = rng.uniform(1.0, 3.0), rng.uniform(0.0, 2.0)
        assert eval_dual(catalog["ex1"].instance, dp([tau, sig])) == pytest.approx(ex1_printed(tau, sig), rel=1e-12)
        tau, sig = rng.uniform(0.2, 3.0), rng.uniform(0.1, 2.0)
        assert eval_dual(catalog["ex4"].instance, dp([tau, sig])) == pytest.approx(ex4_printed(tau, sig), rel=1e-12)


def test_ex4_perturbed_gradient_formula(catalog):
    inst = catalog["ex4"].instance
    n = 64.0
    shifted = inst.replace(A=inst.A - np.diag([16.0, 4.0]) / n, f=inst.f + np.array([2.0, 2.0]) / n)
    for tau, sig in ((0.5, 0.3), (1.0, 1.0), (2.0, 0.2)):
        want = [-2 - np.log(tau) + 2 / (n * tau - 16) ** 2, -sig - 2 + 2 / (n * sig - 4) ** 2]
        assert np.allclose(grad_dual(shifted, dp([tau, sig])), want, rtol=1e-12)


def test_theorem_identities_on_catalog(catalog):
    for key in ("ex1", "ex2", "ex3"):
        entry = catalog[key]
        inst = entry.instance
        for k in range(len(entry.expected)):
            s, x = expected_point(entry, k)
            assert np.abs(recover_primal(inst, s) - x).max() <= 1e-9
            assert abs(eval_primal(inst, x) - eval_dual(inst, s)) <= 1e-9 * (1 + abs(eval_primal(inst, x)))
            assert np.abs(grad_dual(inst, s)).max() <= 1e-8
            assert duality_gap(make_pair(inst, s)) <= 1e-9 * (1 + abs(eval_primal(inst, x)))


def test_total_complementary_at_pair(catalog):
    s, x = expected_point(catalog["ex3"], 1)
    inst = catalog["ex3"].instance
    assert total_complementary(inst, x, s) == pytest.approx(eval_dual(inst, s), abs=1e-9)


def test_recover_primal_zero_force(catalog):
    assert np.array_equal(recover_primal(catalog["ex4"].instance, dp([1.0, 1.0])), np.zeros(2))


def test_plus_set_hessian_negative_definite(catalog):
    s, _ = expected_point(catalog["ex1"], 0)
    assert np.linalg.eigvalsh(hess_dual(catalog["ex1"].instance, s)).max() < 0


def test_ex3_local_min_dual_hessian(catalog):
    s, _ = expected_point(catalog["ex3"], 2)
    assert np.linalg.eigvalsh(hess_dual(catalog["ex3"].instance, s)).min() > 0


def test_hessian_identity_on_catalog(catalog):
    for key in ("ex1", "ex2", "ex3"):
        entry = catalog[key]
        for k in range(len(entry.expected)):
            s, _ = expected_point(entry, k)
            pair = make_pair(entry.instance, s)
            H = hess_primal(entry.instance, pair.x_bar)
            rhs = pair.g.matrix + pair.F @ np.diag(pair.D) @ pair.F.T
            assert np.abs(H - rhs).max() <= 1e-10 * max(1.0, np.abs(H).max())


def test_outside_domain(catalog):
    inst = catalog["ex1"].instance
    with pytest.raises(OutsideDomainError):
        eval_dual(inst, dp([0.01, 0.0]))
    with pytest.raises(OutsideDomainError):
        total_complementary(inst, [0.0, 0.0], dp([1.0, -5.0]))


def test_singular_g_off_column_space(catalog):
    # Example 1 with sigma chosen so that G = diag(>0, 0) while f has a second component.
    inst = catalog["ex1"].instance
    tau = 1.5
    with pytest.raises(OutsideDomainError):
        eval_dual(inst, dp([tau, 1.0 - 2 * tau]))


def test_gap_nonzero_away_from_stationarity(catalog):
    pair = make_pair(catalog["ex1"].instance, dp([2.0, 1.0]))
    assert pair.gap > 1e-3 and pair.grad_residual > 1e-3


def interior_dual_point(inst, rng):
    lb = lower_bounds(inst)
    for _ in range(200):
        v = lb + rng.uniform(0.05, 4.0, lb.size)
        G = assemble_g(inst, dp(v, inst.m))
        if np.abs(np.linalg.eigvalsh(G)).min() > 0.2:
            return dp(v, inst.m)
    return None


@pytest.mark.parametrize("seed", range(12))
def test_dual_derivatives_match_finite_differences(seed):
    rng = np.random.default_rng(100 + seed)
    inst = random_instance(rng, int(rng.integers(1, 5)), int(rng.integers(1, 3)), int(rng.integers(0, 3)))
    s = interior_dual_point(inst, rng)
    if s is None:
        pytest.skip("no well-conditioned dual point drawn")
    fun = lambda v: eval_dual(inst, dp(v, inst.m))
    grad = lambda v: grad_dual(inst, dp(v, inst.m))
    assert rel_err(grad(s.vector), fd_gradient(fun, s.vector)) <= 1e-5
    assert rel_err(hess_dual(inst, s), fd_jacobian(grad, s.vector)) <= 1e-4


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_fenchel_bound(seed):
    # Xi(x, s) <= Pi(x) for every x and every s in the dual box.
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 2, 1, 1)
    x = rng.uniform(-2, 2, 2)
    s = dp(lower_bounds(inst) + rng.uniform(0, 3, 2))
    assert total_complementary(inst, x, s) <= eval_primal(inst, x) + 1e-10 * (1 + abs(eval_primal(inst, x)))


def test_f_and_d_shapes(catalog):
    inst = catalog["ex2"].instance
    F = f_matrix(inst, [1.0, 2.0])
    assert F.shape == (2, 2) and np.allclose(F[:, 0], [1.0, 2.0]) and np.allclose(F[:, 1], [1.0, 4.0])
    assert np.allclose(d_diagonal(inst, dp([3.0, 0.0])), [3.0, 1.0])
