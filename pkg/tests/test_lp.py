import itertools

import numpy as np
import pytest

from robust_sfft.decode import BooleanCharacters, TorusCharacters
from robust_sfft.lp import (
    BudgetSweep,
    LpProblem,
    l1_regression,
    l1_spectral_min,
    realify,
    solve_lp,
    surrogate_abs,
)
from robust_sfft.rng import derive_rng
from robust_sfft.spectral import BooleanSpectrum

METHODS = ["simplex", "highs"]


def enumerate_vertices(p: LpProblem):
    """Oracle: best basic feasible solution by brute force over active sets.

    Every row and finite bound is written as a.x <= b (equalities as two rows,
    always active). Returns the minimum objective, or None if no vertex exists.
    """
    n = p.num_vars
    ineq_a, ineq_b, eq_a, eq_b = [], [], [], []
    for row, sense, b in zip(p.A, p.senses, p.rhs):
        if sense == "<=":
            ineq_a.append(row), ineq_b.append(b)
        elif sense == ">=":
            ineq_a.append(-row), ineq_b.append(-b)
        else:
            eq_a.append(row), eq_b.append(b)
    for j, (lo, hi) in enumerate(p.bounds):
        e = np.zeros(n)
        e[j] = 1
        if lo is not None:
            ineq_a.append(-e), ineq_b.append(-lo)
        if hi is not None:
            ineq_a.append(e), ineq_b.append(hi)
    G, h = np.array(ineq_a), np.array(ineq_b)
    E, f = np.array(eq_a).reshape(-1, n), np.array(eq_b)
    free = n - len(eq_a)
    combos = np.array(list(itertools.combinations(range(len(G)), free)), dtype=int).reshape(-1, free)
    mats = np.concatenate([np.broadcast_to(E, (len(combos),) + E.shape), G[combos]], axis=1)
    rhs = np.concatenate([np.broadcast_to(f, (len(combos), len(f))), h[combos]], axis=1)
    ok = np.abs(np.linalg.det(mats)) > 1e-9
    if not ok.any():
        return None
    xs = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
    feasible = np.all(xs @ G.T <= h + 1e-9, axis=1)
    if len(eq_a):
        feasible &= np.all(np.abs(xs @ E.T - f) <= 1e-9, axis=1)
    if not feasible.any():
        return None
    return float(np.min(xs[feasible] @ p.c))


def random_bounded_lp(rng):
    n = int(rng.integers(2, 7))
    rows = int(rng.integers(2, 10))
    A = rng.integers(-3, 4, size=(rows, n)).astype(float)
    x0 = rng.uniform(0, 2, n)  # a strictly feasible point
    senses, rhs = [], []
    for row in A:
        if rng.random() < 0.7:
            senses.append("<="), rhs.append(row @ x0 + rng.uniform(0, 2))
        else:
            senses.append(">="), rhs.append(row @ x0 - rng.uniform(0, 2))
    # a sum row keeps the feasible set bounded
    A = np.vstack([A, np.ones(n)])
    senses.append("<=")
    rhs.append(x0.sum() + 5)
    c = rng.integers(-5, 6, n).astype(float)
    return LpProblem(c, A, senses, rhs)


# -- solve_lp ------------------------------------------------------------------------


@pytest.mark.parametrize("method", METHODS)
def test_single_variable_lower_bound(method):
    sol = solve_lp(LpProblem([1.0], [[1.0]], [">="], [1.0]), method)
    assert sol.optimal
    assert sol.x[0] == pytest.approx(1.0)


@pytest.mark.parametrize("method", METHODS)
def test_textbook_case(method):
    sol = solve_lp(LpProblem([-1.0, -1.0], [[1.0, 1.0]], ["<="], [1.0]), method)
    assert sol.objective == pytest.approx(-1.0)


@pytest.mark.parametrize("method", METHODS)
def test_infeasible_and_unbounded(method):
    infeasible = LpProblem([1.0], [[1.0], [1.0]], [">=", "<="], [2.0, 1.0])
    assert solve_lp(infeasible, method).status == "infeasible"
    unbounded = LpProblem([-1.0], [[1.0]], [">="], [1.0])
    assert solve_lp(unbounded, method).status == "unbounded"


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        LpProblem([1.0, 1.0], [[1.0, 1.0]], ["<=", "<="], [1.0])
    with pytest.raises(ValueError):
        LpProblem([1.0], [[1.0]], ["<"], [1.0])
    with pytest.raises(ValueError):
        LpProblem([np.inf], [[1.0]], ["<="], [1.0])


def test_free_and_boxed_variables():
    p = LpProblem([1.0, -1.0], [[1.0, 1.0]], ["="], [0.5], bounds=[(None, None), (-1.0, 2.0)])
    for method in METHODS:
        sol = solve_lp(p, method)
        assert sol.objective == pytest.approx(-3.5)
        assert sol.x == pytest.approx([-1.5, 2.0])


def test_five_var_eight_row_matches_enumeration():
    rng = derive_rng(1, "lp58")
    for _ in range(10):
        while True:
            p = random_bounded_lp(rng)
            if p.num_vars == 5 and p.num_rows >= 8:
                break
        best = enumerate_vertices(p)
        sol = solve_lp(p, "simplex")
        assert abs(sol.objective - best) <= 1e-7


@pytest.mark.parametrize("method", METHODS)
def test_random_small_instances_match_enumeration(method):
    rng = derive_rng(2, "lpsmall")
    for _ in range(200):
        p = random_bounded_lp(rng)
        best = enumerate_vertices(p)
        sol = solve_lp(p, method)
        assert sol.optimal
        assert abs(sol.objective - best) <= 1e-7 * (1 + abs(best))
        assert p.violation(sol.x) <= 1e-7


def test_equality_rows_match_enumeration():
    rng = derive_rng(3, "lpeq")
    for _ in range(50):
        n = 4
        x0 = rng.uniform(0.5, 1.5, n)
        A = rng.integers(-2, 3, size=(3, n)).astype(float)
        A[0, rng.integers(n)] = 1.0  # keep the equality row non-trivial
        senses = ["=", "<=", "<="]
        rhs = A @ x0 + np.array([0.0, 1.0, 1.0])
        A = np.vstack([A, np.ones(n)])
        p = LpProblem(rng.integers(-4, 5, n), A, senses + ["<="], np.append(rhs, 10.0))
        best = enumerate_vertices(p)
        sol = solve_lp(p, "simplex")
        assert abs(sol.objective - best) <= 1e-7


def test_dump_format():
    text = LpProblem([1.0, 2.0], [[1.0, -1.0]], [">="], [0.5]).dumps()
    lines = text.splitlines()
    assert lines[0] == "minimize 1.0 2.0"
    assert lines[1] == "1.0 -1.0 >= 0.5"
    assert lines[2] == "bound x0 0.0 inf"


# -- l1_spectral_min -------------------------------------------------------------------


@pytest.mark.parametrize("method", METHODS)
def test_zero_observations_zero_budget(method):
    chars = BooleanCharacters(2)
    fit = l1_spectral_min(chars.design(np.arange(4)), np.zeros(4), 0.0, method)
    assert np.allclose(fit.coefficients, 0)


@pytest.mark.parametrize("method", METHODS)
def test_noiseless_interpolation(method):
    chars = BooleanCharacters(2)
    x = np.arange(4)
    f = BooleanSpectrum(2, {0b01: 1.0})
    fit = l1_spectral_min(chars.design(x), f.evaluate(x), 0.0, method)
    assert chars.spectrum(fit.coefficients).allclose(f, atol=1e-9)


def test_one_sparse_matches_l0_search():
    chars = BooleanCharacters(3)
    x = np.arange(8)
    design = chars.design(x)
    for xi in range(8):
        y = 1.5 * design[:, xi]
        fit = l1_spectral_min(design, y, 0.0, "simplex")
        # oracle: the only 1-sparse interpolant
        candidates = [j for j in range(8) if np.allclose(design[:, j] * (y @ design[:, j] / 8), y)]
        assert candidates == [xi]
        expected = np.zeros(8)
        expected[xi] = 1.5
        assert np.allclose(fit.coefficients, expected, atol=1e-9)


def test_negative_budget_and_empty_set_rejected():
    with pytest.raises(ValueError):
        l1_spectral_min(np.ones((3, 1)), np.zeros(3), -1.0)
    with pytest.raises(ValueError):
        l1_spectral_min(np.ones((3, 0)), np.zeros(3), 1.0)


def test_infeasible_budget_reports_status():
    design = np.ones((3, 1))
    fit = l1_spectral_min(design, np.array([0.0, 0.0, 10.0]), 1.0)
    assert fit.status == "infeasible"


@pytest.mark.parametrize("method", METHODS)
def test_budget_feasibility_and_optimality_bound(method):
    rng = derive_rng(4, "budget", method)
    chars = BooleanCharacters(4)
    for trial in range(20):
        x = rng.integers(0, 16, 30)
        truth = np.zeros(16)
        truth[rng.choice(16, 2, replace=False)] = rng.choice([-1, 1], 2)
        design = chars.design(x)
        y = design @ truth + rng.uniform(-0.1, 0.1, 30)
        truth_residual = float(np.abs(design @ truth - y).sum())
        budget = truth_residual * rng.uniform(1.0, 2.0)
        fit = l1_spectral_min(design, y, budget, method)
        assert fit.residual <= budget + 1e-7 * (1 + budget)
        assert fit.objective <= np.abs(truth).sum() + 1e-7


def test_complex_design_uses_surrogate_norm():
    chars = TorusCharacters(2)
    rng = derive_rng(5, "cplx")
    t = rng.random(12)
    truth = np.zeros(5, dtype=complex)
    truth[1] = 1 + 1j
    design = chars.design(t)
    fit = l1_spectral_min(design, design @ truth, 0.0, "highs")
    assert np.allclose(fit.coefficients, truth, atol=1e-7)
    assert fit.objective == pytest.approx(surrogate_abs(truth).sum())


def test_realify_layout():
    Phi, y, is_complex = realify(np.array([[1j]]), np.array([2 + 3j]))
    assert is_complex
    assert np.array_equal(Phi, [[0.0, -1.0], [1.0, 0.0]])
    assert np.array_equal(y, [2.0, 3.0])


def test_budget_sweep_matches_independent_solves():
    rng = derive_rng(6, "sweep")
    chars = BooleanCharacters(4)
    x = rng.integers(0, 16, 40)
    design = chars.design(x)
    y = design[:, 3] - design[:, 9] + rng.uniform(-0.2, 0.2, 40)
    y[:8] = 5.0
    sweep = BudgetSweep(design, y, "highs")
    last = -np.inf
    for budget in np.linspace(np.abs(y).sum(), 10, 12):
        warm = sweep.solve(budget)
        cold = l1_spectral_min(design, y, budget, "simplex")
        assert warm.status == cold.status
        if cold.status == "optimal":
            assert warm.objective == pytest.approx(cold.objective, abs=1e-7)
            assert warm.objective >= last - 1e-6
            last = warm.objective


# -- l1_regression -------------------------------------------------------------------


@pytest.mark.parametrize("method", METHODS)
def test_constant_fit_is_median(method):
    fit = l1_regression(np.ones((3, 1)), np.array([0.0, 0.0, 10.0]), method)
    assert fit.coefficients[0] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("method", METHODS)
def test_median_random_odd_datasets(method):
    rng = derive_rng(7, "median", method)
    for _ in range(100):
        size = 2 * int(rng.integers(1, 15)) + 1
        y = rng.standard_normal(size)
        fit = l1_regression(np.ones((size, 1)), y, method)
        assert fit.coefficients[0] == np.median(y)


def test_exact_full_span():
    chars = BooleanCharacters(3)
    x = np.arange(8)
    truth = derive_rng(8).standard_normal(8)
    design = chars.design(x)
    for method in METHODS:
        fit = l1_regression(design, design @ truth, method)
        assert fit.residual == pytest.approx(0, abs=1e-9)
        assert np.allclose(fit.coefficients, truth, atol=1e-9)


def lad_objective(design, y, coeffs):
    return np.abs(np.asarray(coeffs) @ design.T - y).sum(axis=-1)


def grid_minimum(design, y, lo=-3.0, hi=3.0, levels=6, size=121):
    """Oracle: nested 2-D grid search around the running best point."""
    center = np.array([(lo + hi) / 2] * 2)
    radius = (hi - lo) / 2
    for _ in range(levels):
        axis = np.linspace(-radius, radius, size)
        grid = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2) + center
        values = lad_objective(design, y, grid)
        center = grid[np.argmin(values)]
        radius *= 4 / (size - 1)
    return center, float(lad_objective(design, y, center))


@pytest.mark.parametrize("method", METHODS)
def test_two_character_fit_with_outlier_matches_grid_search(method):
    rng = derive_rng(9, "grid")
    chars = BooleanCharacters(3, [0b001, 0b110])
    for _ in range(5):
        x = rng.choice(8, 6, replace=False)
        design = chars.design(x)
        y = design @ np.array([0.7, -1.2]) + rng.uniform(-0.05, 0.05, 6)
        y[0] += 25.0
        fit = l1_regression(design, y, method)
        point, best = grid_minimum(design, y)
        assert abs(fit.objective - best) <= 1e-4
        assert fit.objective <= best + 1e-9
        if fit.multiple_optima is False and np.isclose(lad_objective(design, y, point), best):
            assert np.max(np.abs(fit.coefficients - point)) <= 1e-4 or np.isclose(
                lad_objective(design, y, fit.coefficients), best, atol=1e-9
            )


@pytest.mark.parametrize("method", METHODS)
def test_regression_beats_random_perturbations(method):
    rng = derive_rng(10, "perturb", method)
    chars = TorusCharacters(3)
    for _ in range(3):
        t = rng.random(40)
        design = chars.design(t)[:, [1, 4, 5]]
        y = design @ np.array([1.0, 0.5j, -1.0]) + 0.05 * rng.standard_normal(40)
        y[rng.random(40) < 0.3] = 4.0
        fit = l1_regression(design, y, method)
        base = float(surrogate_abs(design @ fit.coefficients - y).sum())
        pert = fit.coefficients + 0.05 * (rng.standard_normal((10_000, 3)) + 1j * rng.standard_normal((10_000, 3)))
        residuals = surrogate_abs(pert @ design.T - y).sum(axis=1)
        assert base <= residuals.min() + 1e-9
        assert fit.objective == pytest.approx(base, rel=1e-7)


def test_regression_preconditions():
    with pytest.raises(ValueError):
        l1_regression(np.ones((3, 0)), np.zeros(3))
    with pytest.raises(ValueError):
        l1_regression(np.ones((1, 2)), np.zeros(1))


def test_rank_deficient_returns_an_optimum():
    design = np.ones((4, 2))
    y = np.array([1.0, 1.0, 1.0, 5.0])
    fit = l1_regression(design, y, "simplex")
    assert fit.status == "optimal"
    assert fit.coefficients.sum() == pytest.approx(1.0)
