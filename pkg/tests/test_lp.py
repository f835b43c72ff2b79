import numpy as np
import pytest
from scipy.optimize import linprog as reference_linprog

from mrbisim.lp import linprog


def _reference(c, A_ub, b_ub, A_eq=None, b_eq=None, lb=None, ub=None):
    n = len(c)
    bounds = [(None if lb is None or not np.isfinite(lb[i]) else lb[i],
               None if ub is None or not np.isfinite(ub[i]) else ub[i]) for i in range(n)]
    return reference_linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                             method="highs")


def test_textbook_problem():
    # max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18, x, y >= 0  ->  36 at (2, 6)
    r = linprog([-3, -5], [[1, 0], [0, 2], [3, 2]], [4, 12, 18], lb=[0, 0])
    assert r.status == "optimal"
    assert r.fun == pytest.approx(-36) and np.allclose(r.x, [2, 6])


def test_infeasible_and_unbounded():
    assert linprog([1], [[1], [-1]], [-1, -1]).status == "infeasible"
    assert linprog([-1], [[-1]], [0]).status == "unbounded"
    assert linprog([1], lb=[2], ub=[1]).status == "infeasible"


def test_equality_constraints_and_free_variables():
    r = linprog([1, 1], A_eq=[[1, -1]], b_eq=[3], lb=[-5, -5])
    assert r.status == "optimal" and r.fun == pytest.approx(-7)


@pytest.mark.parametrize("seed", range(40))
def test_agrees_with_reference_solver_on_random_instances(seed):
    rng = np.random.default_rng(seed)
    n, m = rng.integers(1, 5), rng.integers(1, 9)
    A = rng.normal(size=(m, n))
    x0 = rng.normal(size=n)
    b = A @ x0 + rng.random(m) * (seed % 3)
    c = rng.normal(size=n)
    lb = np.where(rng.random(n) < 0.5, -np.inf, x0 - rng.random(n) * 2)
    ub = np.where(rng.random(n) < 0.5, np.inf, x0 + rng.random(n) * 2)
    mine = linprog(c, A, b, lb=lb, ub=ub)
    ref = _reference(c, A, b, lb=lb, ub=ub)
    expected = {0: "optimal", 2: "infeasible", 3: "unbounded"}[ref.status]
    assert mine.status == expected
    if expected == "optimal":
        assert mine.fun == pytest.approx(ref.fun, rel=1e-7, abs=1e-7)
        assert np.all(A @ mine.x <= b + 1e-7)
