import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mrbisim.errors import EvaluationError, ExpressionError
from mrbisim.exprs import ExpressionMap, parse_expr
from mrbisim.sysmodel import evaluate, interval_evaluate

from oracles import BENCHMARK_MAPS


def test_doubling_map_point():
    assert evaluate(ExpressionMap(["2*x"], 1), [3.0]) == pytest.approx([6.0])


def test_identity_map_point():
    f = ExpressionMap(["x0", "x1"], 2)
    assert np.array_equal(evaluate(f, [0.2, -0.7]), [0.2, -0.7])


def test_quadratic_map_by_hand():
    f = ExpressionMap(["0.5*x", "0.5*y + 0.5*x^2"], 2)
    assert np.allclose(evaluate(f, [2.0, 1.0]), [1.0, 2.5])


def test_interval_linear():
    lo, hi = interval_evaluate(ExpressionMap(["2*x0"], 1), [1.0], [2.0])
    assert lo[0] <= 2.0 <= 4.0 <= hi[0]
    assert hi[0] - lo[0] < 2.0 + 1e-12


def test_interval_even_power_uses_monotonicity():
    lo, hi = interval_evaluate(ExpressionMap(["x0^2"], 1), [-1.0], [2.0])
    # exact range is [0, 4]
    assert lo[0] <= 0.0 and lo[0] > -1e-12
    assert hi[0] >= 4.0 and hi[0] < 4.0 + 1e-12


def test_undecided_guard_takes_hull_of_both_branches():
    f = ExpressionMap(["0.8*x0", "piecewise(abs(x1) < 0.5, 3.2*x1^3, 0.8*x1)"], 2)
    lo, hi = interval_evaluate(f, [0.0, 0.4], [0.1, 0.6])
    cubic = 3.2 * np.array([0.4, 0.6]) ** 3
    linear = 0.8 * np.array([0.4, 0.6])
    assert lo[1] <= min(cubic.min(), linear.min())
    assert hi[1] >= max(cubic.max(), linear.max())


def test_decided_guard_uses_one_branch():
    f = ExpressionMap(["piecewise(abs(x0) < 0.5, 100*x0, x0)"], 1)
    lo, hi = interval_evaluate(f, [0.6], [0.9])
    assert hi[0] < 1.0


def test_affine_extraction():
    f = ExpressionMap(["3*x0 - (x1 - 1)/2", "x1"], 2)
    M, c = f.affine_parts()
    assert np.allclose(M, [[3, -0.5], [0, 1]]) and np.allclose(c, [0.5, 0])
    assert not ExpressionMap(["x0*x1", "x0"], 2).is_affine


@pytest.mark.parametrize("src", ["x0 +", "x0 / x1", "x0 ** 0.5", "exp(x0)", "x5", "q",
                                 "piecewise(x0*x1 < 0, 1, 2)", "x0 == 1"])
def test_rejects_outside_grammar(src):
    with pytest.raises(ExpressionError):
        ExpressionMap([src], 2)


def test_non_finite_image_raises():
    with pytest.raises(EvaluationError):
        evaluate(ExpressionMap(["sqrt(x0)"], 1), [-1.0])


def _random_boxes(rng, domain, count):
    d = np.asarray(domain, float)
    a = d[:, 0] + rng.random((count, len(d))) * (d[:, 1] - d[:, 0])
    b = d[:, 0] + rng.random((count, len(d))) * (d[:, 1] - d[:, 0])
    return np.minimum(a, b), np.maximum(a, b)


@pytest.mark.parametrize("name", sorted(BENCHMARK_MAPS))
def test_inclusion_isotonicity_on_random_boxes(name):
    exprs, domain = BENCHMARK_MAPS[name]
    f = ExpressionMap(exprs, len(domain))
    rng = np.random.default_rng(11)
    lo, hi = _random_boxes(rng, domain, 1000)
    x = lo + rng.random(lo.shape) * (hi - lo)
    ilo, ihi = f.interval_many(lo, hi)
    fx = f.evaluate_many(x)
    assert np.all(ilo <= fx) and np.all(fx <= ihi)


@pytest.mark.parametrize("name", sorted(BENCHMARK_MAPS))
def test_box_monotonicity_on_nested_boxes(name):
    exprs, domain = BENCHMARK_MAPS[name]
    f = ExpressionMap(exprs, len(domain))
    rng = np.random.default_rng(5)
    lo, hi = _random_boxes(rng, domain, 500)
    t = rng.random(lo.shape) * 0.5
    ilo, ihi = lo + t * (hi - lo), hi - rng.random(lo.shape) * 0.5 * (hi - lo)
    olo, ohi = f.interval_many(lo, hi)
    nlo, nhi = f.interval_many(ilo, ihi)
    assert np.all(olo <= nlo) and np.all(nhi <= ohi)


coef = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(a=coef, b=coef, c=coef, p=st.integers(0, 4), x_lo=st.floats(-2, 2), width=st.floats(0, 2),
       t=st.floats(0, 1))
def test_polynomial_enclosure_property(a, b, c, p, x_lo, width, t):
    e = parse_expr(f"({a!r})*x0^{p} + ({b!r})*x0*x0 - ({c!r})*abs(x0)", 1)
    lo, hi = np.array([[x_lo]]), np.array([[x_lo + width]])
    x = lo + t * (hi - lo)
    ilo, ihi = e.ieval(lo, hi)
    v = e.eval(x)
    assert ilo[0] <= v[0] <= ihi[0]
