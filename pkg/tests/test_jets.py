import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levifold import jets
from levifold.jets import Jet

from oracles import fd_gradient, fd_hessian


def _jet(func, x):
    return jets.evaluate(func, np.asarray(x, dtype=float))


def test_docstring_example():
    x, y = Jet.variables([1.0, 2.0])
    f = x * x * y
    assert float(f.val) == 2.0
    assert f.grad.tolist() == [4.0, 1.0]
    assert f.hess.tolist() == [[4.0, 2.0], [2.0, 0.0]]


@pytest.mark.parametrize("name", ["exp", "log", "sin", "cos", "sqrt"])
def test_unary_functions_match_closed_form(name):
    x0 = 0.7
    f = getattr(jets, name)
    j = _jet(lambda x: f(x), [x0])
    d1 = {"exp": np.exp(x0), "log": 1 / x0, "sin": np.cos(x0), "cos": -np.sin(x0),
          "sqrt": 0.5 / np.sqrt(x0)}[name]
    d2 = {"exp": np.exp(x0), "log": -1 / x0**2, "sin": -np.sin(x0), "cos": -np.cos(x0),
          "sqrt": -0.25 * x0 ** -1.5}[name]
    assert j.val == pytest.approx(getattr(np, name)(x0), rel=1e-15)
    assert j.grad[0] == pytest.approx(d1, rel=1e-14)
    assert j.hess[0, 0] == pytest.approx(d2, rel=1e-14)


def test_functions_dispatch_to_numpy_on_floats():
    assert jets.exp(0.0) == 1.0
    np.testing.assert_allclose(jets.sin(np.array([0.0, np.pi / 2])), [0.0, 1.0], atol=1e-16)


def test_constant_function_promoted():
    j = jets.evaluate(lambda x, y: 3.0, np.array([1.0, 2.0]))
    assert float(j.val) == 3.0
    assert np.all(j.grad == 0) and np.all(j.hess == 0)


def test_order_one_has_no_hessian():
    j = jets.evaluate(lambda x, y: x * y, np.array([1.0, 2.0]), order=1)
    assert j.hess is None and j.order == 1
    np.testing.assert_array_equal(j.grad, [2.0, 1.0])


def test_batched_evaluation(rng):
    X = rng.uniform(0.5, 1.5, size=(7, 3, 2))
    j = jets.evaluate(lambda x, y: x / y + x**3, X)
    assert j.val.shape == (7, 3) and j.grad.shape == (7, 3, 2) and j.hess.shape == (7, 3, 2, 2)
    np.testing.assert_allclose(j.val, X[..., 0] / X[..., 1] + X[..., 0] ** 3)


def test_division_and_reflected_operators():
    j = _jet(lambda x, y: (2.0 - x) / (1.0 + y) - 3.0 / x, [0.5, 0.25])
    x, y = 0.5, 0.25
    g = [-1 / (1 + y) + 3 / x**2, -(2 - x) / (1 + y) ** 2]
    np.testing.assert_allclose(j.grad, g, rtol=1e-14)


def _expr(a, b, c):
    # a fixed but nontrivial composition exercising every operation
    def f(x, y, z):
        return (a * jets.sin(x * y) + jets.exp(b * z) * jets.cos(y)
                - jets.log(1.0 + x * x) / (2.0 + jets.sqrt(1.0 + z * z)) + c * x * y * z)
    return f


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 2), st.floats(-1, 1), st.floats(-1, 1),
       st.lists(st.floats(-1.5, 1.5), min_size=3, max_size=3))
def test_jet_matches_finite_differences(a, b, c, x):
    f = _expr(a, b, c)
    x = np.array(x)
    j = _jet(f, x)

    def F(p):
        return f(p[..., 0], p[..., 1], p[..., 2])

    np.testing.assert_allclose(j.grad, fd_gradient(F, x), rtol=1e-6, atol=1e-7)
    np.testing.assert_allclose(j.hess, fd_hessian(F, x), rtol=1e-5, atol=1e-5)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=2, max_size=2))
def test_hessian_is_symmetric_and_product_rule_holds(x):
    x = np.array(x)
    f = _jet(lambda u, v: jets.sin(u) * jets.exp(v), x)
    g1 = _jet(lambda u, v: jets.sin(u), x)
    g2 = _jet(lambda u, v: jets.exp(v), x)
    np.testing.assert_allclose(f.hess, f.hess.T, atol=1e-15)
    np.testing.assert_allclose(f.grad, g1.val * g2.grad + g2.val * g1.grad, rtol=1e-13, atol=1e-15)
