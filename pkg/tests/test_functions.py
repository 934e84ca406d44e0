import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degenlab import functions as fns
from degenlab.errors import InvalidArgumentError
from degenlab.gauss import ProjectedGaussian, quadrature


def _fd_gradient(f, x, h=1e-6):
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (f(x + e) - f(x - e)) / (2 * h)
    return out


def _check_derivatives(f, x):
    g = f.gradient(x[None])[0]
    np.testing.assert_allclose(g, _fd_gradient(lambda z: f.value(z[None])[0], x), rtol=1e-6, atol=1e-6)
    h = f.hessian(x[None])[0]
    np.testing.assert_allclose(h, h.T, atol=1e-12)
    fd = np.stack([_fd_gradient(lambda z, i=i: f.gradient(z[None])[0, i], x) for i in range(x.size)])
    np.testing.assert_allclose(h, fd, rtol=1e-5, atol=1e-5)
    if f.third is not None:
        t = f.third(x[None])[0]
        fd3 = np.stack([_fd_gradient(lambda z, i=i, j=j: f.hessian(z[None])[0, i, j], x)
                        for i in range(x.size) for j in range(x.size)]).reshape(t.shape)
        np.testing.assert_allclose(t, fd3, rtol=1e-5, atol=1e-5)


seeds = st.integers(0, 10_000)
points = st.lists(st.floats(-1.5, 1.5, allow_nan=False), min_size=3, max_size=3).map(np.array)


@settings(max_examples=25, deadline=None)
@given(seeds, points)
def test_polynomial_derivatives(seed, x):
    _check_derivatives(fns.random_polynomial(3, 4, np.random.default_rng(seed)), x)


@settings(max_examples=25, deadline=None)
@given(seeds, points)
def test_trig_derivatives(seed, x):
    _check_derivatives(fns.random_trig(3, np.random.default_rng(seed)), x)


@settings(max_examples=20, deadline=None)
@given(seeds, points)
def test_product_and_sum_rules(seed, x):
    rng = np.random.default_rng(seed)
    f = fns.random_trig(3, rng)
    g = fns.random_polynomial(3, 2, rng)
    _check_derivatives(f * g + 2.0 * g - f, x)


def test_exp_quadratic_derivatives():
    f = fns.exp_quadratic(np.diag([0.3, 0.1]))
    _check_derivatives(f, np.array([0.4, -0.7]))
    assert f.value(np.zeros((1, 2)))[0] == 1.0


def test_lift_embeds_axes():
    f = fns.polynomial(2, {(1, 1): 2.0})
    lf = fns.lift(f, 4, [1, 3])
    z = np.array([[5.0, 2.0, 7.0, 3.0]])
    assert lf.value(z)[0] == 12.0
    np.testing.assert_array_equal(lf.gradient(z)[0], [0.0, 6.0, 0.0, 4.0])
    _check_derivatives(lf, np.array([0.1, 0.2, 0.3, 0.4]))


def test_hermite_orthonormal():
    var = np.array([0.3, 0.05])
    rule = quadrature(ProjectedGaussian(var), 8)
    idx = [(0, 0), (1, 0), (2, 1), (3, 2), (0, 4)]
    vals = np.stack([fns.hermite(a, var).value(rule.nodes) for a in idx])
    gram = (vals * rule.weights) @ vals.T
    np.testing.assert_allclose(gram, np.eye(len(idx)), atol=1e-12)


def test_polynomial_degree_and_validation():
    p = fns.polynomial(2, {(3, 1): 1.0, (0, 0): 2.0})
    assert p.value.degree == 4
    with pytest.raises(InvalidArgumentError):
        fns.polynomial(2, {(1,): 1.0})
    with pytest.raises(InvalidArgumentError):
        fns.polynomial(2, {(1, 0): 1.0}) + fns.polynomial(3, {(1, 0, 0): 1.0})


def test_from_config_families():
    assert fns.from_config({"family": "constant", "c": 2.0}, 2).value(np.zeros((1, 2)))[0] == 2.0
    assert fns.from_config({"family": "linear", "a": [1.0, 2.0]}, 2).value(np.ones((1, 2)))[0] == 3.0
    p = fns.from_config({"family": "polynomial", "terms": [[[2, 0], 1.0]]}, 2)
    assert p.value(np.array([[3.0, 1.0]]))[0] == 9.0
    with pytest.raises(InvalidArgumentError, match="function.family"):
        fns.from_config({"family": "spline"}, 2)
