import numpy as np
import pytest

from evtraj.predictor.autodiff import Tensor, concat, custom, parameter


def numeric_grad(fn, x, h=1e-6):
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        up, dn = x.copy(), x.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (fn(up) - fn(dn)) / (2 * h)
    return g


UNARY = {
    "exp": (lambda t: t.exp(), np.exp),
    "log": (lambda t: t.log(), np.log),
    "sqrt": (lambda t: t.sqrt(), np.sqrt),
    "tanh": (lambda t: t.tanh(), np.tanh),
    "softplus": (lambda t: t.softplus(), lambda x: np.logaddexp(0, x)),
    "abs": (lambda t: t.abs(), np.abs),
    "pow": (lambda t: t ** 3, lambda x: x ** 3),
}


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_gradients(name, rng):
    op, ref = UNARY[name]
    x0 = rng.uniform(0.5, 2.0, (3, 4))
    x = parameter(x0)
    op(x).sum().backward()
    np.testing.assert_allclose(x.grad, numeric_grad(lambda v: ref(v).sum(), x0), rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("name", ["lgamma", "digamma"])
def test_special_gradients(name, rng):
    from scipy import special

    ref = {"lgamma": special.gammaln, "digamma": special.digamma}[name]
    x0 = rng.uniform(0.5, 5.0, 6)
    x = parameter(x0)
    getattr(x, name)().sum().backward()
    np.testing.assert_allclose(x.grad, numeric_grad(lambda v: ref(v).sum(), x0), rtol=1e-6)


def test_broadcasting_and_matmul(rng):
    a0, b0, c0 = rng.normal(size=(4, 3)), rng.normal(size=(3, 2)), rng.normal(size=(2,))
    a, b, c = parameter(a0), parameter(b0), parameter(c0)
    out = ((a @ b + c) * (a @ b) / (1.0 + c * c)).mean()
    out.backward()

    def f(a_, b_, c_):
        return ((a_ @ b_ + c_) * (a_ @ b_) / (1.0 + c_ * c_)).mean()

    np.testing.assert_allclose(a.grad, numeric_grad(lambda v: f(v, b0, c0), a0), rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(b.grad, numeric_grad(lambda v: f(a0, v, c0), b0), rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(c.grad, numeric_grad(lambda v: f(a0, b0, v), c0), rtol=1e-6, atol=1e-9)


def test_indexing_reshape_concat(rng):
    x0 = rng.normal(size=(2, 6))
    x = parameter(x0)
    y = concat([x[:, :2] * 2.0, x.reshape(3, 4)[1:, :].sum(axis=0, keepdims=True).reshape(2, 2)], axis=1)
    (y * y).sum().backward()

    def f(v):
        y_ = np.concatenate([v[:, :2] * 2.0, v.reshape(3, 4)[1:, :].sum(0, keepdims=True).reshape(2, 2)], 1)
        return (y_ * y_).sum()

    np.testing.assert_allclose(x.grad, numeric_grad(f, x0), rtol=1e-6, atol=1e-9)


def test_shared_subexpression_accumulates():
    x = parameter([3.0])
    y = x * x
    (y + y * x).sum().backward()
    assert x.grad[0] == pytest.approx(2 * 3 + 3 * 9)


def test_custom_op():
    x = parameter([1.0, 2.0])
    out = custom([x], x.data ** 2, lambda g: (2 * x.data * g,))
    out.sum().backward()
    np.testing.assert_allclose(x.grad, [2.0, 4.0])


def test_constants_get_no_gradient():
    c = Tensor([1.0, 2.0])
    x = parameter([0.5, 0.5])
    (c * x).sum().backward()
    assert c.grad is None
    np.testing.assert_allclose(x.grad, [1.0, 2.0])


def test_non_scalar_backward_needs_seed():
    with pytest.raises(ValueError):
        (parameter([1.0, 2.0]) * 2).backward()
