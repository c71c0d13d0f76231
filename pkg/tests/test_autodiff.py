import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from cpgnmt import autodiff as ad
from cpgnmt.autodiff import Tape, Tensor, backward, gradient_check
from cpgnmt.errors import ContractError, DimensionError, DomainError, NumericError

from oracles import numeric_grad

floats = st.floats(-2.0, 2.0, allow_nan=False, width=64)


def small(shape):
    return hnp.arrays(np.float64, shape, elements=floats)


def grad_of(f, *xs):
    ts = [Tensor(x.copy(), requires_grad=True) for x in xs]
    with Tape() as tape:
        out = f(*ts)
    g = backward(out, tape)
    return [g.get(t, np.zeros_like(t.data)) for t in ts]


def test_square_gradient_check():
    x = Tensor(np.array([3.0]), requires_grad=True)
    assert gradient_check(lambda t: ad.sum(t * t), x, eps=1e-5) < 1e-8


def test_constant_function_error_is_zero():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    assert gradient_check(lambda t: ad.sum(ad.softmax(t)), x) < 1e-8


def test_softmax_sum_gradient_vanishes():
    (g,) = grad_of(lambda t: ad.sum(ad.softmax(t.reshape((1, 3)))), np.array([0.3, -1.0, 2.0]))
    np.testing.assert_allclose(g, 0.0, atol=1e-12)


def test_linear_norm_matches_finite_differences():
    w = np.array([[1.0, 0.5], [-0.3, 2.0], [0.7, 0.1]])
    l = np.array([0.4, -1.2])

    def f(wt):
        y = ad.matmul(wt, Tensor(l.reshape(2, 1), dtype=np.float64))
        return ad.sum(y * y)

    (g,) = grad_of(f, w)
    num = numeric_grad(lambda a: float(((a @ l) ** 2).sum()), w.copy())
    np.testing.assert_allclose(g, num, rtol=1e-6, atol=1e-8)


def test_tape_records_only_inside_context():
    a = Tensor(np.ones(2), requires_grad=True)
    b = a * 2.0
    assert ad.active_tape() is None
    with Tape() as tape:
        c = a * 2.0
        assert ad.active_tape() is tape
    assert len(tape) == 1
    assert b.data.tolist() == c.data.tolist()


def test_default_dtype_is_float32():
    assert Tensor([1, 2]).dtype == np.float32


def test_matmul_shape_mismatch():
    with pytest.raises(DimensionError):
        ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_log_of_nonpositive():
    with pytest.raises(DomainError):
        ad.log(Tensor(np.array([1.0, 0.0])))


def test_backward_needs_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        y = x * 2.0
    with pytest.raises(ContractError):
        backward(y, tape)


def test_gradient_check_requires_float64():
    with pytest.raises(ContractError):
        gradient_check(lambda t: ad.sum(t), Tensor(np.ones(2, dtype=np.float32), requires_grad=True))


def test_take_out_of_range():
    with pytest.raises(IndexError):
        ad.take(Tensor(np.ones((3, 2))), np.array([3]))


@settings(max_examples=30, deadline=None)
@given(small((2, 3)), small((2, 3)))
def test_binary_ops_gradients(a, b):
    b = np.where(np.abs(b) < 0.2, 0.5, b)
    for f in (
        lambda x, y: ad.sum(x + y),
        lambda x, y: ad.sum(x - y),
        lambda x, y: ad.sum(x * y),
        lambda x, y: ad.sum(x / y),
    ):
        xs = [Tensor(a.copy(), requires_grad=True), Tensor(b.copy(), requires_grad=True)]
        assert gradient_check(lambda ts: f(*ts), xs) < 1e-4


@settings(max_examples=30, deadline=None)
@given(small((3, 4)))
def test_unary_ops_gradients(a):
    for f in (
        lambda t: ad.sum(ad.tanh(t) * ad.tanh(t)),
        lambda t: ad.sum(ad.sigmoid(t) * t),
        lambda t: ad.sum(ad.exp(t) * 0.1),
        lambda t: ad.sum(ad.log(ad.exp(t) + 1.0)),
        lambda t: ad.sum(ad.softmax(t, axis=-1) * ad.softmax(t, axis=-1)),
        lambda t: ad.sum(ad.log_softmax(t, axis=-1) * Tensor(np.arange(12.0).reshape(3, 4), dtype=np.float64)),
        lambda t: ad.mean(ad.transpose(t) * ad.transpose(t)),
        lambda t: ad.sum(ad.sum(t, axis=0) * ad.sum(t, axis=0)),
        lambda t: ad.sum(ad.getitem(t, (slice(None), slice(1, 3))) * t[:, :2]),
    ):
        x = Tensor(a.copy(), requires_grad=True)
        assert gradient_check(f, x) < 1e-4


@settings(max_examples=20, deadline=None)
@given(small((2, 3)), small((3, 4)), small((4,)))
def test_structural_ops_gradients(a, b, bias):
    def f(ts):
        x, w, c = ts
        y = ad.add_bias(ad.matmul(x, w), c)  # (2, 4)
        z = ad.concat([y, ad.tanh(y)], axis=1)  # (2, 8)
        s = ad.stack([z, z * 0.5], axis=0)  # (2, 2, 8)
        row = ad.reshape(s[:, :1, :], (2, 1, 8))
        return ad.sum(ad.broadcast_to(row, (2, 2, 8)) * s)

    xs = [Tensor(a.copy(), requires_grad=True), Tensor(b.copy(), requires_grad=True), Tensor(bias.copy(), requires_grad=True)]
    assert gradient_check(f, xs) < 1e-4


@settings(max_examples=20, deadline=None)
@given(small((5, 3)))
def test_take_gradient_accumulates_repeats(table):
    ids = np.array([[0, 2, 2], [4, 0, 1]])
    x = Tensor(table.copy(), requires_grad=True)
    assert gradient_check(lambda t: ad.sum(ad.take(t, ids) * ad.take(t, ids)), x) < 1e-4


@settings(max_examples=20, deadline=None)
@given(small((2, 3, 4)), small((2, 4, 2)))
def test_batched_matmul_gradient(a, b):
    xs = [Tensor(a.copy(), requires_grad=True), Tensor(b.copy(), requires_grad=True)]
    assert gradient_check(lambda ts: ad.sum(ad.tanh(ad.matmul(ts[0], ts[1]))), xs) < 1e-4


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 6)), elements=st.floats(-30, 30, width=64)))
def test_softmax_sums_to_one_and_is_equivariant(x):
    p = ad.softmax(Tensor(x), axis=-1).data
    np.testing.assert_allclose(p.sum(axis=-1), 1.0, atol=1e-6)
    perm = np.random.default_rng(0).permutation(x.shape[1])
    np.testing.assert_allclose(ad.softmax(Tensor(x[:, perm]), axis=-1).data, p[:, perm], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(small((3, 3)), small((3, 3)), small((3, 3)))
def test_matmul_associative_with_identity(a, b, c):
    A, B, C = (Tensor(m) for m in (a, b, c))
    left = ad.matmul(ad.matmul(A, B), C).data
    right = ad.matmul(A, ad.matmul(B, C)).data
    np.testing.assert_allclose(left, right, atol=1e-10)
    np.testing.assert_array_equal(ad.matmul(A, Tensor(np.eye(3))).data, a)


def test_debug_checks_flag_nan():
    ad.set_debug_checks(True)
    try:
        with np.errstate(invalid="ignore"), pytest.raises(NumericError):
            ad.div(Tensor(np.array([0.0])), Tensor(np.array([0.0])))
    finally:
        ad.set_debug_checks(False)
