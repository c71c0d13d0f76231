import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpgnmt.autodiff import Tensor
from cpgnmt.optim import AmsGrad, amsgrad_step


def test_two_step_hand_trace():
    p, m, v, vh = np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1)
    p1, m, v, vh = amsgrad_step(p, np.ones(1), m, v, vh)
    assert m[0] == pytest.approx(0.1, abs=1e-15) and v[0] == pytest.approx(0.001, abs=1e-15)
    assert abs(-p1[0] - 0.001 * 0.1 / (np.sqrt(0.001) + 1e-8)) < 1e-12
    assert abs(-p1[0] - 3.1623e-3) < 1e-7
    p2, m, v, vh = amsgrad_step(p1, np.ones(1), m, v, vh)
    assert m[0] == pytest.approx(0.19) and v[0] == pytest.approx(0.001999)
    assert abs((p1 - p2)[0] - 0.001 * 0.19 / (np.sqrt(0.001999) + 1e-8)) < 1e-12
    assert abs((p1 - p2)[0] - 4.2496e-3) < 1e-7


def test_stateful_optimizer_matches_functional_form():
    t = Tensor(np.zeros(3), requires_grad=True)
    opt = AmsGrad({"t": t})
    p, m, v, vh = (np.zeros(3) for _ in range(4))
    rng = np.random.default_rng(0)
    for _ in range(20):
        g = rng.standard_normal(3)
        opt.step({t: g})
        p, m, v, vh = amsgrad_step(p, g, m, v, vh)
    np.testing.assert_allclose(t.data, p, rtol=0, atol=1e-15)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_vhat_monotone(seed):
    rng = np.random.default_rng(seed)
    t = Tensor(np.zeros(5), requires_grad=True)
    opt = AmsGrad({"t": t})
    prev = opt.vhat["t"].copy()
    for _ in range(1000):
        opt.step({t: rng.standard_normal(5) * rng.exponential(3.0)})
        cur = opt.vhat["t"]
        assert np.all(cur >= prev)
        prev = cur.copy()


def test_zero_gradient_leaves_parameters():
    t = Tensor(np.array([0.5, -2.0]), requires_grad=True)
    opt = AmsGrad({"t": t})
    for _ in range(100):
        opt.step({t: np.zeros(2)})
    np.testing.assert_array_equal(t.data, [0.5, -2.0])


def test_non_finite_gradient_skips_step():
    a = Tensor(np.ones(2), requires_grad=True)
    b = Tensor(np.ones(2), requires_grad=True)
    opt = AmsGrad({"a": a, "b": b})
    assert opt.step({a: np.ones(2), b: np.array([np.nan, 0.0])}) is False
    np.testing.assert_array_equal(a.data, 1.0)
    assert opt.skipped == 1 and opt.step_count == 0
    assert opt.step({a: np.ones(2), b: np.ones(2)}) is True
    assert opt.step_count == 1


def test_missing_gradient_treated_as_zero():
    a = Tensor(np.ones(2), requires_grad=True)
    opt = AmsGrad({"a": a})
    opt.step({})
    np.testing.assert_array_equal(a.data, 1.0)
    assert opt.visible_size() == 2
