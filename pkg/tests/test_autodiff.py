import numpy as np
import pytest

import gradcases as gc
from localgcl import autodiff as ad
from localgcl.autodiff import AdamState, Tape, adam_step
from localgcl.errors import NotScalarError, ShapeError

PRIMS = sorted(gc.primitive_cases(np.random.default_rng(0)))


@pytest.mark.parametrize("seed", gc.SEEDS)
@pytest.mark.parametrize("name", PRIMS)
def test_primitive_gradients(name, seed):
    build, values = gc.primitive_cases(np.random.default_rng(seed))[name]
    assert gc.check(build, values) <= gc.TOL


def test_every_primitive_has_a_case():
    covered = {n.removesuffix("_row_broadcast") for n in PRIMS}
    assert covered == set(ad.PRIMITIVES)


def test_untouched_leaf_gets_zero_gradient():
    t = Tape()
    a, b = t.leaf(np.ones((2, 2))), t.leaf(np.ones((3, 1)))
    grads = t.backward(ad.sum_all(a))
    np.testing.assert_array_equal(grads[b], np.zeros((3, 1)))
    np.testing.assert_array_equal(grads[a], np.ones((2, 2)))


def test_shared_subexpression_accumulates():
    # f = sum(x * x) uses x twice; df/dx = 2x
    t = Tape()
    x = t.leaf([[1.0, -2.0, 3.0]])
    g = t.backward(ad.sum_all(x * x))[x]
    np.testing.assert_array_equal(g, [[2.0, -4.0, 6.0]])


def test_operators_and_constants():
    t = Tape()
    x = t.leaf([[2.0, 3.0]])
    y = (x - 1.0) * x / 2.0
    np.testing.assert_allclose(y.value, [[1.0, 3.0]])
    g = t.backward(ad.sum_all(y))[x]
    np.testing.assert_allclose(g, [[1.5, 2.5]])  # d/dx (x^2 - x)/2 = x - 1/2
    # numpy defers to DiffArray instead of broadcasting it as an object array
    assert isinstance(np.ones((1, 2)) + x, ad.DiffArray)


def test_backward_needs_scalar():
    t = Tape()
    x = t.leaf(np.ones((2, 2)))
    with pytest.raises(NotScalarError):
        t.backward(ad.relu(x))


def test_shape_errors():
    t = Tape()
    a, b = t.leaf(np.ones((2, 3))), t.leaf(np.ones((2, 3)))
    with pytest.raises(ShapeError):
        ad.matmul(a, b)
    with pytest.raises(ShapeError):
        ad.add(a, t.leaf(np.ones((2, 1))))
    with pytest.raises(ShapeError):
        ad.gather_rows(a, [5])
    with pytest.raises(ValueError):
        ad.segment_sum(a, [1, 0], 2)


def test_row_normalize_zero_row_is_zero():
    t = Tape()
    x = t.leaf([[0.0, 0.0], [3.0, 4.0]])
    y = ad.row_l2_normalize(x)
    np.testing.assert_allclose(y.value, [[0, 0], [0.6, 0.8]])
    g = t.backward(ad.sum_all(y))[x]
    assert np.all(np.isfinite(g)) and np.all(g[0] == 0)


def test_segment_sum_values():
    t = Tape()
    x = t.leaf(np.arange(10.0).reshape(5, 2))
    y = ad.segment_sum(x, [0, 0, 2, 2, 2], 3)
    np.testing.assert_array_equal(y.value, [[2, 4], [0, 0], [18, 21]])


def test_check_finite():
    t = Tape(check_finite=True)
    x = t.leaf([[0.0]])
    with pytest.raises(FloatingPointError):
        ad.log(x)


def test_adam_first_step_moves_by_lr():
    # with bias correction the first step is lr * sign(g) (up to eps)
    p = {"w": np.array([[1.0, -1.0, 0.5]])}
    g = {"w": np.array([[0.3, -20.0, 1e-3]])}
    new, st = adam_step(p, g, AdamState(lr=0.01))
    np.testing.assert_allclose(new["w"], p["w"] - 0.01 * np.sign(g["w"]), rtol=0, atol=1e-7)
    assert st.t == 1


def test_adam_matches_hand_computation_two_steps():
    lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
    p = {"w": np.array([[1.0]])}
    st = AdamState(lr=lr, beta1=b1, beta2=b2, eps=eps)
    p, st = adam_step(p, {"w": np.array([[2.0]])}, st)
    p, st = adam_step(p, {"w": np.array([[-1.0]])}, st)
    m = b1 * (1 - b1) * 2.0 + (1 - b1) * -1.0
    v = b2 * (1 - b2) * 4.0 + (1 - b2) * 1.0
    step1 = lr * 1.0  # sign of first gradient
    step2 = lr * (m / (1 - b1 ** 2)) / (np.sqrt(v / (1 - b2 ** 2)) + eps)
    assert p["w"][0, 0] == pytest.approx(1.0 - step1 - step2, abs=1e-7)


def test_adam_minimises_quadratic():
    target = np.array([[3.0, -2.0]])
    p = {"w": np.zeros((1, 2))}
    st = AdamState(lr=0.05)
    for _ in range(2000):
        p, st = adam_step(p, {"w": 2 * (p["w"] - target)}, st)
    np.testing.assert_allclose(p["w"], target, atol=1e-3)
