import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simbo.problems import (Constant, InternalModel, Ramp, Sine, SineRamp, SineSquared, Switch,
                            gradient, make_quadratic, make_tv_hessian, minimizer, random_b_bar,
                            signal_value, true_denominator)

TS = 0.1


def _signals(n=3, seed=0):
    b = random_b_bar(n, seed)
    return [Sine(1.0), Ramp(b), SineRamp(b, 1.0), SineSquared(10.0), Constant(b)]


def test_scalar_hessian():
    p = make_quadratic(1, 2.0, 2.0, seed=5)
    np.testing.assert_allclose(p.A, [[2.0]])


def test_hessian_spectrum_bounds():
    p = make_quadratic(15, 1.0, 5.0, seed=0)
    np.testing.assert_allclose(p.A, p.A.T, atol=0)
    eig = np.linalg.eigvalsh(p.A)
    assert abs(eig[0] - 1.0) < 1e-10
    assert abs(eig[-1] - 5.0) < 1e-10


def test_hessian_spectrum_eig_oracle():
    # rebuild the intended spectrum from the same generator draws, compare with a general eigensolver
    n, seed = 3, 7
    rng = np.random.default_rng(seed)
    rng.standard_normal((n, n))
    expected = np.sort(np.concatenate(([1.0, 5.0], rng.uniform(1.0, 5.0, size=n - 2))))
    p = make_quadratic(n, 1.0, 5.0, seed=seed)
    got = np.sort(np.linalg.eigvals(p.A).real)
    np.testing.assert_allclose(got, expected, atol=1e-10)


def test_seeded_generation_is_reproducible():
    a, b = make_quadratic(15, 1, 5, seed=3), make_quadratic(15, 1, 5, seed=3)
    assert np.array_equal(a.A, b.A)
    assert np.array_equal(random_b_bar(15, 3), random_b_bar(15, 3))
    assert not np.array_equal(a.A, make_quadratic(15, 1, 5, seed=4).A)


def test_signal_values():
    np.testing.assert_array_equal(signal_value(Sine(1.0), 0, TS, 2), [0.0, 0.0])
    b = np.array([0.7, 1.3])
    np.testing.assert_allclose(signal_value(Ramp(b), 10, TS, 2), b)
    assert signal_value(SineSquared(10.0), 1, TS, 1)[0] == pytest.approx(0.70807342, abs=1e-8)
    np.testing.assert_allclose(signal_value(SineRamp(b, 1.0), 10, TS, 2), np.sin(1.0) + b)
    np.testing.assert_array_equal(signal_value(Constant(b), 99, TS, 2), b)


def test_switch_signal_segments():
    b = np.ones(2)
    sw = Switch(Ramp(b), Sine(1.0), k_switch=5)
    np.testing.assert_allclose(signal_value(sw, 4, TS, 2), 0.4 * b)
    np.testing.assert_allclose(signal_value(sw, 5, TS, 2), np.sin(0.5) * b)


def test_true_denominator_examples():
    np.testing.assert_allclose(true_denominator(Ramp(np.ones(1)), TS).d, [1.0, -2.0])
    np.testing.assert_allclose(true_denominator(Sine(1.0), TS).d, [1.0, -2 * np.cos(0.1)])
    c = 1 + 2 * np.cos(2.0)
    ss = true_denominator(SineSquared(10.0), TS)
    np.testing.assert_allclose(ss.d, [-1.0, c, -c], atol=1e-14)
    assert true_denominator(SineRamp(np.ones(1)), TS).m == 4
    np.testing.assert_allclose(true_denominator(Constant(np.ones(1)), TS).d, [-1.0])


def test_sine_squared_product_oracle():
    # polynomial multiplication by hand: (z - 1)(z^2 - 2cos(2) z + 1)
    c = np.cos(2.0)
    expected = np.array([1.0, -(1 + 2 * c), 1 + 2 * c, -1.0])
    np.testing.assert_allclose(true_denominator(SineSquared(10.0), TS).poly(), expected, atol=1e-14)


def test_switch_has_no_model():
    with pytest.raises(ValueError):
        true_denominator(Switch(Sine(), Sine(), 3), TS)


def test_integer_ramp_recurrence_exact():
    seq = np.arange(50, dtype=float)
    assert np.all(InternalModel([1.0, -2.0]).recurrence_residual(seq) == 0)


@pytest.mark.parametrize("idx", range(5))
def test_recurrence_residual(idx):
    kind = _signals()[idx]
    model = true_denominator(kind, TS)
    seq = np.array([signal_value(kind, k, TS, 3) for k in range(200)])
    assert np.abs(model.recurrence_residual(seq)).max() < 1e-10


@pytest.mark.parametrize("idx", [0, 2, 3, 4])
def test_signals_persistently_exciting(idx):
    from simbo.rls import pe_order
    kind = _signals()[idx]
    m = true_denominator(kind, TS).m
    seq = np.array([signal_value(kind, k, TS, 3) for k in range(40)])
    for start in (0, 7, 20):
        assert pe_order(seq[start:], m, 3 * m)


def test_minimizer_examples():
    p = make_quadratic(2, 2.0, 2.0, seed=0, signal=Constant(np.array([2.0, 2.0])))
    np.testing.assert_allclose(minimizer(p, 0), [-1.0, -1.0])
    p0 = make_quadratic(4, 1, 5, seed=1, signal=Constant(np.zeros(4)))
    np.testing.assert_array_equal(minimizer(p0, 3), np.zeros(4))
    p = make_quadratic(15, 1, 5, seed=0, signal=SineRamp(random_b_bar(15, 0)))
    x = minimizer(p, 37)
    assert np.linalg.norm(p.A @ x + p.b(37)) < 1e-12


def test_gradient_identity_hessian():
    p = make_quadratic(3, 1.0, 1.0, seed=0, signal=Constant(np.zeros(3)))
    x = np.array([0.3, -1.0, 2.0])
    np.testing.assert_allclose(gradient(p, x, 0), x, atol=1e-14)


def test_gradient_finite_difference():
    p = make_quadratic(15, 1, 5, seed=2, signal=Sine())
    rng = np.random.default_rng(0)
    x = rng.standard_normal(15)
    k, eps = 11, 1e-5
    fd = np.array([(p.cost(x + eps * e, k) - p.cost(x - eps * e, k)) / (2 * eps)
                   for e in np.eye(15)])
    g = gradient(p, x, k)
    assert np.linalg.norm(fd - g) <= 1e-6 * np.linalg.norm(g)


def test_gradient_dimension_mismatch():
    p = make_quadratic(3, 1, 5, seed=0)
    with pytest.raises(ValueError):
        gradient(p, np.zeros(2), 0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(0, 500))
def test_gradient_vanishes_at_minimizer(seed, k):
    for p in (make_quadratic(6, 1, 5, seed, signal=SineRamp(random_b_bar(6, seed))),
              make_tv_hessian(6, seed)):
        assert np.abs(gradient(p, minimizer(p, k), k)).max() < 1e-10


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(0, 1000))
def test_tv_hessian_spectrum_inside_interval(seed, k):
    p = make_tv_hessian(8, seed)
    eig = np.linalg.eigvalsh(p.hessian(k))
    assert eig[0] >= 1.0 - 1e-12 and eig[-1] <= 5.0 + 1e-12
