from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simbo import rls
from simbo.ogd import run_ogd
from simbo.problems import Sine, make_quadratic, true_denominator


def _feed(state, seq):
    residuals = []
    for x in seq:
        state, e = rls.rls_observe(state, x)
        residuals.append(e)
    return state, residuals


def test_init_examples():
    s = rls.rls_init(2, 1, beta=1e4, alpha=0.95)
    np.testing.assert_array_equal(s.P, 1e4 * np.eye(2))
    np.testing.assert_array_equal(s.d_hat, [0.0, 0.0])
    assert s.window == () and not s.warm
    s4 = rls.rls_init(4, 3)
    assert s4.P.shape == (4, 4) and s4.d_hat.shape == (4,)


@pytest.mark.parametrize("kwargs", [dict(alpha=1.0), dict(alpha=0.0), dict(beta=0.0),
                                    dict(m=0), dict(basis="z")])
def test_init_rejects(kwargs):
    args = dict(m=2, n=1, beta=1e4, alpha=0.95)
    args.update(kwargs)
    with pytest.raises(ValueError):
        rls.rls_init(**args)


def test_regressor_pairing_on_integer_ramp():
    # window x_4, x_3 (most recent first); recurrence pairs x_{k-m+i} with d_i
    Phi = rls.regressor([np.array([4.0]), np.array([3.0])], 2)
    np.testing.assert_array_equal(Phi, [[-3.0], [-4.0]])
    assert (Phi.T @ np.array([1.0, -2.0]))[0] == 5.0


def test_regressor_small_cases():
    x = np.array([1.0, -2.0, 0.5])
    np.testing.assert_array_equal(rls.regressor([x], 1), -x[None])
    np.testing.assert_array_equal(rls.regressor([np.zeros(3)] * 2, 2), np.zeros((2, 3)))
    with pytest.raises(rls.NotWarmedUp):
        rls.regressor([x], 2)


def test_exact_model_zero_innovation():
    d = np.array([1.0, -2.0])
    s = replace(rls.rls_init(2, 1), d_hat=d.copy())
    Phi = rls.regressor([np.array([4.0]), np.array([3.0])], 2)
    s2, e = rls.rls_update(s, np.array([5.0]), Phi)
    assert e == 0.0
    np.testing.assert_array_equal(s2.d_hat, d)


def _weighted_batch(seq, m, alpha, beta):
    """Minimiser of sum_k alpha^(N-k) |x_k - Phi_k^T d|^2 + alpha^N |d|^2 / beta."""
    N = len(seq) - m
    H = alpha ** N * np.eye(m) / beta
    g = np.zeros(m)
    for j, k in enumerate(range(m, len(seq))):
        Phi = rls.regressor([seq[k - 1 - i] for i in range(m)], m)
        w = alpha ** (N - 1 - j)
        H += w * Phi @ Phi.T
        g += w * Phi @ seq[k]
    return np.linalg.solve(H, g)


@pytest.mark.parametrize("beta", [1e4, 1e8])
def test_ramp_identification_matches_batch(beta):
    seq = [np.array([float(j)]) for j in range(32)]
    state, _ = _feed(rls.rls_init(2, 1, beta=beta, alpha=0.95), seq)
    np.testing.assert_allclose(state.d_hat, _weighted_batch(seq, 2, 0.95, beta), atol=1e-9)
    if beta >= 1e8:
        # the ridge prior biases the collinear ramp regressors by about 1 / beta
        np.testing.assert_allclose(state.d_hat, [1.0, -2.0], atol=1e-6)


def test_sine_from_converged_ogd():
    p = make_quadratic(15, 1, 5, seed=0, signal=Sine())
    xs = run_ogd(p, 1 / 3, 400)[250:]
    state, _ = _feed(rls.rls_init(2, 15, alpha=0.95), xs[:102])
    np.testing.assert_allclose(state.d_hat, true_denominator(Sine(), 0.1).d, atol=1e-4)


def test_residual_is_pre_update():
    seq = [np.array([float(j)]) for j in range(3)]
    state, res = _feed(rls.rls_init(2, 1), seq)
    # third sample predicted with d_hat = 0 gives |x_2 - 0| = 2
    assert res == [None, None, 2.0]


def test_noiseless_consistency_and_residual_decay():
    d = true_denominator(Sine(1.0), 0.1).d
    ks = np.arange(300)
    seq = np.stack([np.sin(0.1 * ks), np.cos(0.1 * ks + 0.3)], axis=1)
    state, res = _feed(rls.rls_init(2, 2, alpha=0.9), seq)
    assert np.abs(state.d_hat - d).max() < 1e-8
    assert max(res[-50:]) < 1e-10


def test_delta_shift_round_trip():
    rng = np.random.default_rng(0)
    for m in range(1, 6):
        d = rng.standard_normal(m)
        np.testing.assert_allclose(rls.delta_to_shift(rls.shift_to_delta(d, 0.1), 0.1), d,
                                   atol=1e-12)
    # zero delta parameters are the polynomial (z - 1)^m
    np.testing.assert_allclose(rls.delta_to_shift(np.zeros(3), 0.1), [-1.0, 3.0, -3.0])


def test_delta_residual_equals_shift_residual():
    rng = np.random.default_rng(1)
    m, n, Ts = 3, 4, 0.1
    window = [rng.standard_normal(n) for _ in range(m)]
    x = rng.standard_normal(n)
    d = rng.standard_normal(m)
    shift = replace(rls.rls_init(m, n), window=tuple(window))
    delta = replace(rls.rls_init(m, n, basis="delta", Ts=Ts), window=tuple(window))
    r_shift = rls.model_residual(shift, x, d)
    r_delta = rls.model_residual(delta, x, rls.shift_to_delta(d, Ts))
    assert r_delta == pytest.approx(r_shift, rel=1e-9)


@pytest.mark.parametrize("basis", ["shift", "delta"])
def test_covariance_stays_positive_definite(basis):
    ks = np.arange(10_000)
    seq = np.stack([np.sin(0.1 * ks), np.sin(0.37 * ks + 1.0)], axis=1)
    state = rls.rls_init(2, 2, alpha=0.95, basis=basis, Ts=0.1)
    for x in seq:
        state, _ = rls.rls_observe(state, x)
        assert np.array_equal(state.P, state.P.T)
        assert np.linalg.eigvalsh(state.P)[0] > 0


def _batch_ls(seq, m, beta):
    rows, ys = [], []
    for k in range(m, len(seq)):
        Phi = rls.regressor([seq[k - 1 - i] for i in range(m)], m)
        rows.append(Phi.T)
        ys.append(seq[k])
    X = np.vstack(rows)
    y = np.concatenate(ys)
    # ridge term from the initial covariance beta I
    return np.linalg.solve(X.T @ X + np.eye(m) / beta, X.T @ y)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 100_000), m=st.integers(1, 4), n=st.integers(1, 3))
def test_alpha_one_matches_batch_least_squares(seed, m, n):
    rng = np.random.default_rng(seed)
    seq = list(rng.standard_normal((3 * m + m, n)))
    state = replace(rls.rls_init(m, n, beta=1e4), alpha=1.0)
    state, _ = _feed(state, seq)
    np.testing.assert_allclose(state.d_hat, _batch_ls(seq, m, 1e4), atol=1e-8)


def test_rls_update_shape_check():
    s = rls.rls_init(2, 3)
    with pytest.raises(ValueError):
        rls.rls_update(s, np.zeros(3), np.zeros((3, 3)))


def test_pe_order_examples():
    assert not rls.pe_order(np.zeros(10), 1, 5)
    assert rls.pe_order(np.arange(10.0), 2, 10)
    # SVD oracle for the ramp Hankel matrix
    H = np.array([np.arange(0, 9.0), np.arange(1, 10.0)])
    assert np.linalg.matrix_rank(H) == 2
    assert not rls.pe_order(np.full(10, 3.0), 2, 10)
    with pytest.raises(ValueError):
        rls.pe_order(np.arange(4.0), 2, 10)
