"""Recursive least squares identification of a signal's annihilating polynomial.

In the shift basis the observation at step ``k`` is the decision ``x_k``
itself and the regressor stacks the ``m`` previous decisions, so that the
noiseless regression ``x_k = Phi_k^T d`` is the recurrence
``x_k + sum_i d_i x_{k-m+i} = 0``.

The delta basis writes the same polynomial in powers of
``delta = (z - 1) / Ts``: ``B(z) = Ts^m (delta^m + sum_j e_j delta^j)``. The
observation becomes the scaled ``m``-th difference and the regressors the
lower differences. Both regressions have the same residual (up to the fixed
factor ``Ts^m``), but for modes clustered near ``z = 1`` the delta regressors
are far better conditioned.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from math import comb

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RlsState:
    d_hat: np.ndarray
    P: np.ndarray
    alpha: float
    beta: float
    window: tuple = ()  # most recent first
    k: int = 0
    resets: int = 0  # covariance resets after loss of definiteness
    basis: str = "shift"  # coordinates of d_hat and P: "shift" or "delta"
    Ts: float = 1.0  # sampling interval, used by the delta basis

    @property
    def m(self) -> int:
        return self.d_hat.size

    @property
    def warm(self) -> bool:
        return len(self.window) == self.m

    @property
    def estimate(self) -> np.ndarray:
        """Current estimate as shift-basis coefficients ``d_0 .. d_{m-1}``."""
        return to_shift(self.d_hat, self.basis, self.Ts)


def rls_init(m: int, n: int, beta: float = 1e4, alpha: float = 0.95,
             basis: str = "shift", Ts: float = 1.0) -> RlsState:
    """Fresh estimator: zero parameters and covariance ``beta I``.

    In the delta basis zero parameters mean the model ``(z - 1)^m``.
    """
    if m < 1:
        raise ValueError("model order must be at least 1")
    if beta <= 0:
        raise ValueError("beta must be positive")
    if not 0 < alpha < 1:
        raise ValueError("forgetting factor must lie in the open interval (0, 1)")
    if basis not in ("shift", "delta"):
        raise ValueError(f"unknown basis {basis!r}")
    if Ts <= 0:
        raise ValueError("sampling interval must be positive")
    return RlsState(d_hat=np.zeros(m), P=beta * np.eye(m), alpha=float(alpha), beta=float(beta),
                    basis=basis, Ts=float(Ts))


def delta_to_shift(e, Ts: float) -> np.ndarray:
    """Shift coefficients of ``Ts^m (delta^m + sum_j e_j delta^j)``."""
    e = np.atleast_1d(np.asarray(e, dtype=float))
    m = e.size
    coef = np.zeros(m + 1)
    for j, ej in enumerate(np.append(e, 1.0)):
        # (z - 1)^j, low order first
        binom = np.array([comb(j, i) * (-1.0) ** (j - i) for i in range(j + 1)])
        coef[: j + 1] += ej * Ts ** (m - j) * binom
    return coef[:m]


def shift_to_delta(d, Ts: float) -> np.ndarray:
    """Inverse of :func:`delta_to_shift` (Taylor coefficients about ``z = 1``)."""
    d = np.atleast_1d(np.asarray(d, dtype=float))
    m = d.size
    p = np.append(d, 1.0)  # low order first
    e = np.empty(m)
    for j in range(m):
        # j-th Taylor coefficient of p at z = 1
        tj = sum(comb(i, j) * p[i] for i in range(j, m + 1))
        e[j] = tj / Ts ** (m - j)
    return e


def to_shift(params, basis: str, Ts: float) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    return params.copy() if basis == "shift" else delta_to_shift(params, Ts)


def from_shift(d, basis: str, Ts: float) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    return d.copy() if basis == "shift" else shift_to_delta(d, Ts)


class NotWarmedUp(ValueError):
    """Raised when fewer than ``m`` past decisions are available."""


def regressor(window, m: int) -> np.ndarray:
    """``m x n`` matrix whose row ``i`` is ``-x_{k-m+i}``.

    ``window`` lists past decisions most recent first: ``x_{k-1}, ..., x_{k-m}``.
    """
    if len(window) < m:
        raise NotWarmedUp(f"need {m} past decisions, have {len(window)}")
    return -np.array([np.atleast_1d(window[m - 1 - i]) for i in range(m)], dtype=float)


def delta_regressor(samples, m: int, Ts: float) -> tuple[np.ndarray, np.ndarray]:
    """Observation ``delta^m x_{k-m}`` and ``m x n`` regressor with rows ``-delta^j x_{k-m}``.

    ``samples`` are ``x_{k-m} .. x_k``, oldest first.
    """
    s = np.array([np.atleast_1d(v) for v in samples], dtype=float)
    if len(s) != m + 1:
        raise NotWarmedUp(f"need {m + 1} consecutive decisions, have {len(s)}")
    diffs = [s[0]]
    level = s
    for j in range(1, m + 1):
        level = np.diff(level, axis=0) / Ts
        diffs.append(level[0])
    return diffs[m], -np.array(diffs[:m])


def regression(state: RlsState, x) -> tuple[np.ndarray, np.ndarray, float]:
    """``(y, Phi, scale)`` for decision ``x_k`` in the state's basis.

    ``scale * ||y - Phi^T params||_1`` is the shift-basis residual.
    """
    if state.basis == "shift":
        return np.atleast_1d(np.asarray(x, dtype=float)), regressor(state.window, state.m), 1.0
    if not state.warm:
        raise NotWarmedUp(f"need {state.m} past decisions, have {len(state.window)}")
    samples = list(reversed(state.window)) + [x]
    y, Phi = delta_regressor(samples, state.m, state.Ts)
    return y, Phi, state.Ts ** state.m


def model_residual(state: RlsState, x, params) -> float:
    """l1 recurrence residual of ``x_k`` under ``params`` given in the state's basis."""
    y, Phi, scale = regression(state, x)
    return scale * prediction_residual(y, Phi, params)


def prediction_residual(y, Phi, d) -> float:
    """l1 norm of ``y - Phi^T d``."""
    return float(np.abs(np.atleast_1d(y) - Phi.T @ d).sum())


PD_RTOL = 1e-4
EIG_FLOOR = 1e-14


def _repair(P: np.ndarray) -> np.ndarray | None:
    """Return a positive definite covariance, or ``None`` if it is beyond repair.

    Ill-conditioned regressors leave the smallest eigenvalues of ``P`` at
    rounding level, where they may come out slightly negative; those are
    lifted to a floor relative to the largest eigenvalue.
    """
    if not np.all(np.isfinite(P)):
        return None
    eig, vec = np.linalg.eigh(P)
    if eig[-1] <= 0 or eig[0] < -PD_RTOL * eig[-1]:
        return None
    floor = EIG_FLOOR * eig[-1]
    if eig[0] >= floor:
        return P
    P = (vec * np.maximum(eig, floor)) @ vec.T
    return 0.5 * (P + P.T)


def rls_update(state: RlsState, y, Phi) -> tuple[RlsState, float]:
    """One RLS step; returns the new state and the pre-update residual."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    Phi = np.atleast_2d(np.asarray(Phi, dtype=float))
    if Phi.shape != (state.m, y.size):
        raise ValueError(f"regressor shape {Phi.shape} inconsistent with m={state.m}, n={y.size}")
    innovation = y - Phi.T @ state.d_hat
    residual = float(np.abs(innovation).sum())

    PPhi = state.P @ Phi
    S = state.alpha * np.eye(y.size) + Phi.T @ PPhi
    # L^T = S^{-1} (P Phi)^T, S symmetric
    Lt = np.linalg.solve(S, PPhi.T)
    L = Lt.T
    d_hat = state.d_hat + L @ innovation
    # Joseph form of (P - P Phi S^{-1} Phi^T P) / alpha; stays PSD in floating point
    IKH = np.eye(state.m) - L @ Phi.T
    P = (IKH @ state.P @ IKH.T + state.alpha * (L @ L.T)) / state.alpha
    P = 0.5 * (P + P.T)

    resets = state.resets
    repaired = _repair(P)
    if repaired is None:
        logger.warning("RLS covariance lost positive definiteness at step %d; resetting", state.k)
        P = state.beta * np.eye(state.m)
        resets += 1
    else:
        P = repaired
    return replace(state, d_hat=d_hat, P=P, k=state.k + 1, resets=resets), residual


def push(state: RlsState, x) -> RlsState:
    """Record decision ``x`` as the most recent window entry."""
    window = (np.array(x, dtype=float),) + state.window[: state.m - 1]
    return replace(state, window=window)


def rls_observe(state: RlsState, x, update: bool = True) -> tuple[RlsState, float | None]:
    """Feed decision ``x_k``: update from the current window if warm, then push ``x_k``.

    The returned residual is the pre-update shift-basis residual ``e_k``, or
    ``None`` when no update took place.
    """
    residual = None
    if update and state.warm:
        y, Phi, scale = regression(state, x)
        state, residual = rls_update(state, y, Phi)
        residual *= scale
    return push(state, x), residual


def pe_order(samples, m: int, h_len: int, rtol: float = 1e-9) -> bool:
    """Whether ``samples[:h_len]`` is persistently exciting of order ``m``.

    The depth-``m`` Hankel matrix has columns ``[b_j, ..., b_{j+m-1}]``,
    ``j = 0 .. h_len - m``. Vector samples contribute one such column per
    coordinate, because all coordinates share the same coefficients.
    """
    if m < 1 or h_len < m:
        raise ValueError("need 1 <= m <= h_len")
    b = np.asarray(samples, dtype=float)
    if b.shape[0] < h_len:
        raise ValueError(f"need {h_len} samples, got {b.shape[0]}")
    b = b[:h_len].reshape(h_len, -1)
    cols = h_len - m + 1
    H = np.stack([b[i:i + cols] for i in range(m)])  # (m, cols, n)
    H = H.reshape(m, -1)
    s = np.linalg.svd(H, compute_uv=False)
    if s[0] == 0:
        return False
    return int(np.sum(s > rtol * s[0])) == m
