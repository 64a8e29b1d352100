"""Time-varying quadratic problems and their driving signals.

Costs have the form ``f_k(x) = 0.5 x^T A_k x + x^T b_k``. Every driving signal
except a switch satisfies a finite linear recurrence whose monic
characteristic polynomial is returned by :func:`true_denominator`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np


# ---------------------------------------------------------------------------
# Driving signals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Sine:
    omega0: float = 1.0


@dataclass(frozen=True, eq=False)
class Ramp:
    b_bar: np.ndarray


@dataclass(frozen=True, eq=False)
class SineRamp:
    b_bar: np.ndarray
    omega0: float = 1.0


@dataclass(frozen=True)
class SineSquared:
    omega1: float = 10.0


@dataclass(frozen=True, eq=False)
class Constant:
    b_bar: np.ndarray


@dataclass(frozen=True, eq=False)
class Switch:
    first: "SignalKind"
    second: "SignalKind"
    k_switch: int


SignalKind = Union[Sine, Ramp, SineRamp, SineSquared, Constant, Switch]


def signal_value(kind: SignalKind, k: int, Ts: float, n: int) -> np.ndarray:
    """Value of the linear term ``b_k`` at step ``k``."""
    t = k * Ts
    if isinstance(kind, Sine):
        return np.full(n, np.sin(kind.omega0 * t))
    if isinstance(kind, Ramp):
        return t * np.asarray(kind.b_bar, dtype=float)
    if isinstance(kind, SineRamp):
        return np.sin(kind.omega0 * t) + t * np.asarray(kind.b_bar, dtype=float)
    if isinstance(kind, SineSquared):
        return np.full(n, np.sin(kind.omega1 * t) ** 2)
    if isinstance(kind, Constant):
        return np.array(kind.b_bar, dtype=float)
    if isinstance(kind, Switch):
        active = kind.first if k < kind.k_switch else kind.second
        return signal_value(active, k, Ts, n)
    raise TypeError(f"unknown signal kind {kind!r}")


# ---------------------------------------------------------------------------
# Internal models
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InternalModel:
    """Monic polynomial ``z^m + sum_i d[i] z^i`` stored by its low-order coefficients."""

    d: np.ndarray

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.d, dtype=float))
        if d.ndim != 1 or d.size == 0:
            raise ValueError("internal model needs at least one coefficient")
        object.__setattr__(self, "d", d)

    @property
    def m(self) -> int:
        return self.d.size

    def poly(self) -> np.ndarray:
        """Coefficients highest power first, as used by ``np.roots``."""
        return np.concatenate(([1.0], self.d[::-1]))

    def roots(self) -> np.ndarray:
        return np.roots(self.poly())

    @classmethod
    def from_poly(cls, p) -> "InternalModel":
        p = np.asarray(p, dtype=float)
        return cls(p[1:][::-1] / p[0])

    def recurrence_residual(self, seq: np.ndarray) -> np.ndarray:
        """``s_{k+m} + sum_i d_i s_{k+i}`` for every admissible ``k`` (rows of ``seq``)."""
        seq = np.asarray(seq, dtype=float)
        m = self.m
        out = seq[m:].copy()
        for i in range(m):
            out += self.d[i] * seq[i:len(seq) - m + i]
        return out


def _sine_poly(omega: float, Ts: float) -> np.ndarray:
    return np.array([1.0, -2.0 * np.cos(omega * Ts), 1.0])


def true_denominator(kind: SignalKind, Ts: float) -> InternalModel:
    """Minimal monic annihilating polynomial of a (non-switching) signal."""
    if isinstance(kind, Sine):
        p = _sine_poly(kind.omega0, Ts)
    elif isinstance(kind, Ramp):
        p = np.array([1.0, -2.0, 1.0])
    elif isinstance(kind, SineRamp):
        p = np.convolve(_sine_poly(kind.omega0, Ts), [1.0, -2.0, 1.0])
    elif isinstance(kind, SineSquared):
        # sin^2(w t) = (1 - cos(2 w t)) / 2
        p = np.convolve([1.0, -1.0], _sine_poly(2.0 * kind.omega1, Ts))
    elif isinstance(kind, Constant):
        p = np.array([1.0, -1.0])
    elif isinstance(kind, Switch):
        raise ValueError("a switching signal has no single time-invariant model")
    else:
        raise TypeError(f"unknown signal kind {kind!r}")
    return InternalModel.from_poly(p)


# ---------------------------------------------------------------------------
# Problems
# ---------------------------------------------------------------------------

def _check_dim(x: np.ndarray, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"expected a vector of dimension {n}, got shape {x.shape}")
    return x


@dataclass(frozen=True, eq=False)
class QuadraticProblem:
    """Fixed Hessian ``A`` driven by a time-varying linear term."""

    A: np.ndarray
    lambda_min: float
    lambda_max: float
    signal: SignalKind
    Ts: float = 0.1

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def hessian(self, k: int) -> np.ndarray:
        return self.A

    def b(self, k: int) -> np.ndarray:
        return signal_value(self.signal, k, self.Ts, self.n)

    def cost(self, x, k: int) -> float:
        x = _check_dim(x, self.n)
        return 0.5 * x @ self.hessian(k) @ x + x @ self.b(k)

    def gradient(self, x, k: int) -> np.ndarray:
        x = _check_dim(x, self.n)
        return self.hessian(k) @ x + self.b(k)

    def minimizer(self, k: int) -> np.ndarray:
        return -np.linalg.solve(self.hessian(k), self.b(k))


@dataclass(frozen=True, eq=False)
class TvHessianProblem(QuadraticProblem):
    """``A_k = V (Lambda + sin(omega0 k Ts) diag(v)) V^T`` with a constant linear term."""

    V: np.ndarray = field(default=None)
    Lambda: np.ndarray = field(default=None)
    v: np.ndarray = field(default=None)
    omega0: float = 1.0

    def hessian(self, k: int) -> np.ndarray:
        spectrum = self.Lambda + np.sin(self.omega0 * k * self.Ts) * self.v
        return (self.V * spectrum) @ self.V.T


def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_b_bar(n: int, seed: int) -> np.ndarray:
    """Entries uniform on [0.5, 1.5], so every coordinate of a ramp is exciting."""
    return np.random.default_rng([seed, 1]).uniform(0.5, 1.5, size=n)


def make_quadratic(n: int, lambda_min: float, lambda_max: float, seed: int,
                   signal: SignalKind | None = None, Ts: float = 0.1) -> QuadraticProblem:
    """Random symmetric Hessian whose spectrum contains both bounds exactly.

    The remaining ``n - 2`` eigenvalues are uniform between the bounds.
    """
    if n < 1:
        raise ValueError("dimension must be positive")
    if not 0 < lambda_min <= lambda_max:
        raise ValueError("need 0 < lambda_min <= lambda_max")
    rng = np.random.default_rng(seed)
    Q = random_orthogonal(n, rng)
    if n == 1:
        spectrum = np.array([lambda_min])
    else:
        spectrum = np.concatenate(([lambda_min, lambda_max],
                                   rng.uniform(lambda_min, lambda_max, size=n - 2)))
    A = (Q * spectrum) @ Q.T
    A = 0.5 * (A + A.T)
    if signal is None:
        signal = Sine()
    return QuadraticProblem(A=A, lambda_min=float(lambda_min), lambda_max=float(lambda_max),
                            signal=signal, Ts=Ts)


def make_tv_hessian(n: int, seed: int, omega0: float = 1.0, Ts: float = 0.1) -> TvHessianProblem:
    """Hessian oscillating inside [1, 5]: base spectrum in [2, 4], perturbation in [-1, 1]."""
    rng = np.random.default_rng(seed)
    V = random_orthogonal(n, rng)
    Lambda = rng.uniform(2.0, 4.0, size=n)
    v = rng.uniform(-1.0, 1.0, size=n)
    b_bar = random_b_bar(n, seed)
    A0 = (V * Lambda) @ V.T
    return TvHessianProblem(A=0.5 * (A0 + A0.T), lambda_min=1.0, lambda_max=5.0,
                            signal=Constant(b_bar), Ts=Ts, V=V, Lambda=Lambda, v=v,
                            omega0=omega0)


def minimizer(problem: QuadraticProblem, k: int) -> np.ndarray:
    """Unique stationary point ``x*_k = -A_k^{-1} b_k``."""
    return problem.minimizer(k)


def gradient(problem: QuadraticProblem, x, k: int) -> np.ndarray:
    return problem.gradient(x, k)
