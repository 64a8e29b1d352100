"""Internal-model controller for the control-based online algorithm.

The algorithm runs ``w+ = (F kron I) w + (G kron I) grad`` and outputs
``x = (K kron I) w+``. Along an eigenvector of the Hessian with eigenvalue
``lam`` the closed loop is ``F + lam G K``, whose characteristic polynomial is
``z^m + sum_i (d_i - lam c_i) z^i``. Synthesis places the poles at a nominal
eigenvalue and then checks Schur stability over the whole interval.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .problems import InternalModel

logger = logging.getLogger(__name__)

DEFAULT_RADII = tuple(round(0.1 * i, 1) for i in range(10))


@dataclass(frozen=True, eq=False)
class Realization:
    F: np.ndarray
    G: np.ndarray
    d_used: np.ndarray

    @property
    def m(self) -> int:
        return self.d_used.size


@dataclass(frozen=True, eq=False)
class Controller:
    realization: Realization
    K: np.ndarray
    w: np.ndarray  # (m, n): block rows of the stacked state
    verified_interval: tuple[float, float]
    margin: float

    @property
    def m(self) -> int:
        return self.K.size


@dataclass(frozen=True)
class SynthesisConfig:
    grid_points: int = 101
    stability_margin: float = 0.02
    target_radius_schedule: tuple = DEFAULT_RADII
    # "repeated": all roots at r; "segment": spread on [-r, r]; "conjugate": radius-r pairs
    root_patterns: tuple = ("repeated", "segment", "conjugate")
    nominal_points: int = 5  # nominal eigenvalues tried across the interval; 1 = midpoint only
    refine_iters: int = 200  # Nelder-Mead polish of the best candidate; 0 disables
    refine_grid_points: int = 41


class SynthesisInfeasible(Exception):
    """No candidate gain passed verification on the eigenvalue interval."""


def _as_d(d) -> np.ndarray:
    if isinstance(d, InternalModel):
        return d.d
    d = np.atleast_1d(np.asarray(d, dtype=float))
    if d.size == 0:
        raise ValueError("empty coefficient vector")
    return d


def companion(d) -> Realization:
    """Companion pair with superdiagonal ones and last row ``-d``."""
    d = _as_d(d)
    m = d.size
    F = np.eye(m, k=1)
    F[-1, :] = -d
    G = np.zeros((m, 1))
    G[-1, 0] = 1.0
    return Realization(F=F, G=G, d_used=d.copy())


def spectral_radii(realization: Realization, K, lams) -> np.ndarray:
    """Spectral radius of ``F + lam G K`` for each ``lam``."""
    K = np.asarray(K, dtype=float).reshape(1, -1)
    GK = realization.G @ K
    mats = realization.F[None] + np.asarray(lams, dtype=float)[:, None, None] * GK[None]
    return np.abs(np.linalg.eigvals(mats)).max(axis=1)


def verify_margin(realization: Realization, K, lambda_min: float, lambda_max: float,
                  grid_points: int) -> float:
    """Largest closed-loop spectral radius over a uniform grid, endpoints included."""
    if grid_points < 2:
        raise ValueError("grid needs at least two points")
    lams = np.linspace(lambda_min, lambda_max, grid_points)
    return float(spectral_radii(realization, K, lams).max())


def target_polynomial(m: int, r: float, pattern: str) -> np.ndarray:
    """Low-order coefficients ``t_0 .. t_{m-1}`` of a monic polynomial with roots of modulus <= r."""
    if r == 0:
        return np.zeros(m)
    if pattern == "repeated":
        roots = np.full(m, r)
    elif pattern == "segment":
        roots = np.linspace(-r, r, m) if m > 1 else np.array([r])
    elif pattern == "conjugate":
        angles = np.pi * (2 * np.arange(m) + 1) / (2 * m)
        roots = r * np.exp(1j * angles)
    else:
        raise ValueError(f"unknown root pattern {pattern!r}")
    return InternalModel.from_poly(np.real(np.poly(roots))).d


def _candidate_gains(d: np.ndarray, lambda_min: float, lambda_max: float,
                     cfg: SynthesisConfig) -> np.ndarray:
    m = d.size
    targets = [np.zeros(m)]
    for pattern in cfg.root_patterns:
        for r in cfg.target_radius_schedule:
            if r > 0:
                targets.append(target_polynomial(m, r, pattern))
    if cfg.nominal_points > 1:
        noms = np.linspace(lambda_min, lambda_max, cfg.nominal_points)
    else:
        noms = np.array([0.5 * (lambda_min + lambda_max)])
    # the midpoint comes first so ties resolve to it
    noms = sorted(noms, key=lambda v: abs(v - 0.5 * (lambda_min + lambda_max)))
    return np.array([(d - t) / nom for nom in noms for t in targets])


def _grid_radii(F: np.ndarray, gains: np.ndarray, lams: np.ndarray) -> np.ndarray:
    """Worst grid spectral radius for each row of ``gains``."""
    m = F.shape[0]
    mats = np.broadcast_to(F, (len(gains), lams.size, m, m)).copy()
    # G K only touches the last row of F
    mats[:, :, -1, :] += lams[None, :, None] * gains[:, None, :]
    return np.abs(np.linalg.eigvals(mats)).max(axis=2).max(axis=1)


def synthesize(d_hat, lambda_min: float, lambda_max: float,
               cfg: SynthesisConfig = SynthesisConfig(), n: int = 1) -> Controller:
    """Robust gain for the companion realization of ``d_hat``.

    Each candidate places the closed loop at a nominal eigenvalue on a target
    polynomial, ``c = (d_hat - t) / lam_nom``: deadbeat first, then the radius
    schedule for every root pattern, over ``nominal_points`` nominal values.
    The best candidate is optionally polished by a derivative-free search on
    the worst grid radius. The result must have grid radius below
    ``1 - stability_margin``.
    """
    d = _as_d(d_hat)
    if not np.all(np.isfinite(d)):
        raise ValueError("model coefficients must be finite")
    if not 0 < lambda_min <= lambda_max:
        raise ValueError("need 0 < lambda_min <= lambda_max")
    real = companion(d)
    lams = np.linspace(lambda_min, lambda_max, cfg.grid_points)

    gains = _candidate_gains(d, lambda_min, lambda_max, cfg)
    radii = _grid_radii(real.F, gains, lams)
    best = int(np.argmin(radii))
    K, radius = gains[best], float(radii[best])

    if cfg.refine_iters > 0:
        coarse = np.linspace(lambda_min, lambda_max, cfg.refine_grid_points)
        res = minimize(lambda c: _grid_radii(real.F, c[None], coarse)[0], K,
                       method="Nelder-Mead",
                       options={"maxiter": cfg.refine_iters, "xatol": 1e-9, "fatol": 1e-12})
        polished = float(_grid_radii(real.F, res.x[None], lams)[0])
        if np.all(np.isfinite(res.x)) and polished < radius:
            K, radius = res.x, polished

    if not radius < 1.0 - cfg.stability_margin:
        raise SynthesisInfeasible(
            f"best grid spectral radius {radius:.4f} >= {1.0 - cfg.stability_margin}")
    return Controller(realization=real, K=K, w=np.zeros((d.size, n)),
                      verified_interval=(float(lambda_min), float(lambda_max)),
                      margin=radius)


def warm_start(K, x_current, x_history=(), F=None) -> np.ndarray:
    """Internal state reproducing the current decision.

    Without ``F`` (or without history) this is the minimum-norm ``w`` with
    ``(K kron I) w = x_current``. With ``F`` and the previous decisions
    ``x_history`` (most recent first, excluding ``x_current``), ``w`` is chosen
    so the unforced loop would have emitted the whole recorded window, which
    keeps the decision sequence continuous across a controller swap.
    Returns an ``(m, n)`` array.
    """
    K = np.asarray(K, dtype=float).ravel()
    x_current = np.atleast_1d(np.asarray(x_current, dtype=float))
    m = K.size
    if not np.any(K):
        logger.warning("zero feedback row; warm start falls back to w = 0")
        return np.zeros((m, x_current.size))
    if F is None or len(x_history) == 0:
        return np.outer(K, x_current) / (K @ K)

    hist = list(x_history)[: m - 1]
    j = len(hist)
    # oldest recorded state w0 = w_{k-j}; decisions x_{k-j+i} = K F^i w0
    rows = [K]
    for _ in range(j):
        rows.append(rows[-1] @ F)
    O = np.array(rows)
    X = np.array([np.atleast_1d(x) for x in reversed(hist)] + [x_current])
    w0, *_ = np.linalg.lstsq(O, X, rcond=None)
    return np.linalg.matrix_power(F, j) @ w0


def cb_step(ctrl: Controller, grad) -> tuple[Controller, np.ndarray]:
    """One control-based update; returns the advanced controller and ``x_{k+1}``."""
    grad = np.atleast_1d(np.asarray(grad, dtype=float))
    if grad.shape != (ctrl.w.shape[1],):
        raise ValueError(f"gradient shape {grad.shape} does not match state {ctrl.w.shape}")
    w = ctrl.realization.F @ ctrl.w
    w[-1] += grad
    return replace(ctrl, w=w), ctrl.K @ w


def with_state(ctrl: Controller, w) -> Controller:
    return replace(ctrl, w=np.asarray(w, dtype=float))
