"""Online gradient descent, the unstructured baseline."""
from __future__ import annotations

import numpy as np


def default_step(lambda_min: float, lambda_max: float) -> float:
    """Step size minimising the contraction factor."""
    return 2.0 / (lambda_min + lambda_max)


def check_step(h: float, lambda_max: float) -> None:
    if not 0 < h < 2.0 / lambda_max:
        raise ValueError(f"step size {h} outside (0, 2/lambda_max) = (0, {2.0 / lambda_max})")


def ogd_step(x, grad, h: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if x.shape != grad.shape:
        raise ValueError(f"shape mismatch: x {x.shape} vs grad {grad.shape}")
    if h <= 0:
        raise ValueError("step size must be positive")
    return x - h * grad


def contraction_factor(h: float, lambda_min: float, lambda_max: float) -> float:
    """``max(|1 - h lambda_min|, |1 - h lambda_max|)``; lies in (0, 1) for admissible h."""
    check_step(h, lambda_max)
    return max(abs(1.0 - h * lambda_min), abs(1.0 - h * lambda_max))


def run_ogd(problem, h: float, horizon: int, x0=None) -> np.ndarray:
    """Decisions ``x_0 .. x_{horizon-1}`` of OGD on ``problem``."""
    x = np.zeros(problem.n) if x0 is None else np.asarray(x0, dtype=float)
    out = np.empty((horizon, problem.n))
    for k in range(horizon):
        out[k] = x
        x = ogd_step(x, problem.gradient(x, k), h)
    return out
