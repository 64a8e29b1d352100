"""Two-phase SIMBO supervisor.

Phase ``identify`` runs online gradient descent while recursive least squares
learns the internal model from the decisions. Once the prediction residual
drops below ``theta`` a controller is synthesised and phase ``track`` runs the
control-based update, keeps identifying, recomputes the controller when the
model estimate improves, and falls back to ``identify`` when the residual of
the deployed model jumps.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import imc, rls
from .ogd import check_step, default_step, ogd_step, run_ogd

IDENTIFY = "identify"
TRACK = "track"

EV_TRACK = "enter_track"
EV_RECOMPUTE = "recompute"
EV_CHANGE = "model_change"
EV_INFEASIBLE = "infeasible"
EV_RLS_RESET = "rls_covariance_reset"

THETA_DELTA = 1e-7  # default exit threshold in delta-basis units


@dataclass(frozen=True)
class SupervisorConfig:
    m: int
    lambda_min: float
    lambda_max: float
    theta: Optional[float] = None  # defaults to THETA_DELTA * Ts**m
    patience_t: int = 10
    change_C: float = 100.0
    change_floor: float = 1e-9
    burn_in: Optional[int] = None  # defaults to 2m + 5
    alpha: float = 0.5
    beta: float = 1e4
    basis: str = "delta"  # RLS coordinates: "delta" or "shift"
    Ts: float = 0.1  # sampling interval, used by the delta basis
    h: Optional[float] = None  # defaults to 2 / (lambda_min + lambda_max)
    synthesis: imc.SynthesisConfig = field(default_factory=imc.SynthesisConfig)

    def __post_init__(self):
        if self.theta is not None and self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.change_C <= 1:
            raise ValueError("change_C must exceed 1")
        if self.patience_t < 1:
            raise ValueError("patience must be at least 1")
        if self.m < 1:
            raise ValueError("model order must be at least 1")
        if self.basis not in ("shift", "delta"):
            raise ValueError(f"unknown basis {self.basis!r}")
        check_step(self.step_size, self.lambda_max)

    @property
    def step_size(self) -> float:
        return default_step(self.lambda_min, self.lambda_max) if self.h is None else self.h

    @property
    def threshold(self) -> float:
        """Phase-1 exit threshold on the shift-basis residual.

        The shift residual of a model of order m carries a factor Ts^m relative
        to the delta-basis one, so the default threshold scales the same way.
        """
        return THETA_DELTA * self.Ts ** self.m if self.theta is None else self.theta

    @property
    def burn_in_steps(self) -> int:
        return 2 * self.m + 5 if self.burn_in is None else self.burn_in


@dataclass(frozen=True)
class Event:
    k: int
    name: str
    residual: Optional[float]
    phase: str


@dataclass(frozen=True, eq=False)
class SupervisorState:
    x: np.ndarray  # current decision x_k
    rls: rls.RlsState
    phase: str = IDENTIFY
    k: int = 0
    phase_k: int = 0  # steps since the current identify phase began
    controller: Optional[imc.Controller] = None
    best_residual: float = np.inf
    best_iter: int = -1
    d_best: Optional[np.ndarray] = None  # shift coefficients of the deployed model
    params_best: Optional[np.ndarray] = None  # the same model in RLS coordinates
    last_frozen_residual: Optional[float] = None
    pause: int = 0  # remaining steps without RLS updates
    residual: Optional[float] = None  # e_k of the last step, if computed
    x_history: tuple = ()  # previous decisions, most recent first
    event_log: tuple = ()


def simbo_init(cfg: SupervisorConfig, n: int, x0=None) -> SupervisorState:
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    return SupervisorState(x=x, rls=_fresh_rls(cfg, n))


def _fresh_rls(cfg: SupervisorConfig, n: int) -> rls.RlsState:
    return rls.rls_init(cfg.m, n, cfg.beta, cfg.alpha, basis=cfg.basis, Ts=cfg.Ts)


def check_phase1_exit(e_k: Optional[float], theta: float, k: int, burn_in: int) -> bool:
    return e_k is not None and k >= burn_in and e_k <= theta


def check_recompute(e_k: Optional[float], e_best: float, k: int, k_best: int, t: int) -> bool:
    return e_k is not None and e_k <= e_best and k >= k_best + t


def check_model_change(res_k: float, res_km1: float, C: float, floor: float) -> bool:
    return res_k > C * max(res_km1, floor)


def _deploy(state: SupervisorState, cfg: SupervisorConfig, d) -> imc.Controller:
    ctrl = imc.synthesize(d, cfg.lambda_min, cfg.lambda_max, cfg.synthesis, n=state.x.size)
    w = imc.warm_start(ctrl.K, state.x, state.x_history, ctrl.realization.F)
    return imc.with_state(ctrl, w)


def simbo_step(state: SupervisorState, grad_oracle: Callable[[int, np.ndarray], np.ndarray],
               cfg: SupervisorConfig) -> tuple[SupervisorState, np.ndarray]:
    """Advance one step: query the gradient at ``x_k`` and return ``x_{k+1}``."""
    k, x = state.k, state.x
    grad = np.asarray(grad_oracle(k, x), dtype=float)
    events = []

    def log(name, residual=None, phase=None):
        events.append(Event(k, name, residual, phase or state.phase))

    # frozen-model residual must use the window before x_k is pushed
    frozen = None
    if state.phase == TRACK and state.rls.warm:
        frozen = rls.model_residual(state.rls, x, state.params_best)

    params_prev = state.rls.d_hat
    d_prev = state.rls.estimate
    resets = state.rls.resets
    # identification waits out the OGD start-up transient and controller swaps
    if state.phase == IDENTIFY:
        update = state.phase_k >= cfg.burn_in_steps
    else:
        update = state.pause == 0
    new_rls, e_k = rls.rls_observe(state.rls, x, update=update)
    if new_rls.resets != resets:
        log(EV_RLS_RESET, e_k)
    s = replace(state, rls=new_rls, residual=e_k, pause=max(state.pause - 1, 0))

    if state.phase == IDENTIFY:
        if check_phase1_exit(e_k, cfg.threshold, state.phase_k, cfg.burn_in_steps):
            try:
                ctrl = _deploy(state, cfg, d_prev)
            except imc.SynthesisInfeasible:
                log(EV_INFEASIBLE, e_k)
            else:
                log(EV_TRACK, e_k, TRACK)
                s = replace(s, phase=TRACK, controller=ctrl, best_residual=e_k, best_iter=k,
                            d_best=d_prev, params_best=params_prev.copy(),
                            last_frozen_residual=None, pause=cfg.m)
        if s.phase == IDENTIFY:
            x_next = ogd_step(x, grad, cfg.step_size)
            s = replace(s, phase_k=state.phase_k + 1)
        else:
            ctrl, x_next = imc.cb_step(s.controller, grad)
            s = replace(s, controller=ctrl)
    else:
        if (frozen is not None and state.last_frozen_residual is not None
                and check_model_change(frozen, state.last_frozen_residual,
                                       cfg.change_C, cfg.change_floor)):
            log(EV_CHANGE, frozen, IDENTIFY)
            fresh = rls.push(_fresh_rls(cfg, x.size), x)
            s = replace(s, phase=IDENTIFY, phase_k=1, controller=None, best_residual=np.inf,
                        best_iter=-1, d_best=None, params_best=None,
                        last_frozen_residual=None, pause=0, rls=fresh)
            x_next = ogd_step(x, grad, cfg.step_size)
        else:
            s = replace(s, last_frozen_residual=frozen)
            if check_recompute(e_k, state.best_residual, k, state.best_iter, cfg.patience_t):
                try:
                    ctrl = _deploy(state, cfg, d_prev)
                except imc.SynthesisInfeasible:
                    log(EV_INFEASIBLE, e_k)
                else:
                    log(EV_RECOMPUTE, e_k)
                    s = replace(s, controller=ctrl, best_residual=e_k, best_iter=k,
                                d_best=d_prev, params_best=params_prev.copy(),
                                last_frozen_residual=None, pause=cfg.m)
            ctrl, x_next = imc.cb_step(s.controller, grad)
            s = replace(s, controller=ctrl)

    history = ((x,) + state.x_history)[: max(cfg.m - 1, 0)]
    s = replace(s, x=x_next, k=k + 1, x_history=history,
                event_log=state.event_log + tuple(events))
    return s, x_next


def run_simbo(problem, cfg: SupervisorConfig, horizon: int, x0=None, on_step=None):
    """Run SIMBO for ``horizon`` steps; returns decisions and the final state.

    ``on_step(k, state_before, state_after)`` is invoked once per step, if given.
    """
    state = simbo_init(cfg, problem.n, x0)
    xs = np.empty((horizon, problem.n))
    oracle = lambda k, x: problem.gradient(x, k)  # noqa: E731
    for k in range(horizon):
        xs[k] = state.x
        prev = state
        state, _ = simbo_step(state, oracle, cfg)
        if on_step is not None:
            on_step(k, prev, state)
    return xs, state


def run_identification(problem, cfg: SupervisorConfig, steps: int, x0=None):
    """Phase 1 without the exit: OGD decisions feeding RLS after the burn-in.

    Returns ``(estimates, residuals)``: the shift-basis estimate after each
    step, shape ``(steps, m)``, and the residual ``e_k`` (``nan`` where no
    update took place).
    """
    state = _fresh_rls(cfg, problem.n)
    est = np.empty((steps, cfg.m))
    res = np.full(steps, np.nan)
    for k, x in enumerate(run_ogd(problem, cfg.step_size, steps, x0)):
        state, e_k = rls.rls_observe(state, x, update=k >= cfg.burn_in_steps)
        if e_k is not None:
            res[k] = e_k
        est[k] = state.estimate
    return est, res
