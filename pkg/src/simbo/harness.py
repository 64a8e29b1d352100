"""Experiment runner: paired runs of OGD, the exact-model controller and SIMBO.

Configurations are nested dictionaries (read from JSON files by the CLI).
Every key has a default, so ``{}`` is a valid experiment: a 15-dimensional
sine-driven quadratic run for 1000 steps.
"""
from __future__ import annotations

import copy
import csv
import json
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import imc, ogd
from .problems import (Constant, InternalModel, Ramp, Sine, SineRamp, SineSquared, Switch,
                       make_quadratic, make_tv_hessian, random_b_bar, true_denominator)
from .supervisor import SupervisorConfig, run_simbo

ALGORITHMS = ("ogd", "control_based", "simbo")
CSV_HEADER = ("k", "algorithm", "tracking_error", "residual", "phase", "event")

DEFAULTS = {
    "name": "experiment",
    "seed": 0,
    "horizon": 1000,
    "problem": {
        "kind": "quadratic",  # or "tv_hessian"
        "n": 15,
        "lambda_min": 1.0,
        "lambda_max": 5.0,
        "Ts": 0.1,
        "signal": {"type": "sine", "omega0": 1.0},
    },
    "algorithms": list(ALGORITHMS),
    "ogd": {"h": None},
    "control_based": {"model": None},  # shift coefficients d_0..d_{m-1}; None = exact model
    "rls": {"m": None, "alpha": 0.5, "beta": 1e4, "basis": "delta"},
    "simbo": {"theta": None, "patience_t": 10, "change_C": 100.0, "change_floor": 1e-9,
              "burn_in": None},
    "imc": {"grid_points": 101, "stability_margin": 0.02,
            "target_radius_schedule": list(imc.DEFAULT_RADII), "nominal_points": 5,
            "refine_iters": 200, "refine_grid_points": 41},
    "output": {"path": None, "format": "csv"},
}

# one line per key, shown by ``--help``
KEY_HELP = """\
configuration keys (JSON object; every key optional):
  name                     label for the experiment
  seed                     seed for A, b_bar and the TV-Hessian factors (default 0)
  horizon                  number of steps K_total (default 1000)
  problem.kind             "quadratic" or "tv_hessian"
  problem.n                dimension (default 15)
  problem.lambda_min/max   Hessian spectrum bounds (default 1, 5)
  problem.Ts               sampling interval (default 0.1)
  problem.signal.type      sine | ramp | sine_ramp | sine_squared | constant | switch
  problem.signal.omega0    sine frequency (default 1)
  problem.signal.omega1    sine-squared frequency (default 10)
  problem.signal.first/second/k_switch   segments of a switch signal
  algorithms               subset of ["ogd", "control_based", "simbo"]
  ogd.h                    OGD step (default 2 / (lambda_min + lambda_max))
  control_based.model      fixed model coefficients d_0..d_{m-1} (default: exact model)
  rls.m                    model order (default: order of the exact model)
  rls.alpha, rls.beta      forgetting factor (0.5) and prior covariance scale (1e4)
  rls.basis                "delta" (default) or "shift"
  simbo.theta              phase-1 exit threshold (default 1e-7 * Ts^m)
  simbo.patience_t         recompute patience (10)
  simbo.change_C           model-change ratio (100)
  simbo.change_floor       floor of the model-change ratio test (1e-9)
  simbo.burn_in            phase-1 burn-in (default 2m + 5)
  imc.grid_points          verification grid size (101)
  imc.stability_margin     required margin below radius 1 (0.02)
  imc.target_radius_schedule   pole radii tried by the synthesis (0, 0.1, ..., 0.9)
  imc.nominal_points, imc.refine_iters, imc.refine_grid_points   synthesis search settings
  output.path, output.format                    trace file and "csv" or "jsonl"
"""


class ConfigError(ValueError):
    pass


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown configuration key {path + key!r}")
        if isinstance(base[key], dict) and key != "signal":
            if not isinstance(value, dict):
                raise ConfigError(f"{path + key!r} must be an object")
            out[key] = _merge(base[key], value, path + key + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class ExperimentConfig:
    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def from_dict(cls, data: dict, seed: Optional[int] = None) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be an object")
        raw = _merge(DEFAULTS, data)
        if seed is not None:
            raw["seed"] = int(seed)
        cfg = cls(raw)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path: str, seed: Optional[int] = None) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(data, seed)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def validate(self) -> None:
        r = self.raw
        if not isinstance(r["horizon"], int) or r["horizon"] < 1:
            raise ConfigError("horizon must be a positive integer")
        bad = set(r["algorithms"]) - set(ALGORITHMS)
        if bad or not r["algorithms"]:
            raise ConfigError(f"algorithms must be a non-empty subset of {ALGORITHMS}")
        if r["problem"]["kind"] not in ("quadratic", "tv_hessian"):
            raise ConfigError(f"unknown problem kind {r['problem']['kind']!r}")
        if r["output"]["format"] not in ("csv", "jsonl"):
            raise ConfigError("output.format must be 'csv' or 'jsonl'")
        build_problem(self)  # surfaces signal errors early

    @property
    def horizon(self) -> int:
        return self.raw["horizon"]


@dataclass(frozen=True)
class TraceRecord:
    k: int
    algorithm: str
    tracking_error: float
    residual: Optional[float] = None
    phase: str = ""
    event: str = ""


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------

def build_signal(sig: dict, n: int, seed: int):
    if not isinstance(sig, dict) or "type" not in sig:
        raise ConfigError("signal needs a 'type'")
    kind = sig["type"]
    omega0 = float(sig.get("omega0", 1.0))
    if kind == "sine":
        return Sine(omega0)
    if kind == "ramp":
        return Ramp(random_b_bar(n, seed))
    if kind == "sine_ramp":
        return SineRamp(random_b_bar(n, seed), omega0)
    if kind == "sine_squared":
        return SineSquared(float(sig.get("omega1", 10.0)))
    if kind == "constant":
        return Constant(random_b_bar(n, seed))
    if kind == "switch":
        try:
            first, second, k_switch = sig["first"], sig["second"], sig["k_switch"]
        except KeyError as exc:
            raise ConfigError(f"switch signal missing {exc.args[0]!r}") from None
        if not isinstance(k_switch, int) or k_switch < 0:
            raise ConfigError("k_switch must be a non-negative integer")
        return Switch(build_signal(first, n, seed), build_signal(second, n, seed), k_switch)
    raise ConfigError(f"unknown signal type {kind!r}")


def build_problem(config: ExperimentConfig):
    p, seed = config.raw["problem"], config.raw["seed"]
    try:
        if p["kind"] == "tv_hessian":
            return make_tv_hessian(p["n"], seed, float(p["signal"].get("omega0", 1.0)), p["Ts"])
        signal = build_signal(p["signal"], p["n"], seed)
        return make_quadratic(p["n"], p["lambda_min"], p["lambda_max"], seed, signal, p["Ts"])
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid problem: {exc}") from exc


def baseline_model(config: ExperimentConfig, problem) -> InternalModel:
    """Model of the fixed controller: configured, exact, or the first switch segment's."""
    given = config.raw["control_based"]["model"]
    if given is not None:
        return InternalModel(np.asarray(given, dtype=float))
    signal = problem.signal
    if isinstance(signal, Switch):
        signal = signal.first
    if config.raw["problem"]["kind"] == "tv_hessian":
        raise ConfigError("tv_hessian experiments need control_based.model")
    return true_denominator(signal, problem.Ts)


def model_order(config: ExperimentConfig, problem) -> int:
    m = config.raw["rls"]["m"]
    if m is not None:
        return int(m)
    signal = problem.signal
    if isinstance(signal, Switch):
        return max(true_denominator(s, problem.Ts).m for s in (signal.first, signal.second))
    if config.raw["problem"]["kind"] == "tv_hessian":
        raise ConfigError("tv_hessian experiments need rls.m")
    return true_denominator(signal, problem.Ts).m


def synthesis_config(config: ExperimentConfig) -> imc.SynthesisConfig:
    opts = dict(config.raw["imc"])
    opts["target_radius_schedule"] = tuple(float(r) for r in opts["target_radius_schedule"])
    return imc.SynthesisConfig(**opts)


def supervisor_config(config: ExperimentConfig, problem) -> SupervisorConfig:
    r = config.raw
    return SupervisorConfig(
        m=model_order(config, problem), lambda_min=problem.lambda_min,
        lambda_max=problem.lambda_max, h=r["ogd"]["h"],
        alpha=r["rls"]["alpha"], beta=r["rls"]["beta"], basis=r["rls"]["basis"], Ts=problem.Ts,
        synthesis=synthesis_config(config), **r["simbo"])


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------

def _errors(xs: np.ndarray, xstar: np.ndarray) -> np.ndarray:
    return np.linalg.norm(xs - xstar, axis=1)


def run_experiment(config: ExperimentConfig) -> list[TraceRecord]:
    """Run every selected algorithm on the same problem instance.

    Records are grouped by algorithm, in the order of ``ALGORITHMS``, then by ``k``.
    """
    problem = build_problem(config)
    K = config.horizon
    xstar = np.array([problem.minimizer(k) for k in range(K)])
    h = config.raw["ogd"]["h"]
    h = ogd.default_step(problem.lambda_min, problem.lambda_max) if h is None else float(h)
    records: list[TraceRecord] = []
    selected = [a for a in ALGORITHMS if a in config.raw["algorithms"]]

    for name in selected:
        if name == "ogd":
            ogd.check_step(h, problem.lambda_max)
            err = _errors(ogd.run_ogd(problem, h, K), xstar)
            records += [TraceRecord(k, name, float(err[k]), phase="ogd") for k in range(K)]

        elif name == "control_based":
            ctrl = imc.synthesize(baseline_model(config, problem), problem.lambda_min,
                                  problem.lambda_max, synthesis_config(config), n=problem.n)
            x = np.zeros(problem.n)
            for k in range(K):
                records.append(TraceRecord(k, name, float(np.linalg.norm(x - xstar[k])),
                                           phase="track"))
                ctrl, x = imc.cb_step(ctrl, problem.gradient(x, k))

        else:
            cfg = supervisor_config(config, problem)
            steps = []

            def on_step(k, before, after):
                events = ";".join(e.name for e in after.event_log[len(before.event_log):])
                steps.append((after.residual, before.phase, events))

            xs, _ = run_simbo(problem, cfg, K, on_step=on_step)
            err = _errors(xs, xstar)
            for k, (residual, phase, events) in enumerate(steps):
                records.append(TraceRecord(k, name, float(err[k]), residual, phase, events))
    return records


def select(records, algorithm: str) -> list[TraceRecord]:
    return [r for r in records if r.algorithm == algorithm]


def asymptotic_error(records, horizon: Optional[int] = None, start: int = 0) -> float:
    """Maximum tracking error over the final 4/5 of a trace.

    The trace covers ``start .. horizon - 1``; by default it starts at 0 and the
    horizon is one past the last recorded step. The window is
    ``k >= start + (horizon - start) / 5``.
    """
    records = list(records)
    if not records:
        raise ValueError("empty trace")
    if horizon is None:
        horizon = max(r.k for r in records) + 1
    cutoff = start + (horizon - start) / 5.0
    window = [r.tracking_error for r in records if r.k >= cutoff]
    if not window:
        raise ValueError("no records in the asymptotic window")
    return float(max(window))


def summarize(records, horizon: int, k_switch: Optional[int] = None) -> dict:
    """Asymptotic error per algorithm.

    With ``k_switch`` the post-switch segment is also summarized on its own,
    under the key ``<algorithm>_post``.
    """
    names = [a for a in ALGORITHMS if any(r.algorithm == a for r in records)]
    out = {a: asymptotic_error(select(records, a), horizon) for a in names}
    if k_switch is not None and k_switch < horizon:
        for a in names:
            post = [r for r in select(records, a) if r.k >= k_switch]
            out[a + "_post"] = asymptotic_error(post, horizon, start=k_switch)
    return out


def switch_step(config: ExperimentConfig) -> Optional[int]:
    signal = config.raw["problem"]["signal"]
    return signal.get("k_switch") if signal.get("type") == "switch" else None


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _fmt(v: Optional[float]) -> str:
    return "" if v is None else "%.17e" % v


def emit(records, fmt: str = "csv", path: Optional[str] = None) -> None:
    """Write records as CSV or JSON lines to ``path`` (stdout for ``None`` or ``-``)."""
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"unknown format {fmt!r}")
    to_stdout = path in (None, "-")
    try:
        fh = sys.stdout if to_stdout else open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    try:
        if fmt == "csv":
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in records:
                w.writerow([r.k, r.algorithm, _fmt(r.tracking_error), _fmt(r.residual),
                            r.phase, r.event])
        else:
            for r in records:
                fh.write(json.dumps({"k": r.k, "algorithm": r.algorithm,
                                     "tracking_error": r.tracking_error, "residual": r.residual,
                                     "phase": r.phase, "event": r.event}) + "\n")
    finally:
        if not to_stdout:
            fh.close()


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def _tv_model(omega0: float = 1.0, Ts: float = 0.1) -> list:
    """Constant plus fundamental: (z - 1)(z^2 - 2 cos(omega0 Ts) z + 1)."""
    p = np.convolve([1.0, -1.0], [1.0, -2.0 * np.cos(omega0 * Ts), 1.0])
    return [float(v) for v in InternalModel.from_poly(p).d]


def _table1(signal: dict) -> dict:
    return {"name": "table1-" + signal["type"], "horizon": 1000,
            "problem": {"signal": signal}}


def _switch(first: dict, second: dict, name: str) -> dict:
    return {"name": name, "horizon": 2000,
            "problem": {"signal": {"type": "switch", "first": first, "second": second,
                                   "k_switch": 1000}}}


PRESETS = {
    "sine": _table1({"type": "sine", "omega0": 1.0}),
    "ramp": _table1({"type": "ramp"}),
    "sine_ramp": _table1({"type": "sine_ramp", "omega0": 1.0}),
    "sine_squared": _table1({"type": "sine_squared", "omega1": 10.0}),
    "switch_ramp_sine": _switch({"type": "ramp"}, {"type": "sine", "omega0": 1.0},
                                "switch-ramp-sine"),
    "switch_sine_sine_squared": _switch({"type": "sine", "omega0": 1.0},
                                        {"type": "sine_squared", "omega1": 10.0},
                                        "switch-sine-sine_squared"),
    "tv_hessian": {"name": "tv-hessian", "horizon": 1000,
                   "problem": {"kind": "tv_hessian", "signal": {"type": "constant", "omega0": 1.0}},
                   "control_based": {"model": _tv_model()},
                   # the minimizer is periodic but not a finite recurrence: a longer memory,
                   # a threshold above the fit floor and a burn-in past the OGD transient
                   "rls": {"m": 3, "alpha": 0.98},
                   "simbo": {"theta": 1e-3, "burn_in": 40}},
}

SUITES = {
    "table1": ("ramp", "sine", "sine_squared", "sine_ramp"),
    "switching": ("switch_ramp_sine", "switch_sine_sine_squared"),
    "tv_hessian": ("tv_hessian",),
}
SUITES["all"] = SUITES["table1"] + SUITES["switching"] + SUITES["tv_hessian"]


def preset(name: str, seed: Optional[int] = None) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ExperimentConfig.from_dict(PRESETS[name], seed)
