"""Joint training/precoder power optimization with statistical CSI.

After scalarization the joint problem reads, per spatial direction i,

    snr_i = f_i^2 * h_i(x_i^2),
    h_i   = n_rx^2 x_i^2 psi_i / sig2_i
            / (noise_var/psi_i + n_rx noise_var x_i^2/sig2_i + p_data),

and the two blocks admit closed-form water-fillings: the f-block is the
classical capacity (or weighted-MSE) allocation over the gains h_i, and the
x-block reduces per direction to a quadratic root (MI) or a square-root rule
(weighted MSE) in the Lagrange multiplier, which a budget bisection pins
down.  Alternating the two exact block solves is a coordinate ascent, so the
objective trace is monotone; the discrete training length is optimized by an
outer one-dimensional search.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .channel import CorrelatedChannelModel
from .config import ConfigError, ScenarioConfig
from .estimation import TrainingDesign, build_training
from .precoder import (
    ObjectiveKind,
    PrecoderDesign,
    build_precoder,
    effective_mi,
    effective_weighted_mse,
)
from .waterfill import bisect_budget, capacity_waterfill

MAX_ALTERNATIONS = 50
REL_TOL = 1e-8


class SolveStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"


@dataclass(frozen=True, eq=False)
class JointSolution:
    """Converged allocation for one scenario.

    ``trace`` holds (iteration, objective) pairs at the returned training
    length, starting from the uniform initialization.  ``mc_objective`` is
    only populated by estimated-CSI solvers asked to re-evaluate their answer
    under full Monte Carlo.
    """

    x_powers: np.ndarray
    f_powers: np.ndarray
    t_train: int
    objective: float
    trace: list[tuple[int, float]]
    status: SolveStatus
    p_data: float
    mc_objective: float | None = None

    @property
    def iterations(self) -> int:
        return len(self.trace) - 1


@dataclass(frozen=True, eq=False)
class DirectionParams:
    """Per-direction constants of the scalarized objective.

    a_i = n_rx^2 f_i^2 psi_i / sig2_i        (zero for unpowered streams)
    b_i = n_rx noise_var / sig2_i
    c_i = noise_var / psi_i + p_data
    h_i = gain per unit f-power at the current training powers
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    h: np.ndarray

    @classmethod
    def evaluate(
        cls,
        model: CorrelatedChannelModel,
        cfg: ScenarioConfig,
        f_powers: np.ndarray,
        x_powers: np.ndarray,
        p_data: float,
    ) -> "DirectionParams":
        n = len(f_powers)
        psi = model.tx_corr_evals[:n]
        sig2 = cfg.train_noise_level()
        n_rx = model.n_rx
        a = n_rx**2 * np.asarray(f_powers) * psi / sig2
        b = np.full(n, n_rx * cfg.noise_var / sig2)
        c = cfg.noise_var / psi + p_data
        h = direction_gains(x_powers, psi, sig2, cfg.noise_var, p_data, n_rx)
        return cls(a=a, b=b, c=c, h=h)


def direction_gains(
    x_powers: np.ndarray,
    psi: np.ndarray,
    sig2: float,
    noise_var: float,
    p_data: float,
    n_rx: int,
) -> np.ndarray:
    """Per-direction SNR gain per unit of data power."""
    x = np.asarray(x_powers, dtype=float)
    return (n_rx**2 * x * psi / sig2) / (noise_var / psi + n_rx * noise_var * x / sig2 + p_data)


# -- the four closed-form water-fillings ------------------------------------


def waterfill_f_mi(h: np.ndarray, p_d: float) -> np.ndarray:
    """Data powers maximizing sum log(1 + f_i^2 h_i): f_i^2 = (1/mu - 1/h_i)^+."""
    return capacity_waterfill(np.asarray(h, dtype=float), p_d)


def waterfill_x_mi(params: DirectionParams, budget: float) -> np.ndarray:
    """Training powers maximizing sum log(1 + a_i x / (c_i + b_i x)).

    Stationarity gives the quadratic (a+b) b x^2 + c (a+2b) x + (c^2 - a c/mu)
    = 0 per direction; the positive part of its larger root is the allocation,
    active exactly when mu < a_i/c_i.  The multiplier is found by bisection on
    the monotone total.
    """
    a, b, c = params.a, params.b, params.c
    if budget <= 0:
        raise ValueError("training power budget must be positive")

    def allocation(mu: float) -> np.ndarray:
        big_a = (a + b) * b
        big_b = c * (a + 2 * b)
        big_c = c * c - a * c / mu
        disc = np.maximum(big_b**2 - 4 * big_a * big_c, 0.0)
        return np.maximum((-big_b + np.sqrt(disc)) / (2 * big_a), 0.0)

    mu_upper = float(np.max(np.where(c > 0, a / c, 0.0)))
    if mu_upper <= 0:
        return np.zeros_like(a)
    return bisect_budget(allocation, mu_upper, budget)


def waterfill_f_wmse(h: np.ndarray, weights: np.ndarray, p_d: float) -> np.ndarray:
    """Data powers minimizing sum w_i/(1 + f_i^2 h_i):
    f_i^2 = (sqrt(w_i/(mu h_i)) - 1/h_i)^+ with the budget pinned by bisection."""
    h = np.asarray(h, dtype=float)
    w = np.asarray(weights, dtype=float)
    ok = h > 0

    def allocation(mu: float) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.sqrt(w / (mu * h)) - 1.0 / h
        return np.where(ok, np.maximum(f, 0.0), 0.0)

    mu_upper = float(np.max(w * h, initial=0.0))
    if mu_upper <= 0:
        return np.zeros_like(h)
    return bisect_budget(allocation, mu_upper, p_d)


def waterfill_x_wmse(params: DirectionParams, weights: np.ndarray, budget: float) -> np.ndarray:
    """Training powers minimizing the scalarized weighted MSE:
    x_i^2 = (sqrt(w_i a_i c_i / mu) - c_i)^+ / (a_i + b_i)."""
    a, b, c = params.a, params.b, params.c
    w = np.asarray(weights, dtype=float)
    if budget <= 0:
        raise ValueError("training power budget must be positive")

    def allocation(mu: float) -> np.ndarray:
        return np.maximum((np.sqrt(w * a * c / mu) - c) / (a + b), 0.0)

    mu_upper = float(np.max(np.where(c > 0, w * a / c, 0.0)))
    if mu_upper <= 0:
        return np.zeros_like(a)
    return bisect_budget(allocation, mu_upper, budget)


# -- alternating solver ------------------------------------------------------


def _normalize_metric(metric: str, n_data: int, weights) -> tuple[str, np.ndarray | None]:
    metric = metric.lower()
    if metric not in ("mi", "wmse"):
        raise ConfigError(f"metric must be 'mi' or 'wmse', got {metric!r}")
    if metric == "wmse":
        weights = np.ones(n_data) if weights is None else np.asarray(weights, dtype=float)
        if weights.size != n_data or np.any(weights <= 0):
            raise ConfigError("wmse weights must be positive, one per data stream")
    else:
        weights = None
    return metric, weights


def _candidate_lengths(cfg: ScenarioConfig, t_train_values) -> list[int]:
    if t_train_values is None:
        return cfg.feasible_t_train()
    out = []
    for t in t_train_values:
        t = int(t)
        if not cfg.n_data <= t <= cfg.coherence_time - 1:
            raise ConfigError(
                f"t_train={t} outside [{cfg.n_data}, {cfg.coherence_time - 1}]"
            )
        out.append(t)
    return out


def _better(metric: str, new: float, old: float) -> bool:
    return new > old if metric == "mi" else new < old


def solve_joint_statistical(
    cfg: ScenarioConfig,
    model: CorrelatedChannelModel,
    metric: str = "mi",
    weights: np.ndarray | None = None,
    t_train_values=None,
) -> JointSolution:
    """Alternating water-filling over data and training powers plus a
    one-dimensional search over the training length.

    Both block updates are exact argmaxima, so every accepted iterate improves
    (MI) or reduces (weighted MSE) the objective; the alternation stops when
    the relative change drops below 1e-8 or after 50 rounds.  Ties across
    training lengths resolve to the smallest.
    """
    metric, weights = _normalize_metric(metric, cfg.n_data, weights)
    psi = model.tx_corr_evals[: cfg.n_data]
    sig2 = cfg.train_noise_level()
    n = cfg.n_data
    best: JointSolution | None = None
    for t_train in _candidate_lengths(cfg, t_train_values):
        p_data = cfg.data_power_at(t_train)
        if p_data is None:
            continue
        budget = cfg.train_power * t_train
        x = np.full(n, budget / n)
        f = np.full(n, p_data / n)

        def objective(f_now, x_now):
            gains = direction_gains(x_now, psi, sig2, cfg.noise_var, p_data, model.n_rx)
            if metric == "mi":
                return effective_mi(gains, f_now, t_train, cfg)
            return effective_weighted_mse(gains, f_now, weights, t_train, cfg)

        obj = objective(f, x)
        trace = [(0, obj)]
        status = SolveStatus.MAX_ITERS
        for it in range(1, MAX_ALTERNATIONS + 1):
            gains = direction_gains(x, psi, sig2, cfg.noise_var, p_data, model.n_rx)
            if metric == "mi":
                f = waterfill_f_mi(gains, p_data)
            else:
                f = waterfill_f_wmse(gains, weights, p_data)
            params = DirectionParams.evaluate(model, cfg, f, x, p_data)
            if metric == "mi":
                x = waterfill_x_mi(params, budget)
            else:
                x = waterfill_x_wmse(params, weights, budget)
            prev, obj = obj, objective(f, x)
            trace.append((it, obj))
            if abs(obj - prev) <= REL_TOL * (1.0 + abs(obj)):
                status = SolveStatus.CONVERGED
                break
        candidate = JointSolution(
            x_powers=x,
            f_powers=f,
            t_train=t_train,
            objective=obj,
            trace=trace,
            status=status,
            p_data=p_data,
        )
        if best is None or _better(metric, obj, best.objective):
            best = candidate
    if best is None:
        raise ConfigError("no feasible training length under the energy budget")
    return best


def materialize_solution(
    cfg: ScenarioConfig,
    model: CorrelatedChannelModel,
    solution: JointSolution,
    kind: ObjectiveKind = ObjectiveKind.MI,
    aux: np.ndarray | None = None,
) -> tuple[TrainingDesign, PrecoderDesign]:
    """Turn a scalar power solution into the actual matrices.

    Builds the structured training matrix from the solution's training powers
    and the structured precoder from its stream powers.  Stream powers live in
    correlation-direction order while the precoder builder pairs them with the
    descending singular values of the whitened effective channel, so they are
    re-aligned through the per-direction gains here.
    """
    r_n = cfg.train_noise_matrix(solution.t_train)
    training = build_training(model, r_n, solution.x_powers, solution.t_train)
    gains = direction_gains(
        solution.x_powers,
        model.tx_corr_evals[: len(solution.x_powers)],
        cfg.train_noise_level(),
        cfg.noise_var,
        solution.p_data,
        model.n_rx,
    )
    order = np.argsort(-gains, kind="stable")[: cfg.n_data]
    design = build_precoder(
        model,
        training,
        cfg,
        kind,
        np.asarray(solution.f_powers)[order],
        aux=aux,
        p_data=solution.p_data,
    )
    return training, design


def solve_uniform_statistical(
    cfg: ScenarioConfig,
    model: CorrelatedChannelModel,
    metric: str = "mi",
    weights: np.ndarray | None = None,
    t_train_values=None,
) -> JointSolution:
    """Uniform-power baseline: equal training and data powers across the
    data streams, with the training length still searched."""
    metric, weights = _normalize_metric(metric, cfg.n_data, weights)
    psi = model.tx_corr_evals[: cfg.n_data]
    sig2 = cfg.train_noise_level()
    n = cfg.n_data
    best: JointSolution | None = None
    for t_train in _candidate_lengths(cfg, t_train_values):
        p_data = cfg.data_power_at(t_train)
        if p_data is None:
            continue
        x = np.full(n, cfg.train_power * t_train / n)
        f = np.full(n, p_data / n)
        gains = direction_gains(x, psi, sig2, cfg.noise_var, p_data, model.n_rx)
        if metric == "mi":
            obj = effective_mi(gains, f, t_train, cfg)
        else:
            obj = effective_weighted_mse(gains, f, weights, t_train, cfg)
        candidate = JointSolution(
            x_powers=x,
            f_powers=f,
            t_train=t_train,
            objective=obj,
            trace=[(0, obj)],
            status=SolveStatus.CONVERGED,
            p_data=p_data,
        )
        if best is None or _better(metric, obj, best.objective):
            best = candidate
    if best is None:
        raise ConfigError("no feasible training length under the energy budget")
    return best
