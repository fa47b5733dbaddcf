"""Joint optimization when the transmitter shares the receiver's estimate.

With estimated CSI the per-realization data powers are the classical
water-filling over the eigenvalues of S^{1/2} Hw^H Hw S^{1/2}, where Hw is the
whitened channel draw and the diagonal S collects the per-direction
post-estimation gains

    s_i = n_rx x_i^2 psi_i / sig2_i
          / (noise_var/psi_i + n_rx noise_var x_i^2/sig2_i + p_data).

The remaining variables (training powers and training length) are optimized
against the Monte Carlo expectation of the resulting objective.  Two schemes
are provided: uniform training powers with a one-dimensional search over the
training length, and a deterministic surrogate that replaces the random
eigenvalues by the eigenvalues of S^{1/2} E{Hw^H Hw} S^{1/2} = n_rx * S and
optimizes the training powers by projected gradient ascent.

All expectations use common random numbers: every training-length candidate
sees the same channel draws, so the one-dimensional search is deterministic
and variance-reduced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import CorrelatedChannelModel, complex_gaussian, derived_rng
from .config import ConfigError, ScenarioConfig
from .statcsi import JointSolution, SolveStatus, _candidate_lengths, _normalize_metric
from .waterfill import (
    capacity_value_batch,
    capacity_waterfill,
    project_capped_simplex,
    weighted_mse_value_batch,
    weighted_mse_waterfill,
)

PGA_MAX_ITERS = 500
PGA_REL_TOL = 1e-8
PGA_ARMIJO = 1e-4
PGA_SHRINK = 0.5


@dataclass(frozen=True, eq=False)
class McConfig:
    """Monte Carlo settings for the statistical expectations."""

    n_trials: int = 10_000
    seed: int = 0
    active_set_tol: float = 1e-12

    def __post_init__(self):
        if self.n_trials < 100:
            raise ConfigError("n_trials must be at least 100")
        if self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        if not self.active_set_tol > 0:
            raise ConfigError("active_set_tol must be positive")


@dataclass(frozen=True, eq=False)
class SigmaSpectrum:
    """Per-direction gains of the whitened estimated channel (one entry per
    data stream, zero where the direction is untrained)."""

    lambda_sigma: np.ndarray


def _resolve_p_data(cfg: ScenarioConfig, p_data: float | None) -> float:
    if p_data is not None:
        return p_data
    if cfg.derive_data_power:
        raise ConfigError(
            "p_data must be given explicitly when the scenario derives the "
            "data power from the training length"
        )
    return cfg.data_power_cap


def sigma_spectrum(
    x_powers: np.ndarray,
    model: CorrelatedChannelModel,
    cfg: ScenarioConfig,
    p_data: float | None = None,
) -> SigmaSpectrum:
    """Gains s_i of the estimated-CSI matrix SNR for given training powers.

    The numerator carries a single n_rx factor; the statistical-CSI gain of
    the same direction is n_rx times larger because there the white channel
    Gram is replaced by its expectation n_rx * I.
    """
    p_data = _resolve_p_data(cfg, p_data)
    x = np.asarray(x_powers, dtype=float)
    psi = model.tx_corr_evals[: x.size]
    sig2 = cfg.train_noise_level()
    lam = (model.n_rx * x * psi / sig2) / (
        cfg.noise_var / psi + model.n_rx * cfg.noise_var * x / sig2 + p_data
    )
    return SigmaSpectrum(lambda_sigma=lam)


def _gram_draws(n_rx: int, n_dirs: int, mc: McConfig) -> np.ndarray:
    """Whitened channel Grams Hw^H Hw for every trial, (n_trials, n, n)."""
    rng = derived_rng(mc.seed, n_rx, n_dirs)
    grams = np.empty((mc.n_trials, n_dirs, n_dirs), dtype=complex)
    chunk = max(int(4e6 // max(n_rx * n_dirs, 1)), 1)
    for start in range(0, mc.n_trials, chunk):
        stop = min(start + chunk, mc.n_trials)
        hw = complex_gaussian(rng, (stop - start, n_rx, n_dirs))
        grams[start:stop] = hw.conj().transpose(0, 2, 1) @ hw
    return grams


def _spectrum_eigs(spectrum: SigmaSpectrum, grams: np.ndarray) -> np.ndarray:
    s = np.sqrt(np.maximum(spectrum.lambda_sigma, 0.0))
    return np.linalg.eigvalsh(grams * np.outer(s, s)[None, :, :])


def mc_mi_samples(
    spectrum: SigmaSpectrum,
    cfg: ScenarioConfig,
    mc: McConfig,
    p_data: float | None = None,
    grams: np.ndarray | None = None,
) -> np.ndarray:
    """Per-trial water-filled mutual information (no overhead scaling)."""
    p_data = _resolve_p_data(cfg, p_data)
    if not np.any(spectrum.lambda_sigma > 0):
        return np.zeros(mc.n_trials)
    if grams is None:
        grams = _gram_draws(cfg.n_rx, spectrum.lambda_sigma.size, mc)
    eigs = _spectrum_eigs(spectrum, grams)
    return capacity_value_batch(eigs, p_data, tol=mc.active_set_tol)


def mc_effective_mi(
    spectrum: SigmaSpectrum,
    cfg: ScenarioConfig,
    mc: McConfig,
    p_data: float | None = None,
    grams: np.ndarray | None = None,
) -> float:
    """Expected per-realization mutual information under optimal per-draw
    power loading; the caller applies the data-phase fraction."""
    return float(mc_mi_samples(spectrum, cfg, mc, p_data, grams).mean())


def mc_wmse_samples(
    spectrum: SigmaSpectrum,
    weights: np.ndarray,
    cfg: ScenarioConfig,
    mc: McConfig,
    p_data: float | None = None,
    grams: np.ndarray | None = None,
) -> np.ndarray:
    """Per-trial optimal weighted MSE (no overhead scaling).

    ``weights[i]`` pairs with the i-th largest eigenvalue of each draw,
    matching the descending eigen-order convention of the weighting matrix.
    """
    p_data = _resolve_p_data(cfg, p_data)
    weights = np.asarray(weights, dtype=float)
    if not np.any(weights > 0):
        return np.zeros(mc.n_trials)
    if not np.any(spectrum.lambda_sigma > 0):
        return np.full(mc.n_trials, float(weights.sum()))
    if grams is None:
        grams = _gram_draws(cfg.n_rx, spectrum.lambda_sigma.size, mc)
    eigs = _spectrum_eigs(spectrum, grams)[:, ::-1]  # descending per row
    return weighted_mse_value_batch(eigs, weights, p_data, tol=mc.active_set_tol)


def mc_effective_wmse(
    spectrum: SigmaSpectrum,
    weights: np.ndarray,
    cfg: ScenarioConfig,
    mc: McConfig,
    p_data: float | None = None,
    grams: np.ndarray | None = None,
) -> float:
    """Expected per-realization weighted MSE under optimal per-draw power
    loading; the caller applies the overhead scaling."""
    return float(mc_wmse_samples(spectrum, weights, cfg, mc, p_data, grams).mean())


# -- uniform training powers, one-dimensional search -------------------------


def _paired_wmse_powers(gains, weights, budget):
    """Data powers and effective weights in direction order, with weights
    paired to the gains in descending order before the allocation."""
    order = np.argsort(-np.asarray(gains), kind="stable")
    f_sorted = weighted_mse_waterfill(np.asarray(gains)[order], weights, budget)
    f = np.empty_like(f_sorted)
    f[order] = f_sorted
    w_aligned = np.empty_like(np.asarray(weights, dtype=float))
    w_aligned[order] = weights
    return f, w_aligned


@dataclass(frozen=True, eq=False)
class TrainingLengthCurve:
    """Objective versus training length, evaluated with common random
    numbers across all candidates."""

    t_train: np.ndarray
    objective: np.ndarray
    std_error: np.ndarray
    p_data: np.ndarray


def uniform_training_curve(
    cfg: ScenarioConfig,
    model: CorrelatedChannelModel,
    metric: str,
    mc: McConfig,
    weights: np.ndarray | None = None,
    t_train_values=None,
) -> TrainingLengthCurve:
    """Effective objective of uniform training powers per training length."""
    metric, weights = _normalize_metric(metric, cfg.n_data, weights)
    candidates = [
        t for t in _candidate_lengths(cfg, t_train_values) if cfg.data_power_at(t) is not None
    ]
    if not candidates:
        raise ConfigError("no feasible training length under the energy budget")
    grams = _gram_draws(cfg.n_rx, cfg.n_data, mc)
    big_t = cfg.coherence_time
    objs, ses, pds = [], [], []
    for t_train in candidates:
        p_data = cfg.data_power_at(t_train)
        x = np.full(cfg.n_data, cfg.train_power * t_train / cfg.n_data)
        spectrum = sigma_spectrum(x, model, cfg, p_data)
        if metric == "mi":
            samples = (big_t - t_train) / big_t * mc_mi_samples(
                spectrum, cfg, mc, p_data, grams
            )
        else:
            samples = big_t / (big_t - t_train) * mc_wmse_samples(
                spectrum, weights, cfg, mc, p_data, grams
            )
        objs.append(samples.mean())
        ses.append(samples.std(ddof=1) / np.sqrt(samples.size))
        pds.append(p_data)
    return TrainingLengthCurve(
        t_train=np.asarray(candidates),
        objective=np.asarray(objs),
        std_error=np.asarray(ses),
        p_data=np.asarray(pds),
    )


def solve_uniform_training(
    cfg: ScenarioConfig,
    model: CorrelatedChannelModel,
    metric: str = "mi",
    mc: McConfig = McConfig(),
    weights: np.ndarray | None = None,
    t_train_values=None,
) -> JointSolution:
    """Uniform training powers; the training length picks the best point of
    the common-random-number curve (ties to the smallest length)."""
    metric, weights_n = _normalize_metric(metric, cfg.n_data, weights)
    curve = uniform_training_curve(cfg, model, metric, mc, weights_n, t_train_values)
    idx = int(np.argmax(curve.objective)) if metric == "mi" else int(np.argmin(curve.objective))
    t_train = int(curve.t_train[idx])
    p_data = float(curve.p_data[idx])
    x = np.full(cfg.n_data, cfg.train_power * t_train / cfg.n_data)
    approx_gains = model.n_rx * sigma_spectrum(x, model, cfg, p_data).lambda_sigma
    if metric == "mi":
        f = capacity_waterfill(approx_gains, p_data)
    else:
        f, _ = _paired_wmse_powers(approx_gains, weights_n, p_data)
    return JointSolution(
        x_powers=x,
        f_powers=f,
        t_train=t_train,
        objective=float(curve.objective[idx]),
        trace=[(0, float(curve.objective[idx]))],
        status=SolveStatus.CONVERGED,
        p_data=p_data,
    )


# -- eigenvalue-expectation surrogate ----------------------------------------


def _surrogate_value_grad(metric, x, psi, sig2, model, cfg, p_data, weights):
    """Deterministic surrogate objective (sign-flipped for minimization) and
    its envelope gradient in the training powers."""
    n_rx = model.n_rx
    denom = cfg.noise_var / psi + n_rx * cfg.noise_var * x / sig2 + p_data
    lam = n_rx * (n_rx * x * psi / sig2) / denom
    alpha = n_rx * psi / sig2
    beta = n_rx * cfg.noise_var / sig2
    c = cfg.noise_var / psi + p_data
    dlam = n_rx * alpha * c / (c + beta * x) ** 2
    if metric == "mi":
        value = float(capacity_value_batch(lam[None, :], p_data)[0])
        f = capacity_waterfill(lam, p_data)
        grad = f / (1.0 + f * lam) * dlam
        return value, grad
    f, w_aligned = _paired_wmse_powers(lam, weights, p_data)
    value = -float(
        weighted_mse_value_batch(np.sort(lam)[::-1][None, :], weights, p_data)[0]
    )
    grad = w_aligned * f / (1.0 + f * lam) ** 2 * dlam
    return value, grad


def _pga_maximize(value_grad, x0, budget):
    """Projected-gradient ascent with Armijo backtracking on the capped
    simplex.  Returns (x, value trace, converged flag)."""
    x = np.asarray(x0, dtype=float)
    value, grad = value_grad(x)
    trace = [value]
    step = budget / (np.linalg.norm(grad) + 1e-300)
    converged = False
    for _ in range(PGA_MAX_ITERS):
        t = step
        accepted = False
        for _ in range(60):
            x_new = project_capped_simplex(x + t * grad, budget)
            dx = x_new - x
            if np.linalg.norm(dx) <= 1e-14 * (1.0 + np.linalg.norm(x)):
                break
            value_new, grad_new = value_grad(x_new)
            if value_new >= value + PGA_ARMIJO * np.dot(grad, dx):
                accepted = True
                break
            t *= PGA_SHRINK
        if not accepted:
            converged = True  # projected stationary point
            break
        x, prev, value, grad = x_new, value, value_new, grad_new
        trace.append(value)
        step = t / PGA_SHRINK
        if abs(value - prev) <= PGA_REL_TOL * (1.0 + abs(value)):
            converged = True
            break
    return x, trace, converged


def solve_eig_approx(
    cfg: ScenarioConfig,
    model: CorrelatedChannelModel,
    metric: str = "mi",
    mc_validation: McConfig | None = None,
    weights: np.ndarray | None = None,
    t_train_values=None,
) -> JointSolution:
    """Optimize training powers against the eigenvalue-expectation surrogate.

    The random eigenvalues are replaced by n_rx times the spectrum gains,
    making the objective deterministic; training powers are then found by
    projected-gradient ascent under the training energy budget, and the
    training length by the usual one-dimensional search.  When
    ``mc_validation`` is given the returned solution also carries its full
    Monte Carlo re-evaluation in ``mc_objective``.
    """
    metric, weights_n = _normalize_metric(metric, cfg.n_data, weights)
    psi = model.tx_corr_evals[: cfg.n_data]
    sig2 = cfg.train_noise_level()
    big_t = cfg.coherence_time
    n = cfg.n_data
    best = None  # (objective, solution fields...)
    for t_train in _candidate_lengths(cfg, t_train_values):
        p_data = cfg.data_power_at(t_train)
        if p_data is None:
            continue
        budget = cfg.train_power * t_train

        def value_grad(x, _pd=p_data):
            return _surrogate_value_grad(metric, x, psi, sig2, model, cfg, _pd, weights_n)

        x, raw_trace, converged = _pga_maximize(value_grad, np.full(n, budget / n), budget)
        if metric == "mi":
            scale = (big_t - t_train) / big_t
            trace = [(i, scale * v) for i, v in enumerate(raw_trace)]
        else:
            scale = big_t / (big_t - t_train)
            trace = [(i, scale * -v) for i, v in enumerate(raw_trace)]
        obj = trace[-1][1]
        if best is None or (obj > best[0] if metric == "mi" else obj < best[0]):
            best = (obj, t_train, p_data, x, trace, converged)
    if best is None:
        raise ConfigError("no feasible training length under the energy budget")
    obj, t_train, p_data, x, trace, converged = best
    approx_gains = model.n_rx * sigma_spectrum(x, model, cfg, p_data).lambda_sigma
    if metric == "mi":
        f = capacity_waterfill(approx_gains, p_data)
    else:
        f, _ = _paired_wmse_powers(approx_gains, weights_n, p_data)
    mc_objective = None
    if mc_validation is not None:
        spectrum = sigma_spectrum(x, model, cfg, p_data)
        if metric == "mi":
            mc_objective = (big_t - t_train) / big_t * mc_effective_mi(
                spectrum, cfg, mc_validation, p_data
            )
        else:
            mc_objective = big_t / (big_t - t_train) * mc_effective_wmse(
                spectrum, weights_n, cfg, mc_validation, p_data
            )
    return JointSolution(
        x_powers=x,
        f_powers=f,
        t_train=t_train,
        objective=obj,
        trace=trace,
        status=SolveStatus.CONVERGED if converged else SolveStatus.MAX_ITERS,
        p_data=p_data,
        mc_objective=mc_objective,
    )
