"""Optimal precoder structure and the effective-metric evaluators.

The data-phase figure of merit is the matrix SNR

    F^H Hhat^H Hhat F / (noise_var + tr(Phi F F^H)),

whose denominator is the variance of the equivalent noise (receiver noise
plus residual estimation error leaking through the precoder).  The change of
variables

    F_tilde = (noise_var I + p_data Phi)^{1/2} F / sqrt(noise_var + tr(Phi F F^H))

turns the denominator-coupled power constraint into the plain constraint
tr(F_tilde F_tilde^H) <= p_data.  Every Pareto-optimal transformed precoder
factors as V Lambda U^H where V holds the right singular vectors of the
whitened effective channel (singular values descending) and U depends only on
the objective family; the original precoder is recovered in closed form with
tr(F F^H) = p_data.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .channel import (
    CorrelatedChannelModel,
    _canonicalize_columns,
    dft_unitary,
    hermitian_sqrt,
    inv_hermitian_sqrt,
    sorted_evd,
)
from .config import ScenarioConfig
from .estimation import TrainingDesign


class ObjectiveKind(enum.Enum):
    """Objective families with a known optimal right unitary."""

    MI = "mi"
    SUM_MSE = "sum_mse"
    WEIGHTED_MI = "weighted_mi"
    WEIGHTED_MSE = "weighted_mse"
    SCHUR_CONVEX = "schur_convex"
    SCHUR_CONCAVE = "schur_concave"


@dataclass(frozen=True, eq=False)
class EffectiveNoise:
    """Scalar variance of the equivalent data-phase noise."""

    r_v_scale: float


@dataclass(frozen=True, eq=False)
class PrecoderDesign:
    """Structured precoder: factors, transformed matrix, and recovered F."""

    f_powers: np.ndarray
    v_h: np.ndarray
    u_f: np.ndarray
    f_tilde: np.ndarray
    f_matrix: np.ndarray
    objective_kind: ObjectiveKind


def equivalent_noise_scale(f: np.ndarray, error_cov: np.ndarray, noise_var: float) -> EffectiveNoise:
    """noise_var + tr(Phi F F^H)."""
    scale = noise_var + float(np.real(np.trace(error_cov @ f @ f.conj().T)))
    return EffectiveNoise(r_v_scale=scale)


def matrix_snr(
    f: np.ndarray, h_hat: np.ndarray, error_cov: np.ndarray, noise_var: float
) -> np.ndarray:
    """Matrix-valued SNR of the estimated channel through a precoder."""
    scale = equivalent_noise_scale(f, error_cov, noise_var).r_v_scale
    hf = h_hat @ f
    out = hf.conj().T @ hf / scale
    return (out + out.conj().T) / 2


def effective_channel_factor(
    model: CorrelatedChannelModel,
    training: TrainingDesign,
    cfg: ScenarioConfig,
    p_data: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """SVD factors of the whitened effective channel.

    Decomposes est_corr^{1/2} (noise_var I + p_data Phi)^{-1/2} and returns
    its right singular vectors (columns) together with the singular values in
    descending order.  The squared singular values are the per-direction gains
    seen by the transformed precoder.
    """
    if p_data is None:
        p_data = cfg.data_power_at(training.t_train)
        if p_data is None:
            raise ValueError(
                f"t_train={training.t_train} is infeasible under the energy budget"
            )
    whitener = inv_hermitian_sqrt(
        cfg.noise_var * np.eye(model.n_tx) + p_data * training.error_cov
    )
    # est_corr is PSD by construction; clip eigenvalue rounding noise so the
    # zero-training limit (est_corr numerically ~ 0) stays in domain
    evecs, evals = sorted_evd(training.est_corr)
    corr_sqrt = evecs * np.sqrt(np.maximum(evals, 0.0)) @ evecs.conj().T
    factor = corr_sqrt @ whitener
    u, svals, vh = np.linalg.svd(factor)
    return _canonicalize_columns(vh.conj().T), svals


def objective_unitary(
    kind: ObjectiveKind, n_data: int, aux: np.ndarray | None = None
) -> np.ndarray:
    """Optimal right unitary of the transformed precoder per objective family.

    Identity for plain and weighted-free objectives (for plain MI any unitary
    is optimal; identity keeps outputs deterministic), the weighting-matrix
    eigenbasis (eigenvalues descending) for the weighted objectives, and the
    DFT matrix for additively Schur-convex objectives.
    """
    if kind in (ObjectiveKind.MI, ObjectiveKind.SUM_MSE, ObjectiveKind.SCHUR_CONCAVE):
        return np.eye(n_data)
    if kind is ObjectiveKind.SCHUR_CONVEX:
        return dft_unitary(n_data)
    if kind in (ObjectiveKind.WEIGHTED_MI, ObjectiveKind.WEIGHTED_MSE):
        if aux is None:
            raise ValueError(f"{kind.value} requires the weighting matrix")
        evecs, _ = sorted_evd(np.asarray(aux))
        return evecs
    raise ValueError(f"unknown objective kind {kind!r}")


def _fixed_data_power(cfg: ScenarioConfig, p_data: float | None) -> float:
    if p_data is not None:
        return p_data
    if cfg.data_power_cap is None:
        raise ValueError(
            "p_data must be given explicitly when the scenario derives the "
            "data power from the training length"
        )
    return cfg.data_power_cap


def transform_precoder(
    f: np.ndarray, error_cov: np.ndarray, cfg: ScenarioConfig, p_data: float | None = None
) -> np.ndarray:
    """Map a precoder to its transformed variable F_tilde."""
    p_data = _fixed_data_power(cfg, p_data)
    n = f.shape[0]
    scale = equivalent_noise_scale(f, error_cov, cfg.noise_var).r_v_scale
    return hermitian_sqrt(cfg.noise_var * np.eye(n) + p_data * error_cov) @ f / np.sqrt(scale)


def recover_precoder(
    f_tilde: np.ndarray,
    error_cov: np.ndarray,
    cfg: ScenarioConfig,
    p_data: float | None = None,
) -> np.ndarray:
    """Recover the transmit precoder from its transformed variable.

    F = sqrt(p_data / tr[(noise_var I + p_data Phi)^{-1} Ft Ft^H])
        * (noise_var I + p_data Phi)^{-1/2} Ft

    and the result spends the data power exactly: tr(F F^H) = p_data.
    A zero transformed precoder is degenerate; the zero precoder is returned
    with a warning.
    """
    p_data = _fixed_data_power(cfg, p_data)
    f_tilde = np.asarray(f_tilde)
    if not np.any(np.abs(f_tilde) > 0):
        warnings.warn("zero transformed precoder, returning the zero precoder")
        return np.zeros_like(f_tilde)
    n = f_tilde.shape[0]
    whitener = inv_hermitian_sqrt(cfg.noise_var * np.eye(n) + p_data * error_cov)
    wf = whitener @ f_tilde
    denom = float(np.real(np.trace(wf @ wf.conj().T)))
    return np.sqrt(p_data / denom) * wf


def build_precoder(
    model: CorrelatedChannelModel,
    training: TrainingDesign,
    cfg: ScenarioConfig,
    kind: ObjectiveKind,
    f_powers: np.ndarray,
    aux: np.ndarray | None = None,
    p_data: float | None = None,
) -> PrecoderDesign:
    """Assemble the structured precoder for given per-stream powers.

    ``f_powers[i]`` pairs with the i-th largest singular value of the
    whitened effective channel.
    """
    f_powers = np.asarray(f_powers, dtype=float)
    if f_powers.size != cfg.n_data:
        raise ValueError(f"expected {cfg.n_data} stream powers, got {f_powers.size}")
    v_h, _ = effective_channel_factor(model, training, cfg, p_data)
    u_f = objective_unitary(kind, cfg.n_data, aux)
    f_tilde = v_h[:, : cfg.n_data] * np.sqrt(f_powers) @ u_f.conj().T
    f_matrix = recover_precoder(f_tilde, training.error_cov, cfg, p_data)
    return PrecoderDesign(
        f_powers=f_powers,
        v_h=v_h,
        u_f=u_f,
        f_tilde=f_tilde,
        f_matrix=f_matrix,
        objective_kind=kind,
    )


def _check_t_train(t_train: int, cfg: ScenarioConfig) -> None:
    if not 1 <= t_train <= cfg.coherence_time - 1:
        raise ValueError(
            f"t_train={t_train} outside [1, {cfg.coherence_time - 1}]"
        )


def effective_mi(
    snr_eigs: np.ndarray, f_powers: np.ndarray, t_train: int, cfg: ScenarioConfig
) -> float:
    """Data-phase-fraction-scaled mutual information (natural log)."""
    _check_t_train(t_train, cfg)
    t = cfg.coherence_time
    return (t - t_train) / t * float(np.sum(np.log1p(np.asarray(f_powers) * np.asarray(snr_eigs))))


def effective_weighted_mse(
    snr_eigs: np.ndarray,
    f_powers: np.ndarray,
    weights: np.ndarray,
    t_train: int,
    cfg: ScenarioConfig,
) -> float:
    """Training-overhead-scaled weighted MSE; zero-power streams contribute
    their full weight."""
    _check_t_train(t_train, cfg)
    t = cfg.coherence_time
    mse = np.asarray(weights) / (1.0 + np.asarray(f_powers) * np.asarray(snr_eigs))
    return t / (t - t_train) * float(np.sum(mse))
