"""LMMSE channel estimation and structured training design.

The estimator observes Y = H X + N over the training phase and forms
H_hat = Y G with the linear MMSE filter G.  Closed forms used throughout:

* filter          G = (X^H R_H X + R_N)^{-1} X^H R_H, with R_H = n_rx * Psi
* error Gram      E{dH^H dH} = n_rx * Phi,
                  Phi = (Psi^{-1} + n_rx X R_N^{-1} X^H)^{-1}
* estimate Gram   E{H_hat^H H_hat} = n_rx * (Psi - Phi)

The jointly optimal training matrix is X = U_Psi Lambda_X U_RN^H: the left
factor is the correlation eigenbasis (eigenvalues descending), the right
factor the noise eigenbasis ordered by ascending noise eigenvalue, and
Lambda_X carries the per-direction amplitudes.  Under that structure Phi is
diagonal in the correlation eigenbasis, which is what lets every downstream
optimizer work on scalars.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import (
    ChannelRealization,
    CorrelatedChannelModel,
    _canonicalize_columns,
    complex_gaussian,
    hermitian_sqrt,
)
from .waterfill import bisect_budget

MAX_CONDITION = 1e12


def _noise_evd_ascending(r_n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """EVD of the training-noise Gram with eigenvalues ascending
    (equivalently, inverse eigenvalues descending)."""
    r_n = np.asarray(r_n)
    r_n = (r_n + r_n.conj().T) / 2
    evals, evecs = np.linalg.eigh(r_n)
    if evals[0] <= 0:
        raise ValueError("training-noise covariance must be positive definite")
    return evals, _canonicalize_columns(evecs)


def lmmse_filter(x_matrix: np.ndarray, r_h: np.ndarray, r_n: np.ndarray) -> np.ndarray:
    """LMMSE filter G = (X^H R_H X + R_N)^{-1} X^H R_H.

    Solved by decomposition, never an explicit inverse; raises when the inner
    Gram is conditioned worse than 1e12.
    """
    x = np.asarray(x_matrix)
    inner = x.conj().T @ r_h @ x + r_n
    inner = (inner + inner.conj().T) / 2
    w = np.linalg.eigvalsh(inner)
    if w[0] <= 0 or w[-1] / w[0] > MAX_CONDITION:
        raise np.linalg.LinAlgError(
            f"estimation Gram condition {w[-1] / max(w[0], 1e-300):.3e} exceeds "
            f"{MAX_CONDITION:.0e}"
        )
    return np.linalg.solve(inner, x.conj().T @ r_h)


def mse_matrix(x_matrix: np.ndarray, model: CorrelatedChannelModel, r_n: np.ndarray) -> np.ndarray:
    """Estimation-error Gram E{dH^H dH} = n_rx (Psi^{-1} + n_rx X R_N^{-1} X^H)^{-1}
    for an arbitrary training matrix."""
    x = np.asarray(x_matrix)
    xr = np.linalg.solve(np.asarray(r_n), x.conj().T)  # R_N^{-1} X^H
    inner = np.linalg.inv(model.tx_corr) + model.n_rx * (x @ xr)
    out = model.n_rx * np.linalg.inv(inner)
    return (out + out.conj().T) / 2


@dataclass(frozen=True, eq=False)
class TrainingDesign:
    """Structured training matrix plus the covariance algebra it induces.

    ``error_cov`` is the per-receive-antenna error covariance Phi and
    ``est_corr`` the estimated-channel Gram expectation n_rx * (Psi - Phi).
    ``error_cov_evals`` are Phi's eigenvalues in the correlation eigenbasis
    and ``noise_evals`` the training-noise eigenvalue paired with each
    direction (ascending order, matching descending correlation eigenvalues).
    """

    x_powers: np.ndarray
    t_train: int
    x_matrix: np.ndarray
    error_cov: np.ndarray
    est_corr: np.ndarray
    error_cov_evals: np.ndarray
    noise_evals: np.ndarray
    r_n: np.ndarray


@dataclass(frozen=True, eq=False)
class EstimationOutput:
    """LMMSE estimate of one training block."""

    h_hat: np.ndarray
    g_e: np.ndarray
    error_cov_theoretical: np.ndarray


def build_training(
    model: CorrelatedChannelModel,
    r_n: np.ndarray,
    x_powers: np.ndarray,
    t_train: int,
) -> TrainingDesign:
    """Assemble the structured training matrix for given per-direction powers.

    ``x_powers`` are squared amplitudes per correlation eigen-direction
    (descending eigenvalue order); at most min(n_tx, t_train) of them may be
    positive.  The i-th direction pairs with the i-th smallest noise
    eigenvalue.
    """
    n_tx = model.n_tx
    x_powers = np.asarray(x_powers, dtype=float)
    if x_powers.size > n_tx:
        raise ValueError(f"got {x_powers.size} training powers for {n_tx} directions")
    x_powers = np.pad(x_powers, (0, n_tx - x_powers.size))
    if np.any(x_powers < -1e-15):
        raise ValueError("training powers must be nonnegative")
    x_powers = np.maximum(x_powers, 0.0)
    k = min(n_tx, t_train)
    if np.count_nonzero(x_powers > 0) > k:
        raise ValueError(
            f"{np.count_nonzero(x_powers > 0)} active directions need at least "
            f"that many training symbols (t_train={t_train}, n_tx={n_tx})"
        )
    if np.any(x_powers[k:] > 0):
        raise ValueError("powers beyond the excitable directions must be zero")

    sig2_asc, u_rn = _noise_evd_ascending(r_n)
    lam_x = np.zeros((n_tx, t_train))
    lam_x[np.arange(k), np.arange(k)] = np.sqrt(x_powers[:k])
    x_matrix = model.tx_corr_evecs @ lam_x @ u_rn.conj().T

    noise_evals = np.full(n_tx, sig2_asc[-1])
    noise_evals[:k] = sig2_asc[:k]
    # phi = 1/(1/psi + s) and psi - phi = psi^2 s / (1 + psi s); the product
    # forms avoid cancellation so untrained directions give exact zeros
    psi = model.tx_corr_evals
    s = model.n_rx * x_powers / noise_evals
    phi_evals = psi / (1.0 + psi * s)
    gap_evals = psi**2 * s / (1.0 + psi * s)
    u = model.tx_corr_evecs
    error_cov = u * phi_evals @ u.conj().T
    error_cov = (error_cov + error_cov.conj().T) / 2
    est_corr = model.n_rx * (u * gap_evals @ u.conj().T)
    est_corr = (est_corr + est_corr.conj().T) / 2
    return TrainingDesign(
        x_powers=x_powers,
        t_train=int(t_train),
        x_matrix=x_matrix,
        error_cov=error_cov,
        est_corr=est_corr,
        error_cov_evals=phi_evals,
        noise_evals=noise_evals,
        r_n=np.asarray(r_n),
    )


def error_covariance(
    training: TrainingDesign, model: CorrelatedChannelModel, r_n: np.ndarray | None = None
) -> np.ndarray:
    """Estimation-error Gram n_rx * Phi of a training design."""
    return mse_matrix(training.x_matrix, model, training.r_n if r_n is None else r_n)


def training_power_mse_waterfill(
    model: CorrelatedChannelModel, r_n: np.ndarray, budget: float
) -> np.ndarray:
    """Training powers minimizing the estimation MSE trace under a budget.

    Per direction the error is 1 / (1/psi_i + g_i x_i) with g_i = n_rx/sig2_i;
    the KKT solution is x_i = (sqrt(g_i/mu)/g_i - 1/(g_i psi_i))^+ with the
    multiplier pinned to the budget by bisection.
    """
    if budget <= 0:
        raise ValueError("training energy budget must be positive")
    sig2_asc, _ = _noise_evd_ascending(np.asarray(r_n))
    n_dir = min(model.n_tx, sig2_asc.size)
    psi = model.tx_corr_evals[:n_dir]
    g = model.n_rx / sig2_asc[:n_dir]

    def allocation(mu: float) -> np.ndarray:
        return np.maximum(np.sqrt(g / mu) / g - 1.0 / (g * psi), 0.0)

    mu_upper = float(np.max(g * psi**2))
    powers = bisect_budget(allocation, mu_upper, budget)
    out = np.zeros(model.n_tx)
    out[:n_dir] = powers
    return out


def estimate(
    realization: ChannelRealization,
    training: TrainingDesign,
    model: CorrelatedChannelModel,
    rng: np.random.Generator,
) -> EstimationOutput:
    """Run one noisy training block through the LMMSE estimator.

    The noise block satisfies E{N^H N} = R_N (rows i.i.d. with covariance
    R_N / n_rx), which makes the per-row filter coincide with the aggregate
    one and the error rows i.i.d. with covariance Phi.
    """
    n_rx = model.n_rx
    x = training.x_matrix
    noise = complex_gaussian(rng, (n_rx, training.t_train)) / np.sqrt(n_rx)
    noise = noise @ hermitian_sqrt(training.r_n)
    y = realization.h @ x + noise
    g = lmmse_filter(x, n_rx * model.tx_corr, training.r_n)
    return EstimationOutput(
        h_hat=y @ g,
        g_e=g,
        error_cov_theoretical=n_rx * training.error_cov,
    )
