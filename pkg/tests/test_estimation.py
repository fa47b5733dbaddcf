"""LMMSE estimation algebra, structured training, and its Monte Carlo checks."""

import numpy as np
import pytest
from conftest import make_scenario

from mimojoint import (
    ChannelRealization,
    CorrelatedChannelModel,
    build_training,
    complex_gaussian,
    derived_rng,
    error_covariance,
    estimate,
    hermitian_sqrt,
    lmmse_filter,
    mse_matrix,
    sample_channel,
    training_power_mse_waterfill,
)


def mse_trace_of_filter(x, g, r_h, r_n):
    """Independent oracle: the error Gram trace of an arbitrary linear filter,
    evaluated from the quadratic form (I - XG)^H R_H (I - XG) + G^H R_N G."""
    eye = np.eye(x.shape[0])
    a = eye - x @ g
    m = a.conj().T @ r_h @ a + g.conj().T @ r_n @ g
    return float(np.real(np.trace(m)))


def test_lmmse_filter_scalar_case():
    g = lmmse_filter(np.array([[1.0]]), np.array([[1.0]]), np.array([[1.0]]))
    assert g[0, 0] == pytest.approx(0.5)


def test_lmmse_filter_zero_training_gives_zero():
    g = lmmse_filter(np.zeros((3, 6)), 2 * np.eye(3), np.eye(6))
    np.testing.assert_allclose(g, 0.0)


def test_lmmse_filter_minimizes_mse_trace():
    # perturbation oracle: no filter in a random neighborhood does better
    rng = derived_rng(21, 0)
    n_tx, t = 4, 8
    x = complex_gaussian(rng, (n_tx, t))
    model = CorrelatedChannelModel.from_exponential(0.6, n_tx, 3)
    r_h = model.n_rx * model.tx_corr
    r_n = 0.5 * np.eye(t)
    g0 = lmmse_filter(x, r_h, r_n)
    base = mse_trace_of_filter(x, g0, r_h, r_n)
    for _ in range(1000):
        delta = complex_gaussian(rng, g0.shape)
        perturbed = mse_trace_of_filter(x, g0 + 1e-3 * delta, r_h, r_n)
        assert perturbed >= base - 1e-12


def test_lmmse_filter_rejects_ill_conditioned():
    x = np.concatenate([np.eye(2), np.zeros((2, 2))], axis=1)  # t > n_tx, rank 2
    with pytest.raises(np.linalg.LinAlgError):
        lmmse_filter(x, np.eye(2), 1e-14 * np.eye(4))


def test_error_covariance_zero_training_is_prior():
    cfg, model = make_scenario(n=3)
    training = build_training(model, cfg.train_noise_matrix(4), np.zeros(3), 4)
    np.testing.assert_allclose(
        error_covariance(training, model), model.n_rx * model.tx_corr, atol=1e-12
    )


def test_error_covariance_scalar_case():
    # psi = 1, n_rx = 1, x^2/sigma^2 = 9 -> error 1/(1 + 9) = 0.1
    model = CorrelatedChannelModel.from_matrix(np.eye(1), 1)
    phi = mse_matrix(np.array([[3.0]]), model, np.array([[1.0]]))
    assert phi[0, 0] == pytest.approx(0.1)


def test_error_covariance_monte_carlo():
    # Monte Carlo oracle on an unstructured random training matrix
    rng = derived_rng(22, 0)
    n, t, trials = 4, 6, 100_000
    model = CorrelatedChannelModel.from_exponential(0.9, n, n)
    x = complex_gaussian(rng, (n, t))
    r_n = 0.8 * np.eye(t)
    g = lmmse_filter(x, model.n_rx * model.tx_corr, r_n)
    hw = complex_gaussian(rng, (trials, n, n))
    h = hw @ model.tx_corr_sqrt
    noise = complex_gaussian(rng, (trials, n, t)) / np.sqrt(n) @ hermitian_sqrt(r_n)
    dh = h - (h @ x + noise) @ g
    emp = np.einsum("lij,lik->jk", dh.conj(), dh) / trials
    theory = mse_matrix(x, model, r_n)
    assert np.linalg.norm(emp - theory) / np.linalg.norm(theory) <= 0.02


def test_build_training_uncorrelated_uniform():
    cfg, _ = make_scenario(n=4, theta=0.0)
    model = CorrelatedChannelModel.from_exponential(0.0, 4, 4)
    t_train = 6
    budget = cfg.train_power * t_train
    training = build_training(
        model, cfg.train_noise_matrix(t_train), np.full(4, budget / 4), t_train
    )
    x = training.x_matrix
    assert np.real(np.trace(x @ x.conj().T)) == pytest.approx(budget)
    # white noise, identity correlation: scaled orthonormal rows
    np.testing.assert_allclose(
        x @ x.conj().T, (budget / 4) * np.eye(4), atol=1e-10
    )


def test_build_training_error_cov_diagonalizes_in_correlation_basis():
    cfg, model = make_scenario(n=4, snr_db=10.0)
    t_train = 8
    r_n = cfg.train_noise_matrix(t_train)
    powers = training_power_mse_waterfill(model, r_n, cfg.train_power * t_train)
    training = build_training(model, r_n, powers, t_train)
    u = model.tx_corr_evecs
    rotated = u.conj().T @ training.error_cov @ u
    off = rotated - np.diag(np.diag(rotated))
    assert np.linalg.norm(off) <= 1e-10 * np.linalg.norm(rotated)
    # cross-check against the generic formula on the assembled matrix
    theory = mse_matrix(training.x_matrix, model, r_n)
    assert (
        np.linalg.norm(model.n_rx * training.error_cov - theory)
        <= 1e-10 * np.linalg.norm(theory)
    )


def test_build_training_single_direction_rank_one():
    cfg, model = make_scenario(n=4)
    training = build_training(model, cfg.train_noise_matrix(5), [2.0, 0, 0, 0], 5)
    assert np.linalg.matrix_rank(training.x_matrix, tol=1e-10) == 1


def test_build_training_rejects_too_many_directions():
    cfg, model = make_scenario(n=4)
    with pytest.raises(ValueError):
        build_training(model, cfg.train_noise_matrix(2), np.ones(4), 2)


def test_training_mse_waterfill_symmetric_uniform():
    model = CorrelatedChannelModel.from_exponential(0.0, 4, 4)
    powers = training_power_mse_waterfill(model, np.eye(6), 2.0)
    np.testing.assert_allclose(powers, 0.5, atol=1e-9)


def test_training_mse_waterfill_grid_oracle():
    # N = 2, psi = [1, 0.1]: compare against a dense line grid on the budget
    model = CorrelatedChannelModel.from_matrix(np.diag([1.0, 0.1]), 2)
    r_n = 0.7 * np.eye(2)
    budget = 1.0
    g = model.n_rx / 0.7
    powers = training_power_mse_waterfill(model, r_n, budget)
    psi = model.tx_corr_evals

    def objective(x1, x2):
        return 1.0 / (1.0 / psi[0] + g * x1) + 1.0 / (1.0 / psi[1] + g * x2)

    x1 = np.linspace(0.0, budget, 1_000_000)
    grid_best = np.min(objective(x1, budget - x1))
    mine = objective(powers[0], powers[1])
    assert abs(mine - grid_best) <= 1e-4
    # KKT: active directions share the stationarity multiplier
    grads = g / (1.0 / psi + g * powers) ** 2
    active = powers > 1e-12
    assert np.ptp(grads[active]) <= 1e-8 * (1.0 + grads[active].mean())


def test_training_mse_waterfill_vanishing_budget():
    model = CorrelatedChannelModel.from_exponential(0.9, 3, 3)
    powers = training_power_mse_waterfill(model, np.eye(4), 1e-12)
    psi = model.tx_corr_evals
    obj = np.sum(1.0 / (1.0 / psi + 3 * powers))
    assert obj == pytest.approx(psi.sum(), rel=1e-6)


def test_estimate_noiseless_recovers_channel():
    cfg, model = make_scenario(n=4, train_noise_cov=1e-12)
    t_train = 4  # square full-rank training keeps the solve well conditioned
    training = build_training(model, cfg.train_noise_matrix(t_train), np.ones(4), t_train)
    realization = sample_channel(model, derived_rng(31, 0))
    out = estimate(realization, training, model, derived_rng(31, 1))
    rel = np.linalg.norm(out.h_hat - realization.h) / np.linalg.norm(realization.h)
    assert rel <= 1e-4


def test_estimate_zero_training_returns_prior_mean():
    cfg, model = make_scenario(n=3)
    training = build_training(model, cfg.train_noise_matrix(4), np.zeros(3), 4)
    realization = sample_channel(model, derived_rng(32, 0))
    out = estimate(realization, training, model, derived_rng(32, 1))
    np.testing.assert_allclose(out.h_hat, 0.0, atol=1e-14)
    np.testing.assert_allclose(
        out.error_cov_theoretical, model.n_rx * model.tx_corr, atol=1e-12
    )


def test_estimate_deterministic_under_seed():
    cfg, model = make_scenario(n=3)
    training = build_training(model, cfg.train_noise_matrix(4), np.ones(3), 4)
    realization = sample_channel(model, derived_rng(33, 0))
    out1 = estimate(realization, training, model, derived_rng(33, 1))
    out2 = estimate(realization, training, model, derived_rng(33, 1))
    np.testing.assert_array_equal(out1.h_hat, out2.h_hat)


def _estimation_batch(cfg, model, training, trials, seed):
    """Vectorized replica of the estimator's sampling for moment checks."""
    rng = derived_rng(seed, 0)
    g = lmmse_filter(training.x_matrix, model.n_rx * model.tx_corr, training.r_n)
    hw = complex_gaussian(rng, (trials, model.n_rx, model.n_tx))
    h = hw @ model.tx_corr_sqrt
    noise = complex_gaussian(rng, (trials, model.n_rx, training.t_train))
    noise = noise / np.sqrt(model.n_rx) @ hermitian_sqrt(training.r_n)
    h_hat = (h @ training.x_matrix + noise) @ g
    return h, h_hat


def test_estimate_second_moment_matches_est_corr():
    cfg, model = make_scenario(n=4, snr_db=10.0)
    training = build_training(model, cfg.train_noise_matrix(6), np.ones(4), 6)
    h, h_hat = _estimation_batch(cfg, model, training, 100_000, seed=34)
    emp = np.einsum("lij,lik->jk", h_hat.conj(), h_hat) / h.shape[0]
    assert np.linalg.norm(emp - training.est_corr) / np.linalg.norm(training.est_corr) <= 0.02


def test_estimate_wiring_matches_batch_statistics():
    # the per-call estimator agrees with the vectorized statistics
    cfg, model = make_scenario(n=3, snr_db=10.0)
    training = build_training(model, cfg.train_noise_matrix(4), np.ones(3), 4)
    trials = 4000
    gram = np.zeros((3, 3), dtype=complex)
    rng_h = derived_rng(35, 0)
    rng_n = derived_rng(35, 1)
    for _ in range(trials):
        out = estimate(sample_channel(model, rng_h), training, model, rng_n)
        gram += out.h_hat.conj().T @ out.h_hat
    gram /= trials
    assert np.linalg.norm(gram - training.est_corr) / np.linalg.norm(training.est_corr) <= 0.08


def test_orthogonality_principle():
    cfg, model = make_scenario(n=4, snr_db=10.0)
    training = build_training(model, cfg.train_noise_matrix(6), np.ones(4), 6)
    h, h_hat = _estimation_batch(cfg, model, training, 100_000, seed=36)
    cross = np.einsum("lij,lik->jk", h_hat.conj(), h - h_hat) / h.shape[0]
    assert np.linalg.norm(cross) <= 0.02 * np.linalg.norm(training.est_corr)


def test_error_cov_monotone_in_training_power():
    # adding power to any direction shrinks the error covariance in PSD order
    cfg, model = make_scenario(n=4)
    rng = derived_rng(37, 0)
    for _ in range(20):
        powers = rng.uniform(0.1, 2.0, 4)
        i = int(rng.integers(0, 4))
        bumped = powers.copy()
        bumped[i] += 0.3
        t1 = build_training(model, cfg.train_noise_matrix(6), powers, 6)
        t2 = build_training(model, cfg.train_noise_matrix(6), bumped, 6)
        gap_eigs = np.linalg.eigvalsh(t1.error_cov - t2.error_cov)
        assert gap_eigs.min() >= -1e-10


def test_error_plus_estimate_decomposition_identity():
    cfg, model = make_scenario(n=5)
    training = build_training(model, cfg.train_noise_matrix(6), np.ones(5), 6)
    residual = training.error_cov + training.est_corr / model.n_rx - model.tx_corr
    assert np.linalg.norm(residual) <= 1e-12
