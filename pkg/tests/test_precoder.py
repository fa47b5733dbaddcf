"""Precoder structure, recovery, and effective-metric evaluators."""

import numpy as np
import pytest
from conftest import make_scenario

from mimojoint import (
    ObjectiveKind,
    build_precoder,
    build_training,
    complex_gaussian,
    derived_rng,
    dft_unitary,
    direction_gains,
    effective_channel_factor,
    effective_mi,
    effective_weighted_mse,
    matrix_snr,
    objective_unitary,
    recover_precoder,
    sorted_evd,
    transform_precoder,
)


def _structured_setup(n=4, snr_db=10.0, t_train=8, seed=41):
    cfg, model = make_scenario(n=n, snr_db=snr_db)
    rng = derived_rng(seed, 0)
    x_powers = rng.uniform(0.2, 2.0, n)
    x_powers *= cfg.train_power * t_train / x_powers.sum()
    training = build_training(model, cfg.train_noise_matrix(t_train), x_powers, t_train)
    return cfg, model, training, rng


def test_matrix_snr_zero_precoder():
    cfg, model, training, rng = _structured_setup()
    h_hat = complex_gaussian(rng, (4, 4))
    out = matrix_snr(np.zeros((4, 4)), h_hat, training.error_cov, cfg.noise_var)
    np.testing.assert_allclose(out, 0.0)


def test_matrix_snr_perfect_csi_reduction():
    rng = derived_rng(42, 0)
    f = complex_gaussian(rng, (3, 2))
    h_hat = complex_gaussian(rng, (3, 3))
    out = matrix_snr(f, h_hat, np.zeros((3, 3)), 1.0)
    direct = f.conj().T @ h_hat.conj().T @ h_hat @ f
    np.testing.assert_allclose(out, (direct + direct.conj().T) / 2, atol=1e-12)


def test_matrix_snr_evd_roundtrip():
    cfg, model, training, rng = _structured_setup()
    f = complex_gaussian(rng, (4, 4))
    out = matrix_snr(f, complex_gaussian(rng, (4, 4)), training.error_cov, cfg.noise_var)
    evecs, evals = sorted_evd(out)
    assert evals.min() >= -1e-12
    np.testing.assert_allclose(evecs * evals @ evecs.conj().T, out, atol=1e-12)


def test_effective_channel_factor_zero_training():
    cfg, model = make_scenario(n=4)
    training = build_training(model, cfg.train_noise_matrix(4), np.zeros(4), 4)
    _, svals = effective_channel_factor(model, training, cfg)
    np.testing.assert_allclose(svals, 0.0, atol=1e-12)


def test_effective_channel_factor_matches_scalar_gains():
    cfg, model, training, _ = _structured_setup()
    _, svals = effective_channel_factor(model, training, cfg)
    gains = direction_gains(
        training.x_powers,
        model.tx_corr_evals,
        cfg.train_noise_level(),
        cfg.noise_var,
        cfg.data_power_cap,
        model.n_rx,
    )
    np.testing.assert_allclose(
        np.sort(svals**2), np.sort(gains), rtol=1e-10, atol=1e-12
    )


def test_effective_channel_factor_symmetric_case():
    cfg, _ = make_scenario(n=4, theta=0.0)
    from mimojoint import CorrelatedChannelModel

    model = CorrelatedChannelModel.from_exponential(0.0, 4, 4)
    training = build_training(model, cfg.train_noise_matrix(6), np.ones(4), 6)
    _, svals = effective_channel_factor(model, training, cfg)
    assert np.ptp(svals) <= 1e-10 * svals[0]


def test_objective_unitary_table():
    np.testing.assert_allclose(objective_unitary(ObjectiveKind.SUM_MSE, 4), np.eye(4))
    np.testing.assert_allclose(objective_unitary(ObjectiveKind.MI, 3), np.eye(3))
    np.testing.assert_allclose(
        objective_unitary(ObjectiveKind.SCHUR_CONVEX, 4), dft_unitary(4)
    )
    np.testing.assert_allclose(objective_unitary(ObjectiveKind.SCHUR_CONCAVE, 2), np.eye(2))
    # a weighting matrix already in descending eigen-order keeps identity
    np.testing.assert_allclose(
        objective_unitary(ObjectiveKind.WEIGHTED_MSE, 2, np.diag([3.0, 1.0])),
        np.eye(2),
        atol=1e-14,
    )


def test_objective_unitary_requires_weighting():
    with pytest.raises(ValueError):
        objective_unitary(ObjectiveKind.WEIGHTED_MI, 3)


def test_recover_precoder_no_error_reduces_to_rescale():
    cfg, _ = make_scenario(n=3)
    rng = derived_rng(43, 0)
    f_tilde = complex_gaussian(rng, (3, 3))
    f = recover_precoder(f_tilde, np.zeros((3, 3)), cfg)
    p_d = cfg.data_power_cap
    expected = np.sqrt(p_d / np.real(np.trace(f_tilde @ f_tilde.conj().T))) * f_tilde
    np.testing.assert_allclose(f, expected, atol=1e-12)


def test_recover_precoder_power_equality():
    cfg, model, training, rng = _structured_setup()
    for _ in range(10):
        f_tilde = complex_gaussian(rng, (4, 4))
        f = recover_precoder(f_tilde, training.error_cov, cfg)
        power = np.real(np.trace(f @ f.conj().T))
        assert power == pytest.approx(cfg.data_power_cap, rel=1e-9)


def test_recover_precoder_fixed_point():
    # F -> F_tilde -> F is the identity at exact data power
    cfg, model, training, rng = _structured_setup()
    f = complex_gaussian(rng, (4, 4))
    f *= np.sqrt(cfg.data_power_cap / np.real(np.trace(f @ f.conj().T)))
    f_tilde = transform_precoder(f, training.error_cov, cfg)
    back = recover_precoder(f_tilde, training.error_cov, cfg)
    assert np.linalg.norm(back - f) / np.linalg.norm(f) <= 1e-9


def test_recover_precoder_zero_input_warns():
    cfg, _ = make_scenario(n=2)
    with pytest.warns(UserWarning):
        f = recover_precoder(np.zeros((2, 2)), np.eye(2) * 0.1, cfg)
    np.testing.assert_allclose(f, 0.0)


def test_transform_round_trip_scaled_input():
    # transformed precoders of non-optimal power come back up to a scalar
    cfg, model, training, rng = _structured_setup()
    f_tilde = complex_gaussian(rng, (4, 4))  # arbitrary power
    f = recover_precoder(f_tilde, training.error_cov, cfg)
    again = transform_precoder(f, training.error_cov, cfg)
    ratios = again[np.abs(f_tilde) > 1e-9] / f_tilde[np.abs(f_tilde) > 1e-9]
    assert np.max(np.abs(ratios - ratios[0])) <= 1e-9
    assert ratios[0].real > 0 and abs(ratios[0].imag) <= 1e-12


def test_effective_metrics_trivial_values():
    cfg, _ = make_scenario(n=2, coherence_time=16)
    assert effective_mi([1.0, 2.0], [0.0, 0.0], 4, cfg) == 0.0
    w = np.array([0.5, 1.5])
    assert effective_weighted_mse([1.0, 2.0], [0.0, 0.0], w, 4, cfg) == pytest.approx(
        16 / 12 * w.sum()
    )


def test_effective_mi_single_stream_half_block():
    cfg, _ = make_scenario(n=2, coherence_time=16)
    # gain 1, power e-1, half the block trained: (1/2) log(e) = 1/2
    assert effective_mi([1.0], [np.e - 1.0], 8, cfg) == pytest.approx(0.5, rel=1e-12)


def test_effective_mi_matches_matrix_logdet():
    # scalar evaluator vs direct log-det of the matrix SNR form
    cfg, model, training, rng = _structured_setup(n=2, t_train=4, seed=44)
    v, svals = effective_channel_factor(model, training, cfg)
    f_powers = np.array([0.7, 0.3]) * cfg.data_power_cap
    design = build_precoder(model, training, cfg, ObjectiveKind.MI, f_powers)
    f = design.f_matrix
    scale = cfg.noise_var + np.real(np.trace(training.error_cov @ f @ f.conj().T))
    m = f.conj().T @ training.est_corr @ f / scale
    direct = float(np.log(np.linalg.det(np.eye(2) + m)).real)
    scalar = float(np.sum(np.log1p(f_powers * svals[:2] ** 2)))
    assert abs(direct - scalar) <= 1e-12 * max(1.0, abs(direct))
    # and the effective version only adds the data-phase fraction
    t_t = training.t_train
    big_t = cfg.coherence_time
    assert effective_mi(svals[:2] ** 2, f_powers, t_t, cfg) == pytest.approx(
        (big_t - t_t) / big_t * direct, rel=1e-10
    )


def test_effective_metrics_reject_bad_t_train():
    cfg, _ = make_scenario(n=2, coherence_time=16)
    with pytest.raises(ValueError):
        effective_mi([1.0], [1.0], 0, cfg)
    with pytest.raises(ValueError):
        effective_mi([1.0], [1.0], 16, cfg)


def test_constraint_equivalence_chain_property():
    # 1000 random (F, Phi) pairs: the original and transformed power
    # constraints accept exactly the same precoders
    cfg, model, training, rng = _structured_setup()
    p_d = cfg.data_power_cap
    eye = np.eye(4)
    for _ in range(1000):
        a = complex_gaussian(rng, (4, 4))
        phi = a @ a.conj().T / 8
        f = complex_gaussian(rng, (4, 4)) * rng.uniform(0.05, 1.5)
        ffh = f @ f.conj().T
        plain = np.real(np.trace(ffh)) <= p_d
        ratio = np.real(np.trace((cfg.noise_var * eye + p_d * phi) @ ffh)) / (
            cfg.noise_var + np.real(np.trace(phi @ ffh))
        )
        assert plain == (ratio <= p_d * (1 + 1e-12) + 1e-12)


def test_structured_transformed_precoder_beats_random_rotations():
    # Pareto sanity: at fixed powers the aligned left factor maximizes log det
    cfg, model, training, rng = _structured_setup(n=4, seed=45)
    v, svals = effective_channel_factor(model, training, cfg)
    gains = svals**2
    f_powers = np.maximum(cfg.data_power_cap / 2 - 1.0 / np.maximum(gains[:4], 1e-9), 0.0)
    if f_powers.sum() == 0:
        f_powers = np.full(4, cfg.data_power_cap / 4)
    f_powers *= cfg.data_power_cap / f_powers.sum()
    f_powers = np.sort(f_powers)[::-1]
    whitened = (
        np.diag(np.sqrt(gains))  # factor gram in its own basis
    )
    best = float(np.sum(np.log1p(f_powers * gains)))
    m = v * gains @ v.conj().T  # whitened matrix objective in original basis
    for _ in range(1000):
        q, _ = np.linalg.qr(complex_gaussian(rng, (4, 4)))
        f_tilde = q * np.sqrt(f_powers)
        val = float(
            np.log(np.linalg.det(np.eye(4) + f_tilde.conj().T @ m @ f_tilde)).real
        )
        assert val <= best + 1e-9
