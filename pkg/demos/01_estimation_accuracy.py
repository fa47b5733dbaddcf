"""Channel estimation walkthrough: correlated channels, LMMSE error algebra,
and training power shaping.

Demonstrates that the closed-form error covariance predicts the Monte Carlo
estimation error exactly, and how water-filled training powers trade accuracy
across correlation eigen-directions.

Run:  python demos/01_estimation_accuracy.py
"""

import numpy as np

from mimojoint import (
    CorrelatedChannelModel,
    ScenarioConfig,
    build_training,
    complex_gaussian,
    derived_rng,
    estimate,
    hermitian_sqrt,
    lmmse_filter,
    sample_channel,
    training_power_mse_waterfill,
)

cfg = ScenarioConfig(
    n_tx=4,
    n_rx=4,
    n_data=4,
    coherence_time=64,
    train_power=1.0,
    total_energy=64.0,
    noise_var=0.1,
    data_power_cap=1.0,
    corr_theta=0.9,
    rng_seed=7,
)
model = CorrelatedChannelModel.from_exponential(cfg.corr_theta, cfg.n_tx, cfg.n_rx)

print("transmit correlation eigenvalues:", np.round(model.tx_corr_evals, 3))

# -- one estimation round ----------------------------------------------------

t_train = 8
r_n = cfg.train_noise_matrix(t_train)
uniform = np.full(4, cfg.train_power * t_train / 4)
training = build_training(model, r_n, uniform, t_train)

rng = derived_rng(cfg.rng_seed, 0)
realization = sample_channel(model, rng)
out = estimate(realization, training, model, rng)
err = np.linalg.norm(out.h_hat - realization.h) / np.linalg.norm(realization.h)
print(f"\nsingle block, uniform training over {t_train} symbols:")
print(f"  relative estimation error     {err:.3f}")
print(f"  predicted error energy        {np.trace(out.error_cov_theoretical).real:.3f}")

# -- Monte Carlo vs the closed form -------------------------------------------

trials = 50_000
g = lmmse_filter(training.x_matrix, model.n_rx * model.tx_corr, r_n)
hw = complex_gaussian(rng, (trials, 4, 4))
h = hw @ model.tx_corr_sqrt
noise = complex_gaussian(rng, (trials, 4, t_train)) / np.sqrt(4) @ hermitian_sqrt(r_n)
dh = h - (h @ training.x_matrix + noise) @ g
emp = np.einsum("lij,lik->jk", dh.conj(), dh) / trials
theory = model.n_rx * training.error_cov
print(f"\n{trials} blocks: empirical error Gram vs closed form")
print(f"  relative Frobenius deviation  {np.linalg.norm(emp - theory) / np.linalg.norm(theory):.4f}")

# -- water-filled training powers ----------------------------------------------

budget = cfg.train_power * t_train
shaped = training_power_mse_waterfill(model, r_n, budget)
shaped_training = build_training(model, r_n, shaped, t_train)
print("\ntraining powers per eigen-direction (budget", budget, ")")
print("  uniform      :", np.round(uniform, 3))
print("  MSE-shaped   :", np.round(shaped, 3))
print(
    "  MSE trace    : uniform {:.4f} vs shaped {:.4f}".format(
        model.n_rx * training.error_cov_evals.sum(),
        model.n_rx * shaped_training.error_cov_evals.sum(),
    )
)
print("\ndirections with large prior uncertainty (big correlation eigenvalues)")
print("receive extra power; weak directions are already accurate a priori.")
