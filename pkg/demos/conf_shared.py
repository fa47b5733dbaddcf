"""Scenario builder shared by the demo scripts."""

from mimojoint import ScenarioConfig


def scenario(n=8, snr_db=30.0, coherence_time=256, theta=0.9, seed=1234) -> ScenarioConfig:
    """Equal per-symbol powers, energy budget covering the whole block."""
    return ScenarioConfig(
        n_tx=n,
        n_rx=n,
        n_data=n,
        coherence_time=coherence_time,
        train_power=1.0,
        total_energy=float(coherence_time),
        noise_var=10 ** (-snr_db / 10.0),
        data_power_cap=1.0,
        corr_theta=theta,
        rng_seed=seed,
    )
