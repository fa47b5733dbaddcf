"""Scenario configuration shared by all solvers and the sweep harness."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np


class ConfigError(ValueError):
    """Invalid scenario or sweep configuration."""


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """All system constants of one link scenario.

    The coherence block of ``coherence_time`` symbols is split into a training
    phase of ``t_train`` symbols (per-symbol power ``train_power``) and a data
    phase (per-symbol power at most ``data_power_cap``), subject to the total
    energy budget ``total_energy``.

    ``train_noise_cov`` selects the training-phase noise second moment R_N
    (the Gram expectation of the noise block):

    * ``None``      - white, tied to the data phase: R_N = n_rx * noise_var * I,
                      i.e. the same per-entry noise variance in both phases.
    * scalar ``s``  - white with fixed level: R_N = s * I, independent of
                      ``noise_var``.
    * square matrix - used as R_N verbatim; its size pins the training length.

    When ``derive_data_power`` is set, the data power is derived per candidate
    training length as (total_energy - train_power * t_train) / (T - t_train),
    clipped by ``data_power_cap`` when one is given.  Otherwise
    ``data_power_cap`` is the fixed data power and a training length is
    feasible only if the energy budget covers both phases.
    """

    n_tx: int
    n_rx: int
    n_data: int
    coherence_time: int
    train_power: float
    total_energy: float
    noise_var: float
    data_power_cap: float | None = None
    derive_data_power: bool = False
    train_noise_cov: float | np.ndarray | None = None
    corr_theta: float = 0.9
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("n_tx", "n_rx", "n_data", "coherence_time"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        for name in ("train_power", "total_energy", "noise_var"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ConfigError(f"{name} must be a positive real, got {v!r}")
        if self.n_data > min(self.n_tx, self.n_rx):
            raise ConfigError(
                f"n_data={self.n_data} exceeds min(n_tx, n_rx)="
                f"{min(self.n_tx, self.n_rx)}"
            )
        if self.total_energy <= self.train_power:
            raise ConfigError(
                "total_energy must exceed train_power (one training symbol "
                "plus a nonempty data phase must be affordable)"
            )
        if not 0.0 <= self.corr_theta < 1.0:
            raise ConfigError(f"corr_theta must lie in [0, 1), got {self.corr_theta}")
        if self.rng_seed < 0:
            raise ConfigError("rng_seed must be a nonnegative integer")
        if self.data_power_cap is not None and self.data_power_cap <= 0:
            raise ConfigError("data_power_cap must be positive when given")
        if not self.derive_data_power and self.data_power_cap is None:
            raise ConfigError(
                "data_power_cap is required unless derive_data_power is set"
            )
        cov = self.train_noise_cov
        if cov is not None and not np.isscalar(cov):
            cov = np.asarray(cov)
            if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
                raise ConfigError("train_noise_cov matrix must be square")
            if np.linalg.norm(cov - cov.conj().T) > 1e-10 * max(np.linalg.norm(cov), 1.0):
                raise ConfigError("train_noise_cov must be Hermitian")
            w = np.linalg.eigvalsh((cov + cov.conj().T) / 2)
            if w[0] <= 1e-12 * max(w[-1], 1.0):
                raise ConfigError("train_noise_cov must be positive definite")
        elif cov is not None and (not np.isfinite(cov) or cov <= 0):
            raise ConfigError("scalar train_noise_cov must be a positive real")

    # -- derived quantities -------------------------------------------------

    def data_power_at(self, t_train: int) -> float | None:
        """Data-phase power for a candidate training length, or None if the
        energy budget rules the split out."""
        t_data = self.coherence_time - t_train
        if t_train < 1 or t_data < 1:
            return None
        if self.derive_data_power:
            pd = (self.total_energy - self.train_power * t_train) / t_data
            if self.data_power_cap is not None:
                pd = min(pd, self.data_power_cap)
            return pd if pd > 1e-15 else None
        pd = self.data_power_cap
        if t_data * pd + self.train_power * t_train <= self.total_energy + 1e-9:
            return pd
        return None

    def feasible_t_train(self) -> list[int]:
        """All training lengths in [n_data, T-1] the energy budget allows."""
        return [
            t
            for t in range(self.n_data, self.coherence_time)
            if self.data_power_at(t) is not None
        ]

    def train_noise_matrix(self, t_train: int) -> np.ndarray:
        """The training-noise Gram expectation R_N for a given training length."""
        cov = self.train_noise_cov
        if cov is None:
            return self.n_rx * self.noise_var * np.eye(t_train)
        if np.isscalar(cov):
            return float(cov) * np.eye(t_train)
        cov = np.asarray(cov)
        if cov.shape[0] != t_train:
            raise ConfigError(
                f"train_noise_cov is {cov.shape[0]}x{cov.shape[0]} but "
                f"t_train={t_train}"
            )
        return cov

    def train_noise_level(self) -> float:
        """Per-direction training-noise eigenvalue for white noise.

        The joint solvers scalarize over eigen-directions and therefore need a
        training length independent noise description; they only support the
        white conventions (``train_noise_cov`` None or scalar).
        """
        cov = self.train_noise_cov
        if cov is None:
            return self.n_rx * self.noise_var
        if np.isscalar(cov):
            return float(cov)
        raise ConfigError(
            "joint solvers require white training noise (train_noise_cov "
            "None or scalar); matrix covariances are supported by the "
            "estimation operations only"
        )

    def replace(self, **updates) -> "ScenarioConfig":
        return dataclasses.replace(self, **updates)
