"""Correlated MIMO channel model and the ordered matrix decompositions.

All eigen/singular decompositions used across the package go through
:func:`sorted_evd` so that eigenvalue ordering (descending) and eigenvector
phases are fixed once: golden tests rely on bit-stable outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HERMITIAN_RTOL = 1e-10
PSD_RTOL = 1e-12


def exponential_correlation(theta: float, n: int) -> np.ndarray:
    """Exponential transmit-correlation matrix, entry (i, j) = theta^|i-j|."""
    if not 0.0 <= theta < 1.0:
        raise ValueError(f"correlation parameter must lie in [0, 1), got {theta}")
    idx = np.arange(n)
    return theta ** np.abs(idx[:, None] - idx[None, :]).astype(float)


def _canonicalize_columns(u: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real positive."""
    u = u.copy()
    top = np.argmax(np.abs(u), axis=0)
    for j, i in enumerate(top):
        pivot = u[i, j]
        if np.abs(pivot) > 0:
            u[:, j] *= np.conj(pivot) / np.abs(pivot)
    return u


def sorted_evd(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix with eigenvalues descending.

    Returns (eigenvectors, eigenvalues).  The input is symmetrized before the
    decomposition to guard against accumulated asymmetry, eigenvalue order is
    nonincreasing (stable for ties), and eigenvector phases are canonicalized
    so identical inputs give identical outputs.
    """
    m = np.asarray(m)
    scale = max(np.linalg.norm(m), 1.0)
    if np.linalg.norm(m - m.conj().T) > HERMITIAN_RTOL * scale:
        raise ValueError("input is not Hermitian within tolerance")
    m = (m + m.conj().T) / 2
    evals, evecs = np.linalg.eigh(m)
    order = np.argsort(-evals, kind="stable")
    return _canonicalize_columns(evecs[:, order]), evals[order]


def hermitian_sqrt(m: np.ndarray) -> np.ndarray:
    """Hermitian PSD square root of a Hermitian PSD matrix."""
    evecs, evals = sorted_evd(m)
    if evals.size and evals[-1] < -PSD_RTOL * max(evals[0], 0.0):
        raise ValueError("input is not positive semidefinite")
    root = evecs * np.sqrt(np.maximum(evals, 0.0)) @ evecs.conj().T
    return (root + root.conj().T) / 2


def inv_hermitian_sqrt(m: np.ndarray) -> np.ndarray:
    """Inverse Hermitian square root of a Hermitian PD matrix."""
    evecs, evals = sorted_evd(m)
    if evals[-1] <= PSD_RTOL * max(evals[0], 1.0):
        raise ValueError("input must be positive definite")
    root = evecs * (1.0 / np.sqrt(evals)) @ evecs.conj().T
    return (root + root.conj().T) / 2


def dft_unitary(n: int) -> np.ndarray:
    """Unitary DFT matrix, entry (k, l) = exp(-2*pi*i*k*l/n) / sqrt(n)."""
    if n < 1:
        raise ValueError("dimension must be at least 1")
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def derived_rng(seed: int, *stream: int) -> np.random.Generator:
    """Generator for stream (seed, *stream); independent of call order."""
    return np.random.default_rng(np.random.SeedSequence((seed, *stream)))


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly symmetric complex Gaussian entries with unit variance
    (1/2 per quadrature)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class CorrelatedChannelModel:
    """Transmit-side correlation and its eigen-structure.

    ``tx_corr_evals`` is sorted descending; every scalarized solver indexes
    spatial directions in this order.  The receive dimension rides along so
    realizations and second moments can be produced without extra arguments.
    """

    tx_corr: np.ndarray
    tx_corr_evecs: np.ndarray
    tx_corr_evals: np.ndarray
    n_rx: int
    tx_corr_sqrt: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "tx_corr_sqrt", hermitian_sqrt(self.tx_corr))

    @classmethod
    def from_matrix(cls, tx_corr: np.ndarray, n_rx: int) -> "CorrelatedChannelModel":
        evecs, evals = sorted_evd(tx_corr)
        if evals[-1] <= 0:
            raise ValueError("transmit correlation must be positive definite")
        return cls(np.asarray(tx_corr), evecs, evals, int(n_rx))

    @classmethod
    def from_exponential(cls, theta: float, n_tx: int, n_rx: int) -> "CorrelatedChannelModel":
        return cls.from_matrix(exponential_correlation(theta, n_tx), n_rx)

    @property
    def n_tx(self) -> int:
        return self.tx_corr.shape[0]


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One channel draw: h = h_white @ tx_corr^(1/2)."""

    h_white: np.ndarray
    h: np.ndarray


def sample_channel(model: CorrelatedChannelModel, rng: np.random.Generator) -> ChannelRealization:
    """Draw one n_rx x n_tx realization with i.i.d. unit-variance white part."""
    h_white = complex_gaussian(rng, (model.n_rx, model.n_tx))
    return ChannelRealization(h_white=h_white, h=h_white @ model.tx_corr_sqrt)
