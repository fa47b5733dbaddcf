"""Shared scenario builders and independent oracles for the test suite.

The oracles here deliberately avoid the closed forms they are used to check:
allocation problems are solved by plain grid search (single-level for N=2,
zooming multi-level over the budget simplices for the joint problems), and
expectations by straightforward Monte Carlo re-implementations.
"""

from __future__ import annotations

import numpy as np

from mimojoint import CorrelatedChannelModel, ScenarioConfig


def make_scenario(
    n: int = 4,
    snr_db: float = 10.0,
    coherence_time: int = 32,
    theta: float = 0.9,
    train_power: float = 1.0,
    data_power: float = 1.0,
    seed: int = 1234,
    **overrides,
) -> tuple[ScenarioConfig, CorrelatedChannelModel]:
    """Default test scenario: equal per-symbol powers, energy budget exactly
    covering the block, noise set from the SNR."""
    cfg = ScenarioConfig(
        n_tx=n,
        n_rx=n,
        n_data=n,
        coherence_time=coherence_time,
        train_power=train_power,
        total_energy=max(train_power, data_power) * coherence_time,
        noise_var=data_power / 10 ** (snr_db / 10.0),
        data_power_cap=data_power,
        corr_theta=theta,
        rng_seed=seed,
        **overrides,
    )
    model = CorrelatedChannelModel.from_exponential(cfg.corr_theta, cfg.n_tx, cfg.n_rx)
    return cfg, model


# -- scalarized objective pieces (direct formula evaluation) -------------------


def snr_gain(x, psi, sig2, noise_var, p_data, n_rx):
    """Per-direction SNR per unit data power, straight from the formula."""
    return (n_rx**2 * x * psi / sig2) / (noise_var / psi + n_rx * noise_var * x / sig2 + p_data)


def joint_mi_objective(f, x, psi, sig2, noise_var, p_data, n_rx):
    return np.log1p(f * snr_gain(x, psi, sig2, noise_var, p_data, n_rx)).sum(axis=-1)


def joint_wmse_objective(f, x, w, psi, sig2, noise_var, p_data, n_rx):
    return (w / (1.0 + f * snr_gain(x, psi, sig2, noise_var, p_data, n_rx))).sum(axis=-1)


# -- zooming grid search over the two budget simplices -------------------------


def _simplex_grid(lo, hi, total, m):
    """Grid over {v >= 0, sum v = total} parameterized by the first n-1
    coordinates confined to [lo, hi] boxes; returns (K, n) points."""
    axes = [np.linspace(lo[i], hi[i], m) for i in range(len(lo))]
    mesh = np.meshgrid(*axes, indexing="ij")
    free = np.stack([a.ravel() for a in mesh], axis=1)
    last = total - free.sum(axis=1)
    keep = last >= -1e-12
    return np.concatenate([free[keep], np.maximum(last[keep], 0.0)[:, None]], axis=1)


def nested_grid_joint(
    psi,
    sig2,
    noise_var,
    p_data,
    budget_x,
    weights=None,
    levels: int = 12,
    m: int = 7,
    n_rx: int | None = None,
):
    """Zooming grid search of the scalarized joint power problem.

    Maximizes the MI objective (or minimizes the weighted MSE when weights
    are given) over {x >= 0, sum x = budget_x} x {f >= 0, sum f = p_data};
    both budgets bind at the optimum because the objective is monotone in
    every coordinate.  Each level shrinks the search boxes around the
    incumbent by 0.35, so twelve levels resolve the allocation to about
    1e-5 of the budget.  Returns the best objective found.
    """
    n = len(psi)
    n_rx = n if n_rx is None else n_rx
    maximize = weights is None
    lo_x, hi_x = np.zeros(n - 1), np.full(n - 1, budget_x)
    lo_f, hi_f = np.zeros(n - 1), np.full(n - 1, p_data)
    best_val = -np.inf if maximize else np.inf
    best_x = best_f = None
    for _ in range(levels):
        xs = _simplex_grid(lo_x, hi_x, budget_x, m)
        fs = _simplex_grid(lo_f, hi_f, p_data, m)
        gains = snr_gain(xs, psi, sig2, noise_var, p_data, n_rx)  # (Kx, n)
        if maximize:
            vals = np.log1p(fs[:, None, :] * gains[None, :, :]).sum(axis=2)  # (Kf, Kx)
            i_f, i_x = np.unravel_index(np.argmax(vals), vals.shape)
            val = vals[i_f, i_x]
            improved = val > best_val
        else:
            vals = (weights / (1.0 + fs[:, None, :] * gains[None, :, :])).sum(axis=2)
            i_f, i_x = np.unravel_index(np.argmin(vals), vals.shape)
            val = vals[i_f, i_x]
            improved = val < best_val
        if improved:
            best_val, best_x, best_f = val, xs[i_x], fs[i_f]
        width_x = (hi_x - lo_x) * 0.35
        width_f = (hi_f - lo_f) * 0.35
        lo_x = np.clip(best_x[:-1] - width_x / 2, 0.0, budget_x)
        hi_x = np.clip(best_x[:-1] + width_x / 2, 0.0, budget_x)
        lo_f = np.clip(best_f[:-1] - width_f / 2, 0.0, p_data)
        hi_f = np.clip(best_f[:-1] + width_f / 2, 0.0, p_data)
    return float(best_val)


# -- line grids for the four closed-form allocations (N = 2) -------------------


def grid_best_f_mi(h, p_d, points=1_000_000):
    f1 = np.linspace(0.0, p_d, points)
    return float(np.max(np.log1p(f1 * h[0]) + np.log1p((p_d - f1) * h[1])))


def grid_best_x_mi(a, b, c, budget, points=1_000_000):
    x1 = np.linspace(0.0, budget, points)
    x2 = budget - x1
    return float(
        np.max(
            np.log1p(a[0] * x1 / (c[0] + b[0] * x1))
            + np.log1p(a[1] * x2 / (c[1] + b[1] * x2))
        )
    )


def grid_best_f_wmse(h, w, p_d, points=1_000_000):
    f1 = np.linspace(0.0, p_d, points)
    return float(np.min(w[0] / (1 + f1 * h[0]) + w[1] / (1 + (p_d - f1) * h[1])))


def grid_best_x_wmse(a, b, c, w, budget, points=1_000_000):
    x1 = np.linspace(0.0, budget, points)
    x2 = budget - x1
    return float(
        np.min(
            w[0] / (1 + a[0] * x1 / (c[0] + b[0] * x1))
            + w[1] / (1 + a[1] * x2 / (c[1] + b[1] * x2))
        )
    )


# -- KKT residual meters -------------------------------------------------------


def kkt_residual_f_mi(f, h, tol_active=1e-12):
    """Max deviation of the water level 1/mu = f + 1/h over active streams,
    plus any inactive stream whose gain would beat the level."""
    active = f > tol_active
    usable = h > 0
    if not np.any(active):
        return 0.0
    levels = f[active] + 1.0 / h[active]
    res = float(np.ptp(levels))
    level = float(np.mean(levels))
    inactive = usable & ~active
    if np.any(inactive):
        res = max(res, float(np.max(level - 1.0 / h[inactive], initial=0.0)))
    return res


def kkt_residual_x_mi(x, a, b, c, tol_active=1e-12):
    """Stationarity spread of d/dx log(1 + a x / (c + b x)) over active
    directions; inactive directions must not beat the multiplier."""
    grad = a * c / ((c + (a + b) * x) * (c + b * x))
    active = x > tol_active
    if not np.any(active):
        return 0.0
    mu = float(np.mean(grad[active]))
    res = float(np.ptp(grad[active]))
    inactive = ~active
    if np.any(inactive):
        res = max(res, float(np.max(a[inactive] / c[inactive] - mu, initial=0.0)))
    return res / (1.0 + mu)


def kkt_residual_f_wmse(f, h, w, tol_active=1e-12):
    grad = w * h / (1.0 + h * f) ** 2
    active = f > tol_active
    if not np.any(active):
        return 0.0
    mu = float(np.mean(grad[active]))
    res = float(np.ptp(grad[active]))
    inactive = (h > 0) & ~active
    if np.any(inactive):
        res = max(res, float(np.max(w[inactive] * h[inactive] - mu, initial=0.0)))
    return res / (1.0 + mu)


def kkt_residual_x_wmse(x, a, b, c, w, tol_active=1e-12):
    grad = w * a * c / (c + (a + b) * x) ** 2
    active = x > tol_active
    if not np.any(active):
        return 0.0
    mu = float(np.mean(grad[active]))
    res = float(np.ptp(grad[active]))
    inactive = ~active
    if np.any(inactive):
        res = max(res, float(np.max(w[inactive] * a[inactive] / c[inactive] - mu, initial=0.0)))
    return res / (1.0 + mu)
