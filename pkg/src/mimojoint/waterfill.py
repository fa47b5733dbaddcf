"""Shared power-allocation primitives.

Two families live here:

* exact active-set water-fillings over parallel channels (capacity and
  weighted MSE), both scalar and batched over many eigenvalue rows, used per
  channel realization by the estimated-CSI solvers;
* a generic budget bisection over a Lagrange multiplier, used by the
  closed-form statistical-CSI allocations whose per-direction formulas are
  monotone in the multiplier;
* the Euclidean projection onto the capped simplex {x >= 0, sum x <= budget}
  used by the projected-gradient training allocator.
"""

from __future__ import annotations

from typing import Callable

import numpy as np


def capacity_waterfill(gains: np.ndarray, budget: float, tol: float = 1e-12) -> np.ndarray:
    """Allocate ``budget`` over parallel channels to maximize sum log(1 + p*g).

    Exact active-set solution: with gains sorted descending, the water level
    for k active channels is (budget + sum_{i<=k} 1/g_i) / k and channel k is
    active iff g_k exceeds the corresponding multiplier.  Channels with gain
    <= tol never receive power.  Returns powers in the input order; all zeros
    when no channel has positive gain.
    """
    gains = np.asarray(gains, dtype=float)
    powers = np.zeros_like(gains)
    order = np.argsort(-gains, kind="stable")
    g = gains[order]
    usable = g > tol
    g = g[usable]
    if g.size == 0:
        return powers
    inv = np.cumsum(1.0 / g)
    k = np.arange(1, g.size + 1)
    level = (budget + inv) / k          # candidate water levels 1/mu
    active = np.logical_and.accumulate(g * level > 1.0)
    n_active = max(int(active.sum()), 1)
    level_star = (budget + inv[n_active - 1]) / n_active
    alloc = np.maximum(level_star - 1.0 / g[:n_active], 0.0)
    powers[order[np.flatnonzero(usable)[:n_active]]] = alloc
    return powers


def capacity_value_batch(eig_rows: np.ndarray, budget: float, tol: float = 1e-12) -> np.ndarray:
    """Water-filled sum rate for each row of eigenvalues.

    Vectorized over rows: returns sum_i log(1 + p_i* lambda_i) at the exact
    water-filling allocation of ``budget`` per row.
    """
    lam = np.sort(np.maximum(np.asarray(eig_rows, dtype=float), 0.0), axis=1)[:, ::-1]
    safe = lam > tol
    inv = np.where(safe, 1.0 / np.where(safe, lam, 1.0), 0.0)
    cum_inv = np.cumsum(inv, axis=1)
    k = np.arange(1, lam.shape[1] + 1)[None, :]
    level = (budget + cum_inv) / k
    active = np.logical_and.accumulate((lam * level > 1.0) & safe, axis=1)
    n_active = active.sum(axis=1)
    rows = np.arange(lam.shape[0])
    idx = np.maximum(n_active - 1, 0)
    level_star = (budget + cum_inv[rows, idx]) / np.maximum(n_active, 1)
    cum_log = np.cumsum(np.where(safe, np.log(np.where(safe, lam, 1.0)), 0.0), axis=1)
    values = cum_log[rows, idx] + np.maximum(n_active, 1) * np.log(level_star)
    values[n_active == 0] = 0.0
    return values


def weighted_mse_waterfill(
    gains: np.ndarray, weights: np.ndarray, budget: float, tol: float = 1e-12
) -> np.ndarray:
    """Allocate ``budget`` to minimize sum w_i / (1 + p_i * g_i).

    Exact active-set solution of the weighted inverse-SNR problem:
    p_i = (sqrt(w_i / (mu g_i)) - 1/g_i)^+ with the multiplier closed over the
    active set, which is a prefix of the channels sorted by w_i * g_i.
    """
    gains = np.asarray(gains, dtype=float)
    weights = np.asarray(weights, dtype=float)
    powers = np.zeros_like(gains)
    order = np.argsort(-(gains * weights), kind="stable")
    g = gains[order]
    w = weights[order]
    usable = (g > tol) & (w > 0)
    g, w = g[usable], w[usable]
    if g.size == 0:
        return powers
    inv = np.cumsum(1.0 / g)
    swg = np.cumsum(np.sqrt(w / g))
    # active set A: sqrt(w_k g_k) > sqrt(mu) with 1/sqrt(mu) = (B + sum 1/g)/sum sqrt(w/g)
    active = np.logical_and.accumulate(np.sqrt(w * g) * (budget + inv) > swg)
    n_active = max(int(active.sum()), 1)
    inv_sqrt_mu = (budget + inv[n_active - 1]) / swg[n_active - 1]
    alloc = np.maximum(
        inv_sqrt_mu * np.sqrt(w[:n_active] / g[:n_active]) - 1.0 / g[:n_active], 0.0
    )
    powers[order[np.flatnonzero(usable)[:n_active]]] = alloc
    return powers


def weighted_mse_value_batch(
    eig_rows: np.ndarray, weights: np.ndarray, budget: float, tol: float = 1e-12
) -> np.ndarray:
    """Optimal weighted MSE per row of eigenvalues.

    Returns, per row, (sum_A sqrt(w_i/l_i))^2 / (budget + sum_A 1/l_i) plus the
    weights of the streams left unpowered.
    """
    lam = np.maximum(np.asarray(eig_rows, dtype=float), 0.0)
    w = np.broadcast_to(np.asarray(weights, dtype=float), lam.shape)
    order = np.argsort(-(lam * w), axis=1, kind="stable")
    l_sorted = np.take_along_axis(lam, order, axis=1)
    w_sorted = np.take_along_axis(w, order, axis=1)
    safe = (l_sorted > tol) & (w_sorted > 0)
    inv = np.where(safe, 1.0 / np.where(safe, l_sorted, 1.0), 0.0)
    swl = np.where(safe, np.sqrt(w_sorted * inv), 0.0)
    cum_inv = np.cumsum(inv, axis=1)
    cum_swl = np.cumsum(swl, axis=1)
    cum_w = np.cumsum(w_sorted, axis=1)
    cond = (np.sqrt(w_sorted * l_sorted) * (budget + cum_inv) > cum_swl) & safe
    active = np.logical_and.accumulate(cond, axis=1)
    n_active = active.sum(axis=1)
    rows = np.arange(lam.shape[0])
    idx = np.maximum(n_active - 1, 0)
    mse_active = np.where(
        n_active > 0, cum_swl[rows, idx] ** 2 / (budget + cum_inv[rows, idx]), 0.0
    )
    w_active = np.where(n_active > 0, cum_w[rows, idx], 0.0)
    return mse_active + w_sorted.sum(axis=1) - w_active


def bisect_budget(
    allocation: Callable[[float], np.ndarray],
    mu_upper: float,
    budget: float,
    max_iters: int = 200,
) -> np.ndarray:
    """Find the multiplier at which a monotone allocation meets the budget.

    ``allocation(mu)`` must return the per-direction powers, elementwise
    nonincreasing and continuous in mu, with total 0 at ``mu_upper``.  The
    lower bracket is found by halving; plain bisection then pins the budget
    to floating-point resolution.
    """
    if mu_upper <= 0:
        return allocation(np.inf)
    lo = mu_upper
    for _ in range(4000):
        if allocation(lo).sum() >= budget:
            break
        lo *= 0.5
        if lo < 1e-300:
            # budget unreachable (saturated allocation); return the limit
            return allocation(lo)
    hi = mu_upper
    for _ in range(max_iters):
        mid = 0.5 * (lo + hi)
        if allocation(mid).sum() >= budget:
            lo = mid
        else:
            hi = mid
    return allocation(lo)


def project_capped_simplex(v: np.ndarray, budget: float) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x <= budget}.

    If clipping at zero already satisfies the cap the clip is the projection;
    otherwise project onto the simplex face {x >= 0, sum x = budget} by the
    sort-and-threshold rule (O(n log n)).
    """
    v = np.asarray(v, dtype=float)
    clipped = np.maximum(v, 0.0)
    if clipped.sum() <= budget:
        return clipped
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - budget
    j = np.arange(1, v.size + 1)
    rho = int(np.max(np.flatnonzero(u - css / j > 0))) + 1
    tau = css[rho - 1] / rho
    return np.maximum(v - tau, 0.0)
