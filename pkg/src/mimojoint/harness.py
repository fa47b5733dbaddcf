"""Sweep driver, validation suites, and config-file loading.

Sweeps are deterministic by construction: every sweep point derives its
randomness from the scenario seed and the point is computed independently, so
the CSV is byte-identical regardless of worker-pool size.  Wall-clock timing
is therefore reported only when a sweep opts in (``timing = true``); with the
default the ms column is fixed at 0 to keep the output reproducible.
"""

from __future__ import annotations

import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .channel import CorrelatedChannelModel, complex_gaussian, derived_rng, hermitian_sqrt
from .config import ConfigError, ScenarioConfig
from .estcsi import McConfig, solve_eig_approx, uniform_training_curve
from .estimation import build_training, lmmse_filter
from .precoder import (
    ObjectiveKind,
    build_precoder,
    effective_channel_factor,
    transform_precoder,
)
from .statcsi import (
    DirectionParams,
    direction_gains,
    solve_joint_statistical,
    solve_uniform_statistical,
    waterfill_f_mi,
    waterfill_f_wmse,
    waterfill_x_mi,
    waterfill_x_wmse,
)

THREADS_ENV = "MIMOJOINT_THREADS"

VARIABLES = ("snr_db", "t_train", "n")
METRICS = ("mi", "wmse")
CSI_MODES = ("stat", "est")
METHODS = ("opt", "uniform", "eigapprox")


class UsageError(ValueError):
    """Invalid sweep/solve request (maps to exit code 2)."""


@dataclass(frozen=True, eq=False)
class SweepSpec:
    """One sweep: a variable, its values, and the solver to drive."""

    variable: str
    values: tuple
    metric: str = "mi"
    csi_mode: str = "stat"
    method: str = "opt"
    mc: McConfig = McConfig()
    weights: tuple | None = None
    timing: bool = False

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise UsageError(f"variable must be one of {VARIABLES}, got {self.variable!r}")
        if self.metric not in METRICS:
            raise UsageError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.csi_mode not in CSI_MODES:
            raise UsageError(f"csi must be one of {CSI_MODES}, got {self.csi_mode!r}")
        if self.method not in METHODS:
            raise UsageError(f"method must be one of {METHODS}, got {self.method!r}")
        if len(self.values) == 0:
            raise UsageError("sweep values must be nonempty")
        if list(self.values) != sorted(self.values):
            raise UsageError("sweep values must be sorted ascending")
        _check_combination(self.csi_mode, self.method)


def _check_combination(csi_mode: str, method: str) -> None:
    if method == "eigapprox" and csi_mode != "est":
        raise UsageError("method 'eigapprox' requires estimated CSI (csi = 'est')")
    if method == "opt" and csi_mode != "stat":
        raise UsageError(
            "method 'opt' is the statistical-CSI alternating solver; with "
            "estimated CSI use 'uniform' or 'eigapprox'"
        )


@dataclass(frozen=True, eq=False)
class SweepRow:
    value: float
    objective_mean: float
    objective_se: float
    t_train: int
    iters: int
    ms: int


def _thread_count(threads: int | None) -> int:
    if threads is not None:
        return max(int(threads), 1)
    env = os.environ.get(THREADS_ENV)
    return max(int(env), 1) if env else 1


def _specialize(cfg: ScenarioConfig, spec: SweepSpec, value):
    """Scenario and training-length candidates for one sweep point."""
    if spec.variable == "snr_db":
        if cfg.derive_data_power:
            raise UsageError(
                "snr_db sweeps need a fixed data power (data_power_cap with "
                "derive_data_power = false): SNR is data power over noise"
            )
        noise_var = cfg.data_power_cap / 10 ** (float(value) / 10.0)
        return cfg.replace(noise_var=noise_var), None
    if spec.variable == "t_train":
        return cfg, [int(value)]
    n = int(value)
    return cfg.replace(n_tx=n, n_rx=n, n_data=n), None


def _solve_point(cfg: ScenarioConfig, spec: SweepSpec, value) -> SweepRow:
    started = time.perf_counter()
    cfg_v, t_vals = _specialize(cfg, spec, value)
    model = CorrelatedChannelModel.from_exponential(cfg_v.corr_theta, cfg_v.n_tx, cfg_v.n_rx)
    weights = None if spec.weights is None else np.asarray(spec.weights, dtype=float)
    se = 0.0
    if spec.csi_mode == "stat":
        solver = solve_joint_statistical if spec.method == "opt" else solve_uniform_statistical
        sol = solver(cfg_v, model, spec.metric, weights, t_train_values=t_vals)
        objective, t_train, iters = sol.objective, sol.t_train, sol.iterations
    elif spec.method == "uniform":
        curve = uniform_training_curve(cfg_v, model, spec.metric, spec.mc, weights, t_vals)
        idx = (
            int(np.argmax(curve.objective))
            if spec.metric == "mi"
            else int(np.argmin(curve.objective))
        )
        objective = float(curve.objective[idx])
        se = float(curve.std_error[idx])
        t_train, iters = int(curve.t_train[idx]), 0
    else:
        sol = solve_eig_approx(cfg_v, model, spec.metric, None, weights, t_vals)
        objective, t_train, iters = sol.objective, sol.t_train, sol.iterations
    elapsed_ms = int(round((time.perf_counter() - started) * 1000)) if spec.timing else 0
    return SweepRow(
        value=float(value),
        objective_mean=objective,
        objective_se=se,
        t_train=t_train,
        iters=iters,
        ms=elapsed_ms,
    )


def run_sweep(spec: SweepSpec, cfg: ScenarioConfig, threads: int | None = None) -> list[SweepRow]:
    """Evaluate every sweep point; rows come back in input order."""
    workers = _thread_count(threads)
    if workers == 1:
        return [_solve_point(cfg, spec, v) for v in spec.values]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda v: _solve_point(cfg, spec, v), spec.values))


CSV_HEADER = "variable,objective_mean,objective_se,t_train,iters,ms"


def rows_to_csv(rows: list[SweepRow]) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.value:.12g},{r.objective_mean:.12g},{r.objective_se:.12g},"
            f"{r.t_train},{r.iters},{r.ms}"
        )
    return "\n".join(lines) + "\n"


# -- config files -------------------------------------------------------------

_SCENARIO_KEYS = {
    "n_tx",
    "n_rx",
    "n_data",
    "coherence_time",
    "train_power",
    "total_energy",
    "noise_var",
    "data_power_cap",
    "derive_data_power",
    "train_noise_cov",
    "corr_theta",
    "rng_seed",
}
_SWEEP_KEYS = {"variable", "values", "metric", "csi", "method", "weights", "timing"}
_MC_KEYS = {"n_trials", "seed", "active_set_tol"}


def _reject_unknown(table: dict, allowed: set, where: str) -> None:
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(sorted(unknown))}")


def load_config(path: str) -> tuple[ScenarioConfig, SweepSpec | None, McConfig]:
    """Parse a TOML scenario file.  Unknown keys anywhere are errors."""
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    _reject_unknown(data, {"scenario", "sweep", "mc"}, "top level")
    if "scenario" not in data:
        raise ConfigError("config must contain a [scenario] table")
    _reject_unknown(data["scenario"], _SCENARIO_KEYS, "scenario")
    cfg = ScenarioConfig(**data["scenario"])
    mc = McConfig()
    if "mc" in data:
        _reject_unknown(data["mc"], _MC_KEYS, "mc")
        mc = McConfig(**data["mc"])
    spec = None
    if "sweep" in data:
        sweep = dict(data["sweep"])
        _reject_unknown(sweep, _SWEEP_KEYS, "sweep")
        if "variable" not in sweep or "values" not in sweep:
            raise ConfigError("[sweep] needs 'variable' and 'values'")
        spec = SweepSpec(
            variable=sweep["variable"],
            values=tuple(sweep["values"]),
            metric=sweep.get("metric", "mi"),
            csi_mode=sweep.get("csi", "stat"),
            method=sweep.get("method", "opt"),
            mc=mc,
            weights=tuple(sweep["weights"]) if "weights" in sweep else None,
            timing=bool(sweep.get("timing", False)),
        )
    return cfg, spec, mc


# -- validation suites ---------------------------------------------------------

SUITES = ("Estimation", "WaterfillOracles", "StructureChecks", "Convergence")


@dataclass(frozen=True, eq=False)
class CheckResult:
    name: str
    residual: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.threshold


@dataclass(frozen=True, eq=False)
class ValidationReport:
    suite: str
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> str:
        return json.dumps(
            {
                "suite": self.suite,
                "passed": self.passed,
                "checks": [
                    {
                        "property": c.name,
                        "residual": c.residual,
                        "threshold": c.threshold,
                        "verdict": "pass" if c.passed else "fail",
                    }
                    for c in self.checks
                ],
            },
            indent=2,
        )


def _validation_scenario(n: int = 4, snr_db: float = 10.0) -> tuple[ScenarioConfig, CorrelatedChannelModel]:
    cfg = ScenarioConfig(
        n_tx=n,
        n_rx=n,
        n_data=n,
        coherence_time=32,
        train_power=1.0,
        total_energy=32.0,
        noise_var=10 ** (-snr_db / 10.0),
        data_power_cap=1.0,
        corr_theta=0.9,
        rng_seed=2024,
    )
    model = CorrelatedChannelModel.from_exponential(cfg.corr_theta, cfg.n_tx, cfg.n_rx)
    return cfg, model


def _estimation_suite() -> list[CheckResult]:
    cfg, model = _validation_scenario()
    rng = derived_rng(cfg.rng_seed, 101)
    t_train = 8
    x_powers = rng.uniform(0.5, 1.5, cfg.n_tx)
    x_powers *= cfg.train_power * t_train / x_powers.sum()
    r_n = cfg.train_noise_matrix(t_train)
    training = build_training(model, r_n, x_powers, t_train)

    trials = 20_000
    hw = complex_gaussian(rng, (trials, cfg.n_rx, cfg.n_tx))
    h = hw @ model.tx_corr_sqrt
    noise = complex_gaussian(rng, (trials, cfg.n_rx, t_train)) / np.sqrt(cfg.n_rx)
    noise = noise @ hermitian_sqrt(r_n)
    g = lmmse_filter(training.x_matrix, cfg.n_rx * model.tx_corr, r_n)
    h_hat = (h @ training.x_matrix + noise) @ g
    dh = h - h_hat
    err_gram = np.einsum("lij,lik->jk", dh.conj(), dh) / trials
    est_gram = np.einsum("lij,lik->jk", h_hat.conj(), h_hat) / trials
    cross = np.einsum("lij,lik->jk", h_hat.conj(), dh) / trials

    theory = cfg.n_rx * training.error_cov
    checks = [
        CheckResult(
            "monte-carlo error Gram vs closed form (rel Frobenius)",
            float(np.linalg.norm(err_gram - theory) / np.linalg.norm(theory)),
            0.02,
        ),
        CheckResult(
            "monte-carlo estimate Gram vs closed form (rel Frobenius)",
            float(np.linalg.norm(est_gram - training.est_corr) / np.linalg.norm(training.est_corr)),
            0.02,
        ),
        CheckResult(
            "estimate/error orthogonality (rel Frobenius)",
            float(np.linalg.norm(cross) / np.linalg.norm(training.est_corr)),
            0.02,
        ),
        CheckResult(
            "error_cov + est_corr/n_rx == tx_corr identity",
            float(
                np.linalg.norm(
                    training.error_cov + training.est_corr / cfg.n_rx - model.tx_corr
                )
            ),
            1e-12,
        ),
    ]
    return checks


def _grid_objective_gap_f_mi(h, p_d, solver_alloc, points=1_000_000):
    f1 = np.linspace(0.0, p_d, points)
    grid_best = np.max(np.log1p(f1 * h[0]) + np.log1p((p_d - f1) * h[1]))
    mine = float(np.sum(np.log1p(solver_alloc * h)))
    return grid_best - mine


def _grid_objective_gap_x_mi(params, budget, solver_alloc, points=1_000_000):
    a, b, c = params.a, params.b, params.c
    x1 = np.linspace(0.0, budget, points)
    x2 = budget - x1
    val = np.log1p(a[0] * x1 / (c[0] + b[0] * x1)) + np.log1p(a[1] * x2 / (c[1] + b[1] * x2))
    mine = float(
        np.sum(np.log1p(a * solver_alloc / (c + b * solver_alloc)))
    )
    return float(np.max(val)) - mine


def _grid_objective_gap_f_wmse(h, w, p_d, solver_alloc, points=1_000_000):
    f1 = np.linspace(0.0, p_d, points)
    val = w[0] / (1 + f1 * h[0]) + w[1] / (1 + (p_d - f1) * h[1])
    mine = float(np.sum(w / (1 + solver_alloc * h)))
    return mine - float(np.min(val))


def _grid_objective_gap_x_wmse(params, w, budget, solver_alloc, points=1_000_000):
    a, b, c = params.a, params.b, params.c
    x1 = np.linspace(0.0, budget, points)
    x2 = budget - x1
    val = w[0] / (1 + a[0] * x1 / (c[0] + b[0] * x1)) + w[1] / (
        1 + a[1] * x2 / (c[1] + b[1] * x2)
    )
    mine = float(np.sum(w / (1 + a * solver_alloc / (c + b * solver_alloc))))
    return mine - float(np.min(val))


def _waterfill_suite() -> list[CheckResult]:
    rng = derived_rng(77, 7)
    gaps = {"f_mi": 0.0, "x_mi": 0.0, "f_wmse": 0.0, "x_wmse": 0.0}
    for _ in range(5):
        h = rng.uniform(0.1, 10.0, 2)
        w = rng.uniform(0.5, 4.0, 2)
        p_d = rng.uniform(0.5, 4.0)
        budget = rng.uniform(0.5, 4.0)
        params = DirectionParams(
            a=rng.uniform(0.1, 10.0, 2),
            b=rng.uniform(0.1, 2.0, 2),
            c=rng.uniform(0.5, 3.0, 2),
            h=h,
        )
        gaps["f_mi"] = max(gaps["f_mi"], abs(_grid_objective_gap_f_mi(h, p_d, waterfill_f_mi(h, p_d))))
        gaps["x_mi"] = max(
            gaps["x_mi"], abs(_grid_objective_gap_x_mi(params, budget, waterfill_x_mi(params, budget)))
        )
        gaps["f_wmse"] = max(
            gaps["f_wmse"],
            abs(_grid_objective_gap_f_wmse(h, w, p_d, waterfill_f_wmse(h, w, p_d))),
        )
        gaps["x_wmse"] = max(
            gaps["x_wmse"],
            abs(_grid_objective_gap_x_wmse(params, w, budget, waterfill_x_wmse(params, w, budget))),
        )
    return [
        CheckResult(f"{name} closed form vs 1e6-point grid (objective gap)", gap, 1e-5)
        for name, gap in gaps.items()
    ]


def _structure_suite() -> list[CheckResult]:
    cfg, model = _validation_scenario()
    rng = derived_rng(cfg.rng_seed, 301)
    t_train = 8
    r_n = cfg.train_noise_matrix(t_train)
    p_d = cfg.data_power_cap
    round_trip = power_res = chain_res = scalar_res = 0.0
    for _ in range(200):
        x_powers = rng.uniform(0.1, 2.0, cfg.n_tx)
        training = build_training(model, r_n, x_powers, t_train)
        f_powers = rng.uniform(0.0, 1.0, cfg.n_data)
        f_powers *= p_d / f_powers.sum()
        design = build_precoder(model, training, cfg, ObjectiveKind.MI, f_powers)
        power_res = max(
            power_res,
            abs(np.real(np.trace(design.f_matrix @ design.f_matrix.conj().T)) - p_d) / p_d,
        )
        back = transform_precoder(design.f_matrix, training.error_cov, cfg, p_d)
        round_trip = max(
            round_trip,
            float(np.linalg.norm(back - design.f_tilde) / np.linalg.norm(design.f_tilde)),
        )
        # constraint equivalence: tr(F F^H) <= P_D iff the transformed trace
        # ratio is <= P_D, checked both ways on a random feasible precoder
        f_rand = complex_gaussian(rng, (cfg.n_tx, cfg.n_data))
        f_rand *= np.sqrt(rng.uniform(0.2, 1.0) * p_d) / np.linalg.norm(f_rand)
        num = np.real(
            np.trace(
                (cfg.noise_var * np.eye(cfg.n_tx) + p_d * training.error_cov)
                @ f_rand
                @ f_rand.conj().T
            )
        )
        den = cfg.noise_var + np.real(
            np.trace(training.error_cov @ f_rand @ f_rand.conj().T)
        )
        lhs = np.real(np.trace(f_rand @ f_rand.conj().T))
        chain_res = max(
            chain_res,
            float(bool(num / den <= p_d + 1e-12) != bool(lhs <= p_d + 1e-12)),
        )
        # scalarized gains vs matrix singular values
        _, svals = effective_channel_factor(model, training, cfg, p_d)
        gains = direction_gains(
            training.x_powers,
            model.tx_corr_evals,
            cfg.train_noise_level(),
            cfg.noise_var,
            p_d,
            model.n_rx,
        )
        scalar_res = max(
            scalar_res,
            float(
                np.max(np.abs(np.sort(svals**2) - np.sort(gains)))
                / max(np.max(gains), 1.0)
            ),
        )
    return [
        CheckResult("transformed-precoder round trip (rel)", round_trip, 1e-9),
        CheckResult("recovered precoder power equality (rel)", power_res, 1e-9),
        CheckResult("power-constraint equivalence chain (mismatches)", chain_res, 0.0),
        CheckResult("matrix-vs-scalar gain factorization (rel)", scalar_res, 1e-10),
    ]


def _convergence_suite() -> list[CheckResult]:
    checks = []
    for metric in ("mi", "wmse"):
        worst_iters = 0
        worst_violation = 0.0
        for snr_db in (0.0, 10.0, 20.0, 30.0):
            cfg, model = _validation_scenario(snr_db=snr_db)
            sol = solve_joint_statistical(cfg, model, metric)
            worst_iters = max(worst_iters, sol.iterations)
            objs = [o for _, o in sol.trace]
            deltas = np.diff(objs)
            if metric == "mi":
                worst_violation = max(worst_violation, float(np.max(-deltas, initial=0.0)))
            else:
                worst_violation = max(worst_violation, float(np.max(deltas, initial=0.0)))
        checks.append(
            CheckResult(f"{metric} alternation iterations over SNR grid", worst_iters, 10)
        )
        checks.append(
            CheckResult(f"{metric} objective trace monotonicity violation", worst_violation, 1e-12)
        )
    return checks


def run_validation(suite: str) -> ValidationReport:
    """Execute one reduced-scale invariant suite and report residuals."""
    runners = {
        "Estimation": _estimation_suite,
        "WaterfillOracles": _waterfill_suite,
        "StructureChecks": _structure_suite,
        "Convergence": _convergence_suite,
    }
    if suite not in runners:
        raise UsageError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    return ValidationReport(suite=suite, checks=runners[suite]())
