"""Seeded Monte Carlo experiments: distributional matching, Mallows consistency,
uniform consistency of the estimator and the martingale tail bound.

Every random quantity is drawn from a stream keyed by (master seed, task key),
so results do not depend on execution order or on the number of workers.
"""

from __future__ import annotations

import logging
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from farboot.ar_bootstrap import extract_residuals, generate_pseudo_batch, resample_indices
from farboot.config import ExperimentConfig
from farboot.distances import EmpiricalLaw, kolmogorov_distance, mallows_distance
from farboot.errors import ConfigurationError, DegenerateSampleError, NumericalError
from farboot.function_space import Basis, Grid, GridFunction, make_grid, smooth_norms
from farboot.kernel_regression import (
    EstimatorConfig,
    FittedEstimator,
    Kernel,
    bandwidth_schedule,
    estimate_small_ball_exponent,
    restriction_radius,
    uniform_error,
)
from farboot.process_models import (
    FunctionalSeries,
    InnovationModel,
    RegressionOperator,
    draw_innovations,
    simulate_far1_batch,
)

__all__ = [
    "Setup",
    "build_setup",
    "stream",
    "resolve_q",
    "estimator_config",
    "DistributionRecord",
    "DistributionReport",
    "run_distribution_experiment",
    "MallowsReport",
    "run_mallows_experiment",
    "ConsistencyReport",
    "run_consistency_experiment",
    "MDSReport",
    "run_mds_tailbound_check",
    "mds_bound",
    "probe_set",
    "FALLBACK_LIMIT",
]

log = logging.getLogger(__name__)

# an n is flagged invalid when at least this share of MC predictions at x fall back
FALLBACK_LIMIT = 0.5

# stream roles
_MC, _REF, _BOOT, _PILOT, _MALLOWS, _CONSIST, _PROBES = range(7)


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for task ``key`` under master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def _pool_map(fn, tasks: list, threads: int) -> list:
    workers = (os.cpu_count() or 1) if threads == 0 else threads
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as ex:
        return list(ex.map(fn, tasks))


@dataclass(frozen=True, eq=False)
class Setup:
    """Model objects derived from a config."""

    grid: Grid
    basis: Basis
    op: RegressionOperator
    innov: InnovationModel
    kernel: Kernel
    target: GridFunction
    directions: NDArray[np.float64]  # (d, m) unit-norm directions
    direction_names: tuple[str, ...]
    burn_in: int

    @property
    def psi_target(self) -> NDArray[np.float64]:
        return self.op.apply_values(self.target.values)


def build_setup(cfg: ExperimentConfig) -> Setup:
    m = cfg.model
    grid = make_grid(m.grid_points)
    basis = Basis(grid, m.basis_size)
    gains = np.exp(-m.rho_decay * np.arange(m.basis_size))
    if m.operator == "linear_diagonal":
        op = RegressionOperator.linear_diagonal(basis, m.rho_scale * gains)
    else:
        op = RegressionOperator.nonlinear_saturating(basis, m.rho_scale, gains, m.saturation_scale)
    innov = InnovationModel.exponential(basis, m.innovation_scale, m.innovation_decay, m.coeff_law, m.lip_cap)
    r = cfg.run
    bump = r.target_amplitude * np.exp(-((grid.points - 0.5) ** 2) / (2 * r.target_width**2))
    target = GridFunction(grid, op.apply_values(np.zeros(grid.m)) + bump)
    dirs = []
    for label in r.directions:
        idx = [int(k) for k in re.findall(r"\d+", label)]
        coef = np.zeros(m.basis_size)
        coef[[k - 1 for k in idx]] = 1.0
        dirs.append(basis.synthesize(coef / np.linalg.norm(coef)))
    return Setup(grid, basis, op, innov, Kernel(cfg.estimator.kernel), target, np.array(dirs), r.directions, m.burn_in)


def resolve_q(cfg: ExperimentConfig, setup: Setup, seed: int, pilot_n: int = 2000) -> float:
    """Configured small-ball exponent, or one estimated on a seeded pilot series."""
    if cfg.estimator.q is not None:
        return float(cfg.estimator.q)
    pilot = simulate_far1_batch(setup.op, setup.innov, pilot_n, setup.burn_in, stream(seed, _PILOT), 1)[0]
    try:
        return estimate_small_ball_exponent(pilot[1:-1], setup.target)
    except NumericalError as exc:
        raise ConfigurationError(f"cannot estimate q from pilot series: {exc}; set estimator.q") from exc


def estimator_config(cfg: ExperimentConfig, n: int, q: float) -> EstimatorConfig:
    e = cfg.estimator
    h, b = bandwidth_schedule(n, q, e.c_h, e.c_b, e.b_rate)
    return EstimatorConfig(Kernel(e.kernel), h, b, restriction_radius(n, e.r0, e.c_r), e.min_neighbors)


def _sq_dist_to(values: NDArray, x: NDArray, weights: NDArray) -> NDArray[np.float64]:
    d = values - x
    return np.maximum(np.einsum("...m,m,...m->...", d, weights, d), 0.0)


def _nw_at_target(paths: NDArray, x: NDArray, est: EstimatorConfig, grid: Grid, fallback_mean: NDArray | None):
    """Psi_hat_h(x) and F_hat(h) for each path in a (R, n+2, m) stack.

    Fallbacks use the path's own mean of X_1..X_n unless ``fallback_mean`` is given.
    """
    regs = paths[:, 1:-1]
    d2 = _sq_dist_to(regs, x, grid.weights)
    fhat = np.mean(d2 <= est.h**2, axis=1)
    w = est.kernel(np.sqrt(d2) / est.h)
    total = w.sum(axis=1)
    x_in = smooth_norms(x, grid.step) <= est.r_n
    fallback = (total <= 0) | (not x_in)
    pred = np.empty((paths.shape[0], grid.m))
    ok = ~fallback
    pred[ok] = np.einsum("rt,rtm->rm", w[ok], paths[ok, 2:]) / total[ok, None]
    if fallback.any():
        pred[fallback] = regs[fallback].mean(axis=1) if fallback_mean is None else fallback_mean
    return pred, fhat, fallback


def _project(vals: NDArray, dirs: NDArray, grid: Grid) -> NDArray[np.float64]:
    return (vals * grid.weights) @ dirs.T


@dataclass
class BootstrapSide:
    stats: NDArray[np.float64]  # (B, d)
    fhat: NDArray[np.float64]
    fallback: NDArray[np.bool_]
    ref_fhat: float
    step_fallbacks: int
    pool_size: int


def _bootstrap_side(setup: Setup, n: int, est: EstimatorConfig, draws: int, x0_mode: str, seed: int, key: tuple):
    ref = simulate_far1_batch(setup.op, setup.innov, n, setup.burn_in, stream(seed, _REF, *key), 1)[0]
    series = FunctionalSeries(setup.grid, ref)
    est_b = FittedEstimator(series, est, use_b=True)
    pool = extract_residuals(series, est_b)
    x0 = None if x0_mode == "first" else GridFunction.zeros(setup.grid)
    pseudo, _, fb_steps = generate_pseudo_batch(pool, est_b, x0, stream(seed, _BOOT, *key), draws)
    x = setup.target.values
    centre = est_b.predict(setup.target).value.values
    pred, fhat, fallback = _nw_at_target(pseudo, x, est, setup.grid, fallback_mean=est_b.mean)
    stats = np.sqrt(n * fhat)[:, None] * _project(pred - centre, setup.directions, setup.grid)
    ref_fhat = float(np.mean(_sq_dist_to(ref[1:-1], x, setup.grid.weights) <= est.h**2))
    return BootstrapSide(stats, fhat, fallback, ref_fhat, int(fb_steps.sum()), int(pool.index_set.size))


@dataclass
class DistributionRecord:
    n: int
    h: float
    b: float
    r_n: float
    q: float
    mc_stats: NDArray[np.float64]
    mc_fhat: NDArray[np.float64]
    mc_fallback: NDArray[np.bool_]
    boot_stats: NDArray[np.float64]
    boot_fhat: NDArray[np.float64]
    boot_fallback: NDArray[np.bool_]
    ref_fhat: float
    pool_size: int
    step_fallbacks: int
    ks: NDArray[np.float64]  # per direction
    spread_ks: NDArray[np.float64] = field(default_factory=lambda: np.zeros((0, 0)))  # (S, d)

    @property
    def valid(self) -> bool:
        return float(self.mc_fallback.mean()) < FALLBACK_LIMIT

    def summary(self, names: tuple[str, ...]) -> dict:
        mc_var = self.mc_stats.var(axis=0, ddof=1) if len(self.mc_stats) > 1 else np.zeros(len(names))
        bt_var = self.boot_stats.var(axis=0, ddof=1) if len(self.boot_stats) > 1 else np.zeros(len(names))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = bt_var / mc_var
        per_dir = {}
        for i, name in enumerate(names):
            entry = {
                "ks": float(self.ks[i]),
                "mc_mean": float(self.mc_stats[:, i].mean()),
                "boot_mean": float(self.boot_stats[:, i].mean()),
                "location_gap": float(self.boot_stats[:, i].mean() - self.mc_stats[:, i].mean()),
                "mc_var": float(mc_var[i]),
                "boot_var": float(bt_var[i]),
                "var_ratio": float(ratio[i]) if np.isfinite(ratio[i]) else None,
            }
            if self.spread_ks.size:
                col = self.spread_ks[:, i]
                entry["spread_ks"] = {
                    "min": float(col.min()),
                    "median": float(np.median(col)),
                    "max": float(col.max()),
                    "count": int(col.size),
                }
            per_dir[name] = entry
        return {
            "n": self.n,
            "h": self.h,
            "b": self.b,
            "r_n": self.r_n,
            "q": self.q,
            "valid": self.valid,
            "mc_fallback_rate": float(self.mc_fallback.mean()),
            "boot_fallback_rate": float(self.boot_fallback.mean()),
            "bootstrap_step_fallbacks": self.step_fallbacks,
            "mc_fhat_mean": float(self.mc_fhat.mean()),
            "boot_fhat_mean": float(self.boot_fhat.mean()),
            "reference_fhat": self.ref_fhat,
            "pool_size": self.pool_size,
            "replications": int(len(self.mc_stats)),
            "draws": int(len(self.boot_stats)),
            "directions": per_dir,
        }


@dataclass
class DistributionReport:
    seed: int
    direction_names: tuple[str, ...]
    records: list[DistributionRecord]

    def ks(self, direction: int = 0) -> NDArray[np.float64]:
        return np.array([r.ks[direction] for r in self.records])

    def summary(self) -> dict:
        return {
            "experiment": "distribution",
            "seed": self.seed,
            "directions": list(self.direction_names),
            "records": [r.summary(self.direction_names) for r in self.records],
        }


def _distribution_task(args) -> DistributionRecord:
    cfg, seed, i, n, q = args
    setup = build_setup(cfg)
    est = estimator_config(cfg, n, q)
    r = cfg.run
    paths = simulate_far1_batch(setup.op, setup.innov, n, setup.burn_in, stream(seed, _MC, i), r.replications)
    x = setup.target.values
    pred, fhat, fallback = _nw_at_target(paths, x, est, setup.grid, None)
    mc_stats = np.sqrt(n * fhat)[:, None] * _project(pred - setup.psi_target, setup.directions, setup.grid)
    del paths
    boot = _bootstrap_side(setup, n, est, r.draws, r.x0, seed, (i, 0))
    ks = np.array([kolmogorov_distance(mc_stats[:, j], boot.stats[:, j]) for j in range(mc_stats.shape[1])])
    spread = []
    for s in range(1, r.spread_series + 1):
        extra = _bootstrap_side(setup, n, est, r.draws, r.x0, seed, (i, s))
        spread.append([kolmogorov_distance(mc_stats[:, j], extra.stats[:, j]) for j in range(mc_stats.shape[1])])
    spread_ks = np.array(spread) if spread else np.zeros((0, 0))
    log.info("distribution n=%d h=%.4g b=%.4g ks=%s", n, est.h, est.b, np.round(ks, 4))
    return DistributionRecord(
        n, est.h, est.b, est.r_n, q, mc_stats, fhat, fallback,
        boot.stats, boot.fhat, boot.fallback, boot.ref_fhat, boot.pool_size, boot.step_fallbacks, ks, spread_ks,
    )  # fmt: skip


def run_distribution_experiment(cfg: ExperimentConfig, seed: int = 0) -> DistributionReport:
    """Monte Carlo law of the rescaled projected estimation error against its bootstrap law, per n.

    The MC side uses ``replications`` independent series; the bootstrap side
    uses ``draws`` pseudo-series from one reference series. Both are rescaled by
    sqrt(n F_hat(h)) of their own series.
    """
    setup = build_setup(cfg)
    q = resolve_q(cfg, setup, seed)
    tasks = [(cfg, seed, i, n, q) for i, n in enumerate(cfg.run.n)]
    records = _pool_map(_distribution_task, tasks, cfg.run.threads)
    return DistributionReport(seed, setup.direction_names, records)


@dataclass
class MallowsReport:
    seed: int
    n: tuple[int, ...]
    d2: NDArray[np.float64]  # (len(n), seeds)
    atoms: NDArray[np.int64]  # atoms used per n

    @property
    def medians(self) -> NDArray[np.float64]:
        return np.median(self.d2, axis=1)

    def summary(self) -> dict:
        return {
            "experiment": "mallows",
            "seed": self.seed,
            "records": [
                {"n": int(n), "atoms": int(a), "d2": [float(v) for v in row], "median_d2": float(med)}
                for n, a, row, med in zip(self.n, self.atoms, self.d2, self.medians)
            ],
        }


def _mallows_task(args) -> tuple[float, int]:
    cfg, seed, i, n, s, q = args
    setup = build_setup(cfg)
    est = estimator_config(cfg, n, q)
    rng = stream(seed, _MALLOWS, i, s)
    vals = simulate_far1_batch(setup.op, setup.innov, n, setup.burn_in, rng, 1)[0]
    series = FunctionalSeries(setup.grid, vals)
    pool = extract_residuals(series, FittedEstimator(series, est, use_b=True))
    boot = pool.centered[resample_indices(pool, n, rng) - 1]
    fresh = draw_innovations(setup.innov, rng, n)
    k = min(n, cfg.run.mallows_atoms)
    if k < n:
        boot = boot[rng.choice(n, k, replace=False)]
        fresh = fresh[rng.choice(n, k, replace=False)]
    res = mallows_distance(EmpiricalLaw(fresh, setup.grid), EmpiricalLaw(boot, setup.grid), p=2)
    return res.cost, k


def run_mallows_experiment(cfg: ExperimentConfig, seed: int = 0) -> MallowsReport:
    """d_2 between n fresh true innovations and n bootstrap innovations, per n and seed."""
    setup = build_setup(cfg)
    q = resolve_q(cfg, setup, seed)
    tasks = [(cfg, seed, i, n, s, q) for i, n in enumerate(cfg.run.n) for s in range(cfg.run.seeds)]
    out = _pool_map(_mallows_task, tasks, cfg.run.threads)
    d2 = np.array([c for c, _ in out]).reshape(len(cfg.run.n), cfg.run.seeds)
    atoms = np.array([k for _, k in out]).reshape(len(cfg.run.n), cfg.run.seeds)[:, 0]
    return MallowsReport(seed, cfg.run.n, d2, atoms)


def probe_set(cfg: ExperimentConfig, setup: Setup, seed: int) -> NDArray[np.float64]:
    """Stationary draws shrunk by ``probe_scale`` toward Psi(0)."""
    states = simulate_far1_batch(setup.op, setup.innov, 1, setup.burn_in + 50, stream(seed, _PROBES), cfg.run.probes)[
        :, 0
    ]
    centre = setup.op.apply_values(np.zeros(setup.grid.m))
    return centre + cfg.run.probe_scale * (states - centre)


@dataclass
class ConsistencyReport:
    seed: int
    n: tuple[int, ...]
    errors: NDArray[np.float64]  # (len(n), seeds)
    probe_counts: NDArray[np.int64]
    probe_total: int

    @property
    def mean_errors(self) -> NDArray[np.float64]:
        return self.errors.mean(axis=1)

    @property
    def ratios(self) -> NDArray[np.float64]:
        e = self.mean_errors
        return e[1:] / e[:-1]

    def summary(self) -> dict:
        return {
            "experiment": "consistency",
            "seed": self.seed,
            "probe_total": self.probe_total,
            "records": [
                {"n": int(n), "probes_used": int(c), "errors": [float(v) for v in row], "mean_error": float(m)}
                for n, c, row, m in zip(self.n, self.probe_counts, self.errors, self.mean_errors)
            ],
            "error_ratios": [float(v) for v in self.ratios],
        }


def _consistency_task(args) -> tuple[float, int]:
    cfg, seed, i, n, s, q = args
    setup = build_setup(cfg)
    est = estimator_config(cfg, n, q)
    probes = probe_set(cfg, setup, seed)
    keep = smooth_norms(probes, setup.grid.step) <= est.r_n
    if not keep.any():
        raise DegenerateSampleError(f"no probe lies in U(r_n) for r_n={est.r_n:.4g} at n={n}")
    vals = simulate_far1_batch(setup.op, setup.innov, n, setup.burn_in, stream(seed, _CONSIST, i, s), 1)[0]
    fitted = FittedEstimator(FunctionalSeries(setup.grid, vals), est)
    err = uniform_error(fitted, setup.op, [GridFunction(setup.grid, p) for p in probes[keep]])
    return err, int(keep.sum())


def run_consistency_experiment(cfg: ExperimentConfig, seed: int = 0) -> ConsistencyReport:
    """Seed-averaged sup over a fixed probe set of ||Psi_hat_h(x) - Psi(x)||, per n.

    Probes outside U(r_n) are dropped; the count used is reported.
    """
    setup = build_setup(cfg)
    q = resolve_q(cfg, setup, seed)
    tasks = [(cfg, seed, i, n, s, q) for i, n in enumerate(cfg.run.n) for s in range(cfg.run.seeds)]
    out = _pool_map(_consistency_task, tasks, cfg.run.threads)
    shape = (len(cfg.run.n), cfg.run.seeds)
    errors = np.array([e for e, _ in out]).reshape(shape)
    counts = np.array([c for _, c in out]).reshape(shape)[:, 0]
    return ConsistencyReport(seed, cfg.run.n, errors, counts, cfg.run.probes)


@dataclass
class MDSReport:
    t: NDArray[np.float64]
    empirical: NDArray[np.float64]
    bound: NDArray[np.float64]
    trials: int
    n: int
    a: float
    b: float

    @property
    def violations(self) -> NDArray[np.bool_]:
        return self.empirical > self.bound

    @property
    def max_violation_ratio(self) -> float:
        return float(np.max(self.empirical / self.bound))

    def summary(self) -> dict:
        return {
            "experiment": "mds_tailbound",
            "trials": self.trials,
            "n": self.n,
            "a": self.a,
            "b": self.b,
            "violations": int(self.violations.sum()),
            "max_violation_ratio": self.max_violation_ratio,
            "grid": [
                {"t": float(t), "empirical": float(e), "bound": float(bd)}
                for t, e, bd in zip(self.t, self.empirical, self.bound)
            ],
        }


def mds_bound(t, n: int, a: float, b: float) -> NDArray[np.float64]:
    """2 exp(-t^2 / (2 (n a^2 + b t)))."""
    t = np.asarray(t, dtype=float)
    return 2.0 * np.exp(-0.5 * t**2 / (n * a * a + b * t))


def run_mds_tailbound_check(
    trials: int,
    n: int,
    a: float,
    b: float,
    rng: np.random.Generator | int | None,
    t_grid: NDArray | None = None,
    kind: str = "coin",
) -> MDSReport:
    """Empirical P(|sum Z_i| >= t) for a bounded martingale difference sequence vs the bound.

    ``coin``: Z_i = +-1. ``predictable``: Z_i = c_i eta_i with Rademacher eta_i and
    c_i = 1 if the running sum is <= 0 else 1/2, a genuinely dependent MDS with |Z_i| <= 1.
    """
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    if t_grid is None:
        t_grid = np.linspace(0.0, 4.0 * math.sqrt(n), 20)
    signs = rng.integers(0, 2, size=(trials, n), dtype=np.int8) * 2 - 1
    if kind == "coin":
        sums = signs.sum(axis=1, dtype=np.int64).astype(float)
    elif kind == "predictable":
        sums = np.zeros(trials)
        for i in range(n):
            scale = np.where(sums <= 0, 1.0, 0.5)
            sums += scale * signs[:, i]
    else:
        raise ValueError(f"unknown MDS kind {kind!r}")
    abs_sums = np.sort(np.abs(sums))
    t_grid = np.asarray(t_grid, dtype=float)
    tail = 1.0 - np.searchsorted(abs_sums, t_grid, side="left") / trials
    return MDSReport(t_grid, tail, mds_bound(t_grid, n, a, b), trials, n, float(a), float(b))
