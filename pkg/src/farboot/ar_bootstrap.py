"""Residual pool, resampling and pseudo-series generation for the autoregression bootstrap."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from farboot.errors import DegenerateSampleError, GridMismatchError
from farboot.function_space import GridFunction, smooth_norm, smooth_norms
from farboot.kernel_regression import EstimatorConfig, FittedEstimator, Prediction
from farboot.process_models import (
    FunctionalSeries,
    InnovationModel,
    RegressionOperator,
    as_generator,
    draw_innovations,
    simulate_far1_batch,
)

__all__ = [
    "ResidualPool",
    "BootstrapDraw",
    "CoupledDraw",
    "extract_residuals",
    "resample_indices",
    "generate_pseudo_series",
    "generate_pseudo_batch",
    "bootstrap_estimate",
    "bootstrap_predict",
    "build_coupled_draw",
    "recursion_residuals",
    "smoothness_bound",
    "pathwise_norm_bound",
]


@dataclass(frozen=True, eq=False)
class ResidualPool:
    """Estimated residuals for t = 1..n+1 and their centered versions.

    ``raw[t - 1]`` is X_t - Psi_hat_b(X_{t-1}); ``centered = raw - eps_bar``.
    Only indices in ``index_set`` enter the pool and the centering mean.
    """

    raw: NDArray[np.float64]
    centered: NDArray[np.float64]
    index_set: NDArray[np.intp]
    eps_bar: NDArray[np.float64]
    grid: object

    def __post_init__(self) -> None:
        for name in ("raw", "centered", "index_set", "eps_bar"):
            getattr(self, name).setflags(write=False)

    @property
    def atoms(self) -> NDArray[np.float64]:
        """Centered residuals eps'_t for t in I_n, in index order."""
        return self.centered[self.index_set - 1]

    def residual(self, t: int) -> GridFunction:
        return GridFunction(self.grid, self.centered[t - 1])

    def centering_error(self) -> float:
        s = self.atoms.sum(axis=0)
        return math.sqrt(max(float(s * s @ self.grid.weights), 0.0))


def extract_residuals(series: FunctionalSeries, est_b: FittedEstimator, r_n: float | None = None) -> ResidualPool:
    r_n = est_b.config.r_n if r_n is None else r_n
    if series.grid != est_b.grid:
        raise GridMismatchError("series and estimator use different grids")
    vals = series.values
    n = series.n
    prev = vals[:-1]  # X_0..X_n
    fitted = np.stack([est_b.predict(GridFunction(series.grid, x)).value.values for x in prev])
    raw = vals[1:] - fitted
    in_class = smooth_norms(prev[:n], series.grid.step) <= r_n
    index_set = np.flatnonzero(in_class) + 1
    if index_set.size == 0:
        raise DegenerateSampleError(f"no X_(j-1) lies in U(r_n) for r_n={r_n}; residual pool is empty")
    pooled = raw[index_set - 1]
    # two-pass centering keeps the pooled sum at rounding level
    eps_bar = pooled.mean(axis=0)
    eps_bar = eps_bar + (pooled - eps_bar).mean(axis=0)
    centered = raw - eps_bar
    return ResidualPool(raw, centered, index_set, eps_bar, series.grid)


def resample_indices(pool: ResidualPool, n: int, rng: np.random.Generator | int | None) -> NDArray[np.intp]:
    """``n`` indices drawn independently and uniformly from I_n."""
    if pool.index_set.size == 0:
        raise DegenerateSampleError("empty residual pool")
    rng = as_generator(rng)
    return pool.index_set[rng.integers(0, pool.index_set.size, size=n)]


@dataclass(frozen=True, eq=False)
class BootstrapDraw:
    """Pseudo-series X*_0..X*_{n+1} with kappa[t - 1] the residual index used at step t."""

    values: NDArray[np.float64]
    kappa: NDArray[np.intp]
    pool: ResidualPool
    estimator: FittedEstimator
    seed: int | None = None
    fallback_count: int = 0

    @property
    def n(self) -> int:
        return self.values.shape[0] - 2

    @property
    def series(self) -> FunctionalSeries:
        return FunctionalSeries(self.pool.grid, self.values, seed=self.seed)

    @property
    def innovations(self) -> NDArray[np.float64]:
        """eps*_t = eps'_{kappa_t}, t = 1..n+1."""
        return self.pool.centered[self.kappa - 1]


def generate_pseudo_batch(
    pool: ResidualPool,
    est_b: FittedEstimator,
    x0: GridFunction | None,
    rng: np.random.Generator | int | None,
    draws: int,
) -> tuple[NDArray[np.float64], NDArray[np.intp], NDArray[np.int64]]:
    """``draws`` pseudo-series at once: values (B, n+2, m), kappa (B, n+1), fallback counts (B,)."""
    rng = as_generator(rng)
    n = est_b.n
    x0v = est_b.series.values[0] if x0 is None else x0.values
    kappa = resample_indices(pool, draws * (n + 1), rng).reshape(draws, n + 1)
    eps = pool.centered[kappa - 1]
    out = np.empty((draws, n + 2, pool.grid.m))
    out[:, 0] = x0v
    fallbacks = np.zeros(draws, dtype=np.int64)
    for t in range(1, n + 2):
        pred, fb = est_b.predict_values(out[:, t - 1])
        out[:, t] = pred + eps[:, t - 1]
        fallbacks += fb
    return out, kappa, fallbacks


def generate_pseudo_series(
    pool: ResidualPool,
    est_b: FittedEstimator,
    x0: GridFunction | None = None,
    rng: np.random.Generator | int | None = None,
) -> BootstrapDraw:
    """X*_t = Psi_hat_b(X*_{t-1}) + eps'_{kappa_t}, t = 1..n+1, started at ``x0`` (default X_0)."""
    seed = rng if isinstance(rng, (int, np.integer)) else None
    vals, kappa, fb = generate_pseudo_batch(pool, est_b, x0, rng, 1)
    return BootstrapDraw(vals[0], kappa[0], pool, est_b, seed, int(fb[0]))


def recursion_residuals(draw: BootstrapDraw) -> NDArray[np.float64]:
    """max |X*_t - Psi_hat_b(X*_{t-1}) - eps*_t| per step, replayed with ``predict``."""
    grid = draw.pool.grid
    out = np.empty(draw.n + 1)
    for t in range(1, draw.n + 2):
        prev = GridFunction(grid, draw.values[t - 1])
        pred = draw.estimator.predict(prev).value.values
        out[t - 1] = np.abs(draw.values[t] - pred - draw.pool.centered[draw.kappa[t - 1] - 1]).max()
    return out


def bootstrap_predict(draw: BootstrapDraw, config: EstimatorConfig, x: GridFunction) -> Prediction:
    """Nadaraya-Watson on the pseudo-pairs (X*_t, X*_{t+1}) with bandwidth h.

    Fallbacks return the mean of the original X_1..X_n.
    """
    original_mean = draw.estimator.mean_function
    if smooth_norm(x) > config.r_n:
        return Prediction(original_mean, 0.0, 0, True, config.min_neighbors)
    regs = draw.values[1:-1]
    d = regs - x.values
    w = config.kernel(np.sqrt(np.maximum(d * d @ x.grid.weights, 0.0)) / config.h)
    total = float(w.sum())
    if total <= 0:
        return Prediction(original_mean, 0.0, 0, True, config.min_neighbors)
    value = GridFunction(x.grid, w @ draw.values[2:] / total)
    return Prediction(value, total, int(np.count_nonzero(w)), False, config.min_neighbors)


def bootstrap_estimate(draw: BootstrapDraw, config: EstimatorConfig, x: GridFunction) -> GridFunction:
    return bootstrap_predict(draw, config, x).value


def smoothness_bound(series: FunctionalSeries, pool: ResidualPool) -> float:
    """c* with Lip(X*_t) <= c* for every t >= 1 of every draw from ``pool``.

    Psi_hat_b returns convex combinations of X_2..X_{n+1} or the mean of
    X_1..X_n, so its Lipschitz seminorm is at most max_t Lip(X_t); the
    residual term adds max_{j in I_n} Lip(eps'_j).
    """
    step = series.grid.step
    lip = lambda v: np.abs(np.diff(v, axis=-1)).max(axis=-1) / step  # noqa: E731
    return float(lip(series.values[1:]).max() + lip(pool.atoms).max())


def pathwise_norm_bound(draw: BootstrapDraw, truth: RegressionOperator, x0_norm: float | None = None) -> float:
    """||X*_0|| + D / (1 - L) with D measured on the draw.

    D = max(||X_bar||, max over visited in-class states of ||Psi_hat_b - Psi||)
    + ||Psi(0)|| + max_j ||eps'_j||, which gives ||X*_t|| <= D + L ||X*_{t-1}||.
    """
    grid = draw.pool.grid
    w = grid.weights
    norm = lambda v: np.sqrt(np.maximum(v * v @ w, 0.0))  # noqa: E731
    prev = draw.values[:-1]
    pred, fb = draw.estimator.predict_values(prev)
    gap = norm(pred - truth.apply_values(prev))
    gap_in = float(gap[~fb].max()) if (~fb).any() else 0.0
    psi0 = float(norm(truth.apply_values(np.zeros(grid.m))))
    D = max(float(norm(draw.estimator.mean)), gap_in) + psi0 + float(norm(draw.pool.atoms).max())
    x0_norm = float(norm(draw.values[0])) if x0_norm is None else x0_norm
    return x0_norm + D / (1.0 - truth.lip_const)


@dataclass(frozen=True, eq=False)
class CoupledDraw:
    """True-model innovations and path positionally paired with a bootstrap draw."""

    tilde_eps: NDArray[np.float64]
    tilde_values: NDArray[np.float64]
    draw: BootstrapDraw

    def pair_distances(self) -> NDArray[np.float64]:
        """||eps~_t - eps*_t|| for t = 1..n+1."""
        d = self.tilde_eps - self.draw.innovations
        return np.sqrt(np.maximum(d * d @ self.draw.pool.grid.weights, 0.0))


def build_coupled_draw(
    draw: BootstrapDraw,
    innov: InnovationModel,
    op: RegressionOperator,
    rng: np.random.Generator | int | None,
    burn_in: int = 100,
) -> CoupledDraw:
    """i.i.d. true innovations eps~ and X~_t = Psi(X~_{t-1}) + eps~_t from a fresh stationary X~_0."""
    rng = as_generator(rng)
    n = draw.n
    x0 = simulate_far1_batch(op, innov, 1, burn_in, rng, 1)[0, 0]
    eps = draw_innovations(innov, rng, n + 1)
    path = np.empty((n + 2, op.grid.m))
    path[0] = x0
    for t in range(1, n + 2):
        path[t] = op.apply_values(path[t - 1]) + eps[t - 1]
    return CoupledDraw(eps, path, draw)
