"""Functional Nadaraya-Watson regression with a restriction set and sample-mean fallback."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from numpy.typing import NDArray
from scipy import integrate

from farboot.errors import ConfigurationError, GridMismatchError, NumericalError
from farboot.function_space import GridFunction, smooth_norm, smooth_norms
from farboot.process_models import FunctionalSeries, RegressionOperator

__all__ = [
    "Kernel",
    "EstimatorConfig",
    "FittedEstimator",
    "Prediction",
    "LimitMoments",
    "BandwidthWarning",
    "kernel_weight",
    "fit",
    "nw_predict",
    "empirical_small_ball",
    "limit_moments",
    "bandwidth_schedule",
    "restriction_radius",
    "estimate_small_ball_exponent",
    "uniform_error",
    "sq_distances",
]

# Gram-trick distances within this relative margin of the bandwidth are recomputed directly.
_BOUNDARY_RTOL = 1e-8


class BandwidthWarning(UserWarning):
    """A bandwidth pair does not satisfy h < b or n is too small for the schedule."""


@dataclass(frozen=True)
class Kernel:
    """Kernel on [0, 1], zero outside; ``uniform`` K = 1, ``quadratic`` K = 1 - s^2 / 2."""

    kind: Literal["uniform", "quadratic"] = "quadratic"

    def __post_init__(self) -> None:
        if self.kind not in ("uniform", "quadratic"):
            raise ConfigurationError(f"unknown kernel {self.kind!r}")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        inside = (s >= 0) & (s <= 1)
        if self.kind == "uniform":
            val = np.ones_like(s)
        else:
            val = 1.0 - 0.5 * s * s
        out = np.where(inside, val, 0.0)
        return float(out) if out.ndim == 0 else out

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        inside = (s >= 0) & (s <= 1)
        val = np.zeros_like(s) if self.kind == "uniform" else -s
        out = np.where(inside, val, 0.0)
        return float(out) if out.ndim == 0 else out

    @property
    def at_one(self) -> float:
        return self(1.0)


@dataclass(frozen=True)
class EstimatorConfig:
    kernel: Kernel
    h: float
    b: float
    r_n: float
    min_neighbors: int = 1

    def __post_init__(self) -> None:
        if not 0 < self.h:
            raise ConfigurationError(f"bandwidth h must be positive, got {self.h}")
        if not self.h < self.b:
            raise ConfigurationError(f"need h < b, got h={self.h}, b={self.b}")
        if not self.r_n > 0:
            raise ConfigurationError(f"restriction radius must be positive, got {self.r_n}")
        if self.min_neighbors < 0:
            raise ConfigurationError("min_neighbors must be >= 0")


@dataclass(frozen=True)
class Prediction:
    value: GridFunction
    weight_sum: float
    neighbor_count: int
    fallback: bool
    min_neighbors: int = field(default=1, repr=False)

    @property
    def sparse(self) -> bool:
        """Fewer neighbours than ``min_neighbors``; diagnostic only."""
        return self.neighbor_count < self.min_neighbors


def kernel_weight(k: Kernel, f: GridFunction, x: GridFunction, h: float) -> float:
    """K(||f - x|| / h)."""
    if not h > 0:
        raise ValueError("h must be positive")
    if f.grid != x.grid:
        raise GridMismatchError(f"{f.grid!r} vs {x.grid!r}")
    d = f.values - x.values
    return k(math.sqrt(max(float(np.dot(f.grid.weights * d, d)), 0.0)) / h)


def sq_distances(a: NDArray, b: NDArray, weights: NDArray) -> NDArray[np.float64]:
    """Squared weighted L2 distances between rows of ``a`` (p, m) and ``b`` (q, m), directly."""
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("pqm,m,pqm->pq", diff, weights, diff)


class FittedEstimator:
    """Nadaraya-Watson estimator fitted on pairs (X_t, X_{t+1}), t = 1..n.

    ``bandwidth`` is ``config.h`` by default; pass ``use_b=True`` for the
    oversmoothed estimator. Out-of-class targets and targets without any
    neighbour receive the sample mean of X_1..X_n and are flagged.
    """

    def __init__(self, series: FunctionalSeries, config: EstimatorConfig, use_b: bool = False):
        self.series = series
        self.config = config
        self.bandwidth = config.b if use_b else config.h
        self.grid = series.grid
        self.regressors = series.values[1:-1]
        self.responses = series.values[2:]
        self.mean = self.regressors.mean(axis=0)
        self._sqrt_w = np.sqrt(self.grid.weights)
        self._reg_scaled = self.regressors * self._sqrt_w
        self._reg_sq = np.einsum("ij,ij->i", self._reg_scaled, self._reg_scaled)

    @property
    def n(self) -> int:
        return self.regressors.shape[0]

    @property
    def mean_function(self) -> GridFunction:
        return GridFunction(self.grid, self.mean)

    def distances(self, x: GridFunction) -> NDArray[np.float64]:
        """||X_t - x|| for t = 1..n, computed directly."""
        return self._direct(x.values)

    def _direct(self, values: NDArray) -> NDArray[np.float64]:
        d = self.regressors - values
        return np.sqrt(np.maximum(d * d @ self.grid.weights, 0.0))

    def predict(self, x: GridFunction) -> Prediction:
        if x.grid != self.grid:
            raise GridMismatchError(f"{x.grid!r} vs {self.grid!r}")
        if smooth_norm(x) > self.config.r_n:
            return Prediction(self.mean_function, 0.0, 0, True, self.config.min_neighbors)
        w = self.config.kernel(self.distances(x) / self.bandwidth)
        total = float(w.sum())
        count = int(np.count_nonzero(w))
        if total <= 0:
            return Prediction(self.mean_function, 0.0, 0, True, self.config.min_neighbors)
        value = GridFunction(self.grid, w @ self.responses / total)
        return Prediction(value, total, count, False, self.config.min_neighbors)

    def predict_values(self, targets: NDArray) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
        """Vectorized prediction for a (p, m) stack; returns values and fallback flags.

        Distances use the Gram identity; entries near the kernel support edge are
        recomputed directly so the neighbour sets agree with ``predict``.
        """
        targets = np.asarray(targets, dtype=float)
        ts = targets * self._sqrt_w
        t_sq = np.einsum("ij,ij->i", ts, ts)
        d2 = t_sq[:, None] + self._reg_sq[None, :] - 2.0 * ts @ self._reg_scaled.T
        np.maximum(d2, 0.0, out=d2)
        h2 = self.bandwidth**2
        near = np.abs(d2 - h2) <= _BOUNDARY_RTOL * (h2 + t_sq[:, None] + self._reg_sq[None, :])
        d = np.sqrt(d2)
        # same arithmetic as ``distances`` so edge cases agree bit for bit
        for r in np.flatnonzero(near.any(axis=1)):
            d[r, near[r]] = self._direct(targets[r])[near[r]]
        w = self.config.kernel(d / self.bandwidth)
        total = w.sum(axis=1)
        in_class = smooth_norms(targets, self.grid.step) <= self.config.r_n
        fallback = ~in_class | (total <= 0)
        out = np.empty_like(targets)
        ok = ~fallback
        out[ok] = (w[ok] @ self.responses) / total[ok, None]
        out[fallback] = self.mean
        return out, fallback


def fit(series: FunctionalSeries, config: EstimatorConfig, use_b: bool = False) -> FittedEstimator:
    return FittedEstimator(series, config, use_b)


def nw_predict(est: FittedEstimator, x: GridFunction) -> tuple[GridFunction, dict]:
    p = est.predict(x)
    return p.value, {
        "weight_sum": p.weight_sum,
        "neighbor_count": p.neighbor_count,
        "fallback": p.fallback,
    }


def empirical_small_ball(series: FunctionalSeries | NDArray, x: GridFunction, h: float) -> float:
    """Fraction of regressors X_1..X_n within L2 distance ``h`` of ``x``."""
    if h < 0:
        raise ValueError("h must be nonnegative")
    regs = series.values[1:-1] if isinstance(series, FunctionalSeries) else np.asarray(series)
    d = regs - x.values
    dist = np.sqrt(np.maximum(d * d @ x.grid.weights, 0.0))
    return float(np.mean(dist <= h))


@dataclass(frozen=True)
class LimitMoments:
    M0: float
    M: dict[int, float]
    tau0: Callable[[float], float]
    q: float | None = None

    def __getitem__(self, j: int) -> float:
        return self.M0 if j == 0 else self.M[j]


def _quad(fn, what: str) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            res = integrate.quad(fn, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200, full_output=1)
        except integrate.IntegrationWarning as exc:
            raise NumericalError(f"quadrature for {what} did not converge", {"message": str(exc)}) from exc
    val, err, info = res[:3]
    # a fourth element carries QUADPACK's failure message
    if len(res) > 3 or not math.isfinite(val) or err > 1e-9:
        raise NumericalError(
            f"quadrature for {what} did not converge",
            {"value": val, "abserr": err, "neval": info["neval"], "message": res[3] if len(res) > 3 else ""},
        )
    return float(val)


def limit_moments(k: Kernel, tau0: Callable[[float], float], j_max: int = 2, q: float | None = None) -> LimitMoments:
    """M0 = K(1) - int (s K)' tau0 and M_j = K(1)^j - int (K^j)' tau0 over [0, 1]."""
    if abs(tau0(0.0)) > 1e-12:
        raise ValueError("tau0(0) must be 0")
    k1 = k.at_one
    m0 = k1 - _quad(lambda s: (k(s) + s * k.derivative(s)) * tau0(s), "M0")
    moments = {}
    for j in range(1, j_max + 1):
        # (K^j)' = j K^(j-1) K'
        integral = _quad(lambda s, j=j: j * k(s) ** (j - 1) * k.derivative(s) * tau0(s), f"M{j}")
        moments[j] = k1**j - integral
    return LimitMoments(m0, moments, tau0, q)


def bandwidth_schedule(
    n: int, q: float, c_h: float = 1.0, c_b: float = 2.0, b_rate: float = 0.5
) -> tuple[float, float]:
    """h = c_h n^(-1/(q+2)), b = c_b n^(-b_rate/(q+2)).

    With phi(h) ~ h^q this keeps h (n phi(h))^(1/2) = c_h^((q+2)/2) free of n
    while h / b -> 0 for ``b_rate < 1``.
    """
    if not q > 0:
        raise ConfigurationError(f"small-ball exponent q must be positive, got {q}")
    if not 0 < b_rate < 1:
        raise ConfigurationError("b_rate must lie in (0, 1)")
    h = c_h * n ** (-1.0 / (q + 2.0))
    b = c_b * n ** (-b_rate / (q + 2.0))
    if n < 10 or h >= b:
        warnings.warn(f"bandwidths h={h:.4g}, b={b:.4g} at n={n} do not satisfy h < b", BandwidthWarning, stacklevel=2)
    return h, b


def restriction_radius(n: int, r0: float = 30.0, c_r: float = 5.0) -> float:
    """r_n = r0 + c_r log n."""
    return r0 + c_r * math.log(n)


def estimate_small_ball_exponent(
    regressors: NDArray, x: GridFunction, h_grid: NDArray | None = None
) -> float:
    """Slope of log F_hat(h) against log h over a dyadic bandwidth grid.

    Bandwidths whose ball is empty or contains the whole sample are skipped.
    """
    regs = regressors.values[1:-1] if isinstance(regressors, FunctionalSeries) else np.asarray(regressors)
    d = np.sqrt(np.maximum((regs - x.values) ** 2 @ x.grid.weights, 0.0))
    if h_grid is None:
        top = float(np.quantile(d, 0.5))
        h_grid = top * 2.0 ** -np.arange(0, 8, 0.5)
    h_grid = np.asarray(h_grid, dtype=float)
    frac = np.array([np.mean(d <= h) for h in h_grid])
    ok = (frac > 0) & (frac < 1) & (frac * d.size >= 3)
    if ok.sum() < 2:
        raise NumericalError("too few informative bandwidths to estimate the small-ball exponent")
    slope = np.polyfit(np.log(h_grid[ok]), np.log(frac[ok]), 1)[0]
    return float(slope)


def uniform_error(est: FittedEstimator, truth: RegressionOperator, probes: list[GridFunction]) -> float:
    """max over probes of ||Psi_hat(x) - Psi(x)||."""
    if len(probes) == 0:
        raise ValueError("probes must be nonempty")
    worst = 0.0
    for x in probes:
        if smooth_norm(x) > est.config.r_n:
            raise ValueError("probe lies outside U(r_n)")
        d = est.predict(x).value.values - truth.apply_values(x.values)
        worst = max(worst, math.sqrt(max(float(d * d @ x.grid.weights), 0.0)))
    return worst
