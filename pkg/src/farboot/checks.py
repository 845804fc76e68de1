"""Property checks behind ``farboot check``: the sup-norm interpolation bound,
the martingale tail inequality and the covering growth rate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from farboot.experiments import run_mds_tailbound_check
from farboot.function_space import (
    SUP_NORM_CONSTANT,
    GridFunction,
    SmoothClass,
    greedy_cover,
    make_grid,
    sup_norm_bound_check,
)

__all__ = ["CheckResult", "random_piecewise_linear", "run_checks", "COIN_A", "COIN_B"]

# smallest constants with E|Z|^k <= k!/2 a^2 b^(k-2) for a +-1 coin
COIN_A, COIN_B = 1.0, 1.0 / 3.0


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def random_piecewise_linear(rng: np.random.Generator, grid=None) -> GridFunction:
    """Random piecewise-linear function with at least one zero on [0, 1]."""
    grid = grid or make_grid(101)
    knots = np.sort(np.concatenate([[0.0, 1.0], rng.uniform(0, 1, rng.integers(1, 8))]))
    vals = rng.normal(0, rng.uniform(0.1, 5), knots.size)
    vals[rng.integers(knots.size)] = 0.0
    return GridFunction(grid, np.interp(grid.points, knots, vals))


def _sup_norm_random(rng, count: int = 1000) -> CheckResult:
    worst = 0.0
    for _ in range(count):
        lhs, rhs = sup_norm_bound_check(random_piecewise_linear(rng))
        worst = max(worst, lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf))
    return CheckResult("sup_norm_bound", worst <= 1 + 1e-12, f"max lhs/rhs over {count} functions = {worst:.6f}")


def _sup_norm_extremal() -> CheckResult:
    grid = make_grid(301)
    gap = 0.0
    for slope, r in [(1.0, 0.5), (3.0, 0.2), (0.7, 1.0), (10.0, 0.33)]:
        f = GridFunction.from_callable(grid, lambda u: slope * np.maximum(r - u, 0))
        lhs, rhs = sup_norm_bound_check(f)
        gap = max(gap, abs(lhs - rhs))
    return CheckResult(
        "sup_norm_extremal", gap <= 1e-6, f"half-cone |lhs - rhs| <= {gap:.2e} (C = {SUP_NORM_CONSTANT:.6f})"
    )


def _mds(kind: str, seed: int) -> CheckResult:
    rep = run_mds_tailbound_check(100_000, 100, COIN_A, COIN_B, seed, kind=kind)
    return CheckResult(
        f"mds_tail_{kind}",
        not rep.violations.any(),
        f"max empirical/bound = {rep.max_violation_ratio:.4f} on {rep.t.size} t values",
    )


def _covering(seed: int) -> CheckResult:
    eps = np.array([0.4, 0.2, 0.1])
    counts = np.array([greedy_cover(SmoothClass(1.0), e, 500, rng_seed=seed) for e in eps])
    use = counts >= 2  # a single ball carries no rate information
    if use.sum() < 2:
        return CheckResult("covering_rate", True, f"greedy counts {counts.tolist()}, too few to fit")
    slope = float(np.polyfit(np.log(1 / eps[use]), np.log(np.log(counts[use])), 1)[0])
    return CheckResult("covering_rate", slope <= 1.0, f"greedy counts {counts.tolist()}, exponent {slope:.3f}")


def run_checks(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [
        _sup_norm_random(rng),
        _sup_norm_extremal(),
        _mds("coin", seed),
        _mds("predictable", seed + 1),
        _covering(seed),
    ]
