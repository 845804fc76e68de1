import numpy as np
import pytest
from scipy import stats

from farboot.ar_bootstrap import (
    BootstrapDraw,
    build_coupled_draw,
    bootstrap_estimate,
    bootstrap_predict,
    extract_residuals,
    generate_pseudo_batch,
    generate_pseudo_series,
    pathwise_norm_bound,
    recursion_residuals,
    resample_indices,
    smoothness_bound,
)
from farboot.errors import DegenerateSampleError
from farboot.function_space import GridFunction, smooth_norms
from farboot.kernel_regression import EstimatorConfig, Kernel, bandwidth_schedule, fit, restriction_radius
from farboot.process_models import FunctionalSeries, InnovationModel, RegressionOperator, simulate_far1

UNIFORM, QUADRATIC = Kernel("uniform"), Kernel("quadratic")


def const_series(grid, levels):
    return FunctionalSeries(grid, np.repeat(np.asarray(levels, float)[:, None], grid.m, axis=1))


def default_config(n, q=4.0):
    h, b = bandwidth_schedule(n, q, 0.85, 2.0)
    return EstimatorConfig(QUADRATIC, h, b, restriction_radius(n))


@pytest.fixture(scope="module")
def fitted(series):
    cfg = default_config(series.n)
    est_b = fit(series, cfg, use_b=True)
    return cfg, est_b, extract_residuals(series, est_b)


def test_noiseless_series_has_zero_residuals(grid, basis):
    g = GridFunction(grid, 0.3 + 0.1 * grid.points)
    s = simulate_far1(RegressionOperator.constant(g, basis), InnovationModel.zero(basis), 20, 0, 0)
    pool = extract_residuals(s, fit(s, EstimatorConfig(QUADRATIC, 0.1, 0.2, 40), use_b=True))
    # averaging identical responses is exact up to one rounding step
    assert np.abs(pool.raw).max() < 1e-15 and np.abs(pool.centered).max() < 1e-15


def test_hand_computed_residuals(grid):
    s = const_series(grid, [0, 1, 2, 3, 4])
    pool = extract_residuals(s, fit(s, EstimatorConfig(UNIFORM, 0.25, 0.5, 50), use_b=True))
    # X_0 = 0 has no neighbour: fallback mean of X_1..X_3 is 2; each other X_t predicts X_(t+1)
    assert np.array_equal(pool.raw[:, 0], [-1.0, 0.0, 0.0, 0.0])
    assert np.array_equal(pool.index_set, [1, 2, 3])
    assert pool.centered[:, 0] == pytest.approx([-2 / 3, 1 / 3, 1 / 3, 1 / 3], abs=1e-15)


def test_index_set_definition(series, fitted):
    cfg, est_b, _ = fitted
    norms = smooth_norms(series.values[: series.n], series.grid.step)
    r = float(np.median(norms))
    pool = extract_residuals(series, est_b, r_n=r)
    assert pool.index_set.tolist() == [j for j in range(1, series.n + 1) if norms[j - 1] <= r]


def test_empty_index_set_is_degenerate(series, fitted):
    with pytest.raises(DegenerateSampleError):
        extract_residuals(series, fitted[1], r_n=1e-6)


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("n", [20, 100, 400])
def test_centering_identity(default_model, seed, n):
    s = simulate_far1(*default_model, n, 100, seed)
    pool = extract_residuals(s, fit(s, default_config(n), use_b=True))
    assert pool.centering_error() <= 1e-10


def test_resample_single_index(grid):
    s = const_series(grid, [0, 10, 20, 30])
    pool = extract_residuals(s, fit(s, EstimatorConfig(UNIFORM, 0.25, 0.5, 5.0), use_b=True))
    assert pool.index_set.tolist() == [1]
    assert np.all(resample_indices(pool, 50, 0) == 1)


def test_resample_deterministic(fitted):
    pool = fitted[2]
    assert np.array_equal(resample_indices(pool, 100, 5), resample_indices(pool, 100, 5))


def test_resample_frequencies(grid):
    s = const_series(grid, list(range(12)))
    pool = extract_residuals(s, fit(s, EstimatorConfig(UNIFORM, 0.25, 0.5, 50), use_b=True))
    assert pool.index_set.size == 10
    kappa = resample_indices(pool, 100_000, 42)
    counts = np.array([(kappa == j).sum() for j in pool.index_set])
    assert np.all(np.abs(counts / 1e5 - 0.1) <= 0.015)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_zero_pool_and_zero_map(grid, basis):
    s = simulate_far1(RegressionOperator.constant(GridFunction.zeros(grid), basis), InnovationModel.zero(basis), 10, 0, 0)
    est_b = fit(s, EstimatorConfig(QUADRATIC, 0.1, 0.2, 40), use_b=True)
    draw = generate_pseudo_series(extract_residuals(s, est_b), est_b, None, 3)
    assert np.all(draw.values == 0)


def test_hand_recursion(grid):
    s = const_series(grid, [0, 1, 2, 3])
    est_b = fit(s, EstimatorConfig(UNIFORM, 0.25, 0.5, 50), use_b=True)
    pool = extract_residuals(s, est_b)
    eps = {1: -0.25, 2: 0.25}
    assert pool.centered[:2, 0] == pytest.approx([eps[1], eps[2]], abs=1e-15)

    def psi(c):
        near = [resp for reg, resp in ((1, 2), (2, 3)) if abs(c - reg) <= 0.5]
        return sum(near) / len(near) if near else 1.5

    for seed in range(8):
        draw = generate_pseudo_series(pool, est_b, None, seed)
        x = [0.0]
        for k in draw.kappa:
            x.append(psi(x[-1]) + eps[int(k)])
        assert draw.values[:, 0] == pytest.approx(x, abs=1e-14)


def test_recursion_replay(fitted):
    _, est_b, pool = fitted
    draw = generate_pseudo_series(pool, est_b, None, 11)
    assert recursion_residuals(draw).max() <= 1e-10
    assert set(draw.kappa.tolist()) <= set(pool.index_set.tolist())
    assert np.array_equal(draw.innovations, pool.centered[draw.kappa - 1])


def test_draws_are_deterministic(fitted):
    _, est_b, pool = fitted
    a, b = generate_pseudo_series(pool, est_b, None, 9), generate_pseudo_series(pool, est_b, None, 9)
    assert np.array_equal(a.kappa, b.kappa)
    assert np.abs(a.values - b.values).max() <= 1e-12


def test_batch_rows_follow_recursion(fitted):
    _, est_b, pool = fitted
    vals, kappa, fb = generate_pseudo_batch(pool, est_b, None, 4, 5)
    for v, k, f in zip(vals, kappa, fb):
        draw = BootstrapDraw(v, k, pool, est_b, fallback_count=int(f))
        assert recursion_residuals(draw).max() <= 1e-10


def test_bootstrap_on_original_series_matches_estimator(series, fitted):
    cfg, est_b, pool = fitted
    draw = BootstrapDraw(series.values, np.ones(series.n + 1, dtype=np.intp), pool, est_b)
    est = fit(series, cfg)
    for t in (3, 50, 120):
        x = series[t]
        assert np.array_equal(bootstrap_estimate(draw, cfg, x).values, est.predict(x).value.values)


def test_bootstrap_out_of_class_uses_original_mean(series, fitted):
    cfg, est_b, pool = fitted
    draw = generate_pseudo_series(pool, est_b, None, 2)
    x = GridFunction(series.grid, 100 * np.cos(np.pi * series.grid.points))
    p = bootstrap_predict(draw, cfg, x)
    assert p.fallback
    assert np.array_equal(p.value.values, series.values[1:-1].mean(axis=0))


def test_bootstrap_single_neighbour(grid, fitted):
    _, est_b, pool = fitted
    vals = np.repeat(np.array([0.0, 0.0, 5.0, 9.0, 13.0])[:, None], grid.m, axis=1)
    draw = BootstrapDraw(vals, np.ones(4, dtype=np.intp), pool, est_b)
    cfg = EstimatorConfig(UNIFORM, 0.5, 1.0, 50)
    assert np.array_equal(bootstrap_estimate(draw, cfg, GridFunction(grid, np.full(grid.m, 0.2))).values, vals[2])


def test_pseudo_series_smoothness(series, fitted):
    _, est_b, pool = fitted
    c_star = smoothness_bound(series, pool)
    vals, _, _ = generate_pseudo_batch(pool, est_b, None, 6, 50)
    lips = np.abs(np.diff(vals[:, 1:], axis=-1)).max(axis=-1) / series.grid.step
    assert lips.max() <= c_star + 1e-9


def test_pseudo_series_norm_bound(series, fitted, default_model):
    _, est_b, pool = fitted
    for seed in range(10):
        draw = generate_pseudo_series(pool, est_b, None, seed)
        norms = np.sqrt(draw.values**2 @ series.grid.weights)
        assert norms.max() <= pathwise_norm_bound(draw, default_model[0]) + 1e-12


def test_coupled_draw_trivial(grid, basis):
    s = simulate_far1(RegressionOperator.constant(GridFunction.zeros(grid), basis), InnovationModel.zero(basis), 10, 0, 0)
    est_b = fit(s, EstimatorConfig(QUADRATIC, 0.1, 0.2, 40), use_b=True)
    draw = generate_pseudo_series(extract_residuals(s, est_b), est_b, None, 1)
    coupled = build_coupled_draw(draw, InnovationModel.zero(basis), RegressionOperator.exponential_linear(basis), 0)
    assert np.all(coupled.pair_distances() == 0)


def test_coupled_draw(fitted, default_model):
    _, est_b, pool = fitted
    op, innov = default_model
    draw = generate_pseudo_series(pool, est_b, None, 3)
    a, b = build_coupled_draw(draw, innov, op, 8), build_coupled_draw(draw, innov, op, 8)
    assert np.array_equal(a.tilde_eps, b.tilde_eps) and np.array_equal(a.tilde_values, b.tilde_values)
    step = a.tilde_values[1:] - op.apply_values(a.tilde_values[:-1])
    assert np.abs(step - a.tilde_eps).max() < 1e-12
    assert a.pair_distances().shape == (draw.n + 1,)
