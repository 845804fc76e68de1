import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from farboot.errors import GridMismatchError, UnsupportedCaseError
from farboot.distances import EmpiricalLaw, kolmogorov_distance, mallows_distance, scalar_wasserstein
from farboot.function_space import GridFunction, make_grid
from oracles import ks_brute, mallows_brute

samples = st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=7)


def test_identical_laws_have_zero_distance(grid):
    atoms = np.random.default_rng(0).normal(size=(6, grid.m))
    res = mallows_distance(EmpiricalLaw(atoms, grid), EmpiricalLaw(atoms[::-1], grid))
    assert res.cost == 0
    assert np.array_equal(res.permutation, np.arange(6)[::-1])


def test_single_atom_distance_is_l2(grid):
    f = GridFunction(grid, grid.points)
    res = mallows_distance(EmpiricalLaw.from_functions([f]), EmpiricalLaw.from_functions([GridFunction.zeros(grid)]))
    assert res.cost == pytest.approx(np.sqrt(f.values**2 @ grid.weights), abs=1e-15)


def test_unequal_sizes_unsupported():
    with pytest.raises(UnsupportedCaseError):
        mallows_distance(EmpiricalLaw(np.zeros(2)), EmpiricalLaw(np.zeros(3)))


def test_grid_mismatch(grid):
    with pytest.raises(GridMismatchError):
        mallows_distance(EmpiricalLaw(np.zeros((2, grid.m)), grid), EmpiricalLaw(np.zeros((2, 51)), make_grid(51)))


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
@pytest.mark.parametrize("n", range(1, 8))
def test_hungarian_equals_brute_force(grid, n, p):
    rng = np.random.default_rng(100 * n + int(p))
    a, b = rng.normal(size=(n, grid.m)), rng.normal(size=(n, grid.m))
    got = mallows_distance(EmpiricalLaw(a, grid), EmpiricalLaw(b, grid), p).cost
    assert got == pytest.approx(mallows_brute(a, b, p, grid.weights), abs=1e-12)


@given(samples, st.integers(0, 2**31), st.sampled_from([1.0, 2.0]))
@settings(max_examples=200, deadline=None)
def test_scalar_mallows_is_sorted_pairing(a, seed, p):
    b = np.random.default_rng(seed).normal(0, 50, len(a))
    got = mallows_distance(EmpiricalLaw(np.array(a)), EmpiricalLaw(b), p).cost
    assert got == pytest.approx(scalar_wasserstein(a, b, p), rel=1e-9, abs=1e-9)


@given(st.integers(0, 2**31))
@settings(max_examples=60, deadline=None)
def test_metric_axioms(seed):
    grid = make_grid(21)
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6))
    F, G, H = (EmpiricalLaw(rng.normal(size=(n, grid.m)), grid) for _ in range(3))
    d = lambda x, y: mallows_distance(x, y).cost  # noqa: E731
    assert d(F, F) == 0
    assert d(F, G) == pytest.approx(d(G, F), abs=1e-12)
    assert d(F, H) <= d(F, G) + d(G, H) + 1e-12


@given(st.integers(0, 2**31))
@settings(max_examples=60, deadline=None)
def test_monotone_in_order(seed):
    grid = make_grid(21)
    rng = np.random.default_rng(seed)
    F, G = (EmpiricalLaw(rng.normal(size=(5, grid.m)), grid) for _ in range(2))
    costs = [mallows_distance(F, G, p).cost for p in (1, 2, 3, 4)]
    assert all(x <= y + 1e-12 for x, y in zip(costs, costs[1:]))


def test_order_below_one_rejected():
    with pytest.raises(ValueError):
        mallows_distance(EmpiricalLaw(np.zeros(2)), EmpiricalLaw(np.zeros(2)), 0.5)


def test_ks_examples():
    assert kolmogorov_distance([1, 2, 3], [1, 2, 3]) == 0
    assert kolmogorov_distance([1, 2, 3], [1, 2, 4]) == pytest.approx(1 / 3)
    assert kolmogorov_distance([0, 0], [1]) == 1


@pytest.mark.filterwarnings("ignore:divide by zero:RuntimeWarning")  # scipy p-value only; statistic unaffected
@given(samples, samples)
@settings(max_examples=200, deadline=None)
def test_ks_matches_oracles(a, b):
    got = kolmogorov_distance(a, b)
    assert got == pytest.approx(ks_brute(a, b), abs=1e-12)
    assert got == pytest.approx(stats.ks_2samp(a, b, method="asymp").statistic, abs=1e-12)
    assert 0 <= got <= 1


def test_scalar_wasserstein_example():
    assert scalar_wasserstein([0, 1], [1, 2]) == 1.0
    assert scalar_wasserstein([3, 0], [0, 3]) == 0.0
    with pytest.raises(UnsupportedCaseError):
        scalar_wasserstein([0], [0, 1])
