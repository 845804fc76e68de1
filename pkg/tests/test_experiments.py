import json

import numpy as np
import pytest

from farboot.config import ExperimentConfig
from farboot.experiments import (
    build_setup,
    mds_bound,
    probe_set,
    run_consistency_experiment,
    run_distribution_experiment,
    run_mallows_experiment,
    run_mds_tailbound_check,
    stream,
)
from farboot.errors import DegenerateSampleError
from farboot.function_space import smooth_norm, smooth_norms

SMALL = ExperimentConfig().with_overrides(
    run=dict(n=(40, 80), replications=25, draws=25, spread_series=2, seeds=2, probes=6, mallows_atoms=40)
)


def test_streams_are_keyed():
    a = stream(3, 1, 2).random(4)
    assert np.array_equal(a, stream(3, 1, 2).random(4))
    assert not np.array_equal(a, stream(3, 2, 1).random(4))
    assert not np.array_equal(a, stream(4, 1, 2).random(4))


def test_setup_target_and_directions():
    setup = build_setup(ExperimentConfig())
    w = setup.grid.weights
    assert np.allclose((setup.directions**2) @ w, 1.0, atol=1e-12)
    assert smooth_norm(setup.target) < 30.0


def test_distribution_report_shapes():
    rep = run_distribution_experiment(SMALL, seed=1)
    for rec in rep.records:
        assert rec.mc_stats.shape == (25, 3) and rec.boot_stats.shape == (25, 3)
        assert rec.spread_ks.shape == (2, 3)
        assert np.all((0 <= rec.ks) & (rec.ks <= 1))
    summary = rep.summary()
    json.dumps(summary, allow_nan=False)
    assert summary["records"][0]["directions"]["e1"]["spread_ks"]["count"] == 2


def test_single_replication_is_well_formed():
    cfg = SMALL.with_overrides(run=dict(replications=1, draws=1, spread_series=0))
    rep = run_distribution_experiment(cfg, seed=0)
    for rec in rep.records:
        assert set(np.unique(rec.ks)) <= {0.0, 1.0}
    rep.summary()


def test_fallback_dominated_runs_are_invalid():
    cfg = SMALL.with_overrides(run=dict(target_amplitude=20.0, spread_series=0))
    rep = run_distribution_experiment(cfg, seed=0)
    assert not any(r.valid for r in rep.records)
    assert all(not rec["valid"] for rec in rep.summary()["records"])


def test_distribution_is_deterministic_and_worker_independent():
    a = run_distribution_experiment(SMALL, seed=4).summary()
    b = run_distribution_experiment(SMALL.with_overrides(run=dict(threads=2)), seed=4).summary()
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_mallows_zero_noise():
    cfg = SMALL.with_overrides(model=dict(innovation_scale=0.0))
    rep = run_mallows_experiment(cfg, seed=0)
    assert np.all(rep.d2 == 0)


def test_mallows_single_atom_subsample():
    rep = run_mallows_experiment(SMALL.with_overrides(run=dict(mallows_atoms=1)), seed=0)
    assert np.all(rep.atoms == 1) and np.all(rep.d2 > 0)


def test_consistency_noiseless():
    cfg = SMALL.with_overrides(model=dict(innovation_scale=0.0))
    rep = run_consistency_experiment(cfg, seed=0)
    assert rep.errors.max() <= 1e-8
    assert np.all(rep.probe_counts == 6)


def test_consistency_reports_dropped_probes():
    setup = build_setup(SMALL)
    norms = np.sort(smooth_norms(probe_set(SMALL, setup, 0), setup.grid.step))
    cut = float(norms[2:4].mean())
    rep = run_consistency_experiment(SMALL.with_overrides(estimator=dict(r0=cut, c_r=0.0)), seed=0)
    assert np.all(rep.probe_counts == 3)
    assert rep.summary()["probe_total"] == 6
    with pytest.raises(DegenerateSampleError):
        run_consistency_experiment(SMALL.with_overrides(estimator=dict(r0=norms[0] / 2, c_r=0.0)), seed=0)


def test_mds_bound_at_zero():
    assert mds_bound(0.0, 100, 1.0, 1 / 3) == 2.0


def test_mds_coin_within_bound():
    rep = run_mds_tailbound_check(100_000, 100, 1.0, 1 / 3, 0, t_grid=np.array([50.0]))
    assert rep.empirical[0] <= rep.bound[0]


@pytest.mark.parametrize("kind", ["coin", "predictable"])
def test_mds_grid(kind):
    rep = run_mds_tailbound_check(20_000, 100, 1.0, 1 / 3, 1, kind=kind)
    assert rep.t.size == 20 and not rep.violations.any()


def test_mds_negative_control_reports_violations():
    rep = run_mds_tailbound_check(20_000, 100, 0.3, 0.0, 2)
    assert rep.violations.any()
    assert rep.summary()["violations"] == int(rep.violations.sum())


def test_mds_empirical_tail_matches_direct_count():
    rep = run_mds_tailbound_check(5000, 30, 1.0, 1 / 3, 3, t_grid=np.array([0.0, 4.0, 6.0, 11.0]))
    rng = np.random.default_rng(3)
    sums = (rng.integers(0, 2, size=(5000, 30), dtype=np.int8) * 2 - 1).sum(axis=1)
    direct = [np.mean(np.abs(sums) >= t) for t in rep.t]
    assert np.allclose(rep.empirical, direct)
