import json
from pathlib import Path

import numpy as np
import pytest

from farboot.cli import main
from farboot.outputs import fmt_float, read_series_csv, write_series_csv

SMALL = """
[run]
n = 40, 80
replications = 20
draws = 20
spread_series = 1
seeds = 2
probes = 5
mallows_atoms = 30
"""


def tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def header(path: Path) -> list[str]:
    return path.read_text().splitlines()[:2]


@pytest.fixture
def small_config(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL)
    return p


def test_float_format_round_trips():
    rng = np.random.default_rng(0)
    for x in np.concatenate([rng.normal(size=200), [0.1, 1 / 3, 1e-300, 2.5e17]]):
        assert float(fmt_float(x)) == x


def test_series_csv_round_trip(tmp_path, series):
    write_series_csv(tmp_path / "s.csv", series.values)
    back = read_series_csv(tmp_path / "s.csv")
    assert np.array_equal(back.values, series.values)


def test_simulate_is_deterministic(tmp_path):
    for d in ("a", "b"):
        assert main(["simulate", "--n", "30", "--seed", "5", "--out", str(tmp_path / d)]) == 0
    assert tree(tmp_path / "a") == tree(tmp_path / "b")
    assert header(tmp_path / "a" / "series.csv") == ["#schema=farboot.series/1", "t," + ",".join(f"v{i}" for i in range(101))]


def test_estimate_writes_predictions(tmp_path):
    assert main(["simulate", "--n", "60", "--out", str(tmp_path / "s")]) == 0
    out = tmp_path / "e"
    assert main(["estimate", "--series", str(tmp_path / "s" / "series.csv"), "--out", str(out)]) == 0
    head = header(out / "predictions.csv")
    assert head[0] == "#schema=farboot.predictions/1"
    assert head[1].startswith("target,fallback,weight_sum,neighbor_count,v0,v1,")
    lines = (out / "predictions.csv").read_text().splitlines()
    assert len(lines) == 2 + 1 + 50
    assert lines[2].startswith("target,")


def test_bootstrap_draws_and_sidecars(tmp_path):
    out = tmp_path / "boot"
    assert main(["bootstrap", "--n", "50", "--draws", "3", "--out", str(out)]) == 0
    csvs = sorted(out.glob("draw_*.csv"))
    assert len(csvs) == 3 and len(sorted(out.glob("draw_*.json"))) == 3
    for c in csvs:
        meta = json.loads(c.with_suffix(".json").read_text())
        assert set(meta) == {"seed", "draw", "n", "kappa", "index_set", "fallback_count"}
        assert len(meta["kappa"]) == 51 and set(meta["kappa"]) <= set(meta["index_set"])
        assert header(c)[0] == "#schema=farboot.draw/1"
        assert len(c.read_text().splitlines()) == 2 + 52


def test_experiment_is_deterministic(tmp_path, small_config):
    for d in ("a", "b"):
        assert main(["experiment", "--config", str(small_config), "--seed", "7", "--out", str(tmp_path / d)]) == 0
    a, b = tree(tmp_path / "a"), tree(tmp_path / "b")
    assert a == b
    assert set(a) == {
        "config.ini",
        "distribution_samples.csv",
        "distribution_summary.json",
        "mallows.csv",
        "mallows_summary.json",
        "consistency.csv",
        "consistency_summary.json",
    }


def test_experiment_headers_are_stable(tmp_path, small_config):
    out = tmp_path / "x"
    assert main(["experiment", "--config", str(small_config), "--out", str(out)]) == 0
    assert header(out / "distribution_samples.csv") == [
        "#schema=farboot.distribution_samples/1",
        "n,side,index,fhat,fallback,stat_e1,stat_e2,stat_e1+e2",
    ]
    assert header(out / "mallows.csv") == ["#schema=farboot.mallows/1", "n,seed_index,atoms,d2"]
    assert header(out / "consistency.csv") == ["#schema=farboot.consistency/1", "n,seed_index,probes_used,uniform_error"]
    summary = json.loads((out / "distribution_summary.json").read_text())
    assert [r["n"] for r in summary["records"]] == [40, 80]


def test_check_passes(capsys):
    assert main(["check"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_bad_config_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.ini"
    p.write_text("[run]\ndraws = 0\n")
    assert main(["simulate", "--config", str(p)]) == 2
    assert f"{p}:2" in capsys.readouterr().err


def test_bad_flag_exit_code():
    with pytest.raises(SystemExit) as info:
        main(["simulate", "--bandwidth-scale", "-1"])
    assert info.value.code == 2


def test_degenerate_sample_exit_code(tmp_path, capsys):
    p = tmp_path / "deg.ini"
    p.write_text("[estimator]\nr0 = 0.001\nc_r = 0\n")
    assert main(["bootstrap", "--config", str(p), "--n", "30", "--out", str(tmp_path / "o")]) == 3
    assert "numerical degeneracy" in capsys.readouterr().err
