from pathlib import Path

import pytest

from farboot.config import DEFAULT_CONFIG_TEXT, ExperimentConfig, config_to_text, load_config, parse_config
from farboot.errors import ConfigurationError

EXAMPLE = Path(__file__).parent.parent / "configs" / "default.ini"


def test_defaults_round_trip():
    assert parse_config(DEFAULT_CONFIG_TEXT) == ExperimentConfig()
    cfg = parse_config("[run]\nn = 50, 80\ndraws = 7\n[estimator]\nq =\n")
    assert cfg.run.n == (50, 80) and cfg.run.draws == 7 and cfg.estimator.q is None
    assert parse_config(config_to_text(cfg)) == cfg


def test_documented_example_matches_defaults():
    assert load_config(EXAMPLE) == ExperimentConfig()


def test_empty_text_gives_defaults():
    assert parse_config("") == ExperimentConfig()


@pytest.mark.parametrize(
    "text,line,fragment",
    [
        ("[run]\nreplications = 0\n", 2, "replications"),
        ("[run]\n\nn = 400, 100\n", 3, "ascending"),
        ("[model]\nbogus = 1\n", 2, "unknown key"),
        ("[model]\ngrid_points = many\n", 2, "expected int"),
        ("[estimator]\nkernel = gaussian\n", 2, "kernel"),
        ("[model]\nx = 1\n[weird]\n", 3, "unknown section"),
        ("[run]\ndirections = e1, e40\n", 2, "out of range"),
        ("no_section = 1\n", 1, "section"),
    ],
)
def test_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ConfigurationError) as info:
        parse_config(text, "c.ini")
    msg = str(info.value)
    assert msg.startswith(f"c.ini:{line}:")
    assert fragment in msg


def test_missing_file():
    with pytest.raises(ConfigurationError):
        load_config("/nonexistent/config.ini")


def test_overrides_are_validated():
    cfg = ExperimentConfig()
    assert cfg.with_overrides(run={"draws": 3}).run.draws == 3
    with pytest.raises(ConfigurationError):
        cfg.with_overrides(estimator={"c_h": -1.0})
