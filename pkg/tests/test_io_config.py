from __future__ import annotations

import json

import numpy as np
import pytest

from mkvorder.config import build_run_config, load_toml, model_from
from mkvorder.errors import ConfigError
from mkvorder.io import atomic_write_text, csv_text, dumps, to_jsonable


def test_json_is_deterministic_and_plain():
    doc = {"b": np.float64(1.5), "a": np.arange(3), "c": (np.bool_(True), np.int64(2)), "d": float("inf")}
    text = dumps(doc)
    assert text == dumps(dict(reversed(list(doc.items()))))
    assert json.loads(text) == {"a": [0, 1, 2], "b": 1.5, "c": [True, 2], "d": "inf"}
    assert to_jsonable(float("nan")) == "nan"


def test_csv_round_trips_floats_exactly():
    x = 0.1 + 0.2
    text = csv_text(["a", "b"], [[x, 3]])
    assert float(text.splitlines()[1].split(",")[0]) == x


def test_atomic_write_replaces(tmp_path):
    p = tmp_path / "sub" / "f.txt"
    atomic_write_text(p, "one")
    atomic_write_text(p, "two")
    assert p.read_text() == "two"
    assert [q.name for q in p.parent.iterdir()] == ["f.txt"]


def test_model_defaults_and_errors():
    m = model_from({"sigma": {"preset": "constant", "params": [0.2]}})
    assert m.theta.params == m.sigma.params
    with pytest.raises(ConfigError):
        model_from({})
    with pytest.raises(ConfigError):
        model_from({"sigma": {"preset": "constant", "params": ["x"]}})
    with pytest.raises(ConfigError):
        model_from({"sigma": "constant", "p": 1.0})
    with pytest.raises(ConfigError):
        model_from({"sigma": {"preset": "constant", "params": [0.2]},
                    "init_x": {"kind": "discrete", "atoms": [0.0, 1.0]}})
    d = model_from({"sigma": {"preset": "constant", "params": [0.2]},
                    "init_y": {"kind": "discrete", "atoms": [0.0, 1.0], "probs": [0.25, 0.75]}})
    np.testing.assert_allclose(d.init_y.mean, [0.75])


def test_run_config_ranges(tmp_path):
    with pytest.raises(ConfigError):
        build_run_config("simulate", {"model": {"sigma": {"preset": "constant", "params": [0.1]}},
                                      "sampling": {"confidence": 1.5}})
    with pytest.raises(ConfigError):
        build_run_config("simulate", {"model": {"sigma": {"preset": "constant", "params": [0.1]}},
                                      "grid": {"M": 2.5}})
    rc = build_run_config("simulate", {"model": {"sigma": {"preset": "constant", "params": [0.1]}}})
    assert (rc.T, rc.M, rc.N, rc.seed) == (1.0, 32, 2**14, 0)
    bad = tmp_path / "bad.toml"
    bad.write_text("this is = = not toml")
    with pytest.raises(ConfigError):
        load_toml(bad)
