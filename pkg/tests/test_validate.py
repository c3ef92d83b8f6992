from __future__ import annotations

import numpy as np

from conftest import make_model
from mkvorder.model import DiffusionSpec, DriftSpec, InitialLaw, MKVModel, preset_lookup
from mkvorder.validate import ProbeConfig, dominance_check, validate_assumptions

PROBE = ProbeConfig(n_samples=300)


def test_scaled_linear_pair_passes_every_check():
    rep = validate_assumptions(make_model(), PROBE)
    assert rep.passed, [c.name for c in rep.checks if not c.passed]
    assert "sigma-dominated-by-theta" in rep.names()
    assert rep.to_dict()["passed"] is True


def test_tent_coefficient_fails_convexity_near_zero():
    tent = DiffusionSpec("tent", (), lambda t, x, m: np.maximum(1 - np.abs(x), 0.0)[:, :, None], convex=False)
    law = InitialLaw("point", (0.0,))
    model = MKVModel(make_model().drift, tent, preset_lookup("constant", [1.0]), law, law)
    res = validate_assumptions(model, PROBE)["sigma-convex-in-x"]
    assert not res.passed
    assert abs(res.witness["midpoint"][0]) < 1.0
    assert res.note


def test_nonlinear_mean_term_keeps_the_drift_affine_in_x():
    drift = DriftSpec(lambda t: np.eye(1) * 0.5, lambda t, m: m**2, kind="custom")
    model = make_model(drift=drift)
    rep = validate_assumptions(model, PROBE)
    assert rep["drift-affine-in-x"].passed
    assert rep["drift-constant-on-ordered-pairs"].passed


def test_reversed_coefficients_fail_dominance():
    model = make_model(sigma=("scaled-linear", [0.3]), theta=("scaled-linear", [0.1]))
    res = dominance_check(model, PROBE)
    assert not res.passed
    assert isinstance(res.witness["x"][0], float)
    assert dominance_check(make_model(), PROBE).passed


def test_reversed_initial_laws_flagged():
    model = make_model(init_x=("two-point", (-1.0, 1.0)), init_y=("point", (0.0,)))
    assert not validate_assumptions(model, PROBE)["initial-laws-ordered"].passed
