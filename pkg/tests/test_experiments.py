from __future__ import annotations

import numpy as np
import pytest

from conftest import make_model
from mkvorder.errors import ConfigError, DomainError, HorizonError
from mkvorder.experiments import (ChainConfig, ChainProcesses, LogLogFit, LQConfig, RiccatiSystem,
                                  bounding_experiment, check_chain, convergence_study,
                                  lq_control_experiment, lq_null_calibration, marginal_propagation_check,
                                  mean_preservation_check, moment_bound_study, partitioning_experiment,
                                  solve_riccati)
from mkvorder.model import InitialLaw, MKVModel, TimeGrid, linear_drift, preset_lookup


# ---------------------------------------------------------------- convergence

def test_loglog_fit_recovers_a_power_law():
    h = 2.0 ** -np.arange(3, 8)
    fit = LogLogFit.fit(h, 3.0 * h**0.75)
    assert fit.slope == pytest.approx(0.75, abs=1e-12)
    assert fit.constant == pytest.approx(3.0, rel=1e-10)


def test_ode_case_converges_at_first_order():
    s = preset_lookup("constant", [0.0])
    law = InitialLaw("point", (1.0,))
    model = MKVModel(linear_drift(1.0, 0.5), s, s, law, law)
    rep = convergence_study(model, 64, Ms=(8, 16, 32, 64), M_ref=512)
    assert rep.slope >= 1.0 - 0.05
    assert rep.to_dict()["kind"] == "convergence"
    assert rep.table()[0] == ["M", "h", "error", "stderr", "fit"]


def test_slope_is_reproducible_across_seeds():
    model = make_model(sigma=("scaled-linear", [0.5]), theta=("scaled-linear", [0.5]),
                       init_x=("gaussian", (1.0, 0.2)))
    slopes = [convergence_study(model, 2**13, Ms=(8, 16, 32, 64, 128), M_ref=512, seed=s, threads=2).slope
              for s in (0, 1)]
    assert abs(slopes[0] - slopes[1]) <= 0.05
    assert 0.35 <= slopes[0] <= 0.65


def test_convergence_guards():
    model = make_model()
    with pytest.raises(DomainError):
        convergence_study(model, 64, Ms=(8, 12))
    with pytest.raises(DomainError):
        convergence_study(model, 64, Ms=(8,))
    with pytest.raises(DomainError):
        convergence_study(model, 64, Ms=(8, 16), M_ref=16)


def test_moment_bound_is_uniform_in_the_step():
    model = make_model(sigma=("mean-field-vol", [0.3, 0.2]), theta=("mean-field-vol", [0.3, 0.2]),
                       init_x=("gaussian", (0.5, 1.0)), drift=linear_drift(0.2, 0.1))
    rep = moment_bound_study(model, 2**11, Ms=(8, 32, 128))
    assert rep.passed and rep.spread <= 1.5
    assert all(np.isfinite(rep.ratios))


# ---------------------------------------------------------------- chains

def _constant_chain(values=(0.1, 0.2, 0.3, 0.4), inits=None, N=2**13, seed=0, **kw):
    coefs = tuple(preset_lookup("constant", [v]) for v in values)
    inits = inits or (InitialLaw("point", (0.0,)),)
    return ChainConfig(coefs, inits, linear_drift(), TimeGrid(1.0, 16), N=N, seed=seed, **kw)


def test_bounding_chain_with_gaussian_oracle():
    cfg = _constant_chain()
    procs = ChainProcesses(cfg)
    b = bounding_experiment(cfg, procs)
    p = partitioning_experiment(cfg, procs)
    assert b.passed and p.passed
    assert b.oracle_passed and p.oracle_passed
    # theta1 and sigma2 are shared between both experiments
    for F in cfg.functionals:
        for lab in ("theta1", "sigma2"):
            assert b.estimates[F.name][lab] == p.estimates[F.name][lab]
    cols, rows = b.table()
    assert cols[:3] == ["functional", "inequality", "estimate"] and len(rows) == 2 * len(cfg.functionals)


def test_equal_coefficients_give_zero_margins():
    cfg = _constant_chain((0.2, 0.2, 0.2, 0.2), N=512)
    rep = bounding_experiment(cfg)
    assert all(m.estimate == 0.0 for m in rep.margins)


def test_mixed_chain_with_a_mean_field_middle_process():
    coefs = (preset_lookup("constant", [0.1]), preset_lookup("saturating-mean-field", [0.15, 0.1]),
             preset_lookup("constant", [0.3]), preset_lookup("constant", [0.4]))
    cfg = ChainConfig(coefs, (InitialLaw("point", (0.0,)),), linear_drift(), TimeGrid(1.0, 16), N=2**13)
    procs = ChainProcesses(cfg)
    b, p = bounding_experiment(cfg, procs), partitioning_experiment(cfg, procs)
    assert b.passed and p.passed
    assert b.oracle_passed is not False


def test_unordered_chain_is_refused():
    with pytest.raises(ConfigError):
        check_chain(_constant_chain((0.3, 0.2, 0.3, 0.4)))
    bad = _constant_chain(inits=(InitialLaw("two-point", (-1.0, 1.0)), InitialLaw("point", (0.0,)),
                                 InitialLaw("point", (0.0,)), InitialLaw("point", (0.0,))))
    with pytest.raises(ConfigError):
        bounding_experiment(bad)


# ---------------------------------------------------------------- riccati / LQ

def test_riccati_closed_form_and_order():
    c = 2.0
    sys = RiccatiSystem(eta_rhs="eta**2", chi_rhs="0", eta_T="2")
    sol = solve_riccati(sys, 1.0, step=1e-4)
    exact = 1.0 / (1.0 / c + 1.0 - sol.times)
    assert np.abs(sol.eta - exact).max() < 1e-10
    e1 = abs(solve_riccati(sys, 1.0, step=0.02).eta[0] - exact[0])
    e2 = abs(solve_riccati(sys, 1.0, step=0.01).eta[0] - exact[0])
    assert 12 < e1 / e2 < 20


def test_riccati_zero_data_and_blowup():
    zero = RiccatiSystem({"m": "0"}, q=0.0)
    sol = solve_riccati(zero, 1.0)
    assert np.all(sol.eta == 0) and np.all(sol.chi == 0)
    with pytest.raises(HorizonError):
        solve_riccati(RiccatiSystem(eta_rhs="-eta**2", chi_rhs="0", eta_T="5"), 1.0)
    with pytest.raises(ConfigError):
        RiccatiSystem({"a": "__import__('os').system('true')"})
    with pytest.raises(ConfigError):
        RiccatiSystem({"a": "eta"})
    with pytest.raises(ConfigError):
        RiccatiSystem({"zz": "1"})


def test_default_system_matches_scalar_lq_riccati():
    # with a = 0, b = m = n = 1 the equation eta' = eta^2 - 1, eta(T) = q^2 has the tanh solution
    sys = RiccatiSystem(q=1.0)
    sol = solve_riccati(sys, 1.0, step=1e-3)
    np.testing.assert_allclose(sol.eta, 1.0, atol=1e-10)


LQ = dict(system=RiccatiSystem({"a": "0.2", "abar": "0.1", "beta": "0.1"}, q=2.0), N=2**12, M=25,
          substeps=4, x_grid=(-1.0, 0.0, 1.0))


def test_lq_positive_margin_and_agreeing_means():
    rep = lq_control_experiment(LQConfig(**LQ))
    assert rep.margin_positive and rep.means_agree and rep.convex and rep.passed
    assert rep.to_dict()["kind"] == "lq-control"


def test_lq_equal_vol_gives_zero_margin():
    rep = lq_control_experiment(LQConfig(**LQ, theta=preset_lookup("constant", [0.5])))
    assert rep.margin == 0.0


def test_lq_refuses_larger_theta_and_bad_cost():
    with pytest.raises(ConfigError):
        lq_control_experiment(LQConfig(**LQ, theta=preset_lookup("constant", [0.8])))
    bad = dict(LQ, system=RiccatiSystem({"n": "0"}))
    with pytest.raises(ConfigError):
        lq_control_experiment(LQConfig(**bad))


def test_lq_null_calibration():
    res = lq_null_calibration(LQConfig(**LQ), reps=20)
    assert res["reps"] == 20 and res["fraction_inside"] >= 0.9


# ---------------------------------------------------------------- step checks

def test_mean_preservation_and_marginal_propagation():
    model = make_model()
    grid = TimeGrid(1.0, 16)
    mp = mean_preservation_check(model, grid, 4000)
    assert mp.passed and len(mp.rows) == grid.M + 1
    mg = marginal_propagation_check(model, grid, 4000)
    assert mg.passed


def test_zero_vol_equal_starts_are_exactly_equal():
    model = make_model(sigma=("constant", [0.0]), theta=("constant", [0.0]),
                       init_x=("point", (0.7,)), init_y=("point", (0.7,)), drift=linear_drift(0.3, 0.2, 0.1))
    rep = mean_preservation_check(model, TimeGrid(1.0, 8), 16)
    assert rep.passed and all(r.gap == 0.0 for r in rep.rows)


def test_step_checks_negative_controls():
    grid = TimeGrid(1.0, 8)
    shifted = make_model(init_x=("point", (0.0,)), init_y=("point", (0.5,)),
                         sigma=("constant", [0.1]), theta=("constant", [0.2]))
    assert not mean_preservation_check(shifted, grid, 2000).passed
    equal = make_model(init_x=("point", (0.5,)), init_y=("point", (0.5,)),
                       sigma=("constant", [0.1]), theta=("constant", [0.2]))
    assert mean_preservation_check(equal, grid, 2000).passed
    rev = make_model(sigma=("constant", [0.3]), theta=("constant", [0.1]), init_y=("point", (0.0,)))
    rep = marginal_propagation_check(rev, grid, 20000)
    assert not rep.passed and rep.failures()[0] == 1
