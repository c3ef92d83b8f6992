from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_model
from mkvorder.errors import ContractError, DimensionError
from mkvorder.functionals import (ExtendedFunctional, PathFunctional, chi_psi, constant, interaction_energy,
                                  mean_functional, running_max, second_moment, terminal_call,
                                  terminal_linear, terminal_square)
from mkvorder.measure import DiscreteMeasure, mean_preserving_spread
from mkvorder.model import TimeGrid
from mkvorder.order import (ConvexTestFamily, MaxAffine, bonferroni_z, call_function_test_1d,
                            convex_family_test, derivative_convexity_check, extended_order_test,
                            functional_order_test, strassen_lp_test)
from mkvorder.simulate import coupled_paths
from mkvorder.validate import ProbeConfig

DIRAC = DiscreteMeasure.dirac([0.0])
PM1 = DiscreteMeasure.from_atoms({-1.0: 0.5, 1.0: 0.5})


def _random_measure(r, n, d=1):
    return DiscreteMeasure(r.standard_normal((n, d)), r.dirichlet(np.ones(n)))


def test_lp_accepts_with_a_martingale_kernel():
    v = strassen_lp_test(DIRAC, PM1)
    assert v.dominated == "yes" and v.mode == "exact-LP"
    K = v.kernel
    np.testing.assert_allclose(K.sum(axis=1), 1.0, atol=1e-9)
    np.testing.assert_allclose(K @ PM1.support[:, 0], DIRAC.support[:, 0], atol=1e-9)


def test_lp_rejects_reversed_with_a_separating_function():
    v = strassen_lp_test(PM1, DIRAC)
    assert v.dominated == "no"
    psi = v.witness
    gap = PM1.weights @ psi(PM1.support) - DIRAC.weights @ psi(DIRAC.support)
    assert gap > 1e-6
    # the witness is convex: a maximum of affine maps
    r = np.random.default_rng(0)
    x, y, lam = r.uniform(-3, 3, 200), r.uniform(-3, 3, 200), r.uniform(size=200)
    assert np.all(psi(lam * x + (1 - lam) * y) <= lam * psi(x) + (1 - lam) * psi(y) + 1e-12)


def test_lp_mean_mismatch():
    nu = DiscreteMeasure.from_atoms({-0.9: 0.5, 1.1: 0.5})
    v = strassen_lp_test(DIRAC, nu)
    assert v.dominated == "no" and v.info["reason"] == "means differ"
    np.testing.assert_allclose(v.info["mean_gap"], [0.1])
    w = v.witness
    assert DIRAC.weights @ w(DIRAC.support) > nu.weights @ w(nu.support)


def test_lp_in_two_dimensions():
    r = np.random.default_rng(1)
    mu = _random_measure(r, 6, 2)
    nu = mean_preserving_spread(mu, 0.5, seed=2)
    assert strassen_lp_test(mu, nu).dominated == "yes"
    assert strassen_lp_test(nu, mu).dominated == "no"


def test_call_test_exact_and_margin_at_zero():
    v = call_function_test_1d(DIRAC, PM1)
    assert v.dominated == "yes" and v.mode == "exact" and v.info["sufficient"]
    assert v.margin("call(0)").estimate == pytest.approx(0.5)
    rev = call_function_test_1d(PM1, DIRAC)
    assert rev.dominated == "no" and rev.info["witness_strike"] == 0.0
    partial = call_function_test_1d(DIRAC, PM1, strikes=[0.0])
    assert partial.dominated == "undecided"


def test_call_test_on_gaussian_samples():
    r = np.random.default_rng(2)
    x = r.standard_normal(20000)
    y = np.sqrt(2) * r.standard_normal(20000)
    assert call_function_test_1d(x, y, conf=0.99, paired=False).dominated == "yes"
    v = call_function_test_1d(y, x, conf=0.99, paired=False)
    assert v.dominated == "no" and v.witness is not None
    with pytest.raises(DimensionError):
        call_function_test_1d(x, y[:100], paired=True)


def test_family_tests():
    r = np.random.default_rng(3)
    x = r.standard_normal((5000, 2))
    assert convex_family_test(x, x.copy()).dominated == "yes"
    y = x * np.sqrt(2)
    assert convex_family_test(x, y, paired=True).dominated == "yes"
    assert convex_family_test(x, x + np.array([0.3, 0.0]), paired=True).dominated == "no"
    with pytest.raises(ContractError):
        convex_family_test(x, y, ConvexTestFamily("custom-list", members=(MaxAffine.linear([3.0, 0.0]),)))
    cal = convex_family_test(DIRAC, PM1, ConvexTestFamily("calls-1d", 16))
    assert cal.dominated == "yes" and cal.mode == "exact"


@pytest.fixture(scope="module")
def coupled():
    model = make_model()
    return coupled_paths(model, TimeGrid(1.0, 16), 4000, 0, r=2)


def test_functional_tests(coupled):
    xb, yb, _, _ = coupled
    v = functional_order_test(xb, yb, constant(2.0))
    assert v.margins[0].estimate == 0.0 and v.dominated == "yes"
    lin = functional_order_test(xb, yb, terminal_linear(1.0)).margins[0]
    assert abs(lin.estimate) <= 4 * lin.stderr + 1e-15
    call = functional_order_test(xb, yb, terminal_call(1.0)).margins[0]
    assert call.estimate > 0
    rev = functional_order_test(yb, xb, running_max())
    assert rev.dominated == "no" and rev.witness.label == "running-max"
    with pytest.raises(ContractError):
        functional_order_test(xb, yb, PathFunctional("undeclared", lambda P, t: P[:, -1, 0]))


def test_extended_tests(coupled):
    xb, yb, _, _ = coupled
    means = extended_order_test(xb, yb, G=ExtendedFunctional(flow_part=mean_functional()))
    m = means.margins[0]
    assert abs(m.estimate) <= 4 * m.stderr + 1e-15
    sq = extended_order_test(xb, yb, G=ExtendedFunctional(terminal_square(), second_moment()))
    assert sq.margins[0].estimate > 0 and sq.dominated == "yes"
    zero = extended_order_test(xb, yb, G=ExtendedFunctional())
    assert zero.margins[0].estimate == 0.0
    with pytest.raises(ContractError):
        extended_order_test(xb, yb, G=ExtendedFunctional(flow_part=lambda mu: 0.0))


def test_derivative_checks():
    probe = ProbeConfig(n_samples=400)
    assert derivative_convexity_check(second_moment(), probe).passed
    assert derivative_convexity_check(interaction_energy(), probe).passed
    neg = chi_psi([lambda x: -np.einsum("ij,ij->i", x, x)], name="negative")
    rep = derivative_convexity_check(neg, probe)
    assert not rep.passed
    assert not rep["derivative-midpoint-convexity"].passed


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_spreads_are_transitive(seed, s1, s2):
    mu = _random_measure(np.random.default_rng(seed), 4)
    nu = mean_preserving_spread(mu, s1)
    rho = mean_preserving_spread(nu, s2)
    for a, b in ((mu, nu), (nu, rho), (mu, rho)):
        assert call_function_test_1d(a, b).dominated == "yes"
        assert strassen_lp_test(a, b).dominated == "yes"


def test_bonferroni():
    assert bonferroni_z(0.95, 1) == pytest.approx(1.6448536, rel=1e-6)
    assert bonferroni_z(0.95, 10) > bonferroni_z(0.95, 1)
    assert bonferroni_z(0.95, 1, two_sided=True) == pytest.approx(1.959964, rel=1e-6)
