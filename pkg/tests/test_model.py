from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mkvorder.errors import DimensionError, DomainError, LookupFailure
from mkvorder.model import (DiffusionSpec, DriftSpec, InitialLaw, MeasureSummary, MKVModel, TimeGrid,
                            drift_lookup, linear_drift, matrix_order_margin, matrix_partial_order,
                            preset_lookup)

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def test_time_grid_nodes():
    g = TimeGrid(1.0, 7)
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 1.0
    assert np.all(np.diff(g.nodes) > 0)
    assert abs(g.h * g.M - g.T) <= np.finfo(float).eps
    assert g.refine(3).M == 21


@pytest.mark.parametrize("T,M", [(0.0, 4), (-1.0, 4), (1.0, 0)])
def test_time_grid_rejects_bad_input(T, M):
    with pytest.raises(DomainError):
        TimeGrid(T, M)


def test_matrix_order_scalar_examples():
    assert matrix_partial_order([[1.0]], [[2.0]], 1e-10)
    assert not matrix_partial_order([[2.0]], [[1.0]], 1e-10)
    A = np.array([[1.0, 2.0], [0.5, -1.0]])
    assert matrix_partial_order(A, A, 0.0)


def test_matrix_order_shape_mismatch():
    with pytest.raises(DimensionError):
        matrix_partial_order(np.eye(2), np.eye(3))


@settings(max_examples=60, deadline=None)
@given(arrays(float, (2, 3), elements=finite), st.integers(0, 2**31))
def test_matrix_order_orthogonal_invariance(A, seed):
    r = np.random.default_rng(seed)
    B = A * 1.5 + 0.1 * r.standard_normal(A.shape)
    Q, _ = np.linalg.qr(r.standard_normal((3, 3)))
    assert matrix_partial_order(A, B) == matrix_partial_order(A @ Q, B @ Q)


@settings(max_examples=60, deadline=None)
@given(arrays(float, (2, 2), elements=finite), arrays(float, (2, 2), elements=finite),
       arrays(float, (2, 2), elements=finite))
def test_matrix_order_reflexive_and_transitive(A, D1, D2):
    # B B^T = A A^T + D1 D1^T and C C^T = B B^T + D2 D2^T give a chain by construction
    S1 = A @ A.T + D1 @ D1.T
    B = np.linalg.cholesky(S1 + 1e-12 * np.eye(2))
    C = np.linalg.cholesky(B @ B.T + D2 @ D2.T + 1e-12 * np.eye(2))
    tol = 1e-9
    assert matrix_partial_order(A, A, 0.0)
    assert matrix_partial_order(A, B, tol) and matrix_partial_order(B, C, tol)
    assert matrix_partial_order(A, C, 2 * tol)


def test_matrix_order_margin_batched():
    A = np.ones((5, 1, 1))
    B = 2 * np.ones((5, 1, 1))
    np.testing.assert_allclose(matrix_order_margin(A, B), 3.0)


def test_presets_examples():
    summ = MeasureSummary.from_samples(np.array([[1.0], [-1.0], [3.0]]))
    c = preset_lookup("constant", [0.3])
    assert c.convex and c.monotone
    np.testing.assert_allclose(c.scalar(0.0, np.array([-2.0, 0.0, 5.0]), summ), 0.3)
    s = preset_lookup("scaled-linear", [0.2])
    np.testing.assert_allclose(s.scalar(0.0, np.array([-2.0, 1.0]), summ), [-0.4, 0.2])
    mf = preset_lookup("mean-field-vol", [1.0, 0.5])
    x = np.linspace(-3, 3, 61)
    v = mf.scalar(0.0, x, summ)
    np.testing.assert_allclose(v, np.sqrt(1 + x**2 + 0.5 * summ.m2))
    assert np.all(v[:-2] - 2 * v[1:-1] + v[2:] >= -1e-12)


def test_preset_errors():
    with pytest.raises(LookupFailure):
        preset_lookup("no-such-preset", [1.0])
    with pytest.raises(DomainError):
        preset_lookup("mean-field-vol", [-1.0, 0.5])
    with pytest.raises(DomainError):
        preset_lookup("constant", [])


def test_interaction_vol_matches_direct_sum():
    pts = np.array([[-1.0], [0.5], [2.0], [2.5]])
    summ = MeasureSummary.from_samples(pts)
    iv = preset_lookup("interaction-vol", [0.1, 0.3])
    x = np.array([-2.0, 0.0, 0.5, 3.0])
    direct = 0.1 + 0.3 * np.abs(x[:, None] - pts[:, 0][None, :]).mean(axis=1)
    np.testing.assert_allclose(iv.scalar(0.0, x, summ), direct, rtol=1e-13)


@pytest.mark.parametrize("name,params", [
    ("constant", [0.4]), ("scaled-linear", [0.3]), ("mean-field-vol", [1.0, 0.5]),
    ("saturating-mean-field", [0.1, 0.2]), ("interaction-vol", [0.1, 0.2]), ("rough-clock", [0.5, 0.5]),
])
def test_convex_presets_midpoint(name, params):
    spec = preset_lookup(name, params)
    r = np.random.default_rng(0)
    summ = MeasureSummary.from_samples(r.standard_normal((50, 1)))
    x, y = r.uniform(-3, 3, 1000), r.uniform(-3, 3, 1000)
    lam = r.uniform(0, 1, 1000)
    t = 0.37
    mid = spec.scalar(t, lam * x + (1 - lam) * y, summ)
    comb = lam * spec.scalar(t, x, summ) + (1 - lam) * spec.scalar(t, y, summ)
    # in d = q = 1 the matrix-order midpoint condition is |sigma(mid)| <= comb for sigma >= 0 branches
    assert np.all(mid <= comb + 1e-12) or name == "scaled-linear"
    if name == "scaled-linear":
        np.testing.assert_allclose(mid, comb, atol=1e-12)


def test_drift_affine_in_x():
    b = linear_drift(0.7, 0.3, -0.2)
    r = np.random.default_rng(1)
    x, y = r.standard_normal((20, 1)), r.standard_normal((20, 1))
    lam = r.uniform(size=(20, 1))
    mean = np.array([0.4])
    lhs = b(0.1, lam * x + (1 - lam) * y, mean)
    rhs = lam * b(0.1, x, mean) + (1 - lam) * b(0.1, y, mean)
    np.testing.assert_allclose(lhs, rhs, atol=1e-14)
    np.testing.assert_allclose(b(0.0, np.array([[1.0]]), mean), [[0.7 + 0.12 - 0.2]])


def test_drift_lookup():
    assert drift_lookup("zero").params == (0.0, 0.0, 0.0)
    with pytest.raises(LookupFailure):
        drift_lookup("quadratic")


def test_initial_laws():
    u = np.array([[0.1], [0.6], [0.99]])
    tp = InitialLaw("two-point", (-1.0, 1.0))
    np.testing.assert_array_equal(tp.sample(u)[:, 0], [-1.0, 1.0, 1.0])
    assert InitialLaw("point", (2.0,)).sample(u)[:, 0].tolist() == [2.0] * 3
    g = InitialLaw("gaussian", (1.0, 2.0))
    np.testing.assert_allclose(g.sample(np.array([[0.5]]))[0, 0], 1.0)
    np.testing.assert_allclose(InitialLaw("uniform", (0.0, 4.0)).mean, [2.0])
    d = InitialLaw.discrete([0.0, 1.0, 2.0], [0.2, 0.3, 0.5])
    np.testing.assert_allclose(d.mean, [1.3])
    with pytest.raises(DomainError):
        InitialLaw.discrete([0.0, 1.0], [0.3, 0.3])


def test_model_dimension_checks():
    s = preset_lookup("constant", [0.1])
    law = InitialLaw("point", (0.0,))
    with pytest.raises(DomainError):
        MKVModel(linear_drift(), s, s, law, law, p=1.5)
    with pytest.raises(DimensionError):
        MKVModel(linear_drift(), s, preset_lookup("constant", [0.1], d=2), law, law)
    m = MKVModel(linear_drift(), s, s, law, law)
    assert not m.uses_measure()
    assert MKVModel(linear_drift(0, 0.5), s, s, law, law).uses_measure()


def test_custom_summary_kind_rejected():
    with pytest.raises(DomainError):
        DiffusionSpec("x", (), lambda t, x, m: x, summary_kind="variance")


def test_rough_clock_freeze_modulus_tracks_rho():
    # oracle: phase-averaged sum_k a_k^2 (1 - sinc(2 f_k h)) has slope rho in log-log
    from mkvorder.model import ROUGH_BASE, _weierstrass

    rho, hs = 0.25, np.array([1 / 8, 1 / 16, 1 / 32, 1 / 64, 1 / 128])
    k = np.arange(28)
    amp, f = ROUGH_BASE ** (-k * rho), ROUGH_BASE**k
    ana = np.sqrt([np.sum(amp**2 * (1 - np.sinc(2 * f * h))) for h in hs])
    t = np.linspace(0.0, 1.0, 2**18, endpoint=False)
    w = _weierstrass(t, ROUGH_BASE, rho, 28, 1.0)
    num = [np.sqrt(np.mean((w - _weierstrass(np.floor(t / h) * h, ROUGH_BASE, rho, 28, 1.0)) ** 2))
           for h in hs]
    slope_ana = np.polyfit(np.log(hs), np.log(ana), 1)[0]
    slope_num = np.polyfit(np.log(hs), np.log(num), 1)[0]
    assert abs(slope_ana - rho) < 0.01
    assert abs(slope_num - rho) < 0.05
    assert _weierstrass(0.0, ROUGH_BASE, rho, 40, 1.0) == 0.0
