from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mkvorder.errors import DimensionError, DomainError, GridError
from mkvorder.measure import (DiscreteMeasure, MeasurePath, mean_preserving_spread, mixture, moment,
                              path_distance_dC, sliced_wasserstein, wasserstein, wasserstein_1d,
                              wasserstein_exact)
from mkvorder.model import TimeGrid


def _random_measure(r, n, d=1):
    w = r.dirichlet(np.ones(n))
    return DiscreteMeasure(r.standard_normal((n, d)), w)


measures_1d = st.builds(
    lambda seed, n: _random_measure(np.random.default_rng(seed), n),
    st.integers(0, 2**31), st.integers(1, 12),
)


def test_w1_dirac_vs_two_point():
    mu = DiscreteMeasure.dirac([0.0])
    nu = DiscreteMeasure.from_atoms({-1.0: 0.5, 1.0: 0.5})
    assert wasserstein_1d(mu, nu, 1) == pytest.approx(1.0, abs=1e-14)
    assert wasserstein_1d(mu, nu, 2) == pytest.approx(1.0, abs=1e-14)


def test_w2_between_gaussian_samples():
    r = np.random.default_rng(0)
    mu = DiscreteMeasure.from_samples(r.standard_normal(10**5))
    nu = DiscreteMeasure.from_samples(3 + r.standard_normal(10**5))
    assert abs(wasserstein_1d(mu, nu, 2) - 3.0) < 0.06


def test_exact_transport_in_the_plane():
    mu = DiscreteMeasure.dirac([0.0, 0.0])
    nu = DiscreteMeasure.dirac([3.0, 4.0])
    assert wasserstein_exact(mu, nu, 1) == pytest.approx(5.0, abs=1e-12)
    assert wasserstein_exact(mu, nu, 2) == pytest.approx(5.0, abs=1e-12)


def test_exact_agrees_with_quantile_formula():
    r = np.random.default_rng(1)
    for _ in range(100):
        mu = _random_measure(r, r.integers(1, 15))
        nu = _random_measure(r, r.integers(1, 15))
        for p in (1.0, 2.0):
            assert abs(wasserstein_exact(mu, nu, p) - wasserstein_1d(mu, nu, p)) < 1e-9


def test_sliced_properties():
    r = np.random.default_rng(2)
    mu = _random_measure(r, 40, 2)
    assert sliced_wasserstein(mu, mu) == 0.0
    shifted = DiscreteMeasure(mu.support + np.array([1.0, -2.0]), mu.weights)
    assert sliced_wasserstein(mu, shifted, 2, 512) == pytest.approx(np.sqrt(5.0), rel=0.06)
    assert sliced_wasserstein(mu, shifted, 2, 20000) == pytest.approx(np.sqrt(5.0), rel=0.01)
    th = 0.7
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    nu = _random_measure(r, 30, 2)
    rot = lambda m: DiscreteMeasure(m.support @ R.T, m.weights)
    a = sliced_wasserstein(mu, nu, 1, 4000, seed=5)
    b = sliced_wasserstein(rot(mu), rot(nu), 1, 4000, seed=5)
    assert abs(a - b) < 0.03 * a
    exact = wasserstein_exact(mu, nu, 1)
    assert abs(a - exact) <= 0.15 * exact + 1e-12 or a <= exact
    with pytest.raises(DimensionError):
        sliced_wasserstein(DiscreteMeasure.dirac([0.0]), DiscreteMeasure.dirac([1.0]))


def test_sliced_is_a_lower_bound_scale():
    # the normalised sliced distance never exceeds the exact one by more than 15 %
    r = np.random.default_rng(3)
    for _ in range(10):
        mu, nu = _random_measure(r, 20, 3), _random_measure(r, 20, 3)
        assert sliced_wasserstein(mu, nu, 1, 1000) <= 1.15 * wasserstein_exact(mu, nu, 1)


def test_mixture_examples():
    a, b = DiscreteMeasure.dirac([0.0]), DiscreteMeasure.dirac([1.0])
    m = mixture(a, b, 0.25)
    np.testing.assert_allclose(m.mean, [0.75])
    assert mixture(a, b, 1.0) is a and mixture(a, b, 0.0) is b
    assert mixture(a, a, 0.3).size == 1
    with pytest.raises(DomainError):
        mixture(a, b, 1.5)


@settings(max_examples=50, deadline=None)
@given(measures_1d, measures_1d, measures_1d, st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_mixture_associativity(a, b, c, s, t):
    left = mixture(mixture(a, b, s), c, t)
    w = t * s
    right = mixture(a, mixture(b, c, t * (1 - s) / (1 - w)), w)
    assert wasserstein_1d(left, right, 1) < 1e-10


@settings(max_examples=50, deadline=None)
@given(measures_1d, measures_1d, measures_1d)
def test_triangle_and_order_of_p(a, b, c):
    for p in (1.0, 2.0):
        assert wasserstein_1d(a, c, p) <= wasserstein_1d(a, b, p) + wasserstein_1d(b, c, p) + 1e-10
    assert wasserstein_1d(a, b, 1) <= wasserstein_1d(a, b, 2) + 1e-10


@settings(max_examples=50, deadline=None)
@given(measures_1d, st.floats(1.0, 3.0))
def test_moment_is_distance_to_origin(mu, p):
    assert moment(mu, p) == pytest.approx(wasserstein_1d(mu, DiscreteMeasure.dirac([0.0]), p), rel=1e-9, abs=1e-12)


def test_coupling_gives_an_upper_bound():
    r = np.random.default_rng(4)
    x = r.standard_normal((300, 2))
    y = x + 0.3 * r.standard_normal((300, 2))
    bound = np.mean(np.linalg.norm(x - y, axis=1))
    assert wasserstein(DiscreteMeasure.from_samples(x), DiscreteMeasure.from_samples(y), 1) <= bound + 1e-12


def test_spread_examples():
    mu = DiscreteMeasure.from_atoms({0.0: 0.5, 2.0: 0.5})
    s = mean_preserving_spread(mu, 0.5)
    np.testing.assert_allclose(s.mean, mu.mean)
    assert sorted(s.support[:, 0].tolist()) == [-0.5, 0.5, 1.5, 2.5]
    assert mean_preserving_spread(mu, 0.0) is mu
    r = np.random.default_rng(5)
    mu2 = _random_measure(r, 10, 3)
    np.testing.assert_allclose(mean_preserving_spread(mu2, 0.7, seed=1).mean, mu2.mean, atol=1e-14)
    with pytest.raises(DomainError):
        mean_preserving_spread(mu, -1.0)


def _path(values):
    grid = TimeGrid(1.0, len(values) - 1)
    return MeasurePath(grid, tuple(DiscreteMeasure.from_samples(np.asarray(v, float)) for v in values))


def test_path_distance_translation_and_monotonicity():
    r = np.random.default_rng(6)
    base = [r.standard_normal(50) for _ in range(5)]
    a = _path(base)
    b = _path([v + 2.0 for v in base])
    assert path_distance_dC(a, b) == pytest.approx(2.0, abs=1e-12)
    c = _path([v + 2.0 + (i == 3) for i, v in enumerate(base)])
    assert path_distance_dC(a, c) >= path_distance_dC(a, b)
    with pytest.raises(GridError):
        path_distance_dC(a, _path(base[:3]))


def test_csv_round_trips(tmp_path):
    r = np.random.default_rng(7)
    mu = _random_measure(r, 9, 2)
    mu.to_csv(tmp_path / "mu.csv")
    back = DiscreteMeasure.from_csv(tmp_path / "mu.csv")
    np.testing.assert_array_equal(back.support, mu.support)
    np.testing.assert_array_equal(back.weights, mu.weights)
    path = _path([r.standard_normal(7) for _ in range(4)])
    path.to_directory(tmp_path / "flow")
    again = MeasurePath.from_directory(tmp_path / "flow", 1.0)
    assert again.grid == path.grid
    for x, y in zip(path.measures, again.measures):
        np.testing.assert_array_equal(x.support, y.support)


def test_measure_validation():
    with pytest.raises(DomainError):
        DiscreteMeasure([[0.0], [1.0]], [0.7, 0.7])
    with pytest.raises(DimensionError):
        DiscreteMeasure([[0.0], [1.0]], [1.0])
    with pytest.raises(DomainError):
        DiscreteMeasure([[np.nan]], [1.0])
