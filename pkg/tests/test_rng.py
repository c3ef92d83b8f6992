from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from mkvorder.errors import NotPSDError, OrderViolationError
from mkvorder.rng import StreamSpec, dominating_gaussian_coupling, gaussian_block, psd_sqrt, stream_code, uniform_block


def test_same_spec_same_block():
    s = StreamSpec(42, "exp", "X", 3, 7)
    np.testing.assert_array_equal(gaussian_block(s, 100, 3), gaussian_block(s, 100, 3))


def test_particle_offset_is_a_window_of_the_stream():
    s = StreamSpec(9, 1, "B", 0, 1)
    full = gaussian_block(s, 10, 3)
    part = gaussian_block(s.derive(particle=4), 6, 3)
    np.testing.assert_array_equal(part, full[4:])


def test_moments_of_a_million_draws():
    z = gaussian_block(StreamSpec(1, "moments"), 10**6, 1)[:, 0]
    n = len(z)
    assert abs(z.mean()) < 4 / np.sqrt(n)
    assert abs(z.var() - 1) < 4 * np.sqrt(2 / n)


def test_skewness_pooled_over_streams():
    z = np.concatenate([gaussian_block(StreamSpec(5, "skew", "X", 0, k), 10**5, 1)[:, 0] for k in range(10)])
    assert abs(stats.skew(z)) < 0.01


def test_independent_particle_streams():
    n = 10**5
    a = gaussian_block(StreamSpec(3, "c", "X", 0, 1), n, 1)[:, 0]
    b = gaussian_block(StreamSpec(3, "c", "X", n, 1), n, 1)[:, 0]
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / np.sqrt(n)


def test_distinct_tags_give_distinct_streams():
    a = gaussian_block(StreamSpec(3, 0, "X", 0, 1), 1000, 1)
    b = gaussian_block(StreamSpec(3, 0, "Y", 0, 1), 1000, 1)
    assert abs(np.corrcoef(a[:, 0], b[:, 0])[0, 1]) < 4 / np.sqrt(1000)


def test_uniforms_open_interval():
    u = uniform_block(StreamSpec(0), 10**5, 2)
    assert u.min() > 0 and u.max() < 1


def test_stream_code():
    assert stream_code("X") == 1
    assert stream_code("custom") >= 2**32
    with pytest.raises(ValueError):
        stream_code(-1)


def test_psd_sqrt_examples():
    np.testing.assert_allclose(psd_sqrt(np.eye(3)), np.eye(3), atol=1e-14)
    np.testing.assert_allclose(psd_sqrt([[4.0]]), [[2.0]])
    np.testing.assert_allclose(psd_sqrt(np.diag([9.0, 0.0])), np.diag([3.0, 0.0]), atol=1e-14)
    with pytest.raises(NotPSDError):
        psd_sqrt(np.diag([1.0, -0.1]))


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**31), st.integers(0, 4))
def test_psd_sqrt_of_square_is_identity(d, seed, rank_drop):
    r = np.random.default_rng(seed)
    A = r.standard_normal((d, max(1, d - rank_drop)))
    S = A @ A.T
    R = psd_sqrt(S)
    np.testing.assert_allclose(R, R.T, atol=1e-12)
    assert np.linalg.eigvalsh(R).min() >= -1e-10
    assert np.linalg.norm(R @ R.T - S) <= 1e-10 * max(1.0, np.linalg.norm(S))


def test_coupling_trivial_cases():
    u = np.array([[1.0, 0.5], [0.0, 2.0]])
    m1, m2 = dominating_gaussian_coupling(u, u, StreamSpec(0), 1000)
    np.testing.assert_array_equal(m1, m2)
    m1, m2 = dominating_gaussian_coupling(np.zeros((2, 2)), u, StreamSpec(0), 20000)
    assert np.all(m1 == 0)
    np.testing.assert_allclose(np.cov(m2.T), u @ u.T, atol=0.1)


def test_coupling_scalar_variance_and_slope():
    m1, m2 = dominating_gaussian_coupling([[1.0]], [[2.0]], StreamSpec(11), 10**6)
    d = (m2 - m1)[:, 0]
    assert abs(d.var() - 3.0) < 0.03
    slope = np.polyfit(m1[:, 0], d, 1)[0]
    assert abs(slope) < 0.01


def test_coupling_rejects_unordered():
    with pytest.raises(OrderViolationError):
        dominating_gaussian_coupling([[2.0]], [[1.0]], StreamSpec(0), 10)
