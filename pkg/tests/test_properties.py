"""Invariant checks over randomly drawn inputs (at least 100 examples each)."""
import math

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from iaas_select.core import mae, paa_resample, rmse
from iaas_select.lqpshort import compress_paa, compress_pus, compress_rs, expand_qos

from conftest import ts

finite = st.floats(-1e4, 1e4, allow_nan=False)


@st.composite
def same_length(draw, count=2, min_size=1, max_size=80):
    n = draw(st.integers(min_size, max_size))
    return [draw(hnp.arrays(float, n, elements=finite)) for _ in range(count)]


def tol(*arrays):
    return 1e-9 * (1 + max(np.abs(a).max() for a in arrays))


@settings(max_examples=150)
@given(same_length())
def test_errors_symmetric_and_nonnegative(pair):
    a, b = pair
    for f in (mae, rmse):
        assert f(a, b) >= 0
        assert f(a, b) == f(b, a)


@settings(max_examples=150)
@given(same_length())
def test_errors_zero_iff_equal(pair):
    a, b = pair
    assert mae(a, a) == 0 and rmse(a, a) == 0
    if not np.array_equal(a, b):
        assert mae(a, b) > 0 and rmse(a, b) > 0


@settings(max_examples=150)
@given(same_length(3))
def test_errors_triangle_inequality(triple):
    a, b, c = triple
    for f in (mae, rmse):
        assert f(a, c) <= f(a, b) + f(b, c) + tol(a, b, c)


@settings(max_examples=150)
@given(same_length())
def test_mae_bounded_by_rmse(pair):
    a, b = pair
    assert mae(a, b) <= rmse(a, b) + tol(a, b)


@st.composite
def divisible_series(draw):
    target = draw(st.integers(1, 40))
    width = draw(st.integers(1, 12))
    return draw(hnp.arrays(float, target * width, elements=finite)), target


@settings(max_examples=150)
@given(divisible_series())
def test_paa_resample_preserves_mean(case):
    values, target = case
    out = paa_resample(ts(values), target)
    assert len(out) == target
    assert abs(out.values.mean() - values.mean()) <= tol(values)


@settings(max_examples=150)
@given(hnp.arrays(float, st.integers(1, 120), elements=finite), st.data())
def test_compress_paa_preserves_width_weighted_mean(values, data):
    n = values.size
    k = data.draw(st.integers(1, n))
    m = compress_paa(ts(values), k)
    width = math.ceil(n / k)
    widths = np.minimum(width, n - width * np.arange(len(m.compressed)))
    if k == n:
        widths = np.ones(n)
    assert widths.sum() == n
    weighted = float(np.dot(m.compressed.values, widths) / n)
    assert abs(weighted - values.mean()) <= tol(values)
    if n % width == 0:
        assert abs(m.compressed.values.mean() - values.mean()) <= tol(values)


@settings(max_examples=150)
@given(hnp.arrays(float, st.integers(1, 120), elements=finite))
def test_pus_identity_at_full_length(values):
    m = compress_pus(ts(values), values.size)
    np.testing.assert_array_equal(m.compressed.values, values)
    np.testing.assert_array_equal(m.source_index, np.arange(values.size))


@settings(max_examples=150)
@given(st.integers(2, 400), st.data(), st.floats(-50, 50), st.floats(-1e3, 1e3))
def test_pus_linear_round_trip(n, data, slope, intercept):
    k = data.draw(st.integers(2, n))
    qos = slope * np.arange(n) + intercept
    m = compress_pus(ts(np.arange(float(n))), k)
    if len(m.compressed) < 2:
        return
    observed = qos[m.source_index.astype(int)]
    back = expand_qos(observed, m, n)
    np.testing.assert_allclose(back.values, qos, atol=1e-9 * (1 + np.abs(qos).max()))


@settings(max_examples=150)
@given(st.integers(1, 300), st.data(), st.integers(0, 2**32 - 1))
def test_rs_deterministic_for_seed(n, data, seed):
    k = data.draw(st.integers(1, n))
    w = ts(np.arange(float(n)))
    a, b = compress_rs(w, k, seed), compress_rs(w, k, seed)
    np.testing.assert_array_equal(a.source_index, b.source_index)
    assert len(a.compressed) == k
    assert np.all(np.diff(a.source_index) > 0)
