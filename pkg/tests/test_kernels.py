import itertools
import math

import numpy as np
import pytest
from hypothesis import example, given, strategies as st

from windkshmm.errors import DegenerateDataError, InvalidInputError
from windkshmm.kernels import KernelConfig, evaluate, gram_matrix, kernel_vector, median_heuristic

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_evaluate_examples():
    cfg = KernelConfig(1.0)
    assert evaluate(cfg, 3.0, 3.0) == 1.0
    assert evaluate(cfg, 0.0, math.sqrt(2)) == pytest.approx(math.exp(-1), rel=1e-15)
    with pytest.raises(InvalidInputError):
        evaluate(cfg, math.nan, 0.0)


@pytest.mark.parametrize("sigma", [0.0, -1.0, math.inf, math.nan])
def test_config_rejects_bad_bandwidth(sigma):
    with pytest.raises(InvalidInputError):
        KernelConfig(sigma)


def test_config_rejects_other_family():
    with pytest.raises(InvalidInputError):
        KernelConfig(1.0, family="laplacian")


@given(finite, finite, st.floats(0.01, 100))
def test_symmetric_and_bounded(x, y, sigma):
    cfg = KernelConfig(sigma)
    assert evaluate(cfg, x, y) == evaluate(cfg, y, x)
    v = evaluate(cfg, x, y)
    assert 0.0 <= v <= 1.0
    assert (v == 1.0) == (x == y) or abs(x - y) < 1e-7 * sigma


def _brute_median(x):
    d = sorted(abs(a - b) for a, b in itertools.combinations(x, 2))
    k = len(d)
    return d[k // 2] if k % 2 else 0.5 * (d[k // 2 - 1] + d[k // 2])


def test_median_heuristic_examples():
    assert median_heuristic([0.0, 1.0, 2.0]) == 1.0
    with pytest.raises(DegenerateDataError):
        median_heuristic([5.0, 5.0, 5.0])
    with pytest.raises(InvalidInputError):
        median_heuristic([1.0])


def test_median_heuristic_even_pair_count():
    # 4 points -> 6 distances {1,2,3,1,2,1}; middle pair (1, 2) -> 1.5
    assert median_heuristic([0.0, 1.0, 2.0, 3.0]) == 1.5


@given(st.lists(st.floats(0, 30), min_size=2, max_size=60))
@example([0.0, 5e-324])  # squared distance underflows to zero
def test_median_heuristic_matches_brute_force(x):
    expected = _brute_median(x)
    if expected == 0:
        with pytest.raises(DegenerateDataError):
            median_heuristic(x)
    else:
        assert median_heuristic(x) == pytest.approx(expected, rel=1e-12)


def test_gram_examples(rng):
    cfg = KernelConfig(1.3)
    np.testing.assert_array_equal(gram_matrix(cfg, [2.5], [2.5]), [[1.0]])
    X = rng.uniform(0, 10, 10)
    K = gram_matrix(cfg, X, X)
    np.testing.assert_array_equal(K, K.T)
    np.testing.assert_array_equal(np.diag(K), 1.0)
    assert np.linalg.eigvalsh(0.5 * (K + K.T)).min() >= -1e-10 * X.size
    Y = rng.uniform(0, 10, 4)
    G = gram_matrix(cfg, X, Y)
    assert G.shape == (10, 4)
    assert G[3, 2] == evaluate(cfg, X[3], Y[2])
    with pytest.raises(InvalidInputError):
        gram_matrix(cfg, [], [1.0])


def test_gram_vector_inputs_are_product_form(rng):
    cfg = KernelConfig(2.0)
    X = rng.normal(size=(5, 3))
    K = gram_matrix(cfg, X, X)
    expected = np.prod([gram_matrix(cfg, X[:, j], X[:, j]) for j in range(3)], axis=0)
    np.testing.assert_allclose(K, expected, rtol=1e-13)


def test_kernel_vector(rng):
    cfg = KernelConfig(0.7)
    X = rng.uniform(0, 5, 8)
    v = kernel_vector(cfg, X, X[3])
    assert v[3] == 1.0 and np.all(v <= 1.0)
    assert np.all(kernel_vector(cfg, X, 1e4) < 1e-10)
    np.testing.assert_array_equal(kernel_vector(cfg, X, 2.2), gram_matrix(cfg, X, [2.2])[:, 0])
