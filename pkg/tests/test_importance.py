import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semlink.importance import (combine, compute_str, cosine_similarity, importance, isr_weights,
                                similarity_matrix, str_weights)
from semlink.semcodec import encode, grad_logits_wrt_features, init_codec


def brute_pool(grads):
    N, C, W, H = grads.shape
    g = np.zeros(C)
    for k in range(C):
        tot = 0.0
        for n, i, j in itertools.product(range(N), range(W), range(H)):
            tot += grads[n, k, i, j]
        g[k] = abs(tot / (N * W * H))
    return g


def brute_isr(A):
    C = len(A)
    v = np.zeros(C)
    for k in range(C):
        for j in range(C):
            if j != k:
                a, b = A[k].ravel(), A[j].ravel()
                v[k] += abs(np.dot(a, b) / np.sqrt(np.dot(a, a) * np.dot(b, b)))
    return v / (C - 1)


def test_str_cases():
    assert np.allclose(str_weights(np.full((3, 4, 2, 2), -0.7)), 0.7)
    assert np.all(str_weights(np.zeros((2, 3, 2, 2))) == 0)
    rng = np.random.default_rng(0)
    for shape in [(2, 3, 2, 2), (4, 5, 3, 1), (1, 2, 2, 3)]:
        gr = rng.standard_normal(shape)
        np.testing.assert_allclose(str_weights(gr), brute_pool(gr), rtol=1e-12)
    gr = rng.standard_normal((3, 2, 2, 2))
    np.testing.assert_allclose(str_weights(gr, target=1), brute_pool(gr[1:2]))
    with pytest.raises(ValueError):
        str_weights(np.full((1, 1, 1, 1), np.nan))


def test_compute_str_averages_signed_gradients():
    p = init_codec(6, (4, 2, 2), seed=0)
    A = encode(np.random.default_rng(1).standard_normal((5, 6)), p)
    signed = np.mean([grad_logits_wrt_features(a, p).mean(axis=(0, 2, 3)) for a in A], axis=0)
    np.testing.assert_allclose(compute_str(p, A), np.abs(signed))
    np.testing.assert_allclose(compute_str(p, A[0]), str_weights(grad_logits_wrt_features(A[0], p)))


def test_cosine_cases():
    assert cosine_similarity([1, 2], [1, 2]) == pytest.approx(1.0)
    assert cosine_similarity([1, 0], [0, 3]) == 0.0
    assert cosine_similarity([1, 0], [1, 1]) == pytest.approx(0.70711, abs=1e-5)
    assert cosine_similarity([0, 0], [1, 1]) == 0.0
    with pytest.raises(ValueError):
        cosine_similarity([1, 0], [1, 0, 0])


def test_isr_cases():
    same = np.tile(np.array([[0.2, -0.5], [0.1, 0.9]]), (4, 1, 1))
    np.testing.assert_allclose(isr_weights(same), 1.0)
    ortho = np.eye(4).reshape(4, 2, 2)
    np.testing.assert_allclose(isr_weights(ortho), 0.0)
    A = np.random.default_rng(2).standard_normal((3, 2, 2))
    np.testing.assert_allclose(isr_weights(A), brute_isr(A), rtol=1e-12)
    with pytest.raises(ValueError):
        isr_weights(np.ones((1, 2, 2)))


def test_combine_cases():
    w = combine([1, 1, 1, 1], [2, 2, 2, 2]).omega
    np.testing.assert_allclose(w, 0.25)
    np.testing.assert_allclose(combine([0, 3, 0], [1, 1, 1]).omega, [0, 1, 0])
    np.testing.assert_allclose(combine([1, 2], [3, 1]).omega, [0.6, 0.4])
    np.testing.assert_allclose(combine([0, 0], [1, 1]).omega, [0.5, 0.5])
    with pytest.raises(ValueError):
        combine([1, 2], [1])


def test_importance_without_isr_uses_g_only():
    A = np.random.default_rng(3).standard_normal((3, 2, 2))
    np.testing.assert_allclose(importance(A, [1, 3, 0]).v, isr_weights(A))
    np.testing.assert_allclose(importance(A, [1, 3, 0], use_isr=False).omega, [0.25, 0.75, 0])


maps = st.integers(0, 2 ** 32).map(lambda s: np.random.default_rng(s).standard_normal((5, 2, 3)))


@settings(max_examples=50, deadline=None)
@given(maps, st.floats(0.01, 100))
def test_isr_scale_invariance(A, c):
    B = A.copy()
    B[2] *= c
    np.testing.assert_allclose(isr_weights(B), isr_weights(A), rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(similarity_matrix(A), similarity_matrix(A).T, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32), st.floats(0.01, 100))
def test_ranking_invariance_under_gradient_scale(seed, c):
    rng = np.random.default_rng(seed)
    grads = rng.standard_normal((3, 6, 2, 2))
    A = rng.standard_normal((6, 2, 2))
    g1, g2 = str_weights(grads), str_weights(c * grads)
    np.testing.assert_allclose(g2, c * g1, rtol=1e-9)
    w1, w2 = importance(A, g1).omega, importance(A, g2).omega
    np.testing.assert_allclose(w1, w2, rtol=1e-9, atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=2, max_size=12), st.integers(0, 2 ** 32))
def test_omega_is_probability_vector(g, seed):
    A = np.random.default_rng(seed).standard_normal((len(g), 2, 2))
    w = importance(A, g).omega
    assert np.all(w >= 0)
    assert abs(w.sum() - 1) <= 1e-12
