"""Semantic importance: task relevance from pooled gradients, inter-feature
relevance from cosine similarity, and their normalised product."""

from dataclasses import dataclass

import numpy as np

from .semcodec import CodecParams, grad_logits_wrt_features


@dataclass
class ImportanceWeights:
    g: np.ndarray
    v: np.ndarray
    omega: np.ndarray


def str_weights(grads, target=None) -> np.ndarray:
    """Pool a ``(N, C, W, H)`` logit Jacobian into one magnitude per feature.

    By default all ``N`` outputs are averaged; ``target`` restricts the
    average to a single output row (the class-activation style variant).
    """
    grads = np.asarray(grads, dtype=float)
    if not np.all(np.isfinite(grads)):
        raise ValueError("gradients must be finite")
    if target is not None:
        grads = grads[target:target + 1]
    return np.abs(grads.mean(axis=(0, 2, 3)))


def compute_str(params: CodecParams, features, target=None) -> np.ndarray:
    """Offline task relevance for a codec, averaged over reference features.

    The signed pooled gradient is averaged across samples before taking the
    magnitude, so the result depends on the network rather than one input.
    """
    features = np.asarray(features, dtype=float)
    if features.ndim == 3:
        features = features[None]
    acc = np.zeros(params.shape[0])
    for A in features:
        jac = grad_logits_wrt_features(A, params)
        if target is not None:
            jac = jac[target:target + 1]
        acc += jac.mean(axis=(0, 2, 3))
    return np.abs(acc / len(features))


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between flattened maps; 0 if either norm is 0."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError("feature maps differ in shape")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def similarity_matrix(A) -> np.ndarray:
    flat = np.asarray(A, dtype=float).reshape(len(A), -1)
    norms = np.linalg.norm(flat, axis=1)
    unit = flat / np.where(norms > 0, norms, 1.0)[:, None]
    return unit @ unit.T


def isr_weights(A) -> np.ndarray:
    """Mean absolute cosine similarity of each map to every other map."""
    A = np.asarray(A, dtype=float)
    c = A.shape[0]
    if c < 2:
        raise ValueError("inter-feature relevance needs at least two feature maps")
    sim = np.abs(similarity_matrix(A))
    np.fill_diagonal(sim, 0.0)
    return sim.sum(axis=1) / (c - 1)


def combine(g, v) -> ImportanceWeights:
    """Normalised product ``g * v``; uniform weights when the product is all zero."""
    g = np.asarray(g, dtype=float)
    v = np.asarray(v, dtype=float)
    if g.shape != v.shape:
        raise ValueError("g and v must have equal length")
    raw = g * v
    total = raw.sum()
    omega = raw / total if total > 0 else np.full(g.size, 1.0 / g.size)
    return ImportanceWeights(g, v, omega)


def importance(A, g, use_isr: bool = True) -> ImportanceWeights:
    """Weights for one input given stored task relevance ``g``.

    With ``use_isr=False`` only the task relevance is used (ablation).
    """
    v = isr_weights(A) if use_isr else np.ones_like(np.asarray(g, dtype=float))
    return combine(g, v)
