"""Desk-scale semantic codec.

A frozen random projection followed by ``tanh`` plays the semantic encoder and
produces ``C`` feature maps of size ``W x H``.  A one-hidden-layer ``tanh``
network on the flattened maps plays the task decoder and returns pre-softmax
class logits.  Everything is plain numpy with hand-written gradients.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SyntheticDataset:
    inputs: np.ndarray
    labels: np.ndarray
    class_means: np.ndarray
    noise_std: float

    def __len__(self):
        return len(self.labels)

    def subset(self, idx) -> "SyntheticDataset":
        return SyntheticDataset(self.inputs[idx], self.labels[idx], self.class_means, self.noise_std)

    def split(self, n_train: int):
        return self.subset(slice(0, n_train)), self.subset(slice(n_train, None))


@dataclass
class TaskOutput:
    logits: np.ndarray
    label: int


@dataclass
class CodecParams:
    enc_w: np.ndarray          # (C*W*H, d)
    enc_b: np.ndarray          # (C*W*H,)
    w1: np.ndarray             # (hidden, C*W*H)
    b1: np.ndarray
    w2: np.ndarray             # (N, hidden)
    b2: np.ndarray
    shape: tuple               # (C, W, H)
    seed: int = 0
    train_accuracy: float = float("nan")
    loss_history: list = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return int(np.prod(self.shape))

    @property
    def n_classes(self) -> int:
        return self.w2.shape[0]

    @property
    def input_dim(self) -> int:
        return self.enc_w.shape[1]

    def copy(self) -> "CodecParams":
        return CodecParams(self.enc_w.copy(), self.enc_b.copy(), self.w1.copy(), self.b1.copy(),
                           self.w2.copy(), self.b2.copy(), tuple(self.shape), self.seed,
                           self.train_accuracy, list(self.loss_history))


def generate_dataset(n: int, d: int, n_classes: int, seed, noise_std: float = 1.0,
                     radius_factor: float = 4.0) -> SyntheticDataset:
    """Balanced Gaussian blobs with class means on a sphere.

    Means lie at radius ``radius_factor * noise_std``.  At the factor 3 the
    Bayes accuracy for ten classes sits just under 0.9, hence the default 4.
    """
    if n < n_classes:
        raise ValueError("need at least one sample per class")
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((n_classes, d))
    means *= radius_factor * noise_std / np.linalg.norm(means, axis=1, keepdims=True)
    labels = rng.permutation(np.arange(n) % n_classes)
    x = means[labels] + noise_std * rng.standard_normal((n, d))
    return SyntheticDataset(x, labels.astype(np.int64), means, float(noise_std))


def init_codec(d: int, shape=(64, 2, 2), n_classes: int = 10, hidden: int = 64,
               seed=0) -> CodecParams:
    rng = np.random.default_rng(seed)
    f = int(np.prod(shape))
    enc_w = rng.standard_normal((f, d)) / np.sqrt(d)
    enc_b = 0.1 * rng.standard_normal(f)
    w1 = rng.standard_normal((hidden, f)) / np.sqrt(f)
    w2 = rng.standard_normal((n_classes, hidden)) / np.sqrt(hidden)
    return CodecParams(enc_w, enc_b, w1, np.zeros(hidden), w2, np.zeros(n_classes),
                       tuple(int(s) for s in shape), seed)


def encode(x, params: CodecParams) -> np.ndarray:
    """Feature maps for one input ``(d,)`` or a batch ``(n, d)``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.input_dim:
        raise ValueError(f"input dim {x.shape[-1]} != codec input dim {params.input_dim}")
    a = np.tanh(x @ params.enc_w.T + params.enc_b)
    return a.reshape(x.shape[:-1] + tuple(params.shape))


def _flatten(A, params):
    A = np.asarray(A, dtype=float)
    if A.shape[-3:] != tuple(params.shape):
        raise ValueError(f"feature shape {A.shape[-3:]} != codec shape {tuple(params.shape)}")
    return A.reshape(A.shape[:-3] + (params.n_features,))


def task_logits(A, params: CodecParams) -> np.ndarray:
    """Logits for feature maps of shape ``(C, W, H)`` or ``(n, C, W, H)``."""
    a = _flatten(A, params)
    h = np.tanh(a @ params.w1.T + params.b1)
    return h @ params.w2.T + params.b2


def task_forward(A, params: CodecParams) -> TaskOutput:
    logits = task_logits(A, params)
    return TaskOutput(logits, int(np.argmax(logits)))


def grad_logits_wrt_features(A, params: CodecParams) -> np.ndarray:
    """Jacobian ``d logits_n / d A[k, i, j]`` with shape ``(N, C, W, H)``."""
    a = _flatten(A, params)
    if a.ndim != 1:
        raise ValueError("grad_logits_wrt_features takes a single feature tensor")
    h = np.tanh(params.w1 @ a + params.b1)
    jac = (params.w2 * (1.0 - h ** 2)) @ params.w1
    return jac.reshape((params.n_classes,) + tuple(params.shape))


def log_softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def cross_entropy(logits, labels) -> np.ndarray:
    """Per-sample cross-entropy of integer ``labels`` under ``logits``."""
    lp = log_softmax(np.atleast_2d(logits))
    labels = np.atleast_1d(labels)
    return -lp[np.arange(labels.size), labels]


def _head_loss_and_grads(a, labels, params):
    n = a.shape[0]
    pre = a @ params.w1.T + params.b1
    h = np.tanh(pre)
    z = h @ params.w2.T + params.b2
    lp = log_softmax(z)
    loss = -lp[np.arange(n), labels].mean()
    dz = np.exp(lp)
    dz[np.arange(n), labels] -= 1.0
    dz /= n
    gw2 = dz.T @ h
    gb2 = dz.sum(0)
    dpre = (dz @ params.w2) * (1.0 - h ** 2)
    gw1 = dpre.T @ a
    gb1 = dpre.sum(0)
    return loss, (gw1, gb1, gw2, gb2), z


def train_codec(ds: SyntheticDataset, epochs: int = 400, lr: float = 0.5, seed=0,
                shape=(64, 2, 2), hidden: int = 64, params: CodecParams = None) -> CodecParams:
    """Full-batch gradient descent on cross-entropy for the task head.

    The encoder projection stays at its random initialisation.
    """
    if len(ds) == 0:
        raise ValueError("empty dataset")
    if params is None:
        params = init_codec(ds.inputs.shape[1], shape, int(ds.class_means.shape[0]), hidden, seed)
    else:
        params = params.copy()
    a = _flatten(encode(ds.inputs, params), params)
    history = []
    for _ in range(epochs):
        loss, (gw1, gb1, gw2, gb2), _ = _head_loss_and_grads(a, ds.labels, params)
        history.append(float(loss))
        params.w1 -= lr * gw1
        params.b1 -= lr * gb1
        params.w2 -= lr * gw2
        params.b2 -= lr * gb2
    loss, _, z = _head_loss_and_grads(a, ds.labels, params)
    history.append(float(loss))
    params.loss_history = history
    params.train_accuracy = float(np.mean(np.argmax(z, axis=1) == ds.labels))
    return params


def top1_accuracy(outputs, labels) -> float:
    if len(outputs) == 0:
        raise ValueError("no outputs to score")
    if len(outputs) != len(labels):
        raise ValueError("outputs and labels differ in length")
    pred = [o.label if isinstance(o, TaskOutput) else int(np.argmax(o)) for o in outputs]
    return float(np.mean(np.asarray(pred) == np.asarray(labels)))
