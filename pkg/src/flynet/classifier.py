"""Linear place classifier over binary descriptors (the FlyNet FC head)."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import Rng, derive_seed

FNHD_MAGIC = b"FNHD"
FNHD_VERSION = 1


@dataclass
class DenseHead:
    weights: np.ndarray  # (R, n)
    bias: np.ndarray     # (R,)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError(f"inconsistent head shapes {self.weights.shape}, {self.bias.shape}")

    @property
    def R(self) -> int:
        return self.weights.shape[0]

    @property
    def n(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "DenseHead":
        return DenseHead(self.weights.copy(), self.bias.copy())

    @classmethod
    def zeros(cls, R: int, n: int) -> "DenseHead":
        return cls(np.zeros((R, n)), np.zeros(R))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


@dataclass(frozen=True)
class ScoreVector:
    scores: np.ndarray

    @property
    def argmax(self) -> int:
        return int(np.argmax(self.scores))


@dataclass
class TrainHistory:
    loss: list = field(default_factory=list)
    accuracy: list = field(default_factory=list)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _as_bits(d) -> np.ndarray:
    bits = getattr(d, "bits", d)
    return np.asarray(bits, dtype=np.float64)


def logits_batch(head: DenseHead, bits: np.ndarray) -> np.ndarray:
    bits = np.atleast_2d(_as_bits(bits))
    if bits.shape[1] != head.n:
        raise ValueError(f"descriptor has {bits.shape[1]} bits, head expects {head.n}")
    return bits @ head.weights.T + head.bias


def forward(head: DenseHead, d) -> ScoreVector:
    return ScoreVector(softmax(logits_batch(head, d))[0])


def forward_batch(head: DenseHead, bits: np.ndarray) -> np.ndarray:
    """Score vectors for a stack of descriptors, shape (N, R)."""
    return softmax(logits_batch(head, bits))


def loss_and_grad(head: DenseHead, bits, labels):
    """Mean softmax cross-entropy and its gradient as a DenseHead."""
    X = np.atleast_2d(_as_bits(bits))
    y = np.asarray(labels, dtype=np.int64).ravel()
    if len(X) == 0 or len(X) != len(y):
        raise ValueError("batch must be nonempty with one label per descriptor")
    if y.min() < 0 or y.max() >= head.R:
        raise ValueError(f"labels must lie in [0, {head.R})")
    logits = logits_batch(head, X)
    z = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(len(y))
    loss = float(np.mean(log_z - z[rows, y]))
    delta = np.exp(z - log_z[:, None])
    delta[rows, y] -= 1.0
    delta /= len(y)
    return loss, DenseHead(delta.T @ X, delta.sum(axis=0))


class Adam:
    """Adam over a list of arrays updated in place."""

    def __init__(self, params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        if self.lr == 0:
            return
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def init_head(R: int, n: int, seed: int) -> DenseHead:
    bound = 1.0 / np.sqrt(n)
    w = Rng(derive_seed(seed, 0)).uniform_array((R, n)) * 2 * bound - bound
    return DenseHead(w, np.zeros(R))


def accuracy(head: DenseHead, bits, labels) -> float:
    pred = np.argmax(logits_batch(head, bits), axis=1)
    return float(np.mean(pred == np.asarray(labels)))


def fit(bits, labels, cfg: TrainConfig = TrainConfig(), num_classes: int | None = None):
    """Train a head with minibatch Adam; returns (head, history)."""
    X = np.atleast_2d(_as_bits(bits)) if len(bits) else np.empty((0, 0))
    y = np.asarray(labels, dtype=np.int64)
    if len(X) == 0 or len(X) != len(y):
        raise ValueError("fit needs at least one descriptor and one label per descriptor")
    R = num_classes if num_classes is not None else int(y.max()) + 1
    head = init_head(R, X.shape[1], cfg.seed)
    opt = Adam([head.weights, head.bias], cfg.learning_rate, cfg.adam_beta1,
               cfg.adam_beta2, cfg.adam_eps)
    shuffler = Rng(derive_seed(cfg.seed, 1))
    history = TrainHistory()
    for _ in range(cfg.epochs):
        order = np.array(shuffler.permutation(len(X)))
        for start in range(0, len(X), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, grad = loss_and_grad(head, X[idx], y[idx])
            opt.step([grad.weights, grad.bias])
        loss, _ = loss_and_grad(head, X, y)
        history.loss.append(loss)
        history.accuracy.append(accuracy(head, X, y))
    return head, history


# --- footprint -----------------------------------------------------------

@dataclass(frozen=True)
class Footprint:
    model: str
    layers: int
    params: int        # reporting convention, see count_footprint
    neurons: int
    weights: int       # params without biases
    total_params: int  # every parameter in the stack, biases included


def count_footprint(model_kind: str, n: int = 64, R: int = 1000, hidden: int = 512,
                    cann_units: int | None = None, kernel_radius: int = 3) -> Footprint:
    """Layer, parameter and neuron counts of the three architectures.

    ``params`` counts the network that produces the final place scores:
    the FC head for flynet, the recurrent network (input, recurrent and
    output layers with biases) for flynet_rnn, and the FC head plus the
    pre-assigned CANN kernel weights (units x (2r+1)) for flynet_cann.
    The binary FNA projection is not counted as parameters.
    """
    cann_units = R + 2 if cann_units is None else cann_units
    head_w, head_b = n * R, R
    if model_kind == "flynet":
        return Footprint(model_kind, 2, head_w + head_b, n + R, head_w, head_w + head_b)
    if model_kind == "flynet_rnn":
        rnn_w = R * hidden + hidden * hidden + hidden * R
        rnn_b = hidden + R
        return Footprint(model_kind, 4, rnn_w + rnn_b, n + R + hidden + R, rnn_w,
                         head_w + head_b + rnn_w + rnn_b)
    if model_kind == "flynet_cann":
        kernel = cann_units * (2 * kernel_radius + 1)
        return Footprint(model_kind, 3, head_w + head_b + kernel, n + R + cann_units,
                         head_w + kernel, head_w + head_b + kernel)
    raise ValueError(f"unknown model kind {model_kind!r}")


# --- FNHD checkpoint -----------------------------------------------------

def save_head(path, head: DenseHead) -> None:
    header = FNHD_MAGIC + struct.pack("<III", FNHD_VERSION, head.R, head.n)
    body = np.concatenate([head.weights.ravel(), head.bias]).astype("<f8").tobytes()
    Path(path).write_bytes(header + body)


def load_head(path) -> DenseHead:
    data = Path(path).read_bytes()
    if data[:4] != FNHD_MAGIC:
        raise ValueError(f"{path}: not an FNHD file")
    version, R, n = struct.unpack_from("<III", data, 4)
    if version != FNHD_VERSION:
        raise ValueError(f"{path}: unsupported FNHD version {version}")
    vals = np.frombuffer(data, dtype="<f8", offset=16)
    if vals.size != R * n + R:
        raise ValueError(f"{path}: truncated checkpoint")
    return DenseHead(vals[:R * n].reshape(R, n).copy(), vals[R * n:].copy())
