"""Vanilla tanh RNN over score-vector sequences, trained with truncated BPTT."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classifier import Adam, softmax
from .rng import Rng, derive_seed

FNRN_MAGIC = b"FNRN"
FNRN_VERSION = 1
PARAM_NAMES = ("W_in", "W_rec", "b_rec", "W_out", "b_out")


@dataclass
class RnnModel:
    W_in: np.ndarray   # (H, R)
    W_rec: np.ndarray  # (H, H)
    b_rec: np.ndarray  # (H,)
    W_out: np.ndarray  # (R, H)
    b_out: np.ndarray  # (R,)

    def __post_init__(self):
        for name in PARAM_NAMES:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        H, R = self.W_in.shape
        if (self.W_rec.shape != (H, H) or self.b_rec.shape != (H,)
                or self.W_out.shape != (R, H) or self.b_out.shape != (R,)):
            raise ValueError("inconsistent RNN parameter shapes")

    @property
    def H(self) -> int:
        return self.W_in.shape[0]

    @property
    def R(self) -> int:
        return self.W_in.shape[1]

    def params(self) -> list:
        return [getattr(self, name) for name in PARAM_NAMES]

    def copy(self) -> "RnnModel":
        return RnnModel(*(p.copy() for p in self.params()))

    @classmethod
    def zeros(cls, R: int, H: int) -> "RnnModel":
        return cls(np.zeros((H, R)), np.zeros((H, H)), np.zeros(H), np.zeros((R, H)), np.zeros(R))


@dataclass(frozen=True)
class RnnTrainConfig:
    learning_rate: float = 0.001
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 10
    batch_size: int = 32
    seed: int = 0
    bptt_len: int = 20
    grad_clip: float = 5.0
    hidden: int = 512

    def __post_init__(self):
        if self.bptt_len < 1:
            raise ValueError("bptt_len must be >= 1")
        if self.learning_rate < 0 or self.epochs < 1 or self.batch_size < 1 or self.hidden < 1:
            raise ValueError("invalid RNN training configuration")


def init_rnn(R: int, H: int, seed: int) -> RnnModel:
    rng = Rng(derive_seed(seed, 0))

    def uniform(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform_array(shape) * 2 * bound - bound

    return RnnModel(uniform((H, R), R), uniform((H, H), H), np.zeros(H),
                    uniform((R, H), H), np.zeros(R))


def rnn_forward(model: RnnModel, scores, h0=None):
    """Hidden states and logits for a (T, R) or batched (B, T, R) sequence."""
    S = np.asarray(scores, dtype=np.float64)
    batched = S.ndim == 3
    if not batched:
        S = S[None]
    if S.shape[-1] != model.R:
        raise ValueError(f"inputs have {S.shape[-1]} entries, model expects {model.R}")
    B, T, _ = S.shape
    h = np.zeros((B, model.H)) if h0 is None else np.broadcast_to(h0, (B, model.H))
    hs = np.empty((B, T, model.H))
    drive = S @ model.W_in.T + model.b_rec
    for t in range(T):
        h = np.tanh(drive[:, t] + h @ model.W_rec.T)
        hs[:, t] = h
    logits = hs @ model.W_out.T + model.b_out
    if not batched:
        return hs[0], logits[0]
    return hs, logits


def clip_by_global_norm(grads: list, max_norm: float | None) -> float:
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if max_norm is not None and norm > max_norm:
        for g in grads:
            g *= max_norm / norm
    return norm


def rnn_loss_and_grads(model: RnnModel, scores, labels, grad_clip: float | None = None, h0=None):
    """Mean per-step cross-entropy with full BPTT; grads returned as an RnnModel.

    ``h0`` is treated as a constant (no gradient flows into it).
    """
    S = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if S.ndim == 2:
        S, y = S[None], y[None]
    if y.shape != S.shape[:2]:
        raise ValueError("need one label per time step")
    if y.min() < 0 or y.max() >= model.R:
        raise ValueError(f"labels must lie in [0, {model.R})")
    B, T, _ = S.shape
    h_init = np.zeros((B, model.H)) if h0 is None else np.broadcast_to(h0, (B, model.H))
    hs, logits = rnn_forward(model, S, h_init)
    z = logits - logits.max(axis=-1, keepdims=True)
    log_z = np.log(np.exp(z).sum(axis=-1))
    picked = np.take_along_axis(z, y[..., None], axis=-1)[..., 0]
    loss = float(np.mean(log_z - picked))

    dz = np.exp(z - log_z[..., None])
    np.put_along_axis(dz, y[..., None], np.take_along_axis(dz, y[..., None], axis=-1) - 1.0, axis=-1)
    dz /= B * T

    g = RnnModel.zeros(model.R, model.H)
    g.W_out += np.einsum("btr,bth->rh", dz, hs)
    g.b_out += dz.sum(axis=(0, 1))
    dh_hidden = dz @ model.W_out
    dh_next = np.zeros((B, model.H))
    for t in range(T - 1, -1, -1):
        da = (dh_hidden[:, t] + dh_next) * (1.0 - hs[:, t] ** 2)
        h_prev = hs[:, t - 1] if t > 0 else h_init
        g.W_in += da.T @ S[:, t]
        g.W_rec += da.T @ h_prev
        g.b_rec += da.sum(axis=0)
        dh_next = da @ model.W_rec
    clip_by_global_norm(g.params(), grad_clip)
    return loss, g


def make_windows(sequences, labels, length: int):
    """All length-``length`` sliding windows (shorter sequences give one window)."""
    xs, ys = [], []
    for S, y in zip(sequences, labels):
        S = np.asarray(S, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if len(S) != len(y):
            raise ValueError("every sequence needs one label per step")
        span = min(length, len(S))
        for start in range(len(S) - span + 1):
            xs.append(S[start:start + span])
            ys.append(y[start:start + span])
    return xs, ys


def fit_rnn(sequences, labels, cfg: RnnTrainConfig = RnnTrainConfig(), num_classes: int | None = None):
    """Adam over shuffled ``bptt_len`` windows, each unrolled from a zero state.

    ``sequences`` is a list of (T, R) arrays, or a callable ``epoch -> list``
    returning fresh sequences (e.g. newly augmented traverses) for each epoch;
    ``labels`` holds the matching label sequences.  Returns (model, per-epoch
    mean loss).
    """
    fresh = callable(sequences)
    first = sequences(0) if fresh else sequences
    if len(first) == 0 or len(first) != len(labels):
        raise ValueError("fit_rnn needs at least one sequence and one label sequence per input")
    R = num_classes if num_classes is not None else np.asarray(first[0]).shape[-1]
    model = init_rnn(R, cfg.hidden, cfg.seed)
    opt = Adam(model.params(), cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    shuffler = Rng(derive_seed(cfg.seed, 1))
    losses = []
    for epoch in range(cfg.epochs):
        seqs = first if epoch == 0 or not fresh else sequences(epoch)
        xs, ys = make_windows(seqs, labels, cfg.bptt_len)
        # windows of unequal length (short sequences) cannot share a batch
        by_len: dict[int, list[int]] = {}
        for i, x in enumerate(xs):
            by_len.setdefault(len(x), []).append(i)
        total, batches = 0.0, 0
        for length in sorted(by_len):
            group = by_len[length]
            order = [group[i] for i in shuffler.permutation(len(group))]
            for start in range(0, len(order), cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                loss, g = rnn_loss_and_grads(model, np.stack([xs[i] for i in idx]),
                                             np.stack([ys[i] for i in idx]), cfg.grad_clip)
                opt.step(g.params())
                total += loss
                batches += 1
        losses.append(total / batches)
    return model, losses


def rnn_match(model: RnnModel, scores) -> list[tuple[int, float]]:
    """Run the whole query sequence; per step (argmax place, its probability)."""
    _, logits = rnn_forward(model, scores)
    probs = softmax(logits)
    best = np.argmax(probs, axis=-1)
    return [(int(b), float(p[b])) for b, p in zip(best, probs)]


def save_rnn(path, model: RnnModel) -> None:
    header = FNRN_MAGIC + struct.pack("<III", FNRN_VERSION, model.R, model.H)
    body = np.concatenate([p.ravel() for p in model.params()]).astype("<f8").tobytes()
    Path(path).write_bytes(header + body)


def load_rnn(path) -> RnnModel:
    data = Path(path).read_bytes()
    if data[:4] != FNRN_MAGIC:
        raise ValueError(f"{path}: not an FNRN file")
    version, R, H = struct.unpack_from("<III", data, 4)
    if version != FNRN_VERSION:
        raise ValueError(f"{path}: unsupported FNRN version {version}")
    vals = np.frombuffer(data, dtype="<f8", offset=16)
    shapes = [(H, R), (H, H), (H,), (R, H), (R,)]
    sizes = [int(np.prod(s)) for s in shapes]
    if vals.size != sum(sizes):
        raise ValueError(f"{path}: truncated checkpoint")
    parts, pos = [], 0
    for shape, size in zip(shapes, sizes):
        parts.append(vals[pos:pos + size].reshape(shape).copy())
        pos += size
    return RnnModel(*parts)
