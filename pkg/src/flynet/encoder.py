"""FlyNet encoder: sparse binary random projection followed by winner-take-all."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import FRAME_SIZE, Traverse
from .rng import Rng, derive_seed

FNAD_MAGIC = b"FNAD"
FNAD_VERSION = 1


class ConfigError(ValueError):
    pass


def round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


@dataclass(frozen=True)
class EncoderConfig:
    m: int = FRAME_SIZE
    n: int = 64
    sampling_ratio: float = 0.1
    wta_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ConfigError("m and n must be >= 1")
        if not 0.0 < self.sampling_ratio <= 1.0:
            raise ConfigError("sampling_ratio must be in (0, 1]")
        if not 0.0 < self.wta_fraction < 1.0:
            raise ConfigError("wta_fraction must be in (0, 1)")
        if not 1 <= self.k <= self.n:
            raise ConfigError(f"wta_fraction {self.wta_fraction} gives k={self.k} outside [1, {self.n}]")

    @property
    def fan_in(self) -> int:
        return min(self.m, max(1, round_half_up(self.sampling_ratio * self.m)))

    @property
    def k(self) -> int:
        return round_half_up(self.wta_fraction * self.n)


@dataclass(frozen=True)
class ProjectionMatrix:
    """Row j lists the input indices summed by output unit j."""

    rows: np.ndarray  # (n, fan_in) int64
    m: int
    seed: int

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def fan_in(self) -> int:
        return self.rows.shape[1]

    def dense(self) -> np.ndarray:
        w = np.zeros((self.n, self.m), dtype=np.uint8)
        np.put_along_axis(w, self.rows, 1, axis=1)
        return w


@dataclass(frozen=True)
class BinaryDescriptor:
    bits: np.ndarray  # (n,) uint8 of 0/1

    @property
    def n(self) -> int:
        return len(self.bits)

    def popcount(self) -> int:
        return int(self.bits.sum())

    def packed(self) -> bytes:
        return np.packbits(self.bits, bitorder="little").tobytes()

    @classmethod
    def from_packed(cls, data: bytes, n: int) -> "BinaryDescriptor":
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")[:n]
        return cls(bits.astype(np.uint8))

    def __eq__(self, other):
        return isinstance(other, BinaryDescriptor) and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.packed())


def build_projection(cfg: EncoderConfig) -> ProjectionMatrix:
    """Sample ``fan_in`` distinct inputs per output row; row j uses seed (seed, j)."""
    rows = np.empty((cfg.n, cfg.fan_in), dtype=np.int64)
    for j in range(cfg.n):
        rows[j] = sorted(Rng(derive_seed(cfg.seed, j)).sample(cfg.m, cfg.fan_in))
    return ProjectionMatrix(rows, cfg.m, cfg.seed)


def winner_take_all(y: np.ndarray, k: int) -> np.ndarray:
    """Top-k of each row set to 1; ties go to the larger value, then the smaller index."""
    y = np.atleast_2d(y)
    order = np.argsort(-y, axis=-1, kind="stable")
    bits = np.zeros(y.shape, dtype=np.uint8)
    np.put_along_axis(bits, order[:, :k], 1, axis=-1)
    return bits


def project(W: ProjectionMatrix, x: np.ndarray) -> np.ndarray:
    """y = W x for one vector or a stack of row vectors."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != W.m:
        raise ValueError(f"input has {x.shape[-1]} values, projection expects {W.m}")
    return x[..., W.rows].sum(axis=-1)


def encode(W: ProjectionMatrix, x, cfg: EncoderConfig) -> BinaryDescriptor:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("encode takes a single vector; use encode_batch for stacks")
    return BinaryDescriptor(winner_take_all(project(W, x), cfg.k)[0])


def encode_batch(W: ProjectionMatrix, X: np.ndarray, cfg: EncoderConfig) -> np.ndarray:
    """Bits for a (N, m) stack as a (N, n) uint8 array."""
    X = np.asarray(X, dtype=np.float64).reshape(-1, W.m) if np.size(X) else np.empty((0, W.m))
    if len(X) == 0:
        return np.empty((0, W.n), dtype=np.uint8)
    return winner_take_all(project(W, X), cfg.k)


def encode_traverse(W: ProjectionMatrix, traverse: Traverse, cfg: EncoderConfig) -> list[BinaryDescriptor]:
    out = []
    for i, frame in enumerate(traverse.frames):
        try:
            out.append(encode(W, frame, cfg))
        except ValueError as exc:
            raise ValueError(f"frame {i}: {exc}") from exc
    return out


def hamming_similarity(a: BinaryDescriptor, b: BinaryDescriptor) -> float:
    if a.n != b.n:
        raise ValueError(f"descriptor lengths differ: {a.n} vs {b.n}")
    return 1.0 - np.count_nonzero(a.bits != b.bits) / a.n


def hamming_similarity_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise similarity between rows of two (N, n) bit arrays."""
    A = np.asarray(A, dtype=np.int64)
    B = np.asarray(B, dtype=np.int64)
    if A.shape[1] != B.shape[1]:
        raise ValueError("descriptor lengths differ")
    n = A.shape[1]
    agree = A @ B.T + (1 - A) @ (1 - B).T
    return agree / n


# --- FNAD file format ----------------------------------------------------
# "FNAD", u32 version, u32 m, u32 n, u32 count, u64 seed, then count packed codes.

def write_descriptors(path, bits: np.ndarray, m: int, seed: int) -> None:
    bits = np.asarray(bits, dtype=np.uint8)
    count, n = bits.shape
    header = FNAD_MAGIC + struct.pack("<IIIIQ", FNAD_VERSION, m, n, count, seed)
    packed = np.packbits(bits, axis=1, bitorder="little") if count else b""
    Path(path).write_bytes(header + bytes(np.asarray(packed, dtype=np.uint8).tobytes()))


def read_descriptors(path):
    """Returns (bits (count, n) uint8, m, seed)."""
    data = Path(path).read_bytes()
    if data[:4] != FNAD_MAGIC:
        raise ValueError(f"{path}: not an FNAD file")
    version, m, n, count, seed = struct.unpack_from("<IIIIQ", data, 4)
    if version != FNAD_VERSION:
        raise ValueError(f"{path}: unsupported FNAD version {version}")
    width = (n + 7) // 8
    body = np.frombuffer(data, dtype=np.uint8, offset=28)
    if body.size != count * width:
        raise ValueError(f"{path}: expected {count * width} payload bytes, found {body.size}")
    bits = np.unpackbits(body.reshape(count, width), axis=1, bitorder="little")[:, :n]
    return bits.astype(np.uint8), m, seed
