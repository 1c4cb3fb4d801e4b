"""Sequence matching over a reference x query difference matrix."""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoder import hamming_similarity_matrix

UNIQUENESS_EXCLUSION = 10


class Source(str, enum.Enum):
    SCORES = "scores"
    HAMMING = "hamming"


@dataclass(frozen=True)
class DifferenceMatrix:
    d: np.ndarray  # (R, Q): row = reference place, column = query frame
    source: Source = Source.SCORES

    @property
    def shape(self):
        return self.d.shape


@dataclass(frozen=True)
class SeqSlamConfig:
    ds: int = 20
    vmin: float = 0.8
    vmax: float = 1.2
    vstep: float = 0.1
    enhance_window: int = 10
    threshold: float = 1.0

    def __post_init__(self):
        if self.ds < 2:
            raise ValueError("ds must be >= 2")
        if self.vmin > self.vmax or self.vstep <= 0:
            raise ValueError("need vmin <= vmax and vstep > 0")
        if self.enhance_window < 2:
            raise ValueError("enhance_window must be >= 2")

    def velocities(self) -> np.ndarray:
        count = int(np.floor((self.vmax - self.vmin) / self.vstep + 1e-9)) + 1
        return np.round(self.vmin + self.vstep * np.arange(count), 10)


@dataclass(frozen=True)
class SeqMatch:
    best_ref: int | None  # None = unmatchable
    score: float          # negated trajectory cost; nan when unmatchable


def difference_matrix(ref_features, query_features, source="scores") -> DifferenceMatrix:
    """Dissimilarities in [0, 1].

    scores mode: ``query_features`` is a (Q, R) stack of score vectors and
    d[i, j] = 1 - scores_j[i]; ``ref_features`` only fixes R (an int or any
    sized object).  hamming mode: both arguments are (N, n) bit arrays.
    """
    source = Source(source)
    if source is Source.SCORES:
        S = np.atleast_2d(np.asarray(query_features, dtype=np.float64))
        R = ref_features if isinstance(ref_features, (int, np.integer)) else len(ref_features)
        if S.size == 0 or R == 0:
            raise ValueError("difference_matrix needs nonempty inputs")
        if S.shape[1] != R:
            raise ValueError(f"score vectors have {S.shape[1]} entries for {R} reference places")
        return DifferenceMatrix(1.0 - S.T, source)
    A = np.atleast_2d(np.asarray(ref_features))
    B = np.atleast_2d(np.asarray(query_features))
    if A.size == 0 or B.size == 0:
        raise ValueError("difference_matrix needs nonempty inputs")
    if A.dtype.kind == "f" and not np.all((A == 0) | (A == 1)):
        raise ValueError("hamming mode needs binary descriptors")
    return DifferenceMatrix(1.0 - hamming_similarity_matrix(A, B), source)


def contrast_enhance(D: DifferenceMatrix, window: int = 10) -> DifferenceMatrix:
    """Per-column local normalisation over a row window centred on each entry.

    The neighbourhood of row i is rows [i - window//2, i - window//2 + window),
    clipped to the matrix; std is the population std.
    """
    if window < 2:
        raise ValueError("window must be >= 2")
    d = np.asarray(D.d, dtype=np.float64)
    out = np.empty_like(d)
    R = d.shape[0]
    for i in range(R):
        start = i - window // 2
        # offsets from the entry itself keep constant columns exactly zero
        dev = d[max(0, start):min(R, start + window)] - d[i]
        out[i] = -dev.mean(axis=0) / (dev.std(axis=0) + 1e-12)
    return DifferenceMatrix(out, D.source)


def trajectory_costs(D: np.ndarray, q: int, ds: int, velocities) -> np.ndarray:
    """cost[v, r] = sum_t D[round(r - v t), q - t] with rows clamped."""
    R = D.shape[0]
    t = np.arange(ds)
    cols = q - t
    r = np.arange(R)
    costs = np.empty((len(velocities), R))
    for k, v in enumerate(velocities):
        rows = np.floor(r[:, None] - v * t[None, :] + 0.5).astype(np.int64)
        np.clip(rows, 0, R - 1, out=rows)
        costs[k] = D[rows, cols[None, :]].sum(axis=1)
    return costs


def match(D_hat: DifferenceMatrix, cfg: SeqSlamConfig = SeqSlamConfig()) -> list[SeqMatch]:
    """Best reference per query by linear trajectory search.

    Queries before ds - 1 have no full trajectory and are unmatchable.  The
    uniqueness test compares the best cost with the best cost outside a
    +-10 row window, both offset by ds * min(D_hat) so they are nonnegative;
    a match is rejected when best / second > threshold.
    """
    D = np.asarray(getattr(D_hat, "d", D_hat), dtype=np.float64)
    R, Q = D.shape
    if Q < cfg.ds:
        raise ValueError(f"{Q} query frames is fewer than sequence length ds={cfg.ds}; use a shorter ds")
    vs = cfg.velocities()
    floor = cfg.ds * D.min()
    out = [SeqMatch(None, float("nan"))] * (cfg.ds - 1)
    for q in range(cfg.ds - 1, Q):
        score = trajectory_costs(D, q, cfg.ds, vs).min(axis=0)
        best = int(np.argmin(score))
        if _unique_enough(score - floor, best, cfg.threshold):
            out.append(SeqMatch(best, -float(score[best])))
        else:
            out.append(SeqMatch(None, float("nan")))
    return out


def _unique_enough(costs: np.ndarray, best: int, threshold: float) -> bool:
    mask = np.ones(len(costs), dtype=bool)
    mask[max(0, best - UNIQUENESS_EXCLUSION):best + UNIQUENESS_EXCLUSION + 1] = False
    if not mask.any():
        return True
    second = costs[mask].min()
    if second <= 0:
        # best <= second, so both are zero: a perfect tie reads as ratio 1
        return threshold >= 1.0
    return costs[best] / second <= threshold


def write_matrix(path, D: DifferenceMatrix, header: str | None = None) -> None:
    """Text header line(s) then R*Q little-endian float32 values, row-major."""
    R, Q = D.shape
    lines = ([f"# {header}"] if header else []) + [f"R={R} Q={Q}", ""]
    with open(path, "wb") as fh:
        fh.write("\n".join(lines).encode())
        fh.write(np.asarray(D.d, dtype="<f4").tobytes())


def read_matrix(path) -> np.ndarray:
    data = Path(path).read_bytes()
    pos = 0
    while True:
        end = data.index(b"\n", pos)
        line = data[pos:end].decode()
        pos = end + 1
        if line.startswith("R="):
            R, Q = (int(part.split("=")[1]) for part in line.split())
            break
    return np.frombuffer(data, dtype="<f4", offset=pos, count=R * Q).reshape(R, Q)
