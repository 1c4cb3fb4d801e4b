"""Ground-truth checks, precision-recall curves, AUC and report writers."""

from __future__ import annotations

import csv
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class MatchRecord:
    query_index: int
    predicted_ref: int | None  # None: the method abstained
    score: float
    gt_ref: int

    @property
    def attempted(self) -> bool:
        return self.predicted_ref is not None and math.isfinite(self.score)


@dataclass(frozen=True)
class Tolerance:
    frames: int = 0

    def __post_init__(self):
        if self.frames < 0:
            raise ValueError("tolerance must be >= 0 frames")


@dataclass
class PrCurve:
    points: list = field(default_factory=list)      # (recall, precision)
    thresholds: list = field(default_factory=list)


def _frames(tol) -> int:
    return tol.frames if isinstance(tol, Tolerance) else int(tol)


def is_correct(rec: MatchRecord, tol) -> bool:
    if rec.predicted_ref is None:
        return False
    return abs(rec.predicted_ref - rec.gt_ref) <= _frames(tol)


def pr_curve(records, tol) -> PrCurve:
    """Sweep every distinct attempted score as a threshold, highest first.

    At threshold t the attempted matches are those with score >= t.
    Recall is over all queries, so abstentions only lower recall.
    """
    records = list(records)
    if not records:
        raise ValueError("pr_curve needs at least one record")
    total = len(records)
    attempted = [r for r in records if r.attempted]
    if not attempted:
        return PrCurve()
    scores = np.array([r.score for r in attempted], dtype=np.float64)
    correct = np.array([is_correct(r, tol) for r in attempted])
    order = np.argsort(-scores, kind="stable")
    scores, correct = scores[order], correct[order]
    tp = np.cumsum(correct)
    # last position of each run of equal scores
    ends = np.flatnonzero(np.append(scores[1:] != scores[:-1], True))
    curve = PrCurve()
    for e in ends:
        curve.points.append((float(tp[e] / total), float(tp[e] / (e + 1))))
        curve.thresholds.append(float(scores[e]))
    return curve


def auc(curve: PrCurve) -> float:
    """Trapezoidal area over recall, anchored at (0, first precision).

    Summed exactly in rationals and rounded once, so the result does not
    depend on accumulation order.
    """
    if not curve.points:
        return 0.0
    pts = [(0.0, curve.points[0][1])] + list(curve.points)
    pts.sort(key=lambda p: p[0])
    pts = [(Fraction(r), Fraction(p)) for r, p in pts]
    area = sum(((r1 - r0) * (p0 + p1) for (r0, p0), (r1, p1) in zip(pts, pts[1:])), Fraction(0))
    return float(area / 2)


def records_from_matches(matches, gt) -> list[MatchRecord]:
    """Build records from (best_ref, score) pairs; best_ref None marks abstention."""
    return [MatchRecord(q, None if b is None else int(b), float(s), int(g))
            for q, ((b, s), g) in enumerate(zip(matches, gt))]


# --- timing --------------------------------------------------------------

@dataclass(frozen=True)
class TimingReport:
    feature_s: float
    match_s: float
    avg_query_s: float


def timing_report(feature_s: float, match_s: float, num_queries: int) -> TimingReport:
    avg = (feature_s + match_s) / num_queries if num_queries else 0.0
    return TimingReport(feature_s, match_s, avg)


class Stopwatch:
    """Accumulates wall-clock seconds per named stage."""

    def __init__(self):
        self.totals: dict[str, float] = {}

    @contextmanager
    def time(self, stage: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.totals[stage] = self.totals.get(stage, 0.0) + time.perf_counter() - start

    def __getitem__(self, stage):
        return self.totals.get(stage, 0.0)


# --- writers -------------------------------------------------------------

def _open_csv(path, header):
    fh = open(path, "w", newline="")
    if header:
        fh.write(f"# {header}\n")
    return fh, csv.writer(fh, lineterminator="\n")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(float(x))
    return str(x)


def write_pr_csv(path, curve: PrCurve, header: str | None = None) -> None:
    fh, writer = _open_csv(path, header)
    with fh:
        writer.writerow(["threshold", "precision", "recall"])
        for t, (r, p) in zip(curve.thresholds, curve.points):
            writer.writerow([_fmt(float(t)), _fmt(float(p)), _fmt(float(r))])


SUMMARY_FIELDS = ["method", "auc", "feature_s", "match_s", "avg_query_s", "layers", "params", "neurons"]


def write_summary_csv(path, rows, header: str | None = None) -> None:
    """``rows`` are dicts keyed by SUMMARY_FIELDS; missing values are left blank."""
    fh, writer = _open_csv(path, header)
    with fh:
        writer.writerow(SUMMARY_FIELDS)
        for row in rows:
            writer.writerow([_fmt(row.get(k)) for k in SUMMARY_FIELDS])


def write_matches_csv(path, records, header: str | None = None) -> None:
    fh, writer = _open_csv(path, header)
    with fh:
        writer.writerow(["query_index", "predicted_ref", "score", "gt_ref"])
        for r in records:
            writer.writerow([r.query_index, "" if r.predicted_ref is None else r.predicted_ref,
                             "" if not math.isfinite(r.score) else repr(float(r.score)), r.gt_ref])


def read_matches_csv(path) -> list[MatchRecord]:
    with open(path, newline="") as fh:
        rows = csv.DictReader(line for line in fh if not line.startswith("#"))
        return [MatchRecord(int(row["query_index"]),
                            int(row["predicted_ref"]) if row["predicted_ref"] else None,
                            float(row["score"]) if row["score"] else float("nan"),
                            int(row["gt_ref"]))
                for row in rows]


def write_pr_svg(path, curves: dict, header: str | None = None, size: int = 320) -> None:
    """Minimal line plot of one or more named PR curves."""
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    pad = 40
    span = size - 2 * pad
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">']
    if header:
        parts.append(f"<!-- {header} -->")
    parts.append(f'<rect x="{pad}" y="{pad}" width="{span}" height="{span}" fill="none" stroke="black"/>')
    parts.append(f'<text x="{size / 2}" y="{size - 8}" text-anchor="middle" font-size="12">recall</text>')
    parts.append(f'<text x="12" y="{size / 2}" font-size="12" transform="rotate(-90 12 {size / 2})">precision</text>')
    for i, (name, curve) in enumerate(curves.items()):
        color = colors[i % len(colors)]
        pts = " ".join(f"{pad + r * span:.2f},{pad + (1 - p) * span:.2f}" for r, p in curve.points)
        if pts:
            parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        parts.append(f'<text x="{pad + 6}" y="{pad + 14 + 14 * i}" font-size="11" fill="{color}">{name}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
