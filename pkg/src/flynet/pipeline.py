"""End-to-end wiring: source -> encoder -> classifier -> temporal filter -> metrics."""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import cann, classifier, evaluation, rnn, seqslam
from .config import Filter, PipelineConfig
from .dataset import (DatasetError, SynthConfig, Traverse, apply_appearance, export_pair,
                      generate_synthetic, ingest_directory, read_ground_truth)
from .encoder import build_projection, encode_batch, write_descriptors
from .rng import Rng, derive_seed

log = logging.getLogger(__name__)

SYNTHETIC = "synthetic:"
MODEL_KIND = {Filter.NONE: "flynet", Filter.RNN: "flynet_rnn", Filter.CANN: "flynet_cann"}


class NumericError(RuntimeError):
    """A stage produced non-finite values."""


@functools.lru_cache(maxsize=4)
def _synthetic_pair(cfg: SynthConfig):
    return generate_synthetic(cfg)


def load_source(source: str, cfg: PipelineConfig, role: str = "reference"):
    """Traverse plus ground-truth reference index per frame.

    ``source`` is a directory or ``synthetic:`` / ``synthetic:reference`` /
    ``synthetic:query``; a bare ``synthetic:`` picks the traverse for ``role``.
    Directory queries take ground truth from a ground_truth.csv in the
    directory or its parent, else frame i is assumed to show place i.
    """
    source = str(source)
    if source.startswith(SYNTHETIC):
        which = source[len(SYNTHETIC):] or role
        if which not in ("reference", "query"):
            raise DatasetError(f"unknown synthetic traverse {which!r}")
        ref, query = _synthetic_pair(cfg.synth)
        trav = ref if which == "reference" else query
        return trav, trav.labels.copy()
    path = Path(source)
    trav = ingest_directory(path)
    for candidate in (path / "ground_truth.csv", path.parent / "ground_truth.csv"):
        if role == "query" and candidate.exists():
            gt = read_ground_truth(candidate)
            if len(gt) != len(trav):
                raise DatasetError(f"{candidate} has {len(gt)} rows for {len(trav)} frames")
            return trav, gt
    return trav, trav.labels.copy()


def _check_finite(name: str, arr) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite values")


def train_head(cfg: PipelineConfig, ref_bits, labels, num_classes: int):
    head, history = classifier.fit(ref_bits, labels, cfg.train, num_classes)
    _check_finite("classifier head", head.weights)
    log.info("classifier: final training accuracy %.3f", history.accuracy[-1])
    return head, history


def rnn_inputs(scores: np.ndarray) -> np.ndarray:
    """Score vectors rescaled by R so that a uniform vector has unit entries.

    Raw probabilities are O(1/R); unscaled, the input weights barely train.
    """
    return scores * scores.shape[-1]


def train_rnn(cfg: PipelineConfig, reference: Traverse, W, head):
    """Fit the recurrent filter on freshly augmented (mild) copies of the reference traverse."""
    sec = cfg.rnn
    R = head.R

    def sequences(epoch):
        out = []
        for c in range(sec.augment_copies):
            rng = Rng(derive_seed(sec.seed, 7, epoch, c))
            frames = apply_appearance(reference.frames, "mild", sec.augment_noise, 0, rng)
            scores = classifier.forward_batch(head, encode_batch(W, frames, cfg.encoder))
            out.append(rnn_inputs(scores))
        return out

    labels = [reference.labels] * sec.augment_copies
    model, losses = rnn.fit_rnn(sequences, labels, sec.trainer(), num_classes=R)
    _check_finite("rnn model", model.W_rec)
    log.info("rnn: final training loss %.4f", losses[-1])
    return model


def match_queries(cfg: PipelineConfig, query_scores, ref_bits=None, query_bits=None,
                  rnn_model=None, trace=None):
    """Per-query (best_ref, score) for the configured filter; best_ref None = abstain."""
    R = query_scores.shape[1]
    if cfg.filter is Filter.NONE:
        best = np.argmax(query_scores, axis=1)
        return [(int(b), float(s[b])) for b, s in zip(best, query_scores)], None
    if cfg.filter is Filter.SEQSLAM:
        if cfg.seqslam.source is seqslam.Source.HAMMING:
            D = seqslam.difference_matrix(ref_bits, query_bits, "hamming")
        else:
            D = seqslam.difference_matrix(R, query_scores, "scores")
        D_hat = seqslam.contrast_enhance(D, cfg.seqslam.enhance_window)
        matches = seqslam.match(D_hat, cfg.seqslam.matcher())
        return [(m.best_ref, m.score) for m in matches], D
    if cfg.filter is Filter.RNN:
        return rnn.rnn_match(rnn_model, rnn_inputs(query_scores)), None
    return cann.cann_run(R, query_scores, cfg.cann, trace), None


@dataclass
class RunResult:
    summary: dict
    records: list
    curve: evaluation.PrCurve
    timing: evaluation.TimingReport


def run_pipeline(cfg: PipelineConfig, ref_source=SYNTHETIC, query_source=SYNTHETIC,
                 out_dir=None) -> RunResult:
    """Encode, train, match and evaluate; writes artifacts when ``out_dir`` is set."""
    header = f"config_hash={cfg.config_hash()}"
    watch = evaluation.Stopwatch()
    reference, _ = load_source(ref_source, cfg, "reference")
    query, gt = load_source(query_source, cfg, "query")

    with watch.time("feature"):
        W = build_projection(cfg.encoder)
        ref_bits = encode_batch(W, reference.frames, cfg.encoder)
        query_bits = encode_batch(W, query.frames, cfg.encoder)

    R = len(reference)
    head, _ = train_head(cfg, ref_bits, reference.labels, R)
    rnn_model = train_rnn(cfg, reference, W, head) if cfg.filter is Filter.RNN else None

    trace = [] if cfg.filter is Filter.CANN and cfg.eval.cann_trace and out_dir else None
    with watch.time("match"):
        query_scores = classifier.forward_batch(head, query_bits)
        _check_finite("query scores", query_scores)
        matches, D = match_queries(cfg, query_scores, ref_bits, query_bits, rnn_model, trace)

    records = evaluation.records_from_matches(matches, gt)
    curve = evaluation.pr_curve(records, cfg.tolerance)
    area = evaluation.auc(curve)
    timing = evaluation.timing_report(watch["feature"], watch["match"], len(query))

    summary = {"method": _method_name(cfg.filter), "auc": area}
    if cfg.filter in MODEL_KIND:
        fp = classifier.count_footprint(MODEL_KIND[cfg.filter], n=cfg.encoder.n, R=R,
                                        hidden=cfg.rnn.hidden, kernel_radius=cfg.cann.kernel_radius)
        summary.update(layers=fp.layers, params=fp.params, neurons=fp.neurons)
    if cfg.eval.timing:
        summary.update(feature_s=timing.feature_s, match_s=timing.match_s,
                       avg_query_s=timing.avg_query_s)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []

        def mark(name):
            written.append(name)
            return out / name

        write_descriptors(mark("reference.fnad"), ref_bits, cfg.encoder.m, cfg.encoder.seed)
        write_descriptors(mark("query.fnad"), query_bits, cfg.encoder.m, cfg.encoder.seed)
        classifier.save_head(mark("head.fnhd"), head)
        if rnn_model is not None:
            rnn.save_rnn(mark("rnn.fnrn"), rnn_model)
        if D is not None and cfg.eval.difference_matrix:
            seqslam.write_matrix(mark("difference.f32"), D, header)
        if trace is not None:
            cann.write_trace(mark("cann_trace.csv"), trace, header)
        evaluation.write_matches_csv(mark("matches.csv"), records, header)
        evaluation.write_pr_csv(mark("pr.csv"), curve, header)
        if cfg.eval.svg:
            evaluation.write_pr_svg(mark("pr.svg"), {summary["method"]: curve}, header)
        evaluation.write_summary_csv(mark("summary.csv"), [summary], header)
        write_timing_csv(mark("timing.csv"), summary["method"], timing, header)
        (out / "config.txt").write_text(f"# {header}\n" + cfg.dump())
        written.append("config.txt")
        (out / "manifest.txt").write_text(
            f"# {header}\n" + "".join(f"{name} {header}\n" for name in written))
    return RunResult(summary, records, curve, timing)


def _method_name(f: Filter) -> str:
    return {Filter.NONE: "FlyNet", Filter.SEQSLAM: "FlyNet+SeqSLAM",
            Filter.RNN: "FlyNet+RNN", Filter.CANN: "FlyNet+CANN"}[f]


def write_timing_csv(path, method, timing: evaluation.TimingReport, header=None) -> None:
    with open(path, "w") as fh:
        if header:
            fh.write(f"# {header}\n")
        fh.write("method,feature_s,match_s,avg_query_s\n")
        fh.write(f"{method},{timing.feature_s!r},{timing.match_s!r},{timing.avg_query_s!r}\n")


def generate_pair(cfg: PipelineConfig, out_dir) -> tuple[Traverse, Traverse]:
    ref, query = _synthetic_pair(cfg.synth)
    export_pair(ref, query, out_dir, header=f"config_hash={cfg.config_hash()}")
    return ref, query
