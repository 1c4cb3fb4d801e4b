"""Command-line entry point (``flynet``).

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import classifier, evaluation, rnn
from .config import Filter, load_config
from .dataset import DatasetError, ImageFormatError, SynthConfig, generate_synthetic
from .encoder import ConfigError, build_projection, encode_batch, write_descriptors
from .pipeline import (SYNTHETIC, NumericError, generate_pair, load_source, match_queries,
                       run_pipeline, train_head, train_rnn)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _config(args):
    cfg = load_config(args.config, args.seed)
    if getattr(args, "filter", None):
        cfg = replace(cfg, filter=Filter(args.filter))
    return cfg


def _header(cfg) -> str:
    return f"config_hash={cfg.config_hash()}"


def cmd_generate(args):
    cfg = _config(args)
    ref, query = generate_pair(cfg, args.out)
    print(f"wrote {len(ref)} reference and {len(query)} query frames to {args.out}")


def cmd_encode(args):
    cfg = _config(args)
    trav, _ = load_source(args.source, cfg, args.role)
    W = build_projection(cfg.encoder)
    bits = encode_batch(W, trav.frames, cfg.encoder)
    write_descriptors(args.out, bits, cfg.encoder.m, cfg.encoder.seed)
    print(f"encoded {len(bits)} frames -> {args.out}")


def cmd_train(args):
    cfg = _config(args)
    ref, _ = load_source(args.reference, cfg, "reference")
    W = build_projection(cfg.encoder)
    bits = encode_batch(W, ref.frames, cfg.encoder)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    head, history = train_head(cfg, bits, ref.labels, len(ref))
    classifier.save_head(out / "head.fnhd", head)
    print(f"head: {head.R} places, training accuracy {history.accuracy[-1]:.4f}")
    if cfg.filter is Filter.RNN:
        model = train_rnn(cfg, ref, W, head)
        rnn.save_rnn(out / "rnn.fnrn", model)
        print(f"rnn: hidden {model.H}")


def cmd_match(args):
    cfg = _config(args)
    model_dir = Path(args.model)
    head = classifier.load_head(model_dir / "head.fnhd")
    W = build_projection(cfg.encoder)
    query, gt = load_source(args.query, cfg, "query")
    query_bits = encode_batch(W, query.frames, cfg.encoder)
    ref_bits = None
    if args.reference:
        ref, _ = load_source(args.reference, cfg, "reference")
        ref_bits = encode_batch(W, ref.frames, cfg.encoder)
    rnn_model = rnn.load_rnn(model_dir / "rnn.fnrn") if cfg.filter is Filter.RNN else None
    scores = classifier.forward_batch(head, query_bits)
    matches, _ = match_queries(cfg, scores, ref_bits, query_bits, rnn_model)
    records = evaluation.records_from_matches(matches, gt)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    evaluation.write_matches_csv(out / "matches.csv", records, _header(cfg))
    print(f"matched {len(records)} queries -> {out / 'matches.csv'}")


def cmd_eval(args):
    cfg = _config(args)
    records = evaluation.read_matches_csv(args.matches)
    curve = evaluation.pr_curve(records, cfg.tolerance)
    area = evaluation.auc(curve)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    evaluation.write_pr_csv(out / "pr.csv", curve, _header(cfg))
    evaluation.write_pr_svg(out / "pr.svg", {args.method: curve}, _header(cfg))
    evaluation.write_summary_csv(out / "summary.csv", [{"method": args.method, "auc": area}], _header(cfg))
    print(f"AUC {area:.4f}")


def cmd_footprint(args):
    rows = []
    for kind in ("flynet", "flynet_rnn", "flynet_cann"):
        fp = classifier.count_footprint(kind)
        rows.append(fp)
        print(f"{kind:12s} layers={fp.layers} params={fp.params} neurons={fp.neurons} "
              f"weights={fp.weights} total_params={fp.total_params}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("model,layers,params,neurons,weights,total_params\n")
            for fp in rows:
                fh.write(f"{fp.model},{fp.layers},{fp.params},{fp.neurons},{fp.weights},{fp.total_params}\n")


def cmd_bench(args):
    """Encode `--frames` synthetic frames and time CANN matching against them."""
    cfg = _config(args)
    ref, _ = generate_synthetic(SynthConfig(num_places=args.frames, seed=cfg.synth.seed))
    W = build_projection(cfg.encoder)
    t0 = time.perf_counter()
    bits = encode_batch(W, ref.frames, cfg.encoder)
    feature_s = time.perf_counter() - t0
    head = classifier.init_head(len(ref), cfg.encoder.n, cfg.train.seed)
    t0 = time.perf_counter()
    scores = classifier.forward_batch(head, bits)
    match_queries(replace(cfg, filter=Filter.CANN), scores)
    match_s = time.perf_counter() - t0
    report = evaluation.timing_report(feature_s, match_s, len(ref))
    print(f"feature_s={report.feature_s:.3f} match_s={report.match_s:.3f} "
          f"avg_query_s={report.avg_query_s:.5f} ({1.0 / max(report.avg_query_s, 1e-12):.1f} fps)")


def cmd_run(args):
    cfg = _config(args)
    result = run_pipeline(cfg, args.reference, args.query, args.out)
    print(f"{result.summary['method']}: AUC {result.summary['auc']:.4f} -> {args.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flynet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int, help="override the global seed")
        p.set_defaults(func=func)
        return p

    p = add("generate", cmd_generate, "write a synthetic reference/query pair as PGM directories")
    p.add_argument("--out", required=True)

    p = add("encode", cmd_encode, "encode a traverse to an FNAD descriptor file")
    p.add_argument("--source", required=True, help="image directory or synthetic:reference|query")
    p.add_argument("--role", default="reference", choices=["reference", "query"])
    p.add_argument("--out", required=True)

    p = add("train", cmd_train, "train the classifier head (and the RNN for --filter rnn)")
    p.add_argument("--reference", default=SYNTHETIC)
    p.add_argument("--filter", choices=[f.value for f in Filter])
    p.add_argument("--out", required=True)

    p = add("match", cmd_match, "match a query traverse with a trained model")
    p.add_argument("--model", required=True, help="directory written by `train`")
    p.add_argument("--reference", help="needed for seqslam.source = hamming")
    p.add_argument("--query", default=SYNTHETIC)
    p.add_argument("--filter", choices=[f.value for f in Filter])
    p.add_argument("--out", required=True)

    p = add("eval", cmd_eval, "PR curve and AUC from a matches.csv")
    p.add_argument("--matches", required=True)
    p.add_argument("--method", default="FlyNet")
    p.add_argument("--out", required=True)

    p = sub.add_parser("footprint", help="layer/parameter/neuron counts")
    p.add_argument("--out")
    p.set_defaults(func=cmd_footprint)

    p = add("bench", cmd_bench, "time encoding and CANN matching")
    p.add_argument("--frames", type=int, default=1000)

    p = add("run", cmd_run, "end-to-end pipeline")
    p.add_argument("--reference", default=SYNTHETIC)
    p.add_argument("--query", default=SYNTHETIC)
    p.add_argument("--filter", choices=[f.value for f in Filter])
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        # non-finite results are caught by the pipeline's own checks
        with np.errstate(over="ignore", invalid="ignore"):
            args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetError, ImageFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
