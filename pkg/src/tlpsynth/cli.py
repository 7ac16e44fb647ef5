"""Command line interface.

Exit status is 0 on success, 1 on a domain error, 2 on a usage error.
Diagnostics go to stderr; data goes to stdout or to the named files.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .calibration import CalibrationParams, calibrate_against
from .codec import decode_image, encode_trace, normalize_image, read_png, write_png
from .errors import TlpError
from .extractors import build_corpus_index, format_embeddings_text, get_extractor, match_ground_truth
from .generators import NicWorkloadConfig, make_corpus, nic_workload_trace, random_trace
from .metrics import (MetricRow, MetricWeights, format_metric_rows, format_value,
                      frechet_embedding_distance, package_error, traffic_error)
from .pipeline import (config_from_mapping, load_corpus, load_image_or_trace, parse_number,
                       parse_number_list, read_config, run_pipeline)
from .trace_model import DEFAULT_WIDTH, read_trace, write_trace, write_trace_text

log = logging.getLogger("tlpsynth")


def _calibration_flags(p, defaults=True):
    d = CalibrationParams() if defaults else None
    p.add_argument("--alpha", default=None if d is None else ",".join(map(repr, d.alpha)),
                   help="pixel distance channel weights a1,a2,a3")
    p.add_argument("--beta", default=None if d is None else "1/12,1/6,1/2,1/6,1/12",
                   help="neighbourhood weights, rationals allowed")
    p.add_argument("--radius", type=int, default=None if d is None else d.radius)
    p.add_argument("--lambda", dest="lam", default=None if d is None else repr(d.lam),
                   help="acceptance threshold in [0, 1]")
    p.add_argument("--epsilon", default=None if d is None else repr(d.epsilon))
    p.add_argument("--variant", choices=("literal", "per_pixel"),
                   default=None if d is None else d.variant)
    p.add_argument("--score-reduction", dest="score_reduction", choices=("mean_abs", "max_abs"),
                   default=None if d is None else d.score_reduction)


def _match_flags(p, defaults=True):
    p.add_argument("--extractor", default="naive" if defaults else None,
                   help="naive | histogram | external:PATH")
    p.add_argument("--similarity", choices=("cosine", "psnr"),
                   default="cosine" if defaults else None)


def _width_flag(p, default=DEFAULT_WIDTH):
    p.add_argument("--width", type=int, default=default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tlpsynth",
                                     description="Calibrate generated PCIe TLP traces.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="trace CSV -> PNG")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    _width_flag(p)

    p = sub.add_parser("decode", help="PNG -> trace CSV (stdout if --out omitted)")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out")
    _width_flag(p, None)

    p = sub.add_parser("normalize", help="raw raster (PNG or .npy) -> normalised PNG")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    _width_flag(p, None)

    p = sub.add_parser("generate", help="random or NIC workload traces")
    p.add_argument("--kind", choices=("random", "nic"), default="nic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--length", type=int, help="records for --kind random (default W*W)")
    p.add_argument("--transfers", type=int, default=1000, help="transfers for --kind nic")
    p.add_argument("--images", type=int, help="write a corpus of N PNGs into --out DIR")
    p.add_argument("--rx-fraction", dest="rx_fraction", type=float, default=0.5)
    p.add_argument("--out", required=True, help="file (.csv or .png) or directory with --images")
    _width_flag(p)

    p = sub.add_parser("index", help="embed a corpus directory into an embedding CSV")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", help="embedding CSV (stdout if omitted)")
    _match_flags(p)
    _width_flag(p)

    p = sub.add_parser("match", help="nearest corpus sample for a generated image")
    p.add_argument("--gen", required=True)
    p.add_argument("--corpus", required=True)
    _match_flags(p)
    _width_flag(p)

    p = sub.add_parser("calibrate", help="calibrate one generated image")
    p.add_argument("--gen", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--corpus")
    g.add_argument("--real", help="use this real image instead of matching")
    p.add_argument("--out", required=True)
    _calibration_flags(p)
    _match_flags(p)
    _width_flag(p)

    p = sub.add_parser("metrics", help="PE, TE or FD between image sets")
    p.add_argument("--synth", nargs="+", required=True)
    p.add_argument("--real", nargs="+", required=True)
    p.add_argument("--kind", choices=("pe", "te", "fd"), required=True)
    p.add_argument("--segments", type=int, default=16)
    p.add_argument("--extractor", default="naive", help="extractor for --kind fd")
    p.add_argument("--fd-mode", dest="fd_mode", choices=("diagonal", "full"), default="diagonal")
    p.add_argument("--header", action="store_true", help="print the CSV header row first")
    _width_flag(p, None)

    p = sub.add_parser("pipeline", help="run the full calibration pipeline")
    p.add_argument("inputs", nargs="*", help="generated inputs (overrides config 'inputs')")
    p.add_argument("--config")
    p.add_argument("--corpus")
    p.add_argument("--out")
    p.add_argument("--report")
    p.add_argument("--input-kind", dest="input_kind", choices=("auto", "text", "image"))
    p.add_argument("--segments", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--fd-mode", dest="fd_mode", choices=("diagonal", "full"))
    _calibration_flags(p, defaults=False)
    _match_flags(p, defaults=False)
    _width_flag(p, None)
    return parser


def _params(args) -> CalibrationParams:
    return CalibrationParams(alpha=parse_number_list(args.alpha),
                             beta=parse_number_list(args.beta),
                             radius=args.radius, lam=parse_number(args.lam),
                             epsilon=parse_number(args.epsilon), variant=args.variant,
                             score_reduction=args.score_reduction)


def cmd_encode(args):
    write_png(args.out, encode_trace(read_trace(args.inp, width=args.width), args.width))


def cmd_decode(args):
    trace = decode_image(read_png(args.inp, width=args.width))
    if args.out:
        write_trace(args.out, trace)
    else:
        sys.stdout.write(write_trace_text(trace))


def cmd_normalize(args):
    if args.inp.lower().endswith(".npy"):
        raw = np.load(args.inp, allow_pickle=False)
    else:
        raw = read_png(args.inp)
    write_png(args.out, normalize_image(raw, args.width))


def cmd_generate(args):
    w = args.width
    if args.kind == "nic":
        cfg = NicWorkloadConfig(seed=args.seed, n_transfers=args.transfers,
                                rx_fraction=args.rx_fraction)
    if args.images is not None:
        os.makedirs(args.out, exist_ok=True)
        if args.kind == "nic":
            items = make_corpus(cfg, args.images, w)
        else:
            items = [(f"random-{k:04d}", encode_trace(random_trace(args.seed + k, w * w, w), w))
                     for k in range(args.images)]
        for sid, img in items:
            write_png(os.path.join(args.out, sid + ".png"), img)
        return
    if args.kind == "nic":
        trace = nic_workload_trace(cfg, w)
    else:
        trace = random_trace(args.seed, w * w if args.length is None else args.length, w)
    if args.out.lower().endswith(".png"):
        write_png(args.out, encode_trace(trace, w))
    else:
        write_trace(args.out, trace)


def cmd_index(args):
    extractor = get_extractor(args.extractor)
    index = build_corpus_index(load_corpus(args.corpus, args.width), extractor, args.similarity)
    text = format_embeddings_text((e.sample_id, e.embedding) for e in index.entries)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        log.info("indexed %d samples", len(index))
    else:
        sys.stdout.write(text)


def _match(args, gen):
    extractor = get_extractor(args.extractor)
    index = build_corpus_index(load_corpus(args.corpus, args.width), extractor, args.similarity)
    return match_ground_truth(gen, index, extractor, query_id=Path(args.gen).stem)


def cmd_match(args):
    gen = normalize_image(load_image_or_trace(args.gen, args.width), args.width)
    m = _match(args, gen)
    sys.stdout.write(f"{m.sample_id},{format_value(m.similarity_score)},{format_value(m.distance)}\n")


def cmd_calibrate(args):
    params = _params(args)
    gen = normalize_image(load_image_or_trace(args.gen, args.width), args.width)
    if args.real:
        real = normalize_image(load_image_or_trace(args.real, args.width), args.width)
        match_id, score, distance = Path(args.real).stem, float("nan"), 0.0
    else:
        m = _match(args, gen)
        real, match_id, score, distance = m.real_image, m.sample_id, m.similarity_score, m.distance
    outcome = calibrate_against(gen, real, distance, params)
    write_png(args.out, outcome.image)
    sys.stdout.write(f"{match_id},{format_value(score)},{outcome.replaced}\n")


def cmd_metrics(args):
    synth = [load_image_or_trace(p, args.width) for p in args.synth]
    real = [load_image_or_trace(p, args.width) for p in args.real]
    if args.kind == "fd":
        ext = get_extractor(args.extractor)
        a = [ext(img, sample_id=Path(p).stem) for img, p in zip(synth, args.synth)]
        b = [ext(img, sample_id=Path(p).stem) for img, p in zip(real, args.real)]
        value = frechet_embedding_distance(a, b, args.fd_mode)
        row = MetricRow("fd", value, f"FD({ext.extractor_id})", "", None, len(synth))
    else:
        weights = MetricWeights(segments=args.segments)
        fn = package_error if args.kind == "pe" else traffic_error
        row = MetricRow(args.kind, fn(synth, real, weights), "", "", None, len(synth))
    sys.stdout.write(format_metric_rows([row], header=args.header))


_PIPELINE_FLAGS = {"corpus": "corpus", "out": "out", "report": "report", "input_kind": "input_kind",
                   "segments": "segments", "workers": "workers", "fd_mode": "fd_mode",
                   "alpha": "alpha", "beta": "beta", "radius": "radius", "lam": "lambda",
                   "epsilon": "epsilon", "variant": "variant", "score_reduction": "score_reduction",
                   "extractor": "extractor", "similarity": "similarity", "width": "width"}


def cmd_pipeline(args):
    values = read_config(args.config) if args.config else {}
    for attr, key in _PIPELINE_FLAGS.items():
        v = getattr(args, attr)
        if v is not None:
            values[key] = str(v)
    if args.inputs:
        values["inputs"] = ",".join(args.inputs)
    report = run_pipeline(config_from_mapping(values))
    failed = [r for r in report.results if not r.ok]
    for r in failed:
        print(f"tlpsynth pipeline: {r.input}: {r.status}", file=sys.stderr)
    log.info("report written to %s", report.config.report)
    # the report is complete either way, but a partial batch is a domain error
    return 1 if failed else 0


COMMANDS = {"encode": cmd_encode, "decode": cmd_decode, "normalize": cmd_normalize,
            "generate": cmd_generate, "index": cmd_index, "match": cmd_match,
            "calibrate": cmd_calibrate, "metrics": cmd_metrics, "pipeline": cmd_pipeline}


def cli_dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        status = COMMANDS[args.command](args)
    except (TlpError, OSError) as exc:
        print(f"tlpsynth {args.command}: {exc}", file=sys.stderr)
        return 1
    return status or 0


def main():
    sys.exit(cli_dispatch())
