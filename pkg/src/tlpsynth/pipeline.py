"""End-to-end calibration pipeline.

Stage 0 ingests generated content (trace CSV or PNG), stage 1 normalises it
to a trace image, stage 2 matches it against the real corpus and calibrates
it, stage 3 decodes the result. Each input is isolated: a failure is
recorded in the report and the batch carries on.

Configuration files are ``key = value`` lines with ``#`` comments; see
:data:`CONFIG_KEYS` for the accepted keys.
"""

from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

from .calibration import CalibrationParams, calibrate_against
from .codec import TraceImage, decode_image, encode_trace, normalize_image, read_png, write_png
from .errors import ConfigError, DimensionMismatch, TlpError
from .extractors import (ExternalExtractor, NaiveExtractor, build_corpus_index, get_extractor,
                         match_ground_truth)
from .metrics import (MetricWeights, format_value, frechet_embedding_distance, harmonic_mean,
                      package_error, traffic_error)
from .trace_model import DEFAULT_WIDTH, read_trace, write_trace

log = logging.getLogger(__name__)

REPORT_COLUMNS = ("input", "match_id", "similarity_score", "replaced_pixels",
                  "metric", "value", "extractor", "similarity", "lambda", "frames", "status")

CONFIG_KEYS = ("inputs", "input_kind", "corpus", "out", "report", "width", "alpha", "beta",
               "radius", "lambda", "epsilon", "variant", "score_reduction", "extractor",
               "similarity", "segments", "fd_mode", "workers")


def parse_number_list(text: str) -> tuple:
    """Comma-separated decimals or rationals such as ``1/12,1/6,1/2``."""
    try:
        return tuple(float(Fraction(tok.strip())) for tok in text.split(",") if tok.strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"cannot parse number list {text!r}") from None


def parse_number(text: str) -> float:
    vals = parse_number_list(text)
    if len(vals) != 1:
        raise ConfigError(f"expected one number, got {text!r}")
    return vals[0]


def parse_config_text(text: str) -> Dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        out[key] = value.strip()
    return out


def read_config(path) -> Dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())


@dataclass(frozen=True)
class PipelineConfig:
    input_paths: Sequence[str]
    corpus_dir: str
    output_dir: str
    input_kind: str = "auto"
    width: int = DEFAULT_WIDTH
    calibration: CalibrationParams = CalibrationParams()
    extractor_id: str = "naive"
    similarity_id: str = "cosine"
    weights: MetricWeights = MetricWeights()
    report_path: Optional[str] = None
    fd_mode: str = "diagonal"
    workers: int = 1

    def __post_init__(self):
        if self.input_kind not in ("auto", "text", "image"):
            raise ConfigError(f"input_kind must be text, image or auto, got {self.input_kind!r}")
        if self.width < 1:
            raise ConfigError("width must be positive")
        if self.width % self.weights.segments:
            raise ConfigError(
                f"segments {self.weights.segments} must divide width {self.width}")
        if self.workers < 1:
            raise ConfigError("workers must be positive")

    @property
    def report(self) -> str:
        return self.report_path or os.path.join(self.output_dir, "report.csv")

    def resolved(self) -> List[tuple]:
        c = self.calibration
        return [
            ("inputs", ",".join(self.input_paths)),
            ("input_kind", self.input_kind),
            ("corpus", self.corpus_dir),
            ("out", self.output_dir),
            ("report", self.report),
            ("width", str(self.width)),
            ("alpha", ",".join(format_value(a) for a in c.alpha)),
            ("beta", ",".join(format_value(b) for b in c.beta)),
            ("radius", str(c.radius)),
            ("lambda", format_value(c.lam)),
            ("epsilon", format_value(c.epsilon)),
            ("variant", c.variant),
            ("score_reduction", c.score_reduction),
            ("extractor", self.extractor_id),
            ("similarity", self.similarity_id),
            ("segments", str(self.weights.segments)),
            ("fd_mode", self.fd_mode),
            ("workers", str(self.workers)),
        ]


def config_from_mapping(values: Mapping[str, str]) -> PipelineConfig:
    """Build a config from string values (config file merged with CLI flags)."""
    v = dict(values)
    for key in ("inputs", "corpus", "out"):
        if not v.get(key):
            raise ConfigError(f"missing required setting {key!r}")
    cal = {}
    if "alpha" in v:
        cal["alpha"] = parse_number_list(v["alpha"])
    if "beta" in v:
        cal["beta"] = parse_number_list(v["beta"])
    try:
        if "radius" in v:
            cal["radius"] = int(v["radius"])
        width = int(v.get("width", DEFAULT_WIDTH))
        segments = int(v.get("segments", 16))
        workers = int(v.get("workers", 1))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if "lambda" in v:
        cal["lam"] = parse_number(v["lambda"])
    if "epsilon" in v:
        cal["epsilon"] = parse_number(v["epsilon"])
    for key in ("variant", "score_reduction"):
        if key in v:
            cal[key] = v[key]
    return PipelineConfig(
        input_paths=tuple(p.strip() for p in v["inputs"].split(",") if p.strip()),
        corpus_dir=v["corpus"],
        output_dir=v["out"],
        input_kind=v.get("input_kind", "auto"),
        width=width,
        calibration=CalibrationParams(**cal),
        extractor_id=v.get("extractor", "naive"),
        similarity_id=v.get("similarity", "cosine"),
        weights=MetricWeights(segments=segments),
        report_path=v.get("report") or None,
        fd_mode=v.get("fd_mode", "diagonal"),
        workers=workers,
    )


def load_image_or_trace(path, width: int, kind: str = "auto") -> TraceImage:
    """Stage 0: a trace CSV is encoded, a PNG is read as is."""
    if kind == "auto":
        kind = "text" if str(path).lower().endswith((".csv", ".txt")) else "image"
    if kind == "text":
        width = width or DEFAULT_WIDTH
        return encode_trace(read_trace(path, width=width), width)
    return read_png(path, width=width)


def load_corpus(corpus_dir, width: int) -> List[tuple]:
    """``(sample_id, image)`` for every PNG or trace CSV in the directory, sorted by name."""
    root = Path(corpus_dir)
    if not root.is_dir():
        raise ConfigError(f"corpus directory {corpus_dir} does not exist")
    files = sorted(p for p in root.iterdir()
                   if p.is_file() and p.suffix.lower() in (".png", ".csv"))
    if not files:
        raise ConfigError(f"corpus directory {corpus_dir} has no .png or .csv samples")
    out = []
    for p in files:
        img = load_image_or_trace(p, None if p.suffix.lower() == ".png" else width)
        if img.width != width:
            raise DimensionMismatch(f"{p}: corpus image width {img.width} != {width}")
        out.append((p.stem, img))
    ids = [sid for sid, _ in out]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"corpus directory {corpus_dir} has duplicate sample ids")
    return out


@dataclass
class InputResult:
    input: str
    status: str = "ok"
    match_id: str = ""
    similarity: Optional[float] = None
    replaced: Optional[int] = None
    metrics: Dict[str, float] = field(default_factory=dict)
    raw_image: Optional[TraceImage] = None
    calibrated: Optional[TraceImage] = None

    @property
    def ok(self):
        return self.status == "ok"


@dataclass
class PipelineReport:
    config: PipelineConfig
    results: List[InputResult]
    batch: Dict[str, float]
    fd_extractor: str

    def render(self) -> str:
        cfg = self.config
        buf = io.StringIO()
        for key, value in cfg.resolved():
            buf.write(f"# {key} = {value}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        lam = format_value(cfg.calibration.lam)
        for r in self.results:
            if not r.ok:
                writer.writerow([r.input, "", "", "", "", "", cfg.extractor_id,
                                 cfg.similarity_id, lam, "1", r.status])
                continue
            for metric, value in r.metrics.items():
                writer.writerow([r.input, r.match_id, format_value(r.similarity), str(r.replaced),
                                 metric, format_value(value), cfg.extractor_id,
                                 cfg.similarity_id, lam, "1", "ok"])
        n_ok = sum(r.ok for r in self.results)
        for metric, value in self.batch.items():
            extractor = f"FD({self.fd_extractor})" if metric.startswith("fd") else cfg.extractor_id
            writer.writerow(["*", "", "", "", metric, format_value(value), extractor,
                             cfg.similarity_id, lam, str(n_ok), "ok"])
        return buf.getvalue()

    def metric(self, name: str) -> float:
        return self.batch[name]


def _process(k, path, cfg: PipelineConfig, index, extractor) -> InputResult:
    res = InputResult(input=path)
    try:
        raw = load_image_or_trace(path, cfg.width, cfg.input_kind)
        gen = normalize_image(raw, cfg.width)
        match = match_ground_truth(gen, index, extractor, query_id=Path(path).stem)
        outcome = calibrate_against(gen, match.real_image, match.distance, cfg.calibration)
        trace = decode_image(outcome.image, source_id=path)

        stem = f"{k:04d}-{Path(path).stem}"
        write_png(os.path.join(cfg.output_dir, stem + ".calibrated.png"), outcome.image)
        write_trace(os.path.join(cfg.output_dir, stem + ".trace.csv"), trace)

        real = [match.real_image]
        res.match_id = match.sample_id
        res.similarity = match.similarity_score
        res.replaced = outcome.replaced
        res.metrics = {
            "pe_raw": package_error([gen], real, cfg.weights),
            "te_raw": traffic_error([gen], real, cfg.weights),
            "pe": package_error([outcome.image], real, cfg.weights),
            "te": traffic_error([outcome.image], real, cfg.weights),
        }
        res.raw_image = gen
        res.calibrated = outcome.image
    except (TlpError, OSError) as exc:
        log.warning("input %s failed: %s", path, exc)
        res.status = f"error: {exc}"
    return res


def run_pipeline(cfg: PipelineConfig) -> PipelineReport:
    """Run every input through stages 0-3 and write outputs plus the report."""
    corpus = load_corpus(cfg.corpus_dir, cfg.width)
    extractor = get_extractor(cfg.extractor_id)
    index = build_corpus_index(corpus, extractor, cfg.similarity_id)
    os.makedirs(cfg.output_dir, exist_ok=True)

    jobs = list(enumerate(cfg.input_paths))
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(lambda kp: _process(kp[0], kp[1], cfg, index, extractor), jobs))
    else:
        results = [_process(k, p, cfg, index, extractor) for k, p in jobs]

    ok = [r for r in results if r.ok]
    batch: Dict[str, float] = {}
    if ok:
        for name in ("pe_raw", "te_raw", "pe", "te"):
            batch[name + "_hmean"] = harmonic_mean([r.metrics[name] for r in ok])

    # FD needs image-computable embeddings for calibrated outputs.
    fd_ext = NaiveExtractor() if isinstance(extractor, ExternalExtractor) else extractor
    if len(ok) >= 2 and len(corpus) >= 2:
        corpus_emb = [fd_ext(img) for _, img in corpus]
        batch["fd_raw"] = frechet_embedding_distance(
            [fd_ext(r.raw_image) for r in ok], corpus_emb, cfg.fd_mode)
        batch["fd"] = frechet_embedding_distance(
            [fd_ext(r.calibrated) for r in ok], corpus_emb, cfg.fd_mode)

    report = PipelineReport(cfg, results, batch, fd_ext.extractor_id)
    report_dir = os.path.dirname(cfg.report)
    if report_dir:
        os.makedirs(report_dir, exist_ok=True)
    with open(cfg.report, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.render())
    return report
