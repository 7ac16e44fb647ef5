"""Trace-level error metrics and a Frechet distance between embedding sets.

Frames are images and segments are horizontal bands of ``W / m`` rows, so
segment deltas track traffic over logical time. Package error compares TLP
counts per (segment, direction); traffic error compares byte totals.
"""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .codec import DIR_THRESHOLD, TraceImage
from .errors import ConfigError, DimensionMismatch, TlpError

REPORT_FIELDS = ("metric", "value", "extractor", "similarity", "lambda", "frames")


@dataclass(frozen=True)
class MetricWeights:
    """Penalty weights; all default to 1.

    ``w_seg`` (length m) weighs per-segment package deltas, ``w_t`` the
    totals and wrong-direction terms, ``w_seg_dir`` (m x 2) per-segment
    traffic deltas, ``w_total_dir`` (2,) per-direction traffic totals.
    """

    segments: int = 16
    w_seg: Optional[Sequence[float]] = None
    w_t: float = 1.0
    w_seg_dir: Optional[Sequence[Sequence[float]]] = None
    w_total_dir: Sequence[float] = (1.0, 1.0)

    def __post_init__(self):
        m = self.segments
        if not isinstance(m, (int, np.integer)) or m < 1:
            raise ConfigError(f"segments must be a positive integer, got {m}")
        w_seg = np.ones(m) if self.w_seg is None else np.asarray(self.w_seg, dtype=np.float64)
        w_seg_dir = (np.ones((m, 2)) if self.w_seg_dir is None
                     else np.asarray(self.w_seg_dir, dtype=np.float64))
        w_total_dir = np.asarray(self.w_total_dir, dtype=np.float64)
        if w_seg.shape != (m,):
            raise ConfigError(f"w_seg must have length {m}")
        if w_seg_dir.shape != (m, 2):
            raise ConfigError(f"w_seg_dir must have shape ({m}, 2)")
        if w_total_dir.shape != (2,):
            raise ConfigError("w_total_dir must have length 2")
        for name, arr in (("w_seg", w_seg), ("w_seg_dir", w_seg_dir),
                          ("w_total_dir", w_total_dir), ("w_t", np.array([self.w_t]))):
            if not (np.all(arr > 0) and np.all(np.isfinite(arr))):
                raise ConfigError(f"{name} weights must be positive and finite")
        for name, arr in (("w_seg", w_seg), ("w_seg_dir", w_seg_dir), ("w_total_dir", w_total_dir)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "w_t", float(self.w_t))


def segment_aggregate(img: TraceImage, m: int = 16, quantity: str = "count") -> np.ndarray:
    """``(m, 2)`` integer matrix of per-band, per-direction counts or bytes."""
    w = img.width
    if m < 1 or w % m:
        raise ConfigError(f"segments {m} must divide image width {w}")
    if quantity not in ("count", "bytes"):
        raise ConfigError(f"quantity must be 'count' or 'bytes', got {quantity!r}")
    px = img.pixels.astype(np.int64)
    sizes = px[..., 0] * 256 + px[..., 1]
    rx = px[..., 2] >= DIR_THRESHOLD
    present = sizes > 0
    val = present.astype(np.int64) if quantity == "count" else sizes
    band = val.reshape(m, w // m, w)
    rxb = rx.reshape(m, w // m, w)
    out = np.empty((m, 2), np.int64)
    out[:, 0] = np.where(rxb, 0, band).sum(axis=(1, 2))
    out[:, 1] = np.where(rxb, band, 0).sum(axis=(1, 2))
    return out


def _deltas(synth, real, m, quantity):
    if len(synth) != len(real):
        raise DimensionMismatch(f"frame counts differ: {len(synth)} vs {len(real)}")
    out = []
    for s, r in zip(synth, real):
        if s.pixels.shape != r.pixels.shape:
            raise DimensionMismatch(f"image widths differ: {s.width} vs {r.width}")
        out.append(segment_aggregate(s, m, quantity) - segment_aggregate(r, m, quantity))
    return np.array(out, dtype=np.int64).reshape(len(out), m, 2)


def package_error(synth: Sequence[TraceImage], real: Sequence[TraceImage],
                  weights: MetricWeights = MetricWeights()) -> float:
    delta = _deltas(synth, real, weights.segments, "count")
    d = np.abs(delta).astype(np.float64)
    tot = np.abs(delta.sum(axis=1)).astype(np.float64)
    per_frame = (d.sum(axis=2) @ weights.w_seg) + weights.w_t * tot.sum(axis=1)
    return float(per_frame.sum())


def traffic_error(synth: Sequence[TraceImage], real: Sequence[TraceImage],
                  weights: MetricWeights = MetricWeights()) -> float:
    # The per-segment |delta| terms appear twice by design: once under
    # w_seg_dir and once under w_t for each direction.
    delta = _deltas(synth, real, weights.segments, "bytes")
    d = np.abs(delta).astype(np.float64)
    tot = np.abs(delta.sum(axis=1)).astype(np.float64)
    per_frame = ((d * weights.w_seg_dir).sum(axis=(1, 2))
                 + weights.w_t * d[:, :, 0].sum(axis=1)
                 + tot @ weights.w_total_dir
                 + weights.w_t * d[:, :, 1].sum(axis=1))
    return float(per_frame.sum())


def per_frame_errors(synth, real, weights=MetricWeights(), kind="pe"):
    fn = package_error if kind == "pe" else traffic_error
    return [fn([s], [r], weights) for s, r in zip(synth, real)]


def harmonic_mean(values: Sequence[float]) -> float:
    """Harmonic mean; any zero makes the mean zero."""
    if not values:
        raise TlpError("harmonic mean of an empty sequence")
    return float(statistics.harmonic_mean([float(v) for v in values]))


def _as_matrix(embs):
    rows = [e.values if hasattr(e, "values") else np.asarray(e, dtype=np.float64) for e in embs]
    if len(rows) < 2:
        raise TlpError("Frechet distance needs at least 2 embeddings per set")
    dims = {r.size for r in rows}
    if len(dims) != 1:
        raise DimensionMismatch(f"embeddings have mixed dimensions {sorted(dims)}")
    return np.stack(rows).astype(np.float64)


def _psd_sqrt(mat):
    vals, vecs = np.linalg.eigh((mat + mat.T) / 2)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def frechet_embedding_distance(set_a, set_b, mode: str = "diagonal") -> float:
    """Frechet distance between Gaussian fits of two embedding sets.

    Covariances use the population normalisation (divide by N). ``diagonal``
    keeps only per-dimension variances; ``full`` uses the whole covariance,
    evaluating ``tr sqrt(Sa Sb)`` as ``tr sqrt(sqrt(Sa) Sb sqrt(Sa))``.
    """
    a, b = _as_matrix(set_a), _as_matrix(set_b)
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"embedding dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    mu = a.mean(axis=0) - b.mean(axis=0)
    if mode == "diagonal":
        va, vb = a.var(axis=0), b.var(axis=0)
        fd = mu @ mu + np.sum(va + vb - 2.0 * np.sqrt(va * vb))
    elif mode == "full":
        ca = np.cov(a, rowvar=False, bias=True).reshape(a.shape[1], a.shape[1])
        cb = np.cov(b, rowvar=False, bias=True).reshape(b.shape[1], b.shape[1])
        sa = _psd_sqrt(ca)
        root = _psd_sqrt(sa @ cb @ sa)
        fd = mu @ mu + np.trace(ca) + np.trace(cb) - 2.0 * np.trace(root)
    else:
        raise ConfigError(f"mode must be 'diagonal' or 'full', got {mode!r}")
    return max(0.0, float(fd))


@dataclass
class MetricRow:
    metric: str
    value: float
    extractor: str = ""
    similarity: str = ""
    lam: Optional[float] = None
    frames: int = 0

    def as_list(self):
        return [self.metric, format_value(self.value), self.extractor, self.similarity,
                "" if self.lam is None else format_value(self.lam), str(self.frames)]


def format_value(v) -> str:
    return repr(float(v))


def format_metric_rows(rows: Sequence[MetricRow], header: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header:
        writer.writerow(REPORT_FIELDS)
    for row in rows:
        writer.writerow(row.as_list())
    return buf.getvalue()
