"""Feature extraction, similarity, and nearest ground-truth matching.

Built-in extractors are cheap, deterministic functions of the image. Neural
embeddings are supplied from outside as an embedding CSV keyed by sample id
(``sample_id,v1,...,vd``) and wrapped in :class:`ExternalExtractor`.

Similarities are oriented so that larger means more similar. Cosine scores
embeddings; PSNR scores the images themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from .codec import TraceImage, decode_arrays
from .errors import DimensionMismatch, ExtractorError

PSNR_CAP = 200.0
HIST_BINS = 64
HIST_BIN_WIDTH = 1024

SIMILARITIES = ("cosine", "psnr")


@dataclass(frozen=True, eq=False)
class Embedding:
    values: np.ndarray
    extractor_id: str

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if not np.isfinite(v).all():
            raise ExtractorError(f"{self.extractor_id}: embedding has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, Embedding):
            return NotImplemented
        return self.extractor_id == other.extractor_id and bool(
            np.array_equal(self.values, other.values))


def extract_naive(img: TraceImage) -> Embedding:
    """Per-channel row sums, laid out channel-major (length ``3 W``)."""
    sums = img.pixels.astype(np.int64).sum(axis=1)  # (W, 3)
    return Embedding(sums.T.reshape(-1).astype(np.float64), "naive")


def extract_histogram(img: TraceImage) -> Embedding:
    """Counts of decoded sizes in 64 bins of 1024 bytes, TX half then RX half."""
    sizes, dirs = decode_arrays(img)
    idx = dirs * HIST_BINS + sizes // HIST_BIN_WIDTH
    counts = np.bincount(idx, minlength=2 * HIST_BINS)
    return Embedding(counts.astype(np.float64), "histogram")


class NaiveExtractor:
    extractor_id = "naive"

    def dimension(self, width):
        return 3 * width

    def __call__(self, img, sample_id=None):
        return extract_naive(img)


class HistogramExtractor:
    extractor_id = "histogram"

    def dimension(self, width):
        return 2 * HIST_BINS

    def __call__(self, img, sample_id=None):
        return extract_histogram(img)


class ExternalExtractor:
    """Looks embeddings up by sample id instead of computing them."""

    def __init__(self, table: Mapping[str, Embedding], extractor_id="external"):
        self.table = dict(table)
        self.extractor_id = extractor_id
        dims = {e.dim for e in self.table.values()}
        self._dim = dims.pop() if dims else None

    def dimension(self, width):
        return self._dim

    def __call__(self, img, sample_id=None):
        if sample_id is None:
            raise ExtractorError(f"{self.extractor_id}: a sample id is required")
        try:
            return self.table[sample_id]
        except KeyError:
            raise ExtractorError(
                f"{self.extractor_id}: no embedding for sample {sample_id!r}") from None


def get_extractor(name: str):
    """Resolve ``naive``, ``histogram`` or ``external:PATH``."""
    if name == "naive":
        return NaiveExtractor()
    if name == "histogram":
        return HistogramExtractor()
    if name.startswith("external:"):
        path = name[len("external:"):]
        return ExternalExtractor(load_external_embeddings(path), extractor_id=name)
    raise ExtractorError(f"unknown extractor {name!r}")


def parse_embeddings_text(text: str, extractor_id="external") -> Dict[str, Embedding]:
    out: Dict[str, Embedding] = {}
    dim = None
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        sample_id, *fields = line.split(",")
        if not sample_id or not fields:
            raise ExtractorError(f"line {lineno}: expected sample_id,v1,...,vd")
        if sample_id in out:
            raise ExtractorError(f"line {lineno}: duplicate sample id {sample_id!r}")
        try:
            vals = [float(f) for f in fields]
        except ValueError:
            raise ExtractorError(f"line {lineno}: non-numeric value") from None
        if not all(math.isfinite(v) for v in vals):
            raise ExtractorError(f"line {lineno}: non-finite value")
        if dim is None:
            dim = len(vals)
        elif len(vals) != dim:
            raise ExtractorError(
                f"line {lineno}: dimension {len(vals)} differs from {dim}")
        out[sample_id] = Embedding(np.array(vals), extractor_id)
    return out


def load_external_embeddings(path) -> Dict[str, Embedding]:
    with open(path, encoding="utf-8") as fh:
        return parse_embeddings_text(fh.read(), extractor_id=f"external:{path}")


def format_embeddings_text(items: Iterable[Tuple[str, Embedding]]) -> str:
    lines = [",".join([sid] + [repr(float(v)) for v in emb.values]) for sid, emb in items]
    return "".join(line + "\n" for line in lines)


def cosine_similarity(a, b) -> float:
    a = a.values if isinstance(a, Embedding) else np.asarray(a, dtype=np.float64)
    b = b.values if isinstance(b, Embedding) else np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"embedding dimensions differ: {a.size} vs {b.size}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ExtractorError("cosine similarity of a zero-norm vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def _psnr_from_mse(mse):
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(255.0 ** 2 / mse))


def psnr(x: TraceImage, y: TraceImage) -> float:
    """PSNR in dB over all channels; identical images give ``PSNR_CAP``."""
    if x.pixels.shape != y.pixels.shape:
        raise DimensionMismatch(f"image widths differ: {x.width} vs {y.width}")
    diff = x.pixels.astype(np.int64) - y.pixels.astype(np.int64)
    return _psnr_from_mse(float(np.mean(diff * diff)))


def similarity_to_distance(similarity_id: str, score: float) -> float:
    """Distance used by the dispersion scale: ``1 - cos`` or ``cap - psnr``."""
    if similarity_id == "cosine":
        return 1.0 - score
    if similarity_id == "psnr":
        return PSNR_CAP - score
    raise ExtractorError(f"unknown similarity {similarity_id!r}")


@dataclass(frozen=True)
class CorpusEntry:
    sample_id: str
    image: TraceImage
    embedding: Embedding


@dataclass(frozen=True)
class MatchResult:
    sample_id: str
    similarity_score: float
    distance: float
    similarity_id: str
    real_image: TraceImage


class CorpusIndex:
    """Immutable set of real samples with precomputed embeddings.

    Entries are kept sorted by sample id, so the first maximum found during a
    scan is also the lexicographically smallest id.
    """

    def __init__(self, entries: Sequence[CorpusEntry], extractor_id: str, similarity_id: str):
        if not entries:
            raise ExtractorError("corpus is empty")
        if similarity_id not in SIMILARITIES:
            raise ExtractorError(f"unknown similarity {similarity_id!r}")
        ids = [e.sample_id for e in entries]
        if len(set(ids)) != len(ids):
            dup = sorted(i for i in set(ids) if ids.count(i) > 1)[0]
            raise ExtractorError(f"duplicate sample id {dup!r}")
        dims = {e.embedding.dim for e in entries}
        if len(dims) != 1:
            raise ExtractorError(f"corpus embeddings have mixed dimensions {sorted(dims)}")
        widths = {e.image.width for e in entries}
        if len(widths) != 1:
            raise DimensionMismatch(f"corpus images have mixed widths {sorted(widths)}")
        for e in entries:
            if e.embedding.extractor_id != extractor_id:
                raise ExtractorError(
                    f"{e.sample_id}: embedding from {e.embedding.extractor_id!r}, "
                    f"index uses {extractor_id!r}")
        self.entries = tuple(sorted(entries, key=lambda e: e.sample_id))
        self.extractor_id = extractor_id
        self.similarity_id = similarity_id
        self.width = widths.pop()
        self._matrix = np.stack([e.embedding.values for e in self.entries])
        self._matrix.setflags(write=False)
        self._norms = np.linalg.norm(self._matrix, axis=1)

    def __len__(self):
        return len(self.entries)

    @property
    def ids(self):
        return [e.sample_id for e in self.entries]

    @property
    def embeddings(self) -> np.ndarray:
        return self._matrix

    def scores(self, img: TraceImage, query: Optional[Embedding] = None) -> np.ndarray:
        """Similarity of the query against every entry, in entry order."""
        if img.width != self.width:
            raise DimensionMismatch(f"query width {img.width} != corpus width {self.width}")
        if self.similarity_id == "psnr":
            return np.array([psnr(img, e.image) for e in self.entries])
        q = query.values
        if q.size != self._matrix.shape[1]:
            raise DimensionMismatch(
                f"query dimension {q.size} != corpus dimension {self._matrix.shape[1]}")
        nq = np.linalg.norm(q)
        if nq == 0 or np.any(self._norms == 0):
            raise ExtractorError("cosine similarity of a zero-norm vector")
        return np.clip(self._matrix @ q / (self._norms * nq), -1.0, 1.0)


def build_corpus_index(images: Iterable[Tuple[str, TraceImage]], extractor,
                       similarity: str = "cosine") -> CorpusIndex:
    images = list(images)
    if not images:
        raise ExtractorError("corpus is empty")
    entries = [CorpusEntry(sid, img, extractor(img, sample_id=sid)) for sid, img in images]
    return CorpusIndex(entries, extractor.extractor_id, similarity)


def match_ground_truth(img: TraceImage, index: CorpusIndex, extractor=None,
                       query_id: Optional[str] = None) -> MatchResult:
    """Most similar corpus entry; ties go to the smallest sample id."""
    query = None
    if index.similarity_id == "cosine":
        if extractor is None:
            raise ExtractorError("cosine matching needs the index's extractor")
    if extractor is not None:
        if extractor.extractor_id != index.extractor_id:
            raise ExtractorError(
                f"extractor {extractor.extractor_id!r} does not match index "
                f"extractor {index.extractor_id!r}")
        if index.similarity_id == "cosine":
            query = extractor(img, sample_id=query_id)
    scores = index.scores(img, query)
    best = int(np.argmax(scores))
    entry = index.entries[best]
    score = float(scores[best])
    return MatchResult(entry.sample_id, score,
                       similarity_to_distance(index.similarity_id, score),
                       index.similarity_id, entry.image)
