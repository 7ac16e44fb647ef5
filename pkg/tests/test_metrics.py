import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from tlpsynth import (ConfigError, DimensionMismatch, Embedding, MetricWeights, TlpError, Trace,
                      TraceImage, encode_trace, frechet_embedding_distance, harmonic_mean,
                      package_error, segment_aggregate, traffic_error)
from tlpsynth.metrics import MetricRow, format_metric_rows

from conftest import random_image
import oracles


def _single(size, direction, row, width=16):
    px = np.zeros((width, width, 3), np.uint8)
    px[row, 0] = (size // 256, size % 256, 255 * direction)
    return TraceImage(px)


def test_segment_aggregate_examples():
    assert not segment_aggregate(TraceImage.blank(16), 16).any()
    img = encode_trace(Trace([300], [0]), 16)
    assert segment_aggregate(img, 16, "count")[0].tolist() == [1, 0]
    assert segment_aggregate(img, 16, "bytes")[0].tolist() == [300, 0]
    # W=8, m=4: rows 2 and 3 share band 1
    a = segment_aggregate(_single(5, 1, 3, 8), 4)
    assert a[1].tolist() == [0, 1] and a.sum() == 1
    with pytest.raises(ConfigError):
        segment_aggregate(TraceImage.blank(10), 4)


def test_segment_aggregate_matches_oracle(rng):
    img = random_image(rng, 16, 0.6)
    for q in ("count", "bytes"):
        D = oracles.aggregates(img, 4, q)
        assert segment_aggregate(img, 4, q).T.tolist() == D


def test_package_error_examples(rng):
    img = random_image(rng, 16, 0.5)
    assert package_error([img], [img]) == 0
    base = TraceImage.blank(16)
    assert package_error([_single(7, 0, 3)], [base]) == 2
    w = MetricWeights(w_seg=[1] * 3 + [5] + [1] * 12, w_t=3)
    assert package_error([_single(7, 0, 3)], [base], w) == 8


def test_traffic_error_examples(rng):
    img = random_image(rng, 16, 0.5)
    assert traffic_error([img], [img]) == 0
    assert traffic_error([_single(100, 1, 0)], [TraceImage.blank(16)]) == 300
    # the w_t terms apply to both directions' segment deltas
    assert traffic_error([_single(100, 0, 0)], [TraceImage.blank(16)]) == 300


def _weights(rng, m):
    return MetricWeights(segments=m, w_seg=rng.uniform(0.1, 3, m), w_t=float(rng.uniform(0.1, 3)),
                         w_seg_dir=rng.uniform(0.1, 3, (m, 2)), w_total_dir=rng.uniform(0.1, 3, 2))


def test_errors_match_oracle(rng):
    for _ in range(20):
        w, m, t = 8, int(rng.choice([1, 2, 4, 8])), int(rng.integers(1, 4))
        synth = [random_image(rng, w, rng.random()) for _ in range(t)]
        real = [random_image(rng, w, rng.random()) for _ in range(t)]
        wt = _weights(rng, m)
        pe = oracles.package_error(synth, real, m, wt.w_seg.tolist(), wt.w_t)
        te = oracles.traffic_error(synth, real, m, wt.w_seg_dir.tolist(), wt.w_t,
                                   wt.w_total_dir.tolist())
        assert package_error(synth, real, wt) == pytest.approx(pe, rel=1e-12)
        assert traffic_error(synth, real, wt) == pytest.approx(te, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10))
def test_errors_scale_linearly_with_weights(seed, k):
    rng = np.random.default_rng(seed)
    s, r = random_image(rng, 8, 0.5), random_image(rng, 8, 0.5)
    base = MetricWeights(segments=4)
    scaled = MetricWeights(segments=4, w_seg=[k] * 4, w_t=k, w_seg_dir=[[k, k]] * 4,
                           w_total_dir=(k, k))
    for fn in (package_error, traffic_error):
        assert fn([s], [r], scaled) == pytest.approx(k * fn([s], [r], base), rel=1e-12)
        assert fn([s], [r], base) >= 0


def test_error_preconditions(rng):
    a = random_image(rng, 16)
    with pytest.raises(DimensionMismatch):
        package_error([a, a], [a])
    with pytest.raises(DimensionMismatch):
        traffic_error([a], [random_image(rng, 8)])
    with pytest.raises(ConfigError):
        MetricWeights(w_t=0)
    with pytest.raises(ConfigError):
        MetricWeights(segments=4, w_seg=[1, 1])


def test_harmonic_mean():
    assert harmonic_mean([1, 4, 4]) == pytest.approx(2.0)
    assert harmonic_mean([0, 5]) == 0
    with pytest.raises(TlpError):
        harmonic_mean([])


def _embs(rows):
    return [Embedding(np.atleast_1d(r), "t") for r in rows]


def test_frechet_examples(rng):
    x = rng.normal(size=(20, 5))
    assert frechet_embedding_distance(_embs(x), _embs(x)) <= 1e-9
    assert frechet_embedding_distance(_embs(x), _embs(x), "full") <= 1e-9
    v = np.array([1.0, -2.0, 0.5, 0, 3])
    assert frechet_embedding_distance(_embs(x), _embs(x + v)) == pytest.approx(v @ v)
    a, b = _embs([[0.0], [2.0]]), _embs([[1.0], [3.0]])
    assert frechet_embedding_distance(a, b) == pytest.approx(1.0)
    assert frechet_embedding_distance(a, b, "full") == pytest.approx(1.0)


def test_frechet_full_matches_sqrtm(rng):
    a, b = rng.normal(size=(30, 4)), rng.normal(1.0, 2.0, size=(25, 4)) @ rng.normal(size=(4, 4))
    ca, cb = np.cov(a, rowvar=False, bias=True), np.cov(b, rowvar=False, bias=True)
    mu = a.mean(0) - b.mean(0)
    expected = mu @ mu + np.trace(ca + cb - 2 * np.real(scipy.linalg.sqrtm(ca @ cb)))
    assert frechet_embedding_distance(_embs(a), _embs(b), "full") == pytest.approx(expected, rel=1e-8)


def test_frechet_diagonal_equals_full_for_diagonal_covariances():
    a = _embs([[0, 0], [2, 0], [0, 4], [2, 4]])
    b = _embs([[1, 1], [1, 3], [5, 1], [5, 3]])
    assert frechet_embedding_distance(a, b) == pytest.approx(frechet_embedding_distance(a, b, "full"))


def test_frechet_errors():
    with pytest.raises(TlpError):
        frechet_embedding_distance(_embs([[1.0]]), _embs([[1.0], [2.0]]))
    with pytest.raises(DimensionMismatch):
        frechet_embedding_distance(_embs([[1.0], [2.0]]), _embs([[1.0, 2], [2, 3]]))
    with pytest.raises(ConfigError):
        frechet_embedding_distance(_embs([[1.0], [2.0]]), _embs([[1.0], [2.0]]), "exact")


def test_metric_rows_format():
    text = format_metric_rows([MetricRow("pe", 2.0, "naive", "cosine", 1e-8, 4)])
    assert text == "metric,value,extractor,similarity,lambda,frames\npe,2.0,naive,cosine,1e-08,4\n"
    assert format_metric_rows([MetricRow("te", 0.0)], header=False) == "te,0.0,,,,0\n"
