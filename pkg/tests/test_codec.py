import numpy as np
import pytest
from hypothesis import given, strategies as st
from PIL import Image

from tlpsynth import (PADDING, DimensionMismatch, ImageFormatError, TlpRecord, Trace, TraceFormatError,
                      TraceImage, decode_image, decode_pixel, encode_record, encode_trace,
                      normalize_image, read_png, write_png)

from conftest import random_image
from oracles import decode_records


@pytest.mark.parametrize("rec, px", [
    (TlpRecord(300, 1), (1, 44, 255)),
    (TlpRecord(65535, 1), (255, 255, 255)),
    (TlpRecord(4, 0), (0, 4, 0)),
])
def test_encode_record(rec, px):
    assert encode_record(rec) == px
    assert decode_pixel(px) == rec


def test_decode_pixel_padding_and_threshold():
    assert decode_pixel((0, 0, 0)) is PADDING
    assert decode_pixel((0, 4, 130)) == TlpRecord(4, 1)
    assert decode_pixel((0, 4, 127)) == TlpRecord(4, 0)
    # snapping then decoding agrees with decoding directly
    for b in range(256):
        snapped = normalize_image(np.array([[[0, 4, b]]], np.uint8)).pixels[0, 0]
        assert decode_pixel((0, 4, b)) == decode_pixel(snapped)


def test_decode_pixel_zero_size_is_padding():
    assert decode_pixel((0, 0, 255)) is PADDING


@given(st.integers(1, 65535), st.integers(0, 1))
def test_record_round_trip(nbytes, direction):
    rec = TlpRecord(nbytes, direction)
    assert decode_pixel(encode_record(rec)) == rec


def test_layout_single_record():
    img = encode_trace(Trace([300], [1]), width=2)
    assert tuple(img.pixels[0, 0]) == (1, 44, 255)
    assert (img.pixels.reshape(-1, 3)[1:] == 0).all()


def test_layout_row_major():
    t = Trace(np.arange(1, 10), np.zeros(9, int))
    img = encode_trace(t, width=3)
    assert img.pixels[1, 0, 1] == 4
    assert img.pixels[2, 2, 1] == 9


def test_full_and_empty_images():
    t = Trace(np.full(16, 7), np.ones(16, int))
    assert (encode_trace(t, 4).pixels.reshape(-1, 3)[:, 1] == 7).all()
    blank = encode_trace(Trace.empty(), 4)
    assert blank == TraceImage.blank(4)
    assert len(decode_image(blank)) == 0


def test_encode_too_long():
    with pytest.raises(TraceFormatError):
        encode_trace(Trace(np.ones(5, int), np.zeros(5, int)), width=2)


def test_decode_skips_interior_padding(rng):
    img = random_image(rng, 8, density=0.6)
    expected = decode_records(img)
    t = decode_image(img)
    assert len(t) == int((img.pixels[..., :2].astype(int).sum(axis=2) > 0).sum())
    assert list(zip(t.sizes.tolist(), t.dirs.tolist())) == expected


@st.composite
def trace_and_width(draw):
    width = draw(st.sampled_from([1, 2, 5, 8]))
    n = draw(st.integers(0, width * width))
    sizes = draw(st.lists(st.integers(1, 65535), min_size=n, max_size=n))
    dirs = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    return Trace(sizes, dirs), width


@given(trace_and_width())
def test_trace_round_trip(tw):
    t, w = tw
    assert decode_image(encode_trace(t, w)) == t


def test_round_trip_drops_timestamps():
    t = Trace([5, 6], [0, 1], [1, 2])
    assert decode_image(encode_trace(t, 2)) == t.without_timestamps()


@given(trace_and_width(), trace_and_width())
def test_encode_injective_at_fixed_length(a, b):
    (ta, w), (tb, _) = a, b
    if len(ta) != len(tb) or len(tb) > w * w:
        return
    if ta != tb:
        assert encode_trace(ta, w) != encode_trace(tb, w)


def test_normalize_snapping():
    raw = np.zeros((2, 2, 3), np.uint8)
    raw[0, 0] = (1, 2, 130)
    raw[0, 1] = (1, 2, 127)
    out = normalize_image(raw)
    assert out.pixels[0, 0, 2] == 255
    assert out.pixels[0, 1, 2] == 0
    assert out.pixels[0, 0, 0] == 1 and out.pixels[0, 0, 1] == 2


def test_normalize_idempotent(rng):
    for _ in range(20):
        img = random_image(rng, 6)
        once = normalize_image(img)
        assert normalize_image(once) == once
        assert set(np.unique(once.pixels[..., 2])) <= {0, 255}


def test_normalize_float_raster():
    raw = np.full((2, 2, 3), 300.7)
    raw[0, 0] = (-3.0, 1.4, 128.2)
    out = normalize_image(raw)
    assert tuple(out.pixels[0, 0]) == (0, 1, 255)
    assert tuple(out.pixels[1, 1]) == (255, 255, 255)


def test_normalize_rejects_bad_input():
    with pytest.raises(DimensionMismatch):
        normalize_image(np.zeros((2, 3, 3), np.uint8))
    with pytest.raises(DimensionMismatch):
        normalize_image(np.zeros((2, 2, 3), np.uint8), width=4)
    with pytest.raises(ImageFormatError):
        normalize_image(np.full((2, 2, 3), 256))
    with pytest.raises(ImageFormatError):
        normalize_image(np.full((2, 2, 3), np.nan))


def test_png_round_trip(tmp_path, rng):
    img = normalize_image(random_image(rng, 16, 0.5))
    write_png(tmp_path / "a.png", img)
    write_png(tmp_path / "b.png", img)
    assert read_png(tmp_path / "a.png") == img
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()
    with pytest.raises(DimensionMismatch):
        read_png(tmp_path / "a.png", width=8)


@pytest.mark.parametrize("mode", ["RGBA", "L", "P"])
def test_png_rejects_other_colour_types(tmp_path, mode):
    Image.new(mode, (4, 4)).save(tmp_path / "x.png")
    with pytest.raises(ImageFormatError):
        read_png(tmp_path / "x.png")


def test_png_rejects_non_square_and_non_png(tmp_path):
    Image.new("RGB", (4, 3)).save(tmp_path / "x.png")
    with pytest.raises(ImageFormatError):
        read_png(tmp_path / "x.png")
    (tmp_path / "y.png").write_bytes(b"not a png at all, definitely not....")
    with pytest.raises(ImageFormatError):
        read_png(tmp_path / "y.png")


def test_png_rejects_16_bit(tmp_path):
    Image.fromarray(np.zeros((4, 4), np.uint16)).save(tmp_path / "x.png")
    with pytest.raises(ImageFormatError):
        read_png(tmp_path / "x.png")


def test_trace_image_validation():
    with pytest.raises(ImageFormatError):
        TraceImage(np.zeros((2, 2), np.uint8))
    with pytest.raises(ImageFormatError):
        TraceImage(np.full((2, 2, 3), 300))
    with pytest.raises(ImageFormatError):
        TraceImage(np.zeros((2, 2, 3), float))
