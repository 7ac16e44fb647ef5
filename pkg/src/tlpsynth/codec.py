"""Trace <-> RGB image codec.

Each record becomes one pixel ``(bytes >> 8, bytes & 0xff, dir * 255)``,
placed row-major. Unused pixels are black, which is safe because a real TLP
never carries zero bytes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from PIL import Image

from .errors import DimensionMismatch, ImageFormatError, TraceFormatError
from .trace_model import DEFAULT_WIDTH, TlpRecord, Trace

DIR_THRESHOLD = 128
PNG_COMPRESS_LEVEL = 6
# one pixel: r and g are the big-endian record size, then blue
_PIXEL = np.dtype([("size", ">u2"), ("blue", "u1")])

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


class _Padding:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "PADDING"


PADDING = _Padding()


@dataclass(frozen=True, eq=False)
class TraceImage:
    """A W x W RGB8 raster holding an encoded trace.

    ``pixels`` is a read-only ``uint8`` array of shape ``(W, W, 3)``.
    """

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] != px.shape[1] or px.shape[0] < 1:
            raise ImageFormatError(f"expected a W x W x 3 raster, got shape {px.shape}")
        if px.dtype != np.uint8:
            if not np.issubdtype(px.dtype, np.integer):
                raise ImageFormatError(f"channel values must be integers, got {px.dtype}")
            if px.size and (px.min() < 0 or px.max() > 255):
                raise ImageFormatError("channel values must lie in 0..255")
        px = np.array(px, dtype=np.uint8, copy=True)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @classmethod
    def _adopt(cls, px: np.ndarray) -> "TraceImage":
        """Wrap a freshly built uint8 raster without validating or copying it."""
        px.setflags(write=False)
        img = object.__new__(cls)
        object.__setattr__(img, "pixels", px)
        return img

    @classmethod
    def blank(cls, width: int = DEFAULT_WIDTH) -> "TraceImage":
        return cls(np.zeros((width, width, 3), np.uint8))

    @property
    def width(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, TraceImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels))

    def __repr__(self):
        return f"TraceImage(width={self.width})"


def encode_record(record: TlpRecord) -> Tuple[int, int, int]:
    high = record.bytes // 256
    return high, record.bytes - 256 * high, record.dir * 255


def decode_pixel(pixel) -> Union[TlpRecord, _Padding]:
    """Inverse of :func:`encode_record`.

    Any pixel whose size channels are both zero is padding: zero bytes is the
    reserved sentinel, so the blue channel cannot rescue it.
    """
    r, g, b = (int(c) for c in pixel)
    nbytes = 256 * r + g
    if nbytes == 0:
        return PADDING
    return TlpRecord(nbytes, 1 if b >= DIR_THRESHOLD else 0)


def encode_trace(trace: Trace, width: int = DEFAULT_WIDTH) -> TraceImage:
    n = len(trace)
    if n > width * width:
        raise TraceFormatError(
            f"trace of {n} records does not fit a {width}x{width} image")
    flat = np.zeros(width * width, _PIXEL)
    flat["size"][:n] = trace.sizes
    flat["blue"][:n] = trace.dirs * 255
    return TraceImage._adopt(flat.view(np.uint8).reshape(width, width, 3))


def decode_arrays(img: TraceImage):
    """Row-major ``(sizes, dirs)`` of the non-padding pixels."""
    px = np.ascontiguousarray(img.pixels)
    n = px.shape[0] * px.shape[1]
    # (r, g) read as one big-endian uint16 per pixel.
    sizes = np.ndarray((n,), dtype=">u2", buffer=px, strides=(3,))
    blue = np.ndarray((n,), dtype=np.uint8, buffer=px, offset=2, strides=(3,))
    keep = sizes != 0
    count = int(np.count_nonzero(keep))
    if keep[:count].all():
        # padding only at the tail, the layout encode_trace produces
        sizes, blue = sizes[:count], blue[:count]
    else:
        sizes, blue = sizes[keep], blue[keep]
    return sizes.astype(np.int64), (blue >= DIR_THRESHOLD).astype(np.int64)


def decode_image(img: TraceImage, source_id: str = "") -> Trace:
    """Scan row-major, skipping padding pixels wherever they occur."""
    # nonzero 16-bit sizes and thresholded dirs are valid records by construction
    sizes, dirs = decode_arrays(img)
    return Trace._adopt(sizes, dirs, source_id)


def normalize_image(raw, width: int = None) -> TraceImage:
    """Snap the direction channel to {0, 255}.

    ``raw`` may be a :class:`TraceImage` or an array-like ``W x W x 3``
    raster. Float rasters (as emitted by image generators) are rounded and
    clipped to 0..255 first.
    """
    px = raw.pixels if isinstance(raw, TraceImage) else np.asarray(raw)
    if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] != px.shape[1]:
        raise DimensionMismatch(f"expected a W x W x 3 raster, got shape {px.shape}")
    if width is not None and px.shape[0] != width:
        raise DimensionMismatch(f"expected width {width}, got {px.shape[0]}")
    if np.issubdtype(px.dtype, np.floating):
        if not np.isfinite(px).all():
            raise ImageFormatError("raster contains non-finite values")
        px = np.clip(np.rint(px), 0, 255)
    elif not np.issubdtype(px.dtype, np.integer) and px.dtype != np.bool_:
        raise ImageFormatError(f"unsupported raster dtype {px.dtype}")
    out = np.array(px, dtype=np.int64)
    if out.size and (out.min() < 0 or out.max() > 255):
        raise ImageFormatError("channel values must lie in 0..255")
    out[..., 2] = np.where(out[..., 2] >= DIR_THRESHOLD, 255, 0)
    return TraceImage(out.astype(np.uint8))


def write_png(path, img: TraceImage) -> None:
    """Write an 8-bit RGB PNG with fixed compression settings."""
    Image.fromarray(np.ascontiguousarray(img.pixels)).save(
        path, format="PNG", compress_level=PNG_COMPRESS_LEVEL, optimize=False)


def read_png(path, width: int = None) -> TraceImage:
    """Read an 8-bit RGB PNG (colour type 2). Other colour types are rejected."""
    with open(path, "rb") as fh:
        head = fh.read(33)
    if len(head) < 33 or head[:8] != _PNG_SIGNATURE or head[12:16] != b"IHDR":
        raise ImageFormatError(f"{path}: not a PNG file")
    w, h, depth, colour = struct.unpack(">IIBB", head[16:26])
    if depth != 8 or colour != 2:
        raise ImageFormatError(
            f"{path}: need 8-bit RGB without alpha (got depth {depth}, colour type {colour})")
    if w != h:
        raise ImageFormatError(f"{path}: image is {w}x{h}, not square")
    if width is not None and w != width:
        raise DimensionMismatch(f"{path}: expected width {width}, got {w}")
    with Image.open(path) as im:
        px = np.asarray(im.convert("RGB") if im.mode != "RGB" else im, dtype=np.uint8)
    return TraceImage(px)
