"""LBP texture coding and the homogeneity measure used as image quality.

Smooth, reflective replay media produce many identical local patterns, so
the LBP histogram piles up around its mode. The homogeneity count psi is
the mass of a bin window around that mode, optionally rescaled to a
reference pixel count so that crops of any size share one scale.
"""

import csv
import io
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .errors import (
    EmptyHistogramError,
    ImageFormatError,
    ImageTooSmallError,
    InvalidWindowError,
)

DEFAULT_HALF_WIDTH = 8
# 64x64 reference crop; see README ("Choosing the quality scale").
DEFAULT_NORMALIZE_TO = 4096
OPERANDS = ("lbp", "intensity")


@dataclass(frozen=True, eq=False)
class GrayImage:
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.size == 0:
            raise ImageFormatError(f"expected a non-empty 2-D raster, got shape {px.shape}")
        if px.dtype != np.uint8:
            if np.issubdtype(px.dtype, np.floating) and not np.all(np.isfinite(px)):
                raise ImageFormatError("non-finite pixel values")
            if px.min() < 0 or px.max() > 255:
                raise ImageFormatError("pixel values outside [0, 255]")
            px = px.astype(np.uint8)
        px = np.array(px, order="C")
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    def __eq__(self, other):
        return isinstance(other, GrayImage) and np.array_equal(self.pixels, other.pixels)

    def crop(self, x, y, w, h):
        return self.pixels[y:y + h, x:x + w]


@dataclass(frozen=True, eq=False)
class LbpImage:
    codes: np.ndarray

    @property
    def width(self):
        return self.codes.shape[1]

    @property
    def height(self):
        return self.codes.shape[0]


@dataclass(frozen=True, eq=False)
class Histogram:
    bins: np.ndarray

    def __post_init__(self):
        bins = np.array(self.bins, dtype=np.int64)
        if bins.shape != (256,) or (bins < 0).any():
            raise ValueError("histogram needs 256 non-negative counts")
        bins.flags.writeable = False
        object.__setattr__(self, "bins", bins)

    @property
    def total(self):
        return int(self.bins.sum())

    @property
    def mode(self):
        return int(np.argmax(self.bins))

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["bin", "count"])
        for i, count in enumerate(self.bins.tolist()):
            writer.writerow([i, count])
        return buf.getvalue()


@dataclass(frozen=True)
class HomogeneityWindow:
    k: int
    l: int  # noqa: E741 - bin index names follow the usual k..l notation

    def __post_init__(self):
        if not (0 <= self.k <= self.l <= 255):
            raise InvalidWindowError(f"window needs 0 <= k <= l <= 255, got [{self.k}, {self.l}]")

    @classmethod
    def around_peak(cls, hist, half_width=DEFAULT_HALF_WIDTH):
        m = hist.mode
        return cls(max(0, m - half_width), min(255, m + half_width))


def lbp_transform(img: GrayImage) -> LbpImage:
    if img.width < 3 or img.height < 3:
        raise ImageTooSmallError(f"LBP needs at least 3x3 pixels, got {img.width}x{img.height}")
    codes = _kernels.lbp_codes(img.pixels)
    codes.flags.writeable = False
    return LbpImage(codes)


def histogram(lbp) -> Histogram:
    """Bin counts of an LbpImage (or any uint8 array, e.g. raw intensities)."""
    values = lbp.codes if isinstance(lbp, LbpImage) else lbp
    return Histogram(_kernels.code_histogram(values))


def homogeneity(hist: Histogram, window: HomogeneityWindow,
                normalize_to: Optional[float] = None) -> float:
    psi = float(hist.bins[window.k:window.l + 1].sum())
    if normalize_to is not None:
        total = hist.total
        if total == 0:
            raise EmptyHistogramError("cannot normalise an empty histogram")
        psi *= normalize_to / total
    return psi


def measure_psi(img: GrayImage, window=None, half_width=DEFAULT_HALF_WIDTH,
                normalize_to=DEFAULT_NORMALIZE_TO, operand="lbp"):
    """Homogeneity of one image; ``window=None`` means the peak window."""
    if operand == "lbp":
        hist = histogram(lbp_transform(img))
    elif operand == "intensity":
        if img.width < 3 or img.height < 3:
            raise ImageTooSmallError(f"need at least 3x3 pixels, got {img.width}x{img.height}")
        # same interior as the LBP path so both operands count the same pixels
        hist = histogram(img.pixels[1:-1, 1:-1])
    else:
        raise ValueError(f"unknown histogram operand {operand!r}")
    if window is None:
        window = HomogeneityWindow.around_peak(hist, half_width)
    return homogeneity(hist, window, normalize_to)


# --- image files --------------------------------------------------------------

def _pgm_tokens(data):
    """Yield (token, end offset) for the header fields of a netpbm file."""
    pos = 0
    while True:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated PGM header")
        yield data[start:pos], pos


def decode_pgm(data: bytes) -> GrayImage:
    if data[:2] != b"P5":
        raise ImageFormatError("not a binary PGM (P5) file")
    fields = []
    tokens = _pgm_tokens(data[2:])
    end = 0
    try:
        for _ in range(3):
            tok, end = next(tokens)
            fields.append(int(tok))
    except ValueError:
        raise ImageFormatError("malformed PGM header") from None
    width, height, maxval = fields
    if maxval != 255:
        raise ImageFormatError(f"only maxval 255 is supported, got {maxval}")
    if width <= 0 or height <= 0:
        raise ImageFormatError("PGM dimensions must be positive")
    offset = 2 + end + 1  # single whitespace byte after maxval
    raster = data[offset:offset + width * height]
    if len(raster) != width * height:
        raise ImageFormatError("truncated PGM raster")
    return GrayImage(np.frombuffer(raster, dtype=np.uint8).reshape(height, width))


def encode_pgm(img: GrayImage) -> bytes:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def decode_png(data: bytes) -> GrayImage:
    from PIL import Image

    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            if im.mode != "L":
                raise ImageFormatError(f"PNG must be 8-bit grayscale, got mode {im.mode}")
            return GrayImage(np.array(im, dtype=np.uint8))
    except ImageFormatError:
        raise
    except Exception as exc:
        raise ImageFormatError(f"unreadable PNG: {exc}") from None


def encode_png(img: GrayImage) -> bytes:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(np.asarray(img.pixels)).save(buf, format="PNG")
    return buf.getvalue()


def read_image(path) -> GrayImage:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] == b"P5":
        return decode_pgm(data)
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return decode_png(data)
    raise ImageFormatError(f"{os.fspath(path)}: not a P5 PGM or PNG file")


def write_pgm(path, img: GrayImage):
    with open(path, "wb") as fh:
        fh.write(encode_pgm(img))
