import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from PIL import Image

from fuzzylive.errors import (
    EmptyHistogramError,
    ImageFormatError,
    ImageTooSmallError,
    InvalidWindowError,
)
from fuzzylive.texture import (
    GrayImage,
    Histogram,
    HomogeneityWindow,
    decode_pgm,
    decode_png,
    encode_pgm,
    encode_png,
    histogram,
    homogeneity,
    lbp_transform,
    measure_psi,
    read_image,
    write_pgm,
)

import oracles

images = hnp.arrays(np.uint8, hnp.array_shapes(min_dims=2, max_dims=2, min_side=3, max_side=24))


def patch(center, e, ne, n, nw, w, sw, s, se):
    return np.array([[nw, n, ne], [w, center, e], [sw, s, se]], dtype=np.uint8)


def test_lbp_bit_order_example():
    px = patch(5, 6, 8, 3, 5, 2, 1, 7, 9)
    assert lbp_transform(GrayImage(px)).codes.tolist() == [[203]]
    assert oracles.lbp_image(px.tolist()) == [[203]]


def test_lbp_uniform_is_all_ones():
    codes = lbp_transform(GrayImage(np.full((5, 7), 42, np.uint8))).codes
    assert codes.shape == (3, 5)
    assert (codes == 255).all()


def test_lbp_strict_maximum_is_zero():
    px = patch(200, 1, 2, 3, 4, 5, 6, 7, 8)
    assert lbp_transform(GrayImage(px)).codes.tolist() == [[0]]


@pytest.mark.parametrize("shape", [(2, 5), (5, 2), (1, 1)])
def test_lbp_too_small(shape):
    with pytest.raises(ImageTooSmallError):
        lbp_transform(GrayImage(np.zeros(shape, np.uint8)))


@settings(max_examples=60)
@given(images)
def test_lbp_matches_oracle(px):
    assert lbp_transform(GrayImage(px)).codes.tolist() == oracles.lbp_image(px.tolist())


@settings(max_examples=60)
@given(images, st.integers(-40, 40))
def test_lbp_invariant_to_intensity_shift(px, shift):
    shifted = np.clip(px.astype(int) + shift, 0, 255)
    # only shifts that do not saturate keep the ordering intact
    if not ((px.astype(int) + shift >= 0).all() and (px.astype(int) + shift <= 255).all()):
        return
    a = lbp_transform(GrayImage(px)).codes
    b = lbp_transform(GrayImage(shifted.astype(np.uint8))).codes
    assert np.array_equal(a, b)


@settings(max_examples=60)
@given(images)
def test_histogram_matches_tally(px):
    lbp = lbp_transform(GrayImage(px))
    hist = histogram(lbp)
    assert hist.bins.tolist() == oracles.tally(lbp.codes.tolist())
    assert hist.total == (px.shape[0] - 2) * (px.shape[1] - 2)


def test_histogram_validation():
    with pytest.raises(ValueError):
        Histogram(np.zeros(10))
    with pytest.raises(ValueError):
        Histogram(np.full(256, -1))


def test_histogram_csv():
    bins = np.zeros(256, int)
    bins[3] = 7
    lines = Histogram(bins).to_csv().splitlines()
    assert lines[0] == "bin,count"
    assert lines[4] == "3,7"
    assert len(lines) == 257


def test_homogeneity_window_sum():
    bins = np.arange(256)
    hist = Histogram(bins)
    assert homogeneity(hist, HomogeneityWindow(10, 12)) == 33
    assert homogeneity(hist, HomogeneityWindow(0, 255)) == hist.total
    assert homogeneity(hist, HomogeneityWindow(0, 255), normalize_to=100) == pytest.approx(100)


def test_window_around_peak_is_clamped():
    bins = np.zeros(256, int)
    bins[2] = 5
    assert HomogeneityWindow.around_peak(Histogram(bins)) == HomogeneityWindow(0, 10)
    bins[:] = 0
    bins[250] = 5
    assert HomogeneityWindow.around_peak(Histogram(bins)) == HomogeneityWindow(242, 255)


@pytest.mark.parametrize("k, l", [(-1, 3), (5, 4), (0, 256)])
def test_invalid_window(k, l):
    with pytest.raises(InvalidWindowError):
        HomogeneityWindow(k, l)


def test_empty_histogram_cannot_be_normalised():
    with pytest.raises(EmptyHistogramError):
        homogeneity(Histogram(np.zeros(256)), HomogeneityWindow(0, 5), normalize_to=10)


@settings(max_examples=60)
@given(st.lists(st.integers(0, 50), min_size=256, max_size=256),
       st.integers(0, 250), st.integers(0, 250), st.integers(1, 5))
def test_homogeneity_monotone_in_window(bins, k, l, grow):
    k, l = min(k, l), max(k, l)
    hist = Histogram(bins)
    inner = homogeneity(hist, HomogeneityWindow(k, l))
    outer = homogeneity(hist, HomogeneityWindow(max(0, k - grow), min(255, l + grow)))
    assert 0 <= inner <= outer <= hist.total
    assert inner == sum(bins[k:l + 1])


def test_uniform_image_psi_is_full_scale():
    img = GrayImage(np.full((10, 10), 9, np.uint8))
    assert measure_psi(img) == pytest.approx(4096)
    assert measure_psi(img, normalize_to=None) == 64
    assert measure_psi(img, operand="intensity") == pytest.approx(4096)


def test_glossy_more_homogeneous_than_rough():
    rng = np.random.default_rng(0)
    glossy = GrayImage((140 + rng.integers(-2, 3, (64, 64))).astype(np.uint8))
    rough = GrayImage(rng.integers(0, 256, (64, 64)).astype(np.uint8))
    assert measure_psi(glossy) > measure_psi(rough)


def test_psi_explicit_window_and_bad_operand():
    img = GrayImage(np.full((4, 4), 1, np.uint8))
    assert measure_psi(img, window=HomogeneityWindow(0, 254), normalize_to=None) == 0
    with pytest.raises(ValueError):
        measure_psi(img, operand="gradient")
    with pytest.raises(ImageTooSmallError):
        measure_psi(GrayImage(np.ones((2, 2), np.uint8)), operand="intensity")


# --- images ----------------------------------------------------------------------------

def test_gray_image_validation():
    with pytest.raises(ImageFormatError):
        GrayImage(np.zeros((3, 3, 3)))
    with pytest.raises(ImageFormatError):
        GrayImage(np.full((3, 3), 300))
    with pytest.raises(ImageFormatError):
        GrayImage(np.full((3, 3), np.nan))
    img = GrayImage(np.arange(12).reshape(3, 4))
    assert (img.width, img.height) == (4, 3)
    assert img.crop(1, 1, 2, 2).tolist() == [[5, 6], [9, 10]]
    with pytest.raises(ValueError):
        img.pixels[0, 0] = 1
    src = np.zeros((3, 3), np.uint8)
    GrayImage(src)
    src[0, 0] = 1  # the caller's buffer stays writable


@given(images)
def test_pgm_round_trip(px):
    img = GrayImage(px)
    assert decode_pgm(encode_pgm(img)) == img


def test_pgm_with_comments():
    data = b"P5\n# made by hand\n2 1\n# another\n255\n" + bytes([7, 9])
    assert decode_pgm(data).pixels.tolist() == [[7, 9]]


@pytest.mark.parametrize("data", [
    b"P2\n1 1\n255\n0",
    b"P5\n2 2\n255\n" + bytes(3),
    b"P5\n2 2\n65535\n" + bytes(8),
    b"P5\n0 2\n255\n",
    b"P5\n2",
    b"P5\nx y\n255\n",
])
def test_pgm_errors(data):
    with pytest.raises(ImageFormatError):
        decode_pgm(data)


def test_png_round_trip_and_mode_check():
    px = np.arange(48, dtype=np.uint8).reshape(6, 8)
    assert decode_png(encode_png(GrayImage(px))).pixels.tolist() == px.tolist()
    buf = io.BytesIO()
    Image.new("RGB", (4, 4)).save(buf, format="PNG")
    with pytest.raises(ImageFormatError, match="mode"):
        decode_png(buf.getvalue())
    with pytest.raises(ImageFormatError):
        decode_png(b"\x89PNG\r\n\x1a\n garbage")


def test_read_image_sniffs_format(tmp_path):
    px = np.arange(16, dtype=np.uint8).reshape(4, 4)
    write_pgm(tmp_path / "a.pgm", GrayImage(px))
    (tmp_path / "b.png").write_bytes(encode_png(GrayImage(px)))
    (tmp_path / "c.bmp").write_bytes(b"BM....")
    assert read_image(tmp_path / "a.pgm") == GrayImage(px)
    assert read_image(tmp_path / "b.png") == GrayImage(px)
    with pytest.raises(ImageFormatError):
        read_image(tmp_path / "c.bmp")
