"""Hot inner loops for texture coding and frame differencing.

Every kernel exists twice: a plain loop compiled with numba, and a
vectorised numpy equivalent. The numba path is used when numba imports
and ``FUZZYLIVE_DISABLE_NUMBA`` is unset (or ``0``); otherwise the numpy
path is used. Both paths return identical results.
"""

import os

import numpy as np

# (row offset, column offset) for LBP bit i: east first, then counter-clockwise.
NEIGHBOR_OFFSETS = (
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
)


def _numba_wanted():
    flag = os.environ.get("FUZZYLIVE_DISABLE_NUMBA", "").strip().lower()
    return flag in ("", "0", "false", "no")


try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is an optional accelerator
    njit = None

HAVE_NUMBA = njit is not None
USE_NUMBA = HAVE_NUMBA and _numba_wanted()


# --- loop implementations (numba source) -----------------------------------

def _lbp_loop(img):
    # unrolled in NEIGHBOR_OFFSETS order so the compiler can vectorise rows
    h, w = img.shape
    out = np.empty((h - 2, w - 2), dtype=np.uint8)
    for y in range(1, h - 1):
        up = img[y - 1]
        mid = img[y]
        down = img[y + 1]
        row = out[y - 1]
        for x in range(1, w - 1):
            c = mid[x]
            row[x - 1] = ((mid[x + 1] >= c)
                          | ((up[x + 1] >= c) << 1)
                          | ((up[x] >= c) << 2)
                          | ((up[x - 1] >= c) << 3)
                          | ((mid[x - 1] >= c) << 4)
                          | ((down[x - 1] >= c) << 5)
                          | ((down[x] >= c) << 6)
                          | ((down[x + 1] >= c) << 7))
    return out


def _histogram_loop(codes):
    bins = np.zeros(256, dtype=np.int64)
    flat = codes.ravel()
    for i in range(flat.size):
        bins[flat[i]] += 1
    return bins


def _block_diff_loop(a, b, block):
    # a, b: equally sized float arrays whose sides are multiples of block
    gh = a.shape[0] // block
    gw = a.shape[1] // block
    area = block * block
    total = 0.0
    for by in range(gh):
        for bx in range(gw):
            sa = 0.0
            sb = 0.0
            for y in range(by * block, (by + 1) * block):
                for x in range(bx * block, (bx + 1) * block):
                    sa += a[y, x]
                    sb += b[y, x]
            total += abs(sa - sb) / area
    return total / (gh * gw * 255.0)


# --- numpy implementations --------------------------------------------------

def _lbp_numpy(img):
    img = np.asarray(img)
    h, w = img.shape
    center = img[1:-1, 1:-1]
    out = np.zeros((h - 2, w - 2), dtype=np.uint8)
    for i, (dr, dc) in enumerate(NEIGHBOR_OFFSETS):
        y0, x0 = 1 + dr, 1 + dc
        neighbor = img[y0:y0 + h - 2, x0:x0 + w - 2]
        out |= (neighbor >= center).astype(np.uint8) << np.uint8(i)
    return out


def _histogram_numpy(codes):
    return np.bincount(np.asarray(codes).ravel(), minlength=256).astype(np.int64)


def _block_diff_numpy(a, b, block):
    gh = a.shape[0] // block
    gw = a.shape[1] // block
    ma = a.reshape(gh, block, gw, block).mean(axis=(1, 3))
    mb = b.reshape(gh, block, gw, block).mean(axis=(1, 3))
    return float(np.abs(ma - mb).mean() / 255.0)


if HAVE_NUMBA:
    _lbp_numba = njit(cache=True)(_lbp_loop)
    _histogram_numba = njit(cache=True)(_histogram_loop)
    _block_diff_numba = njit(cache=True)(_block_diff_loop)
else:  # pragma: no cover
    _lbp_numba = _histogram_numba = _block_diff_numba = None


def backend():
    return "numba" if USE_NUMBA else "numpy"


def lbp_codes(img, use_numba=None):
    """8-neighbour, radius-1 LBP codes of the interior of a 2-D uint8 array."""
    img = np.ascontiguousarray(img, dtype=np.uint8)
    if USE_NUMBA if use_numba is None else use_numba:
        return _lbp_numba(img)
    return _lbp_numpy(img)


def code_histogram(codes, use_numba=None):
    codes = np.ascontiguousarray(codes, dtype=np.uint8)
    if USE_NUMBA if use_numba is None else use_numba:
        return _histogram_numba(codes)
    return _histogram_numpy(codes)


def block_mean_abs_diff(a, b, block, use_numba=None):
    """Mean over blocks of |mean(a_block) - mean(b_block)| / 255."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if USE_NUMBA if use_numba is None else use_numba:
        return float(_block_diff_numba(a, b, int(block)))
    return _block_diff_numpy(a, b, int(block))
