"""Eye and mouth movement counting over a frame sequence.

Region detection is not done here: boxes arrive from the dataset manifest,
either as fractions of the frame or as explicit per-frame rectangles. A
movement is counted for each consecutive frame pair whose region crops
differ, on average over a block grid, by more than a threshold.
"""

import os
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import _kernels
from .errors import (
    FrameSizeError,
    ImageFormatError,
    InvalidFrameCountError,
    InvalidTrackError,
    LengthMismatchError,
    ManifestError,
    MissingFileError,
)
from .texture import GrayImage, read_image

MIN_BOX_SIDE = 4


class RegionKind(Enum):
    EYE = "eye"
    MOUTH = "mouth"


class DetectorKind(Enum):
    BLOCK_DIFFERENCE = "block-difference"
    PRECOMPUTED = "precomputed"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("_", "-")
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown movement detector {text!r}")


class Box(NamedTuple):
    x: int
    y: int
    w: int
    h: int


@dataclass(frozen=True)
class FrameSequence:
    frames: Tuple[GrayImage, ...]

    def __post_init__(self):
        frames = tuple(self.frames)
        if len(frames) < 2:
            raise InvalidFrameCountError(f"a sequence needs at least 2 frames, got {len(frames)}")
        shape = frames[0].pixels.shape
        for i, f in enumerate(frames):
            if f.pixels.shape != shape:
                raise FrameSizeError(
                    f"frame {i} is {f.width}x{f.height}, frame 0 is {shape[1]}x{shape[0]}")
        object.__setattr__(self, "frames", frames)

    @property
    def frame_count(self):
        return len(self.frames)

    @property
    def size(self):
        return self.frames[0].width, self.frames[0].height


@dataclass(frozen=True)
class RegionTrack:
    region_kind: RegionKind
    boxes: Tuple[Box, ...]

    def __post_init__(self):
        boxes = tuple(Box(*(int(v) for v in b)) for b in self.boxes)
        for i, b in enumerate(boxes):
            if b.w < MIN_BOX_SIDE or b.h < MIN_BOX_SIDE:
                raise InvalidTrackError(
                    f"{self.region_kind.value} box {i} is {b.w}x{b.h}; "
                    f"sides must be >= {MIN_BOX_SIDE}")
        object.__setattr__(self, "boxes", boxes)

    def check_bounds(self, width, height):
        for i, b in enumerate(self.boxes):
            if b.x < 0 or b.y < 0 or b.x + b.w > width or b.y + b.h > height:
                raise InvalidTrackError(
                    f"{self.region_kind.value} box {i} {tuple(b)} leaves the {width}x{height} frame")


@dataclass(frozen=True)
class MovementDetectorConfig:
    detector: DetectorKind = DetectorKind.BLOCK_DIFFERENCE
    mismatch_threshold: float = 0.12
    block_size: int = 4

    def __post_init__(self):
        object.__setattr__(self, "detector", DetectorKind.parse(self.detector))
        if not 0.0 < self.mismatch_threshold < 1.0:
            raise ValueError("mismatch_threshold must lie in (0, 1)")
        if self.block_size < 2:
            raise ValueError("block_size must be >= 2")


@dataclass(frozen=True)
class MovementObservation:
    region_kind: RegionKind
    c: int
    n: int

    def __post_init__(self):
        if not 0 <= self.c <= self.n - 1:
            raise ValueError(f"movement count {self.c} outside [0, {self.n - 1}]")


def resample_nearest(crop, height, width):
    crop = np.asarray(crop)
    rows = (np.arange(height) * crop.shape[0]) // height
    cols = (np.arange(width) * crop.shape[1]) // width
    return crop[rows[:, None], cols[None, :]]


def pair_difference(crop_a, crop_b, grid_shape, block_size):
    """Average normalised block difference of two crops on a common grid."""
    h, w = grid_shape[0] * block_size, grid_shape[1] * block_size
    a = resample_nearest(crop_a, h, w)
    b = resample_nearest(crop_b, h, w)
    return _kernels.block_mean_abs_diff(a, b, block_size)


def count_movements(seq: FrameSequence, track: RegionTrack, cfg: MovementDetectorConfig,
                    flags: Optional[Sequence] = None) -> MovementObservation:
    n = seq.frame_count
    if len(track.boxes) != n:
        raise LengthMismatchError(
            f"{track.region_kind.value} track has {len(track.boxes)} boxes for {n} frames")
    if cfg.detector is DetectorKind.PRECOMPUTED:
        return precomputed_movements(track.region_kind, flags, n)
    width, height = seq.size
    track.check_bounds(width, height)
    first = track.boxes[0]
    grid = (max(1, first.h // cfg.block_size), max(1, first.w // cfg.block_size))
    c = 0
    for i in range(n - 1):
        crop_a = seq.frames[i].crop(*track.boxes[i])
        crop_b = seq.frames[i + 1].crop(*track.boxes[i + 1])
        if pair_difference(crop_a, crop_b, grid, cfg.block_size) > cfg.mismatch_threshold:
            c += 1
    return MovementObservation(track.region_kind, c, n)


def precomputed_movements(kind, flags, n=None):
    if flags is None:
        raise ManifestError(f"precomputed detector needs movement flags for {kind.value}")
    flags = list(flags)
    if n is None:
        n = len(flags) + 1
    if len(flags) != n - 1:
        raise LengthMismatchError(
            f"{kind.value}: {len(flags)} movement flags for {n} frames (need {n - 1})")
    if n < 2:
        raise InvalidFrameCountError(f"a sequence needs at least 2 frames, got {n}")
    return MovementObservation(kind, sum(1 for f in flags if f), n)


def _boxes_for(kind, spec, n, width, height):
    if not isinstance(spec, dict):
        raise ManifestError(f"{kind.value}: region must be an object")
    if "relative" in spec:
        try:
            fx, fy, fw, fh = (float(v) for v in spec["relative"])
        except (TypeError, ValueError):
            raise ManifestError(f"{kind.value}: relative box needs four numbers") from None
        box = Box(int(round(fx * width)), int(round(fy * height)),
                  int(round(fw * width)), int(round(fh * height)))
        return RegionTrack(kind, (box,) * n)
    if "boxes" in spec:
        try:
            boxes = [Box(*(int(v) for v in b)) for b in spec["boxes"]]
        except (TypeError, ValueError):
            raise ManifestError(f"{kind.value}: each box needs four integers") from None
        if len(boxes) != n:
            raise LengthMismatchError(f"{kind.value}: {len(boxes)} boxes for {n} frames")
        return RegionTrack(kind, boxes)
    raise ManifestError(f"{kind.value}: region needs 'relative' or 'boxes'")


def load_frames(paths, base_dir="."):
    frames = []
    for p in paths:
        full = os.path.join(base_dir, p)
        if not os.path.isfile(full):
            raise MissingFileError(f"frame file not found: {full}")
        try:
            frames.append(read_image(full))
        except ImageFormatError as exc:
            raise ImageFormatError(f"{full}: {exc}") from None
    return frames


def load_tracks(entry, base_dir="."):
    """Frames and eye/mouth tracks for one manifest sequence entry."""
    if not isinstance(entry, dict):
        raise ManifestError("sequence entry must be an object")
    paths = entry.get("frames")
    if not isinstance(paths, list) or not all(isinstance(p, str) for p in paths):
        raise ManifestError(f"sequence {entry.get('id')!r}: 'frames' must be a list of paths")
    if len(paths) < 2:
        raise InvalidFrameCountError(
            f"sequence {entry.get('id')!r}: a sequence needs at least 2 frames, got {len(paths)}")
    seq = FrameSequence(load_frames(paths, base_dir))
    regions = entry.get("regions")
    if not isinstance(regions, dict):
        raise ManifestError(f"sequence {entry.get('id')!r}: missing 'regions'")
    width, height = seq.size
    tracks = {}
    for kind in RegionKind:
        if kind.value not in regions:
            raise ManifestError(f"sequence {entry.get('id')!r}: no {kind.value} region")
        tracks[kind] = _boxes_for(kind, regions[kind.value], seq.frame_count, width, height)
    return seq, tracks
