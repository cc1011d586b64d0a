"""Seeded synthetic corpora standing in for recorded face sequences.

Live sequences get a rough skin-like texture (smoothed Gaussian noise) and
frequent eye/mouth state changes; attack sequences get a flat, glossy
texture (constant plus +-amp noise) and few or no changes. Every sequence
records its ground-truth movement counts and measured homogeneity.
"""

import json
import os
from dataclasses import dataclass, field, fields
from typing import Dict, Mapping, Tuple

import numpy as np
from scipy import ndimage

from .texture import DEFAULT_NORMALIZE_TO, GrayImage, encode_pgm, measure_psi

EYE_BOX = (0.15, 0.25, 0.7, 0.2)
MOUTH_BOX = (0.3, 0.65, 0.4, 0.2)
STATE_SHIFT = 70  # intensity drop of a closed eye / open mouth
MAX_TEXTURE_TRIES = 200

# Movement count ranges on the 19-pair (20-frame) reference scale.
LIVE_MOVEMENT = {
    "good": ((12, 18), (11, 18)),
    "average": ((7, 9), (6, 8)),
    "poor": ((0, 4), (0, 3)),
}
ATTACK_MOVEMENT = {
    "photo-laptop": ((0, 1), (0, 1)),
    "photo-paper": ((0, 1), (0, 1)),
    "video-hd": ((0, 4), (0, 3)),
}
GLOSS_AMPLITUDE = {"photo-laptop": (2, 3), "photo-paper": (3, 4), "video-hd": (2, 3)}


@dataclass(frozen=True)
class CorpusSpec:
    live: int = 50
    attacks: Mapping[str, int] = field(
        default_factory=lambda: {"photo-laptop": 50, "photo-paper": 50, "video-hd": 50})
    frames: int = 20
    size: int = 64
    live_movement: str = "good"
    live_psi: Tuple[float, float] = (256.0, 500.0)
    attack_psi: Tuple[float, float] = (900.0, 1300.0)
    normalize_to: float = DEFAULT_NORMALIZE_TO

    def __post_init__(self):
        if self.live_movement not in LIVE_MOVEMENT:
            raise ValueError(f"live_movement must be one of {sorted(LIVE_MOVEMENT)}")
        unknown = set(self.attacks) - set(ATTACK_MOVEMENT)
        if unknown:
            raise ValueError(f"unknown attack media {sorted(unknown)}")
        if self.frames < 2 or self.size < 16:
            raise ValueError("need frames >= 2 and size >= 16")
        object.__setattr__(self, "attacks", dict(self.attacks))
        object.__setattr__(self, "live_psi", tuple(self.live_psi))
        object.__setattr__(self, "attack_psi", tuple(self.attack_psi))

    @classmethod
    def from_dict(cls, doc):
        names = {f.name for f in fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ValueError(f"unknown corpus spec keys {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path):
        if str(path).endswith(".json"):
            with open(path, "r", encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        from .config import tomllib

        with open(path, "rb") as fh:
            return cls.from_dict(tomllib.load(fh))


def _scaled_count(rng, bounds, n):
    lo, hi = bounds
    c = int(rng.integers(lo, hi + 1))
    return min(n - 1, int(round(c * (n - 1) / 19)))


def _rough_texture(rng, size):
    sigma = rng.uniform(1.0, 1.5)
    f = ndimage.gaussian_filter(rng.normal(size=(size, size)), sigma)
    f = 128.0 + f / f.std() * 40.0
    return np.clip(np.round(f), 0, 255).astype(np.uint8)


def _glossy_texture(rng, size, amplitude):
    base = int(rng.integers(110, 170))
    amp = int(rng.integers(amplitude[0], amplitude[1] + 1))
    return (base + rng.integers(-amp, amp + 1, size=(size, size))).astype(np.uint8)


def _box(rel, size):
    fx, fy, fw, fh = rel
    return (int(round(fx * size)), int(round(fy * size)),
            int(round(fw * size)), int(round(fh * size)))


def _states(rng, c, n):
    """Per-frame binary region state with exactly c changes between neighbours."""
    changes = np.zeros(n - 1, dtype=bool)
    changes[rng.choice(n - 1, size=c, replace=False)] = True
    states = np.concatenate([[0], np.cumsum(changes) % 2])
    return states.astype(bool), changes


def _render(base, eye_state, mouth_state, eye_box, mouth_box):
    img = base.astype(np.int16).copy()
    for on, (x, y, w, h) in ((eye_state, eye_box), (mouth_state, mouth_box)):
        if on:
            img[y:y + h, x:x + w] -= STATE_SHIFT
    return np.clip(img, 0, 255).astype(np.uint8)


def _sequence(rng, spec, label, medium):
    n, size = spec.frames, spec.size
    eye_box, mouth_box = _box(EYE_BOX, size), _box(MOUTH_BOX, size)
    if label == "live":
        eye_b, mouth_b = LIVE_MOVEMENT[spec.live_movement]
        target = spec.live_psi
    else:
        eye_b, mouth_b = ATTACK_MOVEMENT[medium]
        target = spec.attack_psi
    c_eye = _scaled_count(rng, eye_b, n)
    c_mouth = _scaled_count(rng, mouth_b, n)
    eye_states, eye_flags = _states(rng, c_eye, n)
    mouth_states, mouth_flags = _states(rng, c_mouth, n)
    mid = (n - 1) // 2
    for _ in range(MAX_TEXTURE_TRIES):
        if label == "live":
            base = _rough_texture(rng, size)
        else:
            base = _glossy_texture(rng, size, GLOSS_AMPLITUDE[medium])
        probe = _render(base, eye_states[mid], mouth_states[mid], eye_box, mouth_box)
        psi = measure_psi(GrayImage(probe), normalize_to=spec.normalize_to)
        if target[0] <= psi <= target[1]:
            break
    else:
        raise RuntimeError(f"no {label} texture reached psi in {target}")
    frames = [_render(base, eye_states[i], mouth_states[i], eye_box, mouth_box)
              for i in range(n)]
    truth = {"c_eye": c_eye, "c_mouth": c_mouth, "psi": psi, "psi_target": list(target)}
    flags = {"eye": eye_flags.astype(int).tolist(), "mouth": mouth_flags.astype(int).tolist()}
    return frames, truth, flags


def synth_generate(spec: CorpusSpec, seed: int, out_dir) -> Dict:
    """Write frames and ``manifest.json`` under out_dir; return the manifest."""
    plan = [("live", None, spec.live)] + [
        (f"attack:{m}", m, spec.attacks[m]) for m in sorted(spec.attacks)]
    root = np.random.SeedSequence(seed)
    streams = iter(root.spawn(sum(count for _, _, count in plan)))
    os.makedirs(out_dir, exist_ok=True)
    sequences = []
    for label, medium, count in plan:
        prefix = "live" if medium is None else medium
        for i in range(count):
            rng = np.random.default_rng(next(streams))
            seq_id = f"{prefix}-{i:03d}"
            frames, truth, flags = _sequence(rng, spec, "live" if medium is None else "attack",
                                             medium)
            os.makedirs(os.path.join(out_dir, seq_id), exist_ok=True)
            paths = []
            for k, px in enumerate(frames):
                rel = f"{seq_id}/f{k:03d}.pgm"
                with open(os.path.join(out_dir, rel), "wb") as fh:
                    fh.write(encode_pgm(GrayImage(px)))
                paths.append(rel)
            sequences.append({
                "id": seq_id,
                "label": label,
                "frames": paths,
                "regions": {"eye": {"relative": list(EYE_BOX)},
                            "mouth": {"relative": list(MOUTH_BOX)}},
                "movement_flags": flags,
                "truth": truth,
            })
    manifest = {
        "generator": {"seed": seed, "spec": {
            "live": spec.live, "attacks": dict(sorted(spec.attacks.items())),
            "frames": spec.frames, "size": spec.size, "live_movement": spec.live_movement,
            "live_psi": list(spec.live_psi), "attack_psi": list(spec.attack_psi),
            "normalize_to": spec.normalize_to}},
        "sequences": sequences,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
