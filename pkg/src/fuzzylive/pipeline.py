"""End-to-end liveness scoring, dataset evaluation and EER threshold tuning."""

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .config import PipelineConfig
from .errors import (
    CannotTuneError,
    FuzzyLiveError,
    ManifestError,
    NoActivationError,
    StageError,
)
from .fuzzy_core import (
    AggregatedOutput,
    RuleActivation,
    Term,
    aggregate,
    classify_term,
    defuzzify_cog,
    evaluate_rule,
    fuzzify_movement,
    fuzzify_quality,
)
from .motion import RegionKind, count_movements, load_tracks, precomputed_movements
from .texture import measure_psi

LIVE = "live"
ATTACK_PREFIX = "attack:"

# Display names, live first, then attacks by medium.
CLASS_TITLES = {
    "live": "Real person",
    "attack:photo-laptop": "Photo attack (laptop)",
    "attack:photo-paper": "Photo attack (2D paper)",
    "attack:video-hd": "HD video attack (mobile)",
}


class Verdict(Enum):
    LIVE = "live"
    SPOOF = "spoof"


@dataclass(frozen=True)
class InferenceTrace:
    counts: Mapping[str, float]
    frames: int
    inputs: Mapping[str, float]
    grades: Mapping[str, float]
    labels: Mapping[str, Term]
    aggregated: AggregatedOutput


@dataclass(frozen=True)
class LivenessScore:
    crisp: float
    label: Term
    trace: Tuple[RuleActivation, ...]
    fallback: bool = False
    details: Optional[InferenceTrace] = None

    def to_dict(self):
        out = {
            "crisp": self.crisp,
            "label": str(self.label),
            "fallback": self.fallback,
            "fired": [{"rule": a.rule_id, "output": str(a.output_term), "level": a.level}
                      for a in self.trace],
        }
        if self.details is not None:
            d = self.details
            out["inputs"] = {
                name: {"count": d.counts[name], "value": d.inputs[name],
                       "grade": d.grades[name], "label": str(d.labels[name])}
                for name in d.inputs
            }
            out["frames"] = d.frames
        return out


@dataclass(frozen=True)
class Decision:
    verdict: Verdict
    score: LivenessScore


def is_live_label(label):
    return label == LIVE


def check_label(label):
    if label == LIVE or (isinstance(label, str) and label.startswith(ATTACK_PREFIX)
                         and len(label) > len(ATTACK_PREFIX)):
        return label
    raise ManifestError(f"label must be 'live' or 'attack:<medium>', got {label!r}")


def _movement_input(variable, c, n):
    lo, hi = variable.domain
    # counts are rescaled to the variable's 20-frame reference scale
    return lo + c * (hi - lo) / (n - 1)


def infer(c_eye, c_mouth, n, psi, cfg: PipelineConfig = None) -> LivenessScore:
    """Score raw measurements: movement counts over n frames plus homogeneity psi."""
    cfg = cfg or PipelineConfig()
    v = cfg.variables
    grades = {
        "eye": fuzzify_movement(c_eye, n),
        "mouth": fuzzify_movement(c_mouth, n),
        "quality": fuzzify_quality(psi),
    }
    inputs = {
        "eye": _movement_input(v["eye"], c_eye, n),
        "mouth": _movement_input(v["mouth"], c_mouth, n),
        "quality": v["quality"].clip(psi),
    }
    labels = {name: classify_term(v[name], x) for name, x in inputs.items()}
    fired = []
    for rule in cfg.rules:
        act = evaluate_rule(rule, grades, labels, cfg.mode, inputs=inputs, variables=v)
        if act is not None:
            fired.append(act)
    output = v["output"]
    agg = aggregate(fired, output, cfg.cog_step)
    try:
        crisp = defuzzify_cog(agg)
        fallback = False
    except NoActivationError:
        crisp, fallback = output.domain[0], True
    details = InferenceTrace(
        counts={"eye": c_eye, "mouth": c_mouth, "quality": psi}, frames=n,
        inputs=inputs, grades=grades, labels=labels, aggregated=agg)
    label = Term.POOR if fallback else classify_term(output, crisp)
    return LivenessScore(crisp, label, tuple(fired), fallback, details)


def decide(score: LivenessScore, threshold: float) -> Decision:
    live = not score.fallback and score.crisp >= threshold
    return Decision(Verdict.LIVE if live else Verdict.SPOOF, score)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except (FuzzyLiveError, OSError, ValueError) as exc:
        raise StageError(name, exc) from exc


def measure_sequence_psi(seq, cfg):
    kw = dict(window=cfg.window, half_width=cfg.window_half_width,
              normalize_to=cfg.normalize_to, operand=cfg.histogram_operand)
    if cfg.psi_frame == "mean":
        return float(np.mean([measure_psi(f, **kw) for f in seq.frames]))
    return measure_psi(seq.frames[(seq.frame_count - 1) // 2], **kw)


def measure_entry(entry, cfg: PipelineConfig, base_dir="."):
    """Movement counts, frame count and psi for one manifest entry."""
    flags = entry.get("movement_flags") or {}
    frames = entry.get("frames") or []
    precomputed = cfg.detector.detector.value == "precomputed"
    if not frames and precomputed and "psi" in entry:
        eye = _stage("motion", precomputed_movements, RegionKind.EYE, flags.get("eye"))
        mouth = _stage("motion", precomputed_movements, RegionKind.MOUTH, flags.get("mouth"), eye.n)
        return eye.c, mouth.c, eye.n, float(entry["psi"])
    seq, tracks = _stage("load", load_tracks, entry, base_dir)
    eye = _stage("motion", count_movements, seq, tracks[RegionKind.EYE], cfg.detector,
                 flags.get("eye"))
    mouth = _stage("motion", count_movements, seq, tracks[RegionKind.MOUTH], cfg.detector,
                   flags.get("mouth"))
    if "psi" in entry:
        psi = float(entry["psi"])
    else:
        psi = _stage("texture", measure_sequence_psi, seq, cfg)
    return eye.c, mouth.c, seq.frame_count, psi


def score_sequence(entry, cfg: PipelineConfig = None, base_dir=".") -> LivenessScore:
    cfg = cfg or PipelineConfig()
    c_eye, c_mouth, n, psi = measure_entry(entry, cfg, base_dir)
    return _stage("inference", infer, c_eye, c_mouth, n, psi, cfg)


# --- manifests ----------------------------------------------------------------

def load_manifest(path):
    """Parse a manifest file; returns (document, directory for relative paths)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from None
    check_manifest(doc)
    return doc, os.path.dirname(os.path.abspath(path))


def check_manifest(doc):
    if not isinstance(doc, dict) or not isinstance(doc.get("sequences"), list):
        raise ManifestError("manifest must be an object with a 'sequences' list")
    if not doc["sequences"]:
        raise ManifestError("manifest lists no sequences")
    seen = set()
    for entry in doc["sequences"]:
        if not isinstance(entry, dict) or not isinstance(entry.get("id"), str):
            raise ManifestError("every sequence needs a string 'id'")
        if entry["id"] in seen:
            raise ManifestError(f"duplicate sequence id {entry['id']!r}")
        seen.add(entry["id"])
        check_label(entry.get("label"))


def find_sequence(doc, seq_id):
    for entry in doc["sequences"]:
        if entry["id"] == seq_id:
            return entry
    raise ManifestError(f"no sequence with id {seq_id!r}")


# --- evaluation ---------------------------------------------------------------

@dataclass(frozen=True)
class SequenceResult:
    seq_id: str
    label: str
    score: Optional[LivenessScore]
    verdict: Verdict
    error: Optional[str] = None

    @property
    def crisp(self):
        # failed sequences rank as the least live possible score
        return self.score.crisp if self.score is not None else 0.0

    @property
    def correct(self):
        return (self.verdict is Verdict.LIVE) == is_live_label(self.label)


@dataclass
class ClassStats:
    total: int = 0
    correct: int = 0

    @property
    def accuracy(self):
        return self.correct / self.total if self.total else 0.0


@dataclass
class EvaluationReport:
    threshold: float
    results: List[SequenceResult]
    classes: Dict[str, ClassStats] = field(default_factory=dict)
    true_accept: int = 0
    false_reject: int = 0
    false_accept: int = 0
    true_reject: int = 0
    eer: Optional[Tuple[float, float]] = None

    @property
    def lives(self):
        return self.true_accept + self.false_reject

    @property
    def attacks(self):
        return self.false_accept + self.true_reject

    @property
    def far(self):
        return self.false_accept / self.attacks if self.attacks else 0.0

    @property
    def frr(self):
        return self.false_reject / self.lives if self.lives else 0.0

    @property
    def accuracy(self):
        total = self.lives + self.attacks
        return (self.true_accept + self.true_reject) / total if total else 0.0

    @property
    def failures(self):
        return [(r.seq_id, r.error) for r in self.results if r.error is not None]

    def ordered_classes(self):
        known = [c for c in CLASS_TITLES if c in self.classes]
        return known + sorted(c for c in self.classes if c not in CLASS_TITLES)

    def to_dict(self):
        return {
            "threshold": self.threshold,
            "far": self.far,
            "frr": self.frr,
            "accuracy": self.accuracy,
            "eer": None if self.eer is None else {"threshold": self.eer[0], "rate": self.eer[1]},
            "confusion": {
                "true_accept": self.true_accept,
                "false_reject": self.false_reject,
                "false_accept": self.false_accept,
                "true_reject": self.true_reject,
            },
            "classes": {c: {"total": s.total, "correct": s.correct, "accuracy": s.accuracy}
                        for c, s in ((c, self.classes[c]) for c in self.ordered_classes())},
            "sequences": [
                {"id": r.seq_id, "label": r.label, "crisp": r.crisp,
                 "output": None if r.score is None else str(r.score.label),
                 "decision": r.verdict.value, "error": r.error}
                for r in self.results
            ],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["id", "label", "crisp", "output", "decision", "correct", "error"])
        for r in self.results:
            writer.writerow([r.seq_id, r.label, repr(r.crisp),
                             "" if r.score is None else str(r.score.label),
                             r.verdict.value, int(r.correct), r.error or ""])
        return buf.getvalue()

    def format_table(self):
        rows = [("Class", "Total", "Correct", "Accuracy (%)")]
        for c in self.ordered_classes():
            s = self.classes[c]
            rows.append((CLASS_TITLES.get(c, c), str(s.total), str(s.correct),
                         f"{100 * s.accuracy:.2f}"))
        width = max(len(r[0]) for r in rows)
        lines = [f"{r[0]:<{width}}  {r[1]:>5}  {r[2]:>7}  {r[3]:>12}" for r in rows]
        lines.insert(1, "-" * len(lines[0]))
        lines.append("")
        lines.append(f"threshold {self.threshold:.4f}   FAR {self.far:.4f}   "
                     f"FRR {self.frr:.4f}   accuracy {100 * self.accuracy:.2f}%")
        if self.eer is not None:
            lines.append(f"EER {self.eer[1]:.4f} at threshold {self.eer[0]:.4f}")
        fails = self.failures
        lines.append(f"failures: {len(fails)}")
        for seq_id, err in fails:
            lines.append(f"  {seq_id}: {err}")
        return "\n".join(lines) + "\n"


def _score_one(entry, cfg, base_dir):
    try:
        score = score_sequence(entry, cfg, base_dir)
    except FuzzyLiveError as exc:
        return SequenceResult(entry["id"], entry["label"], None, Verdict.SPOOF, str(exc))
    return SequenceResult(entry["id"], entry["label"], score,
                          decide(score, cfg.threshold).verdict)


def build_report(results: Sequence[SequenceResult], threshold: float) -> EvaluationReport:
    report = EvaluationReport(threshold, sorted(results, key=lambda r: r.seq_id))
    for r in report.results:
        stats = report.classes.setdefault(r.label, ClassStats())
        stats.total += 1
        stats.correct += int(r.correct)
        accepted = r.verdict is Verdict.LIVE
        if is_live_label(r.label):
            if accepted:
                report.true_accept += 1
            else:
                report.false_reject += 1
        elif accepted:
            report.false_accept += 1
        else:
            report.true_reject += 1
    if report.lives and report.attacks:
        report.eer = tune_threshold_eer([(r.crisp, r.label) for r in report.results])
    return report


def evaluate(manifest, cfg: PipelineConfig = None, base_dir=None) -> EvaluationReport:
    """Score every sequence of a manifest (path or parsed document)."""
    cfg = cfg or PipelineConfig()
    if isinstance(manifest, (str, os.PathLike)):
        doc, manifest_dir = load_manifest(manifest)
        base_dir = base_dir or manifest_dir
    else:
        doc = manifest
        check_manifest(doc)
        base_dir = base_dir or "."
    entries = doc["sequences"]
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(lambda e: _score_one(e, cfg, base_dir), entries))
    else:
        results = [_score_one(e, cfg, base_dir) for e in entries]
    return build_report(results, cfg.threshold)


def error_rates(scores, is_live, threshold):
    """(FAR, FRR) of accepting every score >= threshold."""
    scores = np.asarray(scores, dtype=np.float64)
    is_live = np.asarray(is_live, dtype=bool)
    accepted = scores >= threshold
    far = float(accepted[~is_live].mean()) if (~is_live).any() else 0.0
    frr = float((~accepted[is_live]).mean()) if is_live.any() else 0.0
    return far, frr


def candidate_thresholds(scores):
    """Lowest score (accept everything) plus every midpoint of unique scores."""
    u = np.unique(np.asarray(scores, dtype=np.float64))
    return np.concatenate([u[:1], (u[:-1] + u[1:]) / 2.0])


def tune_threshold_eer(scores: Sequence[Tuple[float, object]]) -> Tuple[float, float]:
    """Threshold minimising |FAR - FRR| and the EER estimate (FAR + FRR) / 2 there.

    ``scores`` pairs each crisp value with its label: a manifest label string
    or a bool meaning "is live". Ties go to the lower threshold.
    """
    values = np.array([float(s) for s, _ in scores], dtype=np.float64)
    live = np.array([lab if isinstance(lab, (bool, np.bool_)) else is_live_label(lab)
                     for _, lab in scores], dtype=bool)
    n_live, n_attack = int(live.sum()), int((~live).sum())
    if n_live == 0 or n_attack == 0:
        raise CannotTuneError("EER tuning needs at least one live and one attack score")
    cands = candidate_thresholds(values)
    accepted = values[None, :] >= cands[:, None]
    fa = (accepted & ~live).sum(axis=1)
    fr = (~accepted & live).sum(axis=1)
    # compare |fa/A - fr/L| exactly in integers
    gap = np.abs(fa * n_live - fr * n_attack)
    best = int(np.argmin(gap))
    far, frr = fa[best] / n_attack, fr[best] / n_live
    return float(cands[best]), float((far + frr) / 2.0)
