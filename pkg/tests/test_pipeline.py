import json
import os
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fuzzylive.config import PipelineConfig, config_from_dict, load_config
from fuzzylive.errors import CannotTuneError, ConfigError, ManifestError, StageError
from fuzzylive.fuzzy_core import Term, default_variables
from fuzzylive.motion import MovementDetectorConfig
from fuzzylive.pipeline import (
    Verdict,
    candidate_thresholds,
    decide,
    error_rates,
    evaluate,
    find_sequence,
    infer,
    load_manifest,
    score_sequence,
    tune_threshold_eer,
)
from fuzzylive.rule_dsl import BASE_RULES, load_rules, parse_rules

import oracles

BASE_CFG = PipelineConfig(rules=parse_rules(BASE_RULES))
OUTPUT_MFS = {t: mf.as_tuple() for t, mf in default_variables()["output"].terms.items()}


def precomputed_entry(seq_id, label, c_eye, c_mouth, psi, n=20):
    return {"id": seq_id, "label": label, "psi": psi, "movement_flags": {
        "eye": [1] * c_eye + [0] * (n - 1 - c_eye),
        "mouth": [1] * c_mouth + [0] * (n - 1 - c_mouth)}}


PRECOMPUTED = PipelineConfig(rules=parse_rules(BASE_RULES),
                             detector=MovementDetectorConfig(detector="precomputed"))


def test_worked_example_end_to_end():
    score = infer(15, 10, 20, 400, BASE_CFG)
    assert [(a.rule_id, a.output_term, a.level) for a in score.trace] == [(2, Term.GOOD, 0.64)]
    assert score.crisp == pytest.approx(oracles.dense_cog([(Term.GOOD, 0.64)], OUTPUT_MFS), abs=1e-3)
    assert score.label is Term.GOOD
    assert decide(score, 0.5).verdict is Verdict.LIVE


def test_worked_example_through_manifest_entry():
    entry = precomputed_entry("x", "live", 15, 10, 400)
    score = score_sequence(entry, PRECOMPUTED)
    assert score.trace[0].rule_id == 2
    assert score.details.grades == pytest.approx(
        {"eye": 15 / 19, "mouth": 10 / 19, "quality": 0.64}, abs=1e-12)


def test_frozen_glossy_sequence_is_spoof():
    for cfg in (BASE_CFG, PipelineConfig()):
        score = infer(0, 0, 20, 1200, cfg)
        assert score.trace[0].rule_id == 1
        assert all(score.details.labels[v] is Term.POOR for v in ("eye", "mouth", "quality"))
        assert score.label is Term.POOR
        assert decide(score, 0.5).verdict is Verdict.SPOOF


def test_no_rule_fires_falls_back_to_spoof():
    # eye good, mouth poor, quality average: not covered by the base rules
    score = infer(15, 1, 20, 700, BASE_CFG)
    assert score.fallback and score.trace == ()
    assert score.crisp == 0.0 and score.label is Term.POOR
    assert decide(score, 0.0).verdict is Verdict.SPOOF


@settings(max_examples=200)
@given(st.integers(2, 60).flatmap(lambda n: st.tuples(
    st.integers(0, n - 1), st.integers(0, n - 1), st.just(n))),
    st.floats(0, 5000), st.sampled_from(["paper-hybrid", "standard-mamdani"]))
def test_score_bounds_and_live_needs_non_poor_rule(counts, psi, mode):
    c_eye, c_mouth, n = counts
    score = infer(c_eye, c_mouth, n, psi, PipelineConfig(mode=mode))
    assert 0.0 <= score.crisp <= 1.0
    assert score.fallback or score.trace
    if decide(score, 0.5).verdict is Verdict.LIVE:
        assert any(a.output_term is not Term.POOR and a.level > 0 for a in score.trace)


@settings(max_examples=100)
@given(st.lists(st.tuples(st.integers(0, 19), st.integers(0, 19), st.floats(0, 2000)),
                min_size=1, max_size=8),
       st.floats(0, 1), st.floats(0, 1))
def test_decision_monotone_in_threshold(inputs, t1, t2):
    lo, hi = sorted((t1, t2))
    for c_eye, c_mouth, psi in inputs:
        score = infer(c_eye, c_mouth, 20, psi)
        if decide(score, hi).verdict is Verdict.LIVE:
            assert decide(score, lo).verdict is Verdict.LIVE


# --- degraded input --------------------------------------------------------------------

def corpus_entry(manifest_path, seq_id):
    doc, base = load_manifest(manifest_path)
    return json.loads(json.dumps(find_sequence(doc, seq_id))), base


def test_live_sequence_scores_live(small_corpus):
    entry, base = corpus_entry(small_corpus, "live-000")
    assert decide(score_sequence(entry, PipelineConfig(), base), 0.5).verdict is Verdict.LIVE


@pytest.mark.parametrize("damage", ["zero_area", "missing_frame", "bad_bytes", "no_regions"])
def test_degraded_input_never_live(small_corpus, tmp_path, damage):
    entry, base = corpus_entry(small_corpus, "live-000")
    if damage == "zero_area":
        entry["regions"]["eye"] = {"relative": [0.5, 0.5, 0.0, 0.0]}
    elif damage == "missing_frame":
        entry["frames"][3] = "nowhere/f003.pgm"
    elif damage == "bad_bytes":
        bad = tmp_path / "bad.pgm"
        bad.write_bytes(b"P5\n64 64\n255\n" + b"\0" * 10)
        entry["frames"][5] = str(bad)
    else:
        del entry["regions"]
    with pytest.raises(StageError):
        score_sequence(entry, PipelineConfig(), base)
    report = evaluate({"sequences": [entry]}, PipelineConfig(), base)
    assert report.results[0].verdict is Verdict.SPOOF
    assert report.results[0].error
    assert report.frr == 1.0


def test_stage_error_names_stage(small_corpus):
    entry, base = corpus_entry(small_corpus, "live-000")
    entry["frames"] = entry["frames"][:1]
    with pytest.raises(StageError) as err:
        score_sequence(entry, PipelineConfig(), base)
    assert err.value.stage == "load"


# --- evaluation -------------------------------------------------------------------------

def test_all_live_dataset():
    doc = {"sequences": [precomputed_entry(f"l{i}", "live", 15, 12, 300) for i in range(5)]}
    report = evaluate(doc, PRECOMPUTED)
    assert report.frr == 0.0 and report.accuracy == 1.0 and report.eer is None


def test_mixed_counts_match_hand_count():
    rng = random.Random(5)
    entries = []
    for i in range(40):
        label = "live" if i % 2 else rng.choice(["attack:photo-paper", "attack:video-hd"])
        entries.append(precomputed_entry(f"s{i:02d}", label, rng.randint(0, 19),
                                         rng.randint(0, 19), rng.uniform(256, 1300)))
    report = evaluate({"sequences": entries}, PRECOMPUTED)
    scores = {r.seq_id: r for r in report.results}
    ta = fr = fa = tr = 0
    for e in entries:
        accepted = scores[e["id"]].crisp >= 0.5 and not scores[e["id"]].score.fallback
        if e["label"] == "live":
            ta, fr = ta + accepted, fr + (not accepted)
        else:
            fa, tr = fa + accepted, tr + (not accepted)
    assert (report.true_accept, report.false_reject, report.false_accept, report.true_reject) \
        == (ta, fr, fa, tr)
    assert report.far == fa / (fa + tr)
    assert report.frr == fr / (ta + fr)
    assert 0 <= report.far <= 1 and 0 <= report.frr <= 1


def test_ideal_corpus_report(ideal_corpus):
    report = evaluate(ideal_corpus)
    assert report.far == 0.0 and report.frr == 0.0
    assert all(s.accuracy == 1.0 for s in report.classes.values())
    assert report.ordered_classes() == [
        "live", "attack:photo-laptop", "attack:photo-paper", "attack:video-hd"]
    table = report.format_table()
    assert "Real person" in table and "100.00" in table


def test_evaluation_is_deterministic_and_parallel_safe(small_corpus):
    serial = evaluate(small_corpus, PipelineConfig())
    again = evaluate(small_corpus, PipelineConfig())
    parallel = evaluate(small_corpus, PipelineConfig(workers=4))
    assert serial.to_json() == again.to_json() == parallel.to_json()
    assert serial.to_csv() == parallel.to_csv()
    assert [r.seq_id for r in serial.results] == sorted(r.seq_id for r in serial.results)


def test_psi_frame_choice(small_corpus):
    entry, base = corpus_entry(small_corpus, "photo-paper-000")
    median = score_sequence(entry, PipelineConfig(), base).details.counts["quality"]
    mean = score_sequence(entry, PipelineConfig(psi_frame="mean"), base).details.counts["quality"]
    assert median == pytest.approx(entry["truth"]["psi"])
    assert mean != median


def test_manifest_validation(tmp_path):
    bad = [
        {"sequences": []},
        {"sequences": [{"id": "a", "label": "human"}]},
        {"sequences": [{"id": "a", "label": "live"}, {"id": "a", "label": "live"}]},
        {"items": []},
    ]
    for doc in bad:
        with pytest.raises(ManifestError):
            evaluate(doc)
    path = tmp_path / "m.json"
    path.write_text("{not json")
    with pytest.raises(ManifestError):
        load_manifest(path)
    with pytest.raises(ManifestError):
        load_manifest(tmp_path / "absent.json")
    with pytest.raises(ManifestError):
        find_sequence({"sequences": []}, "x")


# --- threshold tuning --------------------------------------------------------------------

def test_separable_scores_have_zero_eer():
    scores = [(0.1, False), (0.2, False), (0.29, False), (0.71, True), (0.9, True)]
    threshold, eer = tune_threshold_eer(scores)
    assert eer == 0.0
    assert 0.29 < threshold < 0.71


def test_identical_scores_degenerate_point():
    scores = [(0.4, "live")] * 3 + [(0.4, "attack:photo-paper")] * 5
    threshold, _ = tune_threshold_eer(scores)
    far, frr = error_rates([0.4] * 8, [True] * 3 + [False] * 5, threshold)
    assert far + frr == 1.0


def test_single_class_cannot_tune():
    with pytest.raises(CannotTuneError):
        tune_threshold_eer([(0.3, True), (0.5, True)])


def test_candidates_include_lowest_score_and_midpoints():
    assert candidate_thresholds([0.5, 0.1, 0.3, 0.3]).tolist() == pytest.approx([0.1, 0.2, 0.4])


@pytest.mark.parametrize("seed", range(20))
def test_tuner_beats_midpoint_sweep(seed):
    rng = np.random.default_rng(seed)
    live = rng.normal(0.6, 0.15, 30).clip(0, 1).round(2)
    attack = rng.normal(0.45, 0.15, 40).clip(0, 1).round(2)
    scores = live.tolist() + attack.tolist()
    labels = [True] * 30 + [False] * 40
    threshold, eer = tune_threshold_eer(list(zip(scores, labels)))
    far, frr = oracles.rates(scores, labels, threshold)
    assert eer == pytest.approx((far + frr) / 2)
    for t in oracles.midpoint_sweep(scores, labels):
        f, r = oracles.rates(scores, labels, t)
        assert abs(far - frr) <= abs(f - r) + 1e-12


# --- configuration -----------------------------------------------------------------------

def test_config_defaults_and_validation():
    cfg = PipelineConfig()
    assert cfg.threshold == 0.5 and cfg.cog_step == 0.001 and cfg.normalize_to == 4096
    for kwargs in ({"threshold": 1.5}, {"cog_step": 0}, {"histogram_operand": "hog"},
                   {"psi_frame": "first"}, {"workers": 0}, {"normalize_to": -1}):
        with pytest.raises(ConfigError):
            PipelineConfig(**kwargs)


def test_config_from_toml(tmp_path, monkeypatch):
    (tmp_path / "rules.txt").write_text(BASE_RULES)
    (tmp_path / "cfg.toml").write_text("""
mode = "standard-mamdani"
threshold = 0.55
rule_file = "rules.txt"

[texture]
half_width = 6
window = [10, 40]
frame = "mean"
normalize_to = 0

[detector]
kind = "precomputed"
block_size = 8

[variables.quality]
domain = [0, 2000]
good = [0, 0, 500, 700]
average = [500, 700, 900, 1100]
poor = [900, 1100, 2000, 2000]

[evaluate]
workers = 3
""")
    cfg = load_config(tmp_path / "cfg.toml")
    assert cfg.mode.value == "standard-mamdani" and cfg.threshold == 0.55
    assert len(cfg.rules) == 3 and cfg.rule_file.endswith("rules.txt")
    assert (cfg.window.k, cfg.window.l, cfg.window_half_width) == (10, 40, 6)
    assert cfg.normalize_to is None and cfg.psi_frame == "mean"
    assert cfg.detector.detector.value == "precomputed" and cfg.detector.block_size == 8
    assert cfg.variables["quality"].domain == (0, 2000)
    assert cfg.workers == 3
    monkeypatch.setenv("FUZZYLIVE_CONFIG", str(tmp_path / "cfg.toml"))
    assert load_config().threshold == 0.55
    monkeypatch.delenv("FUZZYLIVE_CONFIG")
    assert load_config().threshold == 0.5


@pytest.mark.parametrize("doc", [
    {"threshold": 2},
    {"mode": "sugeno"},
    {"texture": "lbp"},
    {"rule_file": "absent.txt"},
    {"variables": {"quality": {"domain": [0, 10], "good": [0, 0, 1, 2]}}},
    {"variables": {"quality": {"domain": [0, 10], "good": [5, 0, 1, 2],
                               "average": [0, 1, 2, 3], "poor": [2, 3, 10, 10]}}},
])
def test_config_errors(tmp_path, doc):
    with pytest.raises(ConfigError):
        config_from_dict(doc, tmp_path)


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.toml")
    (tmp_path / "bad.toml").write_text("threshold = = 1")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.toml")


CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def test_shipped_config_documents_the_defaults():
    shipped, default = load_config(os.path.join(CONFIGS, "default.toml")), PipelineConfig()
    for name in ("mode", "threshold", "cog_step", "window", "window_half_width", "normalize_to",
                 "histogram_operand", "psi_frame", "detector", "workers", "rules"):
        assert getattr(shipped, name) == getattr(default, name), name
    assert {n: v.terms for n, v in shipped.variables.items()} \
        == {n: v.terms for n, v in default.variables.items()}


def test_shipped_rule_file_is_the_base_rulebase():
    assert load_rules(os.path.join(CONFIGS, "rules.txt")) == parse_rules(BASE_RULES)
