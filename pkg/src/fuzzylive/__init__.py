"""Fuzzy expert system for face liveness detection."""

from .config import PipelineConfig, load_config
from .fuzzy_core import (
    InferenceMode,
    LinguisticVariable,
    Term,
    TrapezoidalMF,
    aggregate,
    classify_term,
    default_variables,
    defuzzify_cog,
    evaluate_rule,
    fuzzify_movement,
    fuzzify_quality,
    mf_eval,
)
from .pipeline import Verdict, decide, evaluate, infer, score_sequence, tune_threshold_eer
from .rule_dsl import format_rules, parse_rules, validate_rulebase
from .texture import GrayImage, histogram, homogeneity, lbp_transform

__all__ = [
    "GrayImage",
    "InferenceMode",
    "LinguisticVariable",
    "PipelineConfig",
    "Term",
    "TrapezoidalMF",
    "Verdict",
    "aggregate",
    "classify_term",
    "decide",
    "default_variables",
    "defuzzify_cog",
    "evaluate",
    "evaluate_rule",
    "format_rules",
    "fuzzify_movement",
    "fuzzify_quality",
    "histogram",
    "homogeneity",
    "infer",
    "lbp_transform",
    "load_config",
    "mf_eval",
    "parse_rules",
    "score_sequence",
    "tune_threshold_eer",
    "validate_rulebase",
]

__version__ = "0.1.0"
