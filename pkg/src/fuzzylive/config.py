"""Pipeline configuration and its TOML file form."""

import os
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .fuzzy_core import (
    DEFAULT_COG_STEP,
    InferenceMode,
    LinguisticVariable,
    Term,
    TrapezoidalMF,
    default_variables,
)
from .motion import MovementDetectorConfig
from .rule_dsl import DEFAULT_ALIASES, DEFAULT_RULES, RuleBase, load_rules, parse_rules
from .texture import DEFAULT_HALF_WIDTH, DEFAULT_NORMALIZE_TO, OPERANDS, HomogeneityWindow

CONFIG_ENV = "FUZZYLIVE_CONFIG"
PSI_FRAME_CHOICES = ("median", "mean")
INPUT_NAMES = ("eye", "mouth", "quality")


def _default_rules():
    return parse_rules(DEFAULT_RULES)


@dataclass(frozen=True)
class PipelineConfig:
    mode: InferenceMode = InferenceMode.PAPER_HYBRID
    variables: Mapping[str, LinguisticVariable] = field(default_factory=default_variables)
    rules: RuleBase = field(default_factory=_default_rules)
    rule_file: Optional[str] = None
    cog_step: float = DEFAULT_COG_STEP
    window: Optional[HomogeneityWindow] = None  # None: peak window
    window_half_width: int = DEFAULT_HALF_WIDTH
    normalize_to: Optional[float] = DEFAULT_NORMALIZE_TO
    histogram_operand: str = "lbp"
    psi_frame: str = "median"
    detector: MovementDetectorConfig = field(default_factory=MovementDetectorConfig)
    threshold: float = 0.5
    aliases: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_ALIASES))
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "mode", InferenceMode.parse(self.mode))
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError(f"threshold must lie in [0, 1], got {self.threshold}")
        if not self.cog_step > 0:
            raise ConfigError(f"cog_step must be > 0, got {self.cog_step}")
        if self.histogram_operand not in OPERANDS:
            raise ConfigError(f"histogram operand must be one of {OPERANDS}")
        if self.psi_frame not in PSI_FRAME_CHOICES:
            raise ConfigError(f"psi frame must be one of {PSI_FRAME_CHOICES}")
        if self.normalize_to is not None and self.normalize_to <= 0:
            raise ConfigError("normalize_to must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        missing = [n for n in INPUT_NAMES + ("output",) if n not in self.variables]
        if missing:
            raise ConfigError(f"missing linguistic variables: {missing}")

    def with_threshold(self, threshold):
        return replace(self, threshold=threshold)


def _section(doc, name):
    value = doc.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{name}] must be a table")
    return value


def _variables(doc):
    variables = default_variables()
    for name, spec in _section(doc, "variables").items():
        if not isinstance(spec, dict):
            raise ConfigError(f"[variables.{name}] must be a table")
        try:
            domain = tuple(spec.get("domain", variables[name].domain if name in variables else ()))
            terms = {Term.parse(t): TrapezoidalMF(*(float(v) for v in spec[t]))
                     for t in ("poor", "average", "good")}
            variables[name] = LinguisticVariable(name, domain, terms)
        except KeyError as exc:
            raise ConfigError(f"[variables.{name}] needs domain, poor, average and good ({exc})") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[variables.{name}]: {exc}") from None
    return variables


def config_from_dict(doc, base_dir="."):
    """Build a PipelineConfig from a parsed TOML document."""
    texture = _section(doc, "texture")
    detector = _section(doc, "detector")
    aliases = dict(DEFAULT_ALIASES)
    aliases.update(_section(doc, "aliases"))
    try:
        rule_file = doc.get("rule_file")
        if rule_file is not None:
            rule_file = os.path.join(base_dir, rule_file)
            rules = load_rules(rule_file, aliases)
        else:
            rules = parse_rules(DEFAULT_RULES, aliases)
        window = texture.get("window")
        if window is not None:
            window = HomogeneityWindow(*(int(v) for v in window))
        normalize_to = texture.get("normalize_to", DEFAULT_NORMALIZE_TO)
        if normalize_to in (0, False):
            normalize_to = None
        return PipelineConfig(
            mode=InferenceMode.parse(doc.get("mode", InferenceMode.PAPER_HYBRID)),
            variables=_variables(doc),
            rules=rules,
            rule_file=rule_file,
            cog_step=float(doc.get("cog_step", DEFAULT_COG_STEP)),
            window=window,
            window_half_width=int(texture.get("half_width", DEFAULT_HALF_WIDTH)),
            normalize_to=normalize_to,
            histogram_operand=texture.get("operand", "lbp"),
            psi_frame=texture.get("frame", "median"),
            detector=MovementDetectorConfig(
                detector=detector.get("kind", "block-difference"),
                mismatch_threshold=float(detector.get("mismatch_threshold", 0.12)),
                block_size=int(detector.get("block_size", 4)),
            ),
            threshold=float(doc.get("threshold", 0.5)),
            aliases=aliases,
            workers=int(_section(doc, "evaluate").get("workers", 1)),
        )
    except ConfigError:
        raise
    except (OSError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path=None):
    """Load a config file; ``None`` falls back to $FUZZYLIVE_CONFIG, then defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return PipelineConfig()
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(doc, os.path.dirname(os.path.abspath(path)))
