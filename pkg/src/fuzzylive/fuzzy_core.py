"""Mamdani-style inference over trapezoidal linguistic variables.

Fuzzification of the raw measurements, term classification, rule
activation (AND = min, OR = max), clip-then-max aggregation and
centre-of-gravity defuzzification.
"""

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from types import MappingProxyType
from typing import Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    InvalidCounterError,
    InvalidFrameCountError,
    InvalidGradeError,
    InvalidHomogeneityError,
    InvalidMembershipFunctionError,
    InvalidStepError,
    InvalidVariableError,
    NoActivationError,
    OutOfDomainError,
    UnknownVariableError,
)

# Ψ at or below this count is a perfect quality grade.
QUALITY_REFERENCE = 256.0
DEFAULT_COG_STEP = 0.001


def check_grade(value):
    """Return ``value`` as a float, raising if it is not a grade in [0, 1]."""
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise InvalidGradeError(f"membership grade {value!r} outside [0, 1]")
    return value


class Term(IntEnum):
    """Linguistic values; the integer order is the fail-safe tie-break order."""

    POOR = 0
    AVERAGE = 1
    GOOD = 2

    @classmethod
    def parse(cls, text):
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown linguistic term {text!r}") from None

    def __str__(self):
        return self.name.lower()


class InferenceMode(Enum):
    PAPER_HYBRID = "paper-hybrid"
    STANDARD_MAMDANI = "standard-mamdani"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("_", "-")
        for mode in cls:
            if mode.value == key:
                return mode
        raise ValueError(f"unknown inference mode {text!r}")


@dataclass(frozen=True)
class TrapezoidalMF:
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if not (self.a <= self.b <= self.c <= self.d):
            raise InvalidMembershipFunctionError(
                f"trapezoid needs a <= b <= c <= d, got {self.as_tuple()}"
            )

    def as_tuple(self):
        return (self.a, self.b, self.c, self.d)

    def __call__(self, x):
        return mf_eval(self, x)

    def sample(self, xs):
        """Vectorised evaluation over an array of points."""
        xs = np.asarray(xs, dtype=np.float64)
        out = np.zeros_like(xs)
        if self.b > self.a:
            m = (xs > self.a) & (xs < self.b)
            out[m] = (xs[m] - self.a) / (self.b - self.a)
        if self.d > self.c:
            m = (xs > self.c) & (xs < self.d)
            out[m] = (self.d - xs[m]) / (self.d - self.c)
        out[(xs >= self.b) & (xs <= self.c)] = 1.0
        return out


def mf_eval(mf, x):
    x = float(x)
    if mf.b <= x <= mf.c:
        return 1.0
    if x <= mf.a or x >= mf.d:
        return 0.0
    if x < mf.b:
        return (x - mf.a) / (mf.b - mf.a)
    return (mf.d - x) / (mf.d - mf.c)


@dataclass(frozen=True, eq=False)
class LinguisticVariable:
    name: str
    domain: Tuple[float, float]
    terms: Mapping[Term, TrapezoidalMF]

    def __post_init__(self):
        lo, hi = (float(v) for v in self.domain)
        if not lo < hi:
            raise InvalidVariableError(f"{self.name}: empty domain {self.domain}")
        terms = {Term(t) if not isinstance(t, str) else Term.parse(t): mf
                 for t, mf in dict(self.terms).items()}
        missing = [t for t in Term if t not in terms]
        if missing:
            raise InvalidVariableError(
                f"{self.name}: missing terms {[str(t) for t in missing]}")
        for t, mf in terms.items():
            if mf.a < lo or mf.d > hi:
                raise InvalidVariableError(
                    f"{self.name}.{t}: support [{mf.a}, {mf.d}] leaves domain [{lo}, {hi}]")
        object.__setattr__(self, "domain", (lo, hi))
        object.__setattr__(
            self, "terms", MappingProxyType({t: terms[t] for t in Term}))
        # Every MF is linear between consecutive breakpoints, so a positive
        # maximum at all breakpoints means positive coverage everywhere.
        points = {lo, hi}
        for mf in terms.values():
            points.update(p for p in mf.as_tuple() if lo <= p <= hi)
        for p in sorted(points):
            if max(mf_eval(mf, p) for mf in terms.values()) <= 0.0:
                raise InvalidVariableError(f"{self.name}: dead zone at {p}")

    def __eq__(self, other):
        if not isinstance(other, LinguisticVariable):
            return NotImplemented
        return (self.name, self.domain, dict(self.terms)) == (
            other.name, other.domain, dict(other.terms))

    def contains(self, x):
        return self.domain[0] <= x <= self.domain[1]

    def clip(self, x):
        return min(max(float(x), self.domain[0]), self.domain[1])

    def grades(self, x):
        return {t: mf_eval(mf, x) for t, mf in self.terms.items()}

    @classmethod
    def from_intervals(cls, name, domain, intervals, touch_width=0.0):
        """Build trapezoids from per-term intervals.

        Overlapping stretches of neighbouring intervals and the gaps between
        them become linear ramps; the rest are plateaus. Intervals that only
        share an endpoint get a ramp of ``touch_width`` ending at that point,
        so the shared point belongs to the upper interval.
        """
        ordered = sorted(
            ((Term.parse(t) if isinstance(t, str) else Term(t), float(lo), float(hi))
             for t, (lo, hi) in ((t, sorted(iv)) for t, iv in intervals.items())),
            key=lambda item: (item[1], item[2]))
        shape = {t: [lo, lo, hi, hi] for t, lo, hi in ordered}
        for (p, _, p_hi), (q, q_lo, _) in zip(ordered, ordered[1:]):
            if q_lo == p_hi:
                start, end = q_lo - touch_width, q_lo
            else:
                start, end = min(q_lo, p_hi), max(q_lo, p_hi)
            shape[p][2], shape[p][3] = start, end
            shape[q][0], shape[q][1] = start, end
        return cls(name, domain, {t: TrapezoidalMF(*v) for t, v in shape.items()})


# --- rule antecedent trees ----------------------------------------------------

AND = "AND"
OR = "OR"


@dataclass(frozen=True)
class Leaf:
    variable: str
    term: Term


@dataclass(frozen=True)
class Node:
    op: str
    left: "Expr"
    right: "Expr"
    # Source had explicit parentheses here; not part of structural identity.
    parens: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.op not in (AND, OR):
            raise ValueError(f"unknown operator {self.op!r}")


Expr = Union[Leaf, Node]


@dataclass(frozen=True)
class Rule:
    rule_id: int
    antecedent: Expr
    consequent: Tuple[str, Term]

    @property
    def output_term(self):
        return self.consequent[1]


def leaves(expr):
    """Leaves of an antecedent tree, left to right."""
    if isinstance(expr, Leaf):
        return [expr]
    return leaves(expr.left) + leaves(expr.right)


def compose(expr, leaf_grade):
    if isinstance(expr, Leaf):
        return leaf_grade(expr)
    left = compose(expr.left, leaf_grade)
    right = compose(expr.right, leaf_grade)
    return min(left, right) if expr.op == AND else max(left, right)


@dataclass(frozen=True)
class RuleActivation:
    rule_id: int
    output_term: Term
    level: float

    def __post_init__(self):
        object.__setattr__(self, "level", check_grade(self.level))


@dataclass(frozen=True, eq=False)
class AggregatedOutput:
    base: Tuple[float, float]
    xs: np.ndarray
    mu: np.ndarray

    @property
    def samples(self):
        return list(zip(self.xs.tolist(), self.mu.tolist()))

    @property
    def step(self):
        return float(self.xs[1] - self.xs[0]) if self.xs.size > 1 else 0.0


# --- operations ---------------------------------------------------------------

def fuzzify_movement(c, n):
    """Movement grade: c movements counted over n frames -> c / (n - 1)."""
    if n < 2:
        raise InvalidFrameCountError(f"need at least 2 frames, got n={n}")
    if c < 0 or c > n - 1:
        raise InvalidCounterError(f"movement counter {c} outside [0, {n - 1}]")
    return c / (n - 1)


def fuzzify_quality(psi):
    """Quality grade: 1 up to a homogeneity of 256, then 256 / psi."""
    if psi < 0:
        raise InvalidHomogeneityError(f"homogeneity must be >= 0, got {psi}")
    if psi <= QUALITY_REFERENCE:
        return 1.0
    return QUALITY_REFERENCE / psi


def classify_term(variable, x):
    if not variable.contains(x):
        raise OutOfDomainError(
            f"{variable.name}: {x} outside domain {list(variable.domain)}")
    grades = variable.grades(x)
    # Term iteration runs POOR -> GOOD, so strict > keeps ties on the lower term.
    best = Term.POOR
    for t in Term:
        if grades[t] > grades[best]:
            best = t
    return best


def evaluate_rule(
    rule: Rule,
    grades: Mapping[str, float],
    labels: Mapping[str, Term],
    mode: InferenceMode = InferenceMode.PAPER_HYBRID,
    *,
    inputs: Optional[Mapping[str, float]] = None,
    variables: Optional[Mapping[str, LinguisticVariable]] = None,
) -> Optional[RuleActivation]:
    """Fire one rule, returning its activation or None.

    PAPER_HYBRID gates the rule on every leaf's term matching the variable's
    classified label, then composes the fuzzified grades. STANDARD_MAMDANI
    composes the leaf terms' own memberships at the raw ``inputs`` and needs
    ``variables``; a zero level counts as not fired.
    """
    mode = InferenceMode.parse(mode)
    tree_leaves = leaves(rule.antecedent)
    if mode is InferenceMode.PAPER_HYBRID:
        for leaf in tree_leaves:
            if leaf.variable not in grades or leaf.variable not in labels:
                raise UnknownVariableError(f"rule {rule.rule_id}: no value for {leaf.variable!r}")
        if any(labels[leaf.variable] != leaf.term for leaf in tree_leaves):
            return None
        level = compose(rule.antecedent, lambda leaf: grades[leaf.variable])
        return RuleActivation(rule.rule_id, rule.output_term, level)

    if inputs is None or variables is None:
        raise ValueError("standard Mamdani mode needs raw inputs and variables")
    for leaf in tree_leaves:
        if leaf.variable not in inputs or leaf.variable not in variables:
            raise UnknownVariableError(f"rule {rule.rule_id}: no value for {leaf.variable!r}")
    level = compose(
        rule.antecedent,
        lambda leaf: mf_eval(variables[leaf.variable].terms[leaf.term], inputs[leaf.variable]))
    if level <= 0.0:
        return None
    return RuleActivation(rule.rule_id, rule.output_term, level)


def sample_grid(domain, step):
    if not step > 0:
        raise InvalidStepError(f"step must be > 0, got {step}")
    lo, hi = domain
    count = int(np.ceil((hi - lo) / step - 1e-9))
    return np.linspace(lo, hi, max(count, 1) + 1)


def aggregate(activations: Sequence[RuleActivation], output_var: LinguisticVariable,
              step: float = DEFAULT_COG_STEP) -> AggregatedOutput:
    xs = sample_grid(output_var.domain, step)
    mu = np.zeros_like(xs)
    for act in activations:
        clipped = np.minimum(act.level, output_var.terms[act.output_term].sample(xs))
        np.maximum(mu, clipped, out=mu)
    xs.flags.writeable = False
    mu.flags.writeable = False
    return AggregatedOutput(output_var.domain, xs, mu)


def defuzzify_cog(agg: AggregatedOutput) -> float:
    mass = float(agg.mu.sum())
    if mass <= 0.0:
        raise NoActivationError("aggregated output is zero everywhere")
    crisp = float((agg.mu * agg.xs).sum() / mass)
    return min(max(crisp, agg.base[0]), agg.base[1])


def default_variables():
    """The three inputs and the output with their default intervals."""
    return {
        "eye": LinguisticVariable.from_intervals(
            "eye", (0, 19), {"poor": (0, 6), "average": (5, 11), "good": (10, 19)},
            touch_width=1.0),
        "mouth": LinguisticVariable.from_intervals(
            "mouth", (0, 19), {"poor": (0, 5), "average": (4, 10), "good": (10, 19)},
            touch_width=1.0),
        "quality": LinguisticVariable.from_intervals(
            "quality", (256, 1300),
            {"poor": (900, 1300), "average": (800, 600), "good": (500, 256)}),
        "output": LinguisticVariable.from_intervals(
            "output", (0, 1), {"poor": (0, 0.4), "average": (0.3, 0.6), "good": (0.5, 1)}),
    }
