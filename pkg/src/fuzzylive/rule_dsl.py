"""Text format for rule bases.

One rule per line, ``#`` starts a comment, keywords are case-insensitive::

    IF eye IS good OR mouth IS good AND quality IS good THEN output IS good

AND and OR have equal precedence and associate to the left, so the rule
above reads ``(eye OR mouth) AND quality``. Parentheses override that.
Multi-word variable phrases ("eye movement") are mapped to identifiers
through an alias table before parsing.
"""

import itertools
import re
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

from .errors import (
    DuplicateAntecedentError,
    EmptyRuleBaseError,
    RuleSyntaxError,
    UnknownTermError,
)
from .fuzzy_core import AND, OR, Leaf, Node, Rule, Term, leaves

DEFAULT_ALIASES = {
    "eye movement": "eye",
    "mouth movement": "mouth",
    "image quality": "quality",
    "face texture": "quality",
}

KEYWORDS = {"if", "then", "is", "and", "or"}
MAX_NESTING = 100

BASE_RULES = """\
IF eye IS poor AND mouth IS poor THEN output IS poor
IF eye IS good OR mouth IS good AND quality IS good THEN output IS good
IF eye IS good OR mouth IS poor AND quality IS good THEN output IS good
"""

# Rules 1-3 are the base rulebase; the rest are this package's extension so
# that video replays and degraded captures land somewhere deliberate.
DEFAULT_RULES = BASE_RULES + """\
IF quality IS poor THEN output IS poor
IF eye IS good AND mouth IS good AND quality IS average THEN output IS good
IF eye IS good AND mouth IS average AND quality IS good THEN output IS good
IF eye IS average AND mouth IS good AND quality IS good THEN output IS good
IF eye IS average AND mouth IS average THEN output IS average
IF eye IS poor AND mouth IS average THEN output IS poor
IF eye IS average AND mouth IS poor THEN output IS poor
"""


@dataclass(frozen=True)
class Token:
    kind: str  # keyword name, IDENT, LPAREN, RPAREN, DOT, EOL
    text: str
    line: int
    column: int


@dataclass(frozen=True)
class RuleBase:
    rules: Tuple[Rule, ...]
    variables: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        if not self.variables:
            names = []
            for rule in self.rules:
                for leaf in leaves(rule.antecedent):
                    if leaf.variable not in names:
                        names.append(leaf.variable)
            object.__setattr__(self, "variables", tuple(names))

    def __len__(self):
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)


_WORD = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_SPACE = re.compile(r"[ \t\f\v]+")


def _alias_patterns(aliases):
    patterns = []
    for phrase, ident in aliases.items():
        words = phrase.lower().split()
        if len(words) < 2:
            continue
        rx = re.compile(r"\s+".join(re.escape(w) for w in words) + r"(?![A-Za-z0-9_])",
                        re.IGNORECASE)
        patterns.append((len(words), rx, ident.lower()))
    patterns.sort(key=lambda p: -p[0])
    return patterns


def tokenize_line(text, line_no, aliases=None):
    patterns = _alias_patterns(DEFAULT_ALIASES if aliases is None else aliases)
    tokens = []
    pos = 0
    while pos < len(text):
        ch = text[pos]
        col = pos + 1
        if ch == "#":
            break
        m = _SPACE.match(text, pos)
        if m:
            pos = m.end()
            continue
        if ch == "(":
            tokens.append(Token("LPAREN", ch, line_no, col))
        elif ch == ")":
            tokens.append(Token("RPAREN", ch, line_no, col))
        elif ch == ".":
            tokens.append(Token("DOT", ch, line_no, col))
        elif _WORD.match(text, pos):
            for _, rx, ident in patterns:
                am = rx.match(text, pos)
                if am:
                    tokens.append(Token("IDENT", ident, line_no, col))
                    pos = am.end()
                    break
            else:
                word = _WORD.match(text, pos).group().lower()
                kind = word.upper() if word in KEYWORDS else "IDENT"
                tokens.append(Token(kind, word, line_no, col))
                pos += len(word)
            continue
        else:
            raise RuleSyntaxError(f"unexpected character {ch!r}", line_no, col)
        pos += 1
    tokens.append(Token("EOL", "", line_no, len(text) + 1))
    return tokens


class _LineParser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0
        self.depth = 0

    @property
    def tok(self):
        return self.tokens[self.pos]

    def fail(self, message, tok=None, cls=RuleSyntaxError):
        tok = tok or self.tok
        raise cls(message, tok.line, tok.column)

    def expect(self, kind):
        tok = self.tok
        if tok.kind != kind:
            found = "end of line" if tok.kind == "EOL" else repr(tok.text)
            self.fail(f"expected {kind}, found {found}")
        self.pos += 1
        return tok

    def term(self):
        tok = self.tok
        if tok.kind != "IDENT":
            self.expect("term")
        self.pos += 1
        try:
            return Term.parse(tok.text)
        except ValueError:
            self.fail(f"unknown term {tok.text!r} (expected poor, average or good)",
                      tok, UnknownTermError)

    def atom(self):
        if self.tok.kind == "LPAREN":
            if self.depth >= MAX_NESTING:
                self.fail(f"parentheses nested deeper than {MAX_NESTING}")
            self.pos += 1
            self.depth += 1
            expr = self.expr()
            self.expect("RPAREN")
            self.depth -= 1
            if isinstance(expr, Node):
                expr = Node(expr.op, expr.left, expr.right, parens=True)
            return expr
        name = self.expect("IDENT").text
        self.expect("IS")
        return Leaf(name, self.term())

    def expr(self):
        left = self.atom()
        while self.tok.kind in (AND, OR):
            op = self.tok.kind
            self.pos += 1
            left = Node(op, left, self.atom())
        return left

    def rule(self, rule_id):
        self.expect("IF")
        antecedent = self.expr()
        self.expect("THEN")
        out = self.expect("IDENT").text
        self.expect("IS")
        term = self.term()
        if self.tok.kind == "DOT":
            self.pos += 1
        self.expect("EOL")
        return Rule(rule_id, antecedent, (out, term))


def _decode(data):
    if isinstance(data, str):
        return data
    try:
        return bytes(data).decode("utf-8")
    except UnicodeDecodeError as exc:
        before = bytes(data)[:exc.start]
        line = before.count(b"\n") + 1
        column = exc.start - (before.rfind(b"\n") + 1) + 1
        raise RuleSyntaxError("invalid UTF-8 byte", line, column) from None


def parse_rules(text, aliases: Optional[Mapping[str, str]] = None) -> RuleBase:
    """Parse rule text (str or UTF-8 bytes) into a RuleBase."""
    text = _decode(text)
    rules: List[Rule] = []
    seen: Dict[object, int] = {}
    for line_no, line in enumerate(text.split("\n"), start=1):
        if line.endswith("\r"):
            line = line[:-1]
        tokens = tokenize_line(line, line_no, aliases)
        if tokens[0].kind == "EOL":
            continue
        rule = _LineParser(tokens).rule(len(rules) + 1)
        if rule.antecedent in seen:
            raise DuplicateAntecedentError(
                f"antecedent repeats rule {seen[rule.antecedent]}", line_no, tokens[0].column)
        seen[rule.antecedent] = rule.rule_id
        rules.append(rule)
    if not rules:
        raise EmptyRuleBaseError("no rules found", 1, 1)
    return RuleBase(tuple(rules))


def load_rules(path, aliases=None):
    with open(path, "rb") as fh:
        return parse_rules(fh.read(), aliases)


def format_expr(expr):
    if isinstance(expr, Leaf):
        return f"{expr.variable} IS {expr.term}"
    right = format_expr(expr.right)
    if isinstance(expr.right, Node):
        right = f"({right})"
    return f"{format_expr(expr.left)} {expr.op} {right}"


def format_rule(rule):
    var, term = rule.consequent
    return f"IF {format_expr(rule.antecedent)} THEN {var} IS {term}"


def format_rules(rb: RuleBase) -> str:
    return "".join(format_rule(r) + "\n" for r in rb.rules)


@dataclass
class ValidationReport:
    unknown_variables: List[Tuple[int, str]] = field(default_factory=list)
    bad_consequents: List[Tuple[int, str]] = field(default_factory=list)
    duplicates: List[Tuple[int, int]] = field(default_factory=list)
    input_names: Tuple[str, ...] = ()
    uncovered: List[Tuple[Term, ...]] = field(default_factory=list)

    @property
    def ok(self):
        return not (self.unknown_variables or self.bad_consequents or self.duplicates)

    def to_dict(self):
        return {
            "ok": self.ok,
            "unknown_variables": [{"rule": r, "name": n} for r, n in self.unknown_variables],
            "bad_consequents": [{"rule": r, "name": n} for r, n in self.bad_consequents],
            "duplicates": [{"rule": b, "repeats": a} for a, b in self.duplicates],
            "inputs": list(self.input_names),
            "uncovered": [[str(t) for t in combo] for combo in self.uncovered],
        }

    def format(self):
        lines = []
        for rule_id, name in self.unknown_variables:
            lines.append(f"error: rule {rule_id}: unknown variable {name!r}")
        for rule_id, name in self.bad_consequents:
            lines.append(f"error: rule {rule_id}: consequent names {name!r}, not the output")
        for first, again in self.duplicates:
            lines.append(f"error: rule {again}: antecedent duplicates rule {first}")
        total = 3 ** len(self.input_names)
        lines.append(f"coverage: {total - len(self.uncovered)}/{total} label combinations "
                     f"over ({', '.join(self.input_names)}) matched by some rule")
        for combo in self.uncovered:
            lines.append("  uncovered: " + ", ".join(
                f"{n}={t}" for n, t in zip(self.input_names, combo)))
        lines.append("OK" if self.ok else "INVALID")
        return "\n".join(lines)


def rule_matches(rule, labels):
    """True when every leaf's term equals the label of its variable."""
    return all(labels.get(leaf.variable) == leaf.term for leaf in leaves(rule.antecedent))


def validate_rulebase(rb: RuleBase, variables, output: str = "output") -> ValidationReport:
    names = tuple(n for n in variables if n != output)
    report = ValidationReport(input_names=names)
    first_seen = {}
    for rule in rb.rules:
        for leaf in leaves(rule.antecedent):
            if leaf.variable not in names and (rule.rule_id, leaf.variable) not in report.unknown_variables:
                report.unknown_variables.append((rule.rule_id, leaf.variable))
        if rule.consequent[0] != output:
            report.bad_consequents.append((rule.rule_id, rule.consequent[0]))
        if rule.antecedent in first_seen:
            report.duplicates.append((first_seen[rule.antecedent], rule.rule_id))
        else:
            first_seen[rule.antecedent] = rule.rule_id
    for combo in itertools.product(Term, repeat=len(names)):
        labels = dict(zip(names, combo))
        if not any(rule_matches(r, labels) for r in rb.rules):
            report.uncovered.append(combo)
    return report
