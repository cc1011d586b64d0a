"""Command-line interface: ``fuzzylive <subcommand> ...``.

Exit status: 0 success, 1 usage error, 2 data error, 3 spoof decision
under ``score --strict``.
"""

import argparse
import csv
import io
import json
import sys
from dataclasses import replace

from . import __version__
from .config import CONFIG_ENV, load_config
from .errors import FuzzyLiveError, StageError
from .fuzzy_core import AND, InferenceMode, Leaf, Term, mf_eval
from .pipeline import (
    LivenessScore,
    decide,
    evaluate,
    find_sequence,
    infer,
    load_manifest,
    score_sequence,
    tune_threshold_eer,
)
from .rule_dsl import format_rule, load_rules, validate_rulebase
from .synth import CorpusSpec, synth_generate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SPOOF = 0, 1, 2, 3
DISPLAY = {"eye": "eye movement", "mouth": "mouth movement", "quality": "image quality"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _csv(rows):
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _json(doc):
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _config(args):
    cfg = load_config(args.config)
    if getattr(args, "threshold", None) is not None:
        cfg = cfg.with_threshold(args.threshold)
    return cfg


# --- score --------------------------------------------------------------------

def _format_score(seq_id, decision, threshold, error=None):
    score = decision.score
    lines = [f"sequence {seq_id}: {decision.verdict.value.upper()} "
             f"(crisp {score.crisp:.4f} vs threshold {threshold:.2f}, output {score.label})"]
    if error:
        lines.append(f"  failed: {error}")
    if score.details is not None:
        d = score.details
        for name in ("eye", "mouth", "quality"):
            lines.append(f"  {DISPLAY[name]:<15} {d.counts[name]:>8g}  grade {d.grades[name]:.2f}"
                         f"  label {d.labels[name]}")
    if score.fallback:
        lines.append("  no rule produced output: fail-safe reject")
    for act in score.trace:
        lines.append(f"  fired rule {act.rule_id} -> {act.output_term} at {act.level:.2f}")
    return "\n".join(lines) + "\n"


def cmd_score(args, out):
    cfg = _config(args)
    doc, base_dir = load_manifest(args.manifest)
    entry = find_sequence(doc, args.sequence)
    error = None
    try:
        score = score_sequence(entry, cfg, base_dir)
    except StageError as exc:
        error = str(exc)
        score = LivenessScore(0.0, Term.POOR, (), fallback=True)
    decision = decide(score, cfg.threshold)
    if args.format == "json":
        body = score.to_dict()
        body.update(id=args.sequence, decision=decision.verdict.value,
                    threshold=cfg.threshold, error=error)
        out.write(_json(body))
    elif args.format == "csv":
        out.write(_csv([["id", "crisp", "output", "decision", "fired", "error"],
                        [args.sequence, repr(score.crisp), str(score.label),
                         decision.verdict.value,
                         ";".join(f"{a.rule_id}:{a.level!r}" for a in score.trace),
                         error or ""]]))
    else:
        out.write(_format_score(args.sequence, decision, cfg.threshold, error))
    if error:
        print(f"fuzzylive: {error}", file=sys.stderr)
        return EXIT_DATA
    if args.strict and decision.verdict.value == "spoof":
        return EXIT_SPOOF
    return EXIT_OK


# --- evaluate / tune ----------------------------------------------------------

def cmd_evaluate(args, out):
    cfg = _config(args)
    if args.workers:
        cfg = replace(cfg, workers=args.workers)
    report = evaluate(args.manifest, cfg)
    if args.format == "json":
        out.write(report.to_json())
    elif args.format == "csv":
        out.write(report.to_csv())
    else:
        out.write(report.format_table())
    return EXIT_OK


def cmd_tune(args, out):
    cfg = _config(args)
    report = evaluate(args.manifest, cfg)
    threshold, eer = tune_threshold_eer([(r.crisp, r.label) for r in report.results])
    if args.format == "json":
        out.write(_json({"threshold": threshold, "eer": eer, "sequences": len(report.results)}))
    elif args.format == "csv":
        out.write(_csv([["threshold", "eer"], [repr(threshold), repr(eer)]]))
    else:
        out.write(f"EER threshold {threshold:.4f} (EER {eer:.4f} over "
                  f"{len(report.results)} sequences)\n")
    return EXIT_OK


# --- gen-synthetic --------------------------------------------------------------

def cmd_gen(args, out):
    spec = CorpusSpec.load(args.spec) if args.spec else CorpusSpec()
    manifest = synth_generate(spec, args.seed, args.out)
    n = len(manifest["sequences"])
    if args.format == "json":
        out.write(_json({"out": args.out, "sequences": n, "seed": args.seed}))
    elif args.format == "csv":
        out.write(_csv([["out", "sequences", "seed"], [args.out, n, args.seed]]))
    else:
        out.write(f"wrote {n} sequences to {args.out}/manifest.json (seed {args.seed})\n")
    return EXIT_OK


# --- explain ------------------------------------------------------------------

def _composition(expr, grade):
    if isinstance(expr, Leaf):
        return f"{grade(expr):.2f}"
    fn = "min" if expr.op == AND else "max"
    return f"{fn}({_composition(expr.left, grade)}, {_composition(expr.right, grade)})"


def explain_text(score, cfg):
    d = score.details
    lines = ["Fuzzification"]
    n = d.frames
    for name in ("eye", "mouth"):
        c = d.counts[name]
        lines.append(f"  {DISPLAY[name]:<15} c={c:g}, n={n}: mu = {c:g}/{n - 1} = "
                     f"{d.grades[name]:.2f}  -> {d.labels[name]}")
    psi = d.counts["quality"]
    formula = f"256/{psi:g}" if psi > 256 else "1 (psi <= 256)"
    lines.append(f"  {DISPLAY['quality']:<15} psi={psi:g}: mu = {formula} = "
                 f"{d.grades['quality']:.2f}  -> {d.labels['quality']}")
    lines.append(f"Rule firing ({cfg.mode.value})")
    rules = {r.rule_id: r for r in cfg.rules}
    if cfg.mode is InferenceMode.PAPER_HYBRID:
        def grade(leaf):
            return d.grades[leaf.variable]
    else:
        def grade(leaf):
            return mf_eval(cfg.variables[leaf.variable].terms[leaf.term], d.inputs[leaf.variable])
    if not score.trace:
        lines.append("  no rule fired")
    for act in score.trace:
        rule = rules[act.rule_id]
        lines.append(f"  rule {act.rule_id}: {format_rule(rule)}")
        lines.append(f"    {_composition(rule.antecedent, grade)} = {act.level:.2f}"
                     f"  -> output {act.output_term}")
    agg = d.aggregated
    lines.append("Aggregation (clip each consequent, then pointwise max)")
    for act in score.trace:
        mf = cfg.variables["output"].terms[act.output_term]
        lines.append(f"  output {act.output_term} clipped at {act.level:.2f} "
                     f"over [{mf.a:.2f}, {mf.d:.2f}]")
    nz = agg.xs[agg.mu > 0]
    if nz.size:
        lines.append(f"  aggregate region [{nz[0]:.3f}, {nz[-1]:.3f}], peak {agg.mu.max():.2f}, "
                     f"{agg.xs.size} samples at step {agg.step:g}")
    lines.append("Defuzzification (centre of gravity)")
    if score.fallback:
        lines.append("  aggregate is empty: fail-safe crisp 0.00")
    else:
        lines.append(f"  COG = sum(mu(x) * x) / sum(mu(x)) = {score.crisp:.2f}  -> output {score.label}")
    decision = decide(score, cfg.threshold)
    lines.append(f"Decision at threshold {cfg.threshold:.2f}: {decision.verdict.value.upper()}")
    return "\n".join(lines) + "\n"


def cmd_explain(args, out):
    cfg = _config(args)
    if args.rules:
        cfg = replace(cfg, rules=load_rules(args.rules, cfg.aliases), rule_file=args.rules)
    if args.mode:
        cfg = replace(cfg, mode=InferenceMode.parse(args.mode))
    score = infer(args.eye, args.mouth, args.frames, args.psi, cfg)
    decision = decide(score, cfg.threshold)
    if args.format == "json":
        body = score.to_dict()
        body.update(decision=decision.verdict.value, threshold=cfg.threshold,
                    mode=cfg.mode.value)
        out.write(_json(body))
    elif args.format == "csv":
        d = score.details
        rows = [["stage", "name", "value", "label"]]
        for name in ("eye", "mouth", "quality"):
            rows.append(["fuzzify", name, repr(d.grades[name]), str(d.labels[name])])
        for act in score.trace:
            rows.append(["rule", act.rule_id, repr(act.level), str(act.output_term)])
        rows.append(["cog", "output", repr(score.crisp), str(score.label)])
        rows.append(["decision", "threshold", repr(cfg.threshold), decision.verdict.value])
        out.write(_csv(rows))
    else:
        out.write(explain_text(score, cfg))
    return EXIT_OK


# --- validate-rules -------------------------------------------------------------

def cmd_validate(args, out):
    cfg = _config(args)
    rb = load_rules(args.rules, cfg.aliases)
    report = validate_rulebase(rb, cfg.variables)
    if args.format == "json":
        out.write(_json(report.to_dict()))
    elif args.format == "csv":
        rows = [["kind", "detail"]]
        rows += [["unknown-variable", f"rule {r}: {n}"] for r, n in report.unknown_variables]
        rows += [["bad-consequent", f"rule {r}: {n}"] for r, n in report.bad_consequents]
        rows += [["duplicate", f"rule {b} repeats {a}"] for a, b in report.duplicates]
        rows += [["uncovered", " ".join(f"{n}={t}" for n, t in zip(report.input_names, c))]
                 for c in report.uncovered]
        out.write(_csv(rows))
    else:
        out.write(f"{len(rb)} rules\n")
        for rule in rb:
            out.write(f"  {rule.rule_id}: {format_rule(rule)}\n")
        out.write(report.format() + "\n")
    return EXIT_OK if report.ok else EXIT_DATA


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"pipeline TOML config (default: ${CONFIG_ENV})")
    common.add_argument("--format", choices=("table", "json", "csv"), default="table")

    parser = _Parser(prog="fuzzylive", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("score", parents=[common], help="score one sequence of a manifest")
    p.add_argument("manifest")
    p.add_argument("--sequence", required=True)
    p.add_argument("--threshold", type=float)
    p.add_argument("--strict", action="store_true", help="exit 3 on a spoof decision")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", parents=[common], help="evaluate a labelled manifest")
    p.add_argument("manifest")
    p.add_argument("--threshold", type=float)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("tune", parents=[common], help="pick the EER threshold")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("gen-synthetic", parents=[common], help="write a synthetic corpus")
    p.add_argument("--spec", help="corpus spec (TOML or JSON)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("explain", parents=[common], help="trace inference for raw inputs")
    p.add_argument("--eye", type=int, required=True, help="eye movement count c")
    p.add_argument("--mouth", type=int, required=True, help="mouth movement count c")
    p.add_argument("--frames", type=int, required=True, help="frame count n")
    p.add_argument("--psi", type=float, required=True, help="homogeneity count")
    p.add_argument("--rules", help="rule file (default: configured rules)")
    p.add_argument("--mode", choices=[m.value for m in InferenceMode])
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("validate-rules", parents=[common], help="check a rule file")
    p.add_argument("rules")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    # Render into a buffer so a failure never leaves half a document on stdout.
    buf = io.StringIO()
    try:
        status = args.func(args, buf)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (FuzzyLiveError, OSError, ValueError) as exc:
        print(f"fuzzylive: {exc}", file=sys.stderr)
        return EXIT_DATA
    out.write(buf.getvalue())
    return status


if __name__ == "__main__":
    sys.exit(main())
