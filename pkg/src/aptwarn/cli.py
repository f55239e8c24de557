"""Command-line entry point exposing the pipeline stages as subcommands.

Exit codes: 0 success, 1 usage error, 2 data error (parse/validation),
3 internal invariant violation. Diagnostics go to stderr; data goes to
the requested output files or stdout. All randomness enters through
explicit --seed flags, so identical inputs and flags reproduce identical
data outputs byte for byte (run manifests carry wall-clock timestamps
and are written separately).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass
from datetime import date, datetime, timezone
from pathlib import Path

from . import __version__
from .errors import AptwarnError, ConfigInvalid, DataError, InvariantError, ParseError
from . import evaluation, ingest, learner, synth, warn

USAGE_ERROR = 1
DATA_ERROR = 2
INTERNAL_ERROR = 3


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    """Reproducibility record emitted for every invocation."""

    command: str
    version: str
    config: dict
    input_digests: dict
    seed: object = None
    started: str = ""
    finished: str = ""

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "version": self.version,
            "config": self.config,
            "input_digests": self.input_digests,
            "seed": self.seed,
            "started": self.started,
            "finished": self.finished,
        }


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fp:
        for chunk in iter(lambda: fp.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


_INPUT_FLAGS = ("mentions", "gt", "map", "thread", "rules", "warnings", "gt_train", "gt_test", "config")


def _build_manifest(command: str, args: argparse.Namespace) -> RunManifest:
    snapshot = {
        k: (str(v) if isinstance(v, (Path, date)) else v)
        for k, v in sorted(vars(args).items())
        if k not in ("handler", "command", "manifest") and v is not None
    }
    digests = {}
    for flag in _INPUT_FLAGS:
        value = getattr(args, flag, None)
        if value and Path(str(value)).is_file():
            digests[str(value)] = _sha256_file(Path(str(value)))
    return RunManifest(
        command=command,
        version=__version__,
        config=snapshot,
        input_digests=digests,
        seed=getattr(args, "seed", None),
        started=datetime.now(timezone.utc).isoformat(),
    )


def _finish_manifest(manifest: RunManifest, args: argparse.Namespace) -> None:
    manifest.finished = datetime.now(timezone.utc).isoformat()
    doc = json.dumps(manifest.to_dict(), sort_keys=True)
    print(f"manifest: {doc}", file=sys.stderr)
    target = getattr(args, "manifest", None)
    if target is None:
        out = getattr(args, "out", None)
        if out:
            target = f"{out}.manifest.json"
        elif getattr(args, "out_dir", None):
            target = str(Path(args.out_dir) / "run_manifest.json")
    if target:
        Path(target).write_text(doc + "\n", encoding="utf-8")


def _parse_date(value: str) -> date:
    try:
        return date.fromisoformat(value)
    except ValueError as exc:
        raise ConfigInvalid(f"bad date {value!r}: expected YYYY-MM-DD") from exc


def _parse_delta_range(value) -> tuple:
    """Accept '1..7', '3', or '1,2,5'."""
    if isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    text = str(value).strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(part) for part in text.split(","))


def _write_out(args: argparse.Namespace, writer) -> None:
    out = getattr(args, "out", None)
    if out:
        with open(out, "w", encoding="utf-8") as fp:
            writer(fp)
    else:
        writer(sys.stdout)


def _apply_config_file(args: argparse.Namespace, argv: list) -> None:
    """Fill unset flags from a JSON config file; explicit flags win."""
    if not getattr(args, "config", None):
        return
    try:
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{args.config}: invalid JSON: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{args.config}: expected a JSON object")
    explicit = {tok.split("=", 1)[0] for tok in argv if tok.startswith("--")}
    for key, value in doc.items():
        attr = key.replace("-", "_")
        if f"--{key.replace('_', '-')}" in explicit:
            continue
        if hasattr(args, attr):
            setattr(args, attr, value)


def _load_thread_inputs(args: argparse.Namespace, need_gt: bool) -> ingest.IngestResult:
    if getattr(args, "thread", None):
        return ingest.load_thread(args.thread, label=str(args.thread))
    for flag in ("mentions", "map") + (("gt",) if need_gt else ()):
        if not getattr(args, flag, None):
            raise ConfigInvalid(f"--{flag} is required when --thread is not given")
    if not args.from_date or not args.to_date:
        raise ConfigInvalid("--from and --to are required when --thread is not given")
    mentions = ingest.load_mentions(args.mentions, label=str(args.mentions))
    mapping = ingest.load_cve_map(args.map, label=str(args.map))
    events = ingest.load_gt(args.gt, label=str(args.gt)) if getattr(args, "gt", None) else []
    return ingest.build_thread(
        mentions,
        mapping,
        events,
        (_parse_date(args.from_date), _parse_date(args.to_date)),
        strict_span=args.strict_span,
        per_site=args.per_site,
    )


# ---------------------------------------------------------------------------
# Subcommand handlers


def cmd_extract(args: argparse.Namespace) -> int:
    result = _load_thread_inputs(args, need_gt=False)
    _write_out(args, lambda fp: ingest.save_thread(result, fp))
    return 0


def cmd_learn(args: argparse.Namespace) -> int:
    result = _load_thread_inputs(args, need_gt=True)
    cfg = learner.LearnConfig(
        delta_t_range=_parse_delta_range(args.delta_t),
        min_support=int(args.min_support),
        min_point_prob=float(args.min_point_prob),
        require_above_prior=not args.no_prior_filter,
        interval_formula=learner.IntervalFormula(args.interval_formula),
        interval_n=learner.IntervalN(args.interval_n),
    )
    rules = learner.learn_program(result.thread, cfg)
    _write_out(args, lambda fp: learner.write_rules(fp, rules, cfg))
    print(f"learned {len(rules)} rules over {result.thread.t_max} days", file=sys.stderr)
    return 0


def cmd_warn(args: argparse.Namespace) -> int:
    rules, _ = learner.load_rules(args.rules, label=str(args.rules))
    mentions = ingest.load_mentions(args.mentions, label=str(args.mentions))
    mapping = ingest.load_cve_map(args.map, label=str(args.map))
    warnings = warn.replay(
        rules,
        mentions,
        mapping,
        (_parse_date(args.from_date), _parse_date(args.to_date)),
        per_site=args.per_site,
    )
    _write_out(args, lambda fp: warn.write_warnings(fp, warnings))
    print(f"generated {len(warnings)} warnings", file=sys.stderr)
    return 0


def _window_spec(args: argparse.Namespace) -> evaluation.WindowSpec:
    anchor = _parse_date(args.anchor) if getattr(args, "anchor", None) else None
    kind = "7d" if args.window == "7d" else "month"
    return evaluation.WindowSpec(kind=kind, anchor=anchor)


def cmd_evaluate(args: argparse.Namespace) -> int:
    warnings = warn.load_warnings(args.warnings, label=str(args.warnings))
    gt_events = ingest.load_gt(args.gt, label=str(args.gt))
    report = evaluation.evaluate_windows(warnings, gt_events, _window_spec(args))
    _write_out(args, lambda fp: evaluation.write_report(fp, report))
    matched = sum(r.n_matched for r in report.windows)
    print(
        f"evaluated {len(warnings)} warnings vs {len(gt_events)} events: "
        f"{matched} matched over {len(report.windows)} windows",
        file=sys.stderr,
    )
    return 0


def _daily_count_histograms(events) -> dict:
    """Per (org, type): histogram of events-per-day over that stream's occurrence span."""
    streams = {}
    for event in events:
        streams.setdefault((event.target_org, event.event_type), []).append(
            event.occurrence_date
        )
    histograms = {}
    for key, days in streams.items():
        lo, hi = min(days), max(days)
        per_day = {}
        for d in days:
            per_day[d] = per_day.get(d, 0) + 1
        histogram = {}
        for d in ingest.iter_days(lo, hi):
            x = per_day.get(d, 0)
            histogram[x] = histogram.get(x, 0) + 1
        histograms[key] = histogram
    return histograms


def cmd_baseline(args: argparse.Namespace) -> int:
    train = ingest.load_gt(args.gt_train, label=str(args.gt_train))
    test = ingest.load_gt(args.gt_test, label=str(args.gt_test))
    if not train:
        raise DataError("training ground truth is empty; cannot build a histogram")
    histograms = _daily_count_histograms(train)
    span = None
    if args.from_date and args.to_date:
        span = (_parse_date(args.from_date), _parse_date(args.to_date))
    report = evaluation.baseline_evaluate(
        histograms,
        test,
        _window_spec(args),
        runs=int(args.runs),
        seed=int(args.seed),
        span=span,
    )
    _write_out(
        args,
        lambda fp: (
            json.dump(evaluation.baseline_report_to_doc(report), fp, indent=2, sort_keys=True),
            fp.write("\n"),
        ),
    )
    print(f"baseline averaged over {report.runs} runs", file=sys.stderr)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    try:
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{args.config}: invalid JSON: {exc.msg}") from exc
    cfg = synth.SynthConfig.from_dict(doc)
    if args.seed is not None:
        cfg = synth.SynthConfig(
            span_days=cfg.span_days,
            entities=cfg.entities,
            planted_rules=cfg.planted_rules,
            condition_noise_rate=cfg.condition_noise_rate,
            action_noise_rate=cfg.action_noise_rate,
            seed=int(args.seed),
            start=cfg.start,
        )
    result = synth.generate(cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "mentions.jsonl").write_text(result.mentions_jsonl, encoding="utf-8")
    (out_dir / "gt.jsonl").write_text(result.gt_jsonl, encoding="utf-8")
    (out_dir / "cve_map.json").write_text(
        json.dumps(result.cve_map, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (out_dir / "manifest.json").write_text(
        json.dumps(result.manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(
        f"wrote {result.manifest['n_mentions']} mentions, "
        f"{result.manifest['n_events']} events to {out_dir}",
        file=sys.stderr,
    )
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    rules, _ = learner.load_rules(args.rules, label=str(args.rules))
    with open(args.heatmap, "w", encoding="utf-8") as fp:
        learner.write_heatmap_csv(fp, rules)
    print(f"wrote heatmap for {len(rules)} rules to {args.heatmap}", file=sys.stderr)
    return 0


def cmd_audit(args: argparse.Namespace) -> int:
    warnings = warn.load_warnings(args.warnings, label=str(args.warnings))
    target = next((w for w in warnings if w.warning_id == args.warning), None)
    if target is None:
        raise DataError(f"warning {args.warning!r} not found in {args.warnings}")
    rules, _ = learner.load_rules(args.rules, label=str(args.rules))
    mentions = ingest.load_mentions(args.mentions, label=str(args.mentions))
    trail = warn.audit_trail(
        target,
        rules_by_id={r.rule_id: r for r in rules},
        mentions_by_id={m.posting_id: m for m in mentions},
    )
    print(trail)
    return 0


# ---------------------------------------------------------------------------
# Parser assembly


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON file supplying defaults for unset flags")
    sub.add_argument("--manifest", help="where to write the run manifest")


def _add_ingest_flags(sub: argparse.ArgumentParser, with_gt: bool = True) -> None:
    sub.add_argument("--mentions", help="mentions JSONL file")
    sub.add_argument("--map", help="CVE mapping JSON file")
    if with_gt:
        sub.add_argument("--gt", help="ground-truth JSONL file")
    sub.add_argument("--from", dest="from_date", metavar="DATE", help="span start (inclusive)")
    sub.add_argument("--to", dest="to_date", metavar="DATE", help="span end (inclusive)")
    sub.add_argument("--strict-span", action="store_true", help="error on out-of-span records")
    sub.add_argument("--per-site", action="store_true", help="one condition atom per site")


def build_parser() -> _Parser:
    parser = _Parser(prog="aptwarn", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(
        dest="command", required=True, metavar="COMMAND", parser_class=_Parser
    )

    p = subs.add_parser("extract", help="build a thread file from raw inputs")
    _add_ingest_flags(p)
    p.add_argument("--out", help="thread JSON output (default stdout)")
    p.set_defaults(handler=cmd_extract)
    _add_common(p)

    p = subs.add_parser("learn", help="mine rules from a thread")
    p.add_argument("--thread", help="thread file produced by `extract`")
    _add_ingest_flags(p)
    p.add_argument("--min-support", default=3, help="minimum co-occurrence count")
    p.add_argument("--min-point-prob", default=0.0, help="minimum point probability")
    p.add_argument("--delta-t", default="1..7", help="day gaps, e.g. '1..7' or '1,3,5'")
    p.add_argument(
        "--interval-formula",
        choices=[f.value for f in learner.IntervalFormula],
        default=learner.IntervalFormula.STD_ERROR.value,
    )
    p.add_argument(
        "--interval-n",
        choices=[n.value for n in learner.IntervalN],
        default=learner.IntervalN.SUPPORT.value,
        help="count feeding the interval spread",
    )
    p.add_argument("--no-prior-filter", action="store_true", help="admit rules at or below prior")
    p.add_argument("--out", help="rules JSON output (default stdout)")
    p.set_defaults(handler=cmd_learn)
    _add_common(p)

    p = subs.add_parser("warn", help="replay mentions and emit warnings")
    p.add_argument("--rules", required=True, help="rules JSON file")
    _add_ingest_flags(p, with_gt=False)
    p.add_argument("--out", help="warnings JSONL output (default stdout)")
    p.set_defaults(handler=cmd_warn)
    _add_common(p)

    p = subs.add_parser("evaluate", help="score warnings against ground truth")
    p.add_argument("--warnings", required=True, help="warnings JSONL file")
    p.add_argument("--gt", required=True, help="ground-truth JSONL file")
    p.add_argument("--window", choices=["month", "7d"], default="month")
    p.add_argument("--anchor", help="start date for 7d windows")
    p.add_argument("--out", help="report JSON output (default stdout)")
    p.set_defaults(handler=cmd_evaluate)
    _add_common(p)

    p = subs.add_parser("baseline", help="frequency-proportional random baseline")
    p.add_argument("--gt-train", required=True, help="training ground truth (histogram source)")
    p.add_argument("--gt-test", required=True, help="test ground truth to score against")
    p.add_argument("--runs", default=100, help="number of seeded runs to average")
    p.add_argument("--seed", default=0, help="master seed")
    p.add_argument("--window", choices=["month", "7d"], default="month")
    p.add_argument("--anchor", help="start date for 7d windows")
    p.add_argument("--from", dest="from_date", metavar="DATE", help="generation span start")
    p.add_argument("--to", dest="to_date", metavar="DATE", help="generation span end")
    p.add_argument("--out", help="report JSON output (default stdout)")
    p.set_defaults(handler=cmd_baseline)
    _add_common(p)

    p = subs.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--config", required=True, help="synth config JSON")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out-dir", required=True, help="directory for the generated files")
    p.add_argument("--manifest", help="where to write the run manifest")
    p.set_defaults(handler=cmd_synth)

    p = subs.add_parser("report", help="emit the head x delta_t increase grid")
    p.add_argument("--rules", required=True, help="rules JSON file")
    p.add_argument("--heatmap", required=True, help="CSV output path")
    p.set_defaults(handler=cmd_report)
    _add_common(p)

    p = subs.add_parser("audit", help="print the trail behind one warning")
    p.add_argument("--warning", required=True, help="warning id to trace")
    p.add_argument("--warnings", required=True, help="warnings JSONL file")
    p.add_argument("--rules", required=True, help="rules JSON file")
    p.add_argument("--mentions", required=True, help="mentions JSONL file")
    p.set_defaults(handler=cmd_audit)
    _add_common(p)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command != "synth":
            _apply_config_file(args, argv)
        manifest = _build_manifest(args.command, args)
        code = args.handler(args)
        _finish_manifest(manifest, args)
        return code
    except DataError as exc:
        print(f"aptwarn {args.command}: data error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except FileNotFoundError as exc:
        print(f"aptwarn {args.command}: data error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except json.JSONDecodeError as exc:
        print(f"aptwarn {args.command}: data error: invalid JSON: {exc}", file=sys.stderr)
        return DATA_ERROR
    except InvariantError as exc:
        print(f"aptwarn {args.command}: internal error: {exc}", file=sys.stderr)
        return INTERNAL_ERROR
    except AptwarnError as exc:
        print(f"aptwarn {args.command}: internal error: {exc}", file=sys.stderr)
        return INTERNAL_ERROR
    except Exception as exc:  # pragma: no cover - safety net
        print(f"aptwarn {args.command}: internal error: {exc!r}", file=sys.stderr)
        return INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
