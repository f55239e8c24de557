"""Warning-to-event matching, windowed metrics, and the random baseline.

A warning and a ground-truth event may pair only when their event types,
target orgs and days (predicted vs. occurrence) all agree. Pairings are
made mutually exclusive by solving a square assignment problem: qualified
cells cost minus lead-time, everything else (including the dummy rows or
columns used for padding) costs a sentinel large enough that the solver
always prefers any qualified pair over leaving one unmatched. Using a
sentinel instead of a small constant keeps genuine lead-time-1 pairs
distinguishable from padding.

The baseline draws a daily warning count from the empirical distribution
of historical counts, repeats the whole evaluation a configurable number
of runs and reports per-window arithmetic means.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from datetime import date, timedelta
from decimal import ROUND_HALF_UP, Decimal
from typing import IO, Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core_model import EventType
from .errors import ConfigInvalid, EmptyHistogram
from .ingest import AttackEvent, iter_days
from .warn import Warning, WarningProvenance

__all__ = [
    "MatchPair",
    "MetricsReport",
    "EvalReport",
    "WindowSpec",
    "BaselineWindowReport",
    "BaselineReport",
    "qualified_pair",
    "solve_assignment",
    "match",
    "metrics",
    "evaluate_windows",
    "baseline_generate",
    "baseline_evaluate",
    "derive_seed",
    "report_to_doc",
    "write_report",
    "baseline_report_to_doc",
]


@dataclass(frozen=True)
class MatchPair:
    warning_id: str
    gt_id: str
    lead_time: int  # days between warning generation and event occurrence


@dataclass(frozen=True)
class MetricsReport:
    window: Optional[tuple]  # inclusive (start, end) dates, or None
    n_warnings: int
    n_gt: int
    n_matched: int
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]


@dataclass(frozen=True)
class EvalReport:
    windows: tuple
    by_type: Mapping
    pairs: tuple


@dataclass(frozen=True)
class WindowSpec:
    """Either calendar months or fixed 7-day windows counted from an anchor date."""

    kind: str  # "month" | "7d"
    anchor: Optional[date] = None

    def __post_init__(self) -> None:
        if self.kind not in ("month", "7d"):
            raise ConfigInvalid(f"window kind must be 'month' or '7d', got {self.kind!r}")


def qualified_pair(w: Warning, g: AttackEvent) -> bool:
    """True iff the warning may earn credit for the event: same type, same org, same day."""
    return (
        w.event_type == g.event_type
        and w.target_org == g.target_org
        and w.predicted_date == g.occurrence_date
    )


def solve_assignment(n_warnings: int, n_gt: int, qualified: Mapping) -> list:
    """Mutually exclusive pairing maximizing total lead time over qualified cells.

    ``qualified`` maps (warning index, gt index) to that pair's lead time.
    The matrix is padded square with dummy rows/columns; dummy and
    unqualified cells cost a sentinel exceeding any achievable lead-time
    total, so maximum pairing cardinality always dominates and sentinel
    pairs can be dropped from the solution safely.
    """
    if n_warnings == 0 or n_gt == 0 or not qualified:
        return []
    n = max(n_warnings, n_gt)
    max_abs_lead = max(abs(lead) for lead in qualified.values())
    sentinel = float(2 * n * (max_abs_lead + 1) + 1)
    cost = np.full((n, n), sentinel)
    for (i, j), lead in qualified.items():
        cost[i, j] = -float(lead)
    rows, cols = linear_sum_assignment(cost)
    return [(int(i), int(j)) for i, j in zip(rows, cols) if (int(i), int(j)) in qualified]


def match(warnings: Sequence[Warning], gt_events: Sequence[AttackEvent]) -> list:
    """Pair warnings with ground-truth events via the assignment solver."""
    qualified = {}
    for i, w in enumerate(warnings):
        for j, g in enumerate(gt_events):
            if qualified_pair(w, g):
                qualified[(i, j)] = (g.occurrence_date - w.generated_on).days
    pairs = solve_assignment(len(warnings), len(gt_events), qualified)
    return [
        MatchPair(
            warning_id=warnings[i].warning_id,
            gt_id=gt_events[j].id,
            lead_time=qualified[(i, j)],
        )
        for i, j in pairs
    ]


def metrics(
    pairs: Sequence[MatchPair],
    warnings: Sequence[Warning],
    gt_events: Sequence[AttackEvent],
    window: Optional[tuple] = None,
) -> MetricsReport:
    """Precision/recall/F1 for one matched set.

    Degenerate denominators yield None rather than 0, so "predicted
    nothing" stays distinguishable from "predicted wrongly". F1 is None
    only when both inputs are None, and 0 when either defined metric is 0.
    """
    n_w, n_g, n_m = len(warnings), len(gt_events), len(pairs)
    precision = n_m / n_w if n_w else None
    recall = n_m / n_g if n_g else None
    if precision is None and recall is None:
        f1: Optional[float] = None
    elif precision and recall:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
    return MetricsReport(
        window=window,
        n_warnings=n_w,
        n_gt=n_g,
        n_matched=n_m,
        precision=precision,
        recall=recall,
        f1=f1,
    )


def _month_end(d: date) -> date:
    if d.month == 12:
        return date(d.year, 12, 31)
    return date(d.year, d.month + 1, 1) - timedelta(days=1)


def build_windows(spec: WindowSpec, span: tuple) -> list:
    """Inclusive (start, end) windows covering the span, per the window spec."""
    start, end = span
    if start > end:
        raise ConfigInvalid(f"empty span: {start} > {end}")
    windows = []
    if spec.kind == "month":
        cursor = date(start.year, start.month, 1)
        while cursor <= end:
            windows.append((cursor, _month_end(cursor)))
            cursor = _month_end(cursor) + timedelta(days=1)
    else:
        anchor = spec.anchor or start
        cursor = anchor
        while cursor <= end:
            windows.append((cursor, cursor + timedelta(days=6)))
            cursor += timedelta(days=7)
    return windows


def evaluate_windows(
    warnings: Sequence[Warning],
    gt_events: Sequence[AttackEvent],
    spec: WindowSpec,
    span: Optional[tuple] = None,
) -> EvalReport:
    """Per-window match + metrics, plus a per-event-type breakdown.

    Ground-truth events fall into windows by occurrence date, warnings by
    predicted date. Without an explicit span the windows cover all dates
    present in either input; data before a 7-day anchor is outside every
    window and therefore unscored. Empty windows are retained with
    all-null metrics.
    """
    if span is None:
        dates = [w.predicted_date for w in warnings] + [g.occurrence_date for g in gt_events]
        if not dates:
            return EvalReport(windows=(), by_type={}, pairs=())
        span = (min(dates), max(dates))
    windows = build_windows(spec, span)

    reports = []
    all_pairs = []
    for window in windows:
        lo, hi = window
        ws = [w for w in warnings if lo <= w.predicted_date <= hi]
        gs = [g for g in gt_events if lo <= g.occurrence_date <= hi]
        pairs = match(ws, gs)
        reports.append(metrics(pairs, ws, gs, window=window))
        all_pairs.extend(pairs)

    types_present = sorted(
        {w.event_type for w in warnings} | {g.event_type for g in gt_events},
        key=lambda t: t.value,
    )
    by_type = {}
    for etype in types_present:
        type_reports = []
        for window in windows:
            lo, hi = window
            ws = [w for w in warnings if lo <= w.predicted_date <= hi and w.event_type == etype]
            gs = [g for g in gt_events if lo <= g.occurrence_date <= hi and g.event_type == etype]
            type_reports.append(metrics(match(ws, gs), ws, gs, window=window))
        by_type[etype.value] = tuple(type_reports)

    return EvalReport(windows=tuple(reports), by_type=by_type, pairs=tuple(all_pairs))


def derive_seed(*parts) -> int:
    """Deterministic sub-seed so parallel and sequential baseline runs agree."""
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).hexdigest()
    return int(digest[:16], 16)


def baseline_generate(
    histogram: Mapping,
    days: tuple,
    seed: int,
    event_type: EventType = EventType.MALICIOUS_EMAIL,
    target_org: str = "org",
) -> list:
    """Per day, draw a warning count x with probability proportional to its historical frequency.

    Emits x same-day warnings (zero lead) stamped with the given type and
    org. Deterministic for a fixed seed.
    """
    counts = {int(k): int(v) for k, v in histogram.items() if int(v) > 0}
    if not counts:
        raise EmptyHistogram("histogram has no positive frequencies")
    values = sorted(counts)
    weights = [counts[v] for v in values]
    rng = random.Random(seed)
    start, end = days
    out = []
    rule_id = f"baseline-{target_org}-{event_type.value}"
    for day in iter_days(start, end):
        x = rng.choices(values, weights=weights, k=1)[0]
        for seq in range(1, x + 1):
            out.append(
                Warning(
                    warning_id=f"{rule_id}-{day.isoformat()}-{seq}",
                    generated_on=day,
                    predicted_date=day,
                    event_type=event_type,
                    target_org=target_org,
                    probability=0.0,
                    rule_id=rule_id,
                    provenance=WarningProvenance(),
                )
            )
    return out


@dataclass(frozen=True)
class BaselineWindowReport:
    window: tuple
    n_gt: int
    mean_warnings: float
    mean_matched: float
    mean_precision: Optional[float]
    mean_recall: Optional[float]
    mean_f1: Optional[float]


@dataclass(frozen=True)
class BaselineReport:
    runs: int
    seed: int
    windows: tuple


def baseline_evaluate(
    histograms: Mapping,
    gt_events: Sequence[AttackEvent],
    spec: WindowSpec,
    runs: int = 100,
    seed: int = 0,
    span: Optional[tuple] = None,
) -> BaselineReport:
    """Average the baseline evaluation over seeded runs.

    ``histograms`` maps (target_org, EventType) to that stream's daily
    count histogram. Each (run, org, type) triple gets its own derived
    seed. Metric means are taken over the runs where the metric is
    defined; warning counts average over all runs and stay fractional.
    """
    if runs < 1:
        raise ConfigInvalid(f"runs must be >= 1, got {runs}")
    if not histograms:
        raise EmptyHistogram("no histograms provided")
    if span is None:
        if not gt_events:
            raise ConfigInvalid("cannot derive a span from an empty ground-truth set")
        occ = [g.occurrence_date for g in gt_events]
        span = (min(occ), max(occ))
    windows = build_windows(spec, span)

    sums = [
        {"warnings": 0, "matched": 0, "precision": [], "recall": [], "f1": []}
        for _ in windows
    ]
    stream_keys = sorted(histograms, key=lambda k: (k[0], k[1].value))
    for run in range(runs):
        warnings = []
        for org, etype in stream_keys:
            warnings.extend(
                baseline_generate(
                    histograms[(org, etype)],
                    span,
                    derive_seed(seed, run, org, etype.value),
                    event_type=etype,
                    target_org=org,
                )
            )
        report = evaluate_windows(warnings, gt_events, spec, span=span)
        for acc, window_report in zip(sums, report.windows):
            acc["warnings"] += window_report.n_warnings
            acc["matched"] += window_report.n_matched
            for name in ("precision", "recall", "f1"):
                value = getattr(window_report, name)
                if value is not None:
                    acc[name].append(value)

    out = []
    for window, acc in zip(windows, sums):
        lo, hi = window
        n_gt = sum(1 for g in gt_events if lo <= g.occurrence_date <= hi)
        out.append(
            BaselineWindowReport(
                window=window,
                n_gt=n_gt,
                mean_warnings=acc["warnings"] / runs,
                mean_matched=acc["matched"] / runs,
                mean_precision=sum(acc["precision"]) / len(acc["precision"])
                if acc["precision"]
                else None,
                mean_recall=sum(acc["recall"]) / len(acc["recall"]) if acc["recall"] else None,
                mean_f1=sum(acc["f1"]) / len(acc["f1"]) if acc["f1"] else None,
            )
        )
    return BaselineReport(runs=runs, seed=seed, windows=tuple(out))


# ---------------------------------------------------------------------------
# report.json serialization. Metrics are rounded to 3 decimals here and only
# here; everything upstream stays full precision. Half-up rounding matches
# how published tables round (banker's rounding would turn 0.3125 into
# 0.312).


def _round3(value: Optional[float]) -> Optional[float]:
    if value is None:
        return None
    return float(Decimal(repr(value)).quantize(Decimal("0.001"), rounding=ROUND_HALF_UP))


def _window_doc(report: MetricsReport) -> dict:
    lo, hi = report.window if report.window else (None, None)
    return {
        "start": lo.isoformat() if lo else None,
        "end": hi.isoformat() if hi else None,
        "n_warnings": report.n_warnings,
        "n_gt": report.n_gt,
        "n_matched": report.n_matched,
        "precision": _round3(report.precision),
        "recall": _round3(report.recall),
        "f1": _round3(report.f1),
    }


def report_to_doc(report: EvalReport) -> dict:
    return {
        "windows": [_window_doc(r) for r in report.windows],
        "by_type": {
            etype: [_window_doc(r) for r in reports]
            for etype, reports in sorted(report.by_type.items())
        },
        "pairs": [
            {"warning_id": p.warning_id, "gt_id": p.gt_id, "lead_time": p.lead_time}
            for p in report.pairs
        ],
    }


def write_report(fp: IO, report: EvalReport) -> None:
    json.dump(report_to_doc(report), fp, indent=2, sort_keys=True)
    fp.write("\n")


def baseline_report_to_doc(report: BaselineReport) -> dict:
    return {
        "runs": report.runs,
        "seed": report.seed,
        "windows": [
            {
                "start": r.window[0].isoformat(),
                "end": r.window[1].isoformat(),
                "n_gt": r.n_gt,
                "mean_warnings": _round3(r.mean_warnings),
                "mean_matched": _round3(r.mean_matched),
                "mean_precision": _round3(r.mean_precision),
                "mean_recall": _round3(r.mean_recall),
                "mean_f1": _round3(r.mean_f1),
            }
            for r in report.windows
        ],
    }
