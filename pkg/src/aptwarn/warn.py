"""Daily rule replay and warning generation with audit-trail provenance.

Each day of the mention stream forms a condition world from the CVEs
mentioned in that 24-hour window (one UTC calendar day). Rules whose
condition holds are triggered; per (head, delta_t) group only the rule
with the highest point probability is qualified; a qualified rule whose
head predicts x attacks emits exactly x warnings dated delta_t days
ahead. Every warning carries the posting ids, CVEs and entities that
fired it, so the trail from warning back to raw postings never breaks.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import IO, Mapping, Sequence

from .core_model import EventType, World
from .errors import MissingProvenance, ParseError
from .ingest import CveMapping, MentionRecord, day_condition_index, iter_days
from .learner import AptRule

__all__ = [
    "WarningProvenance",
    "Warning",
    "triggered_rules",
    "qualify",
    "generate_warnings",
    "replay",
    "write_warnings",
    "load_warnings",
    "audit_trail",
]


@dataclass(frozen=True)
class WarningProvenance:
    cves: tuple = ()
    posting_ids: tuple = ()
    entities: tuple = ()

    def is_empty(self) -> bool:
        return not (self.cves or self.posting_ids or self.entities)


@dataclass(frozen=True)
class Warning:
    """One dated, typed, org-targeted attack prediction."""

    warning_id: str
    generated_on: date
    predicted_date: date
    event_type: EventType
    target_org: str
    probability: float
    rule_id: str
    provenance: WarningProvenance = WarningProvenance()

    def to_dict(self) -> dict:
        return {
            "warning_id": self.warning_id,
            "generated_on": self.generated_on.isoformat(),
            "predicted_date": self.predicted_date.isoformat(),
            "event_type": self.event_type.value,
            "target_org": self.target_org,
            "probability": self.probability,
            "rule_id": self.rule_id,
            "provenance": {
                "cves": list(self.provenance.cves),
                "posting_ids": list(self.provenance.posting_ids),
                "entities": list(self.provenance.entities),
            },
        }


def triggered_rules(program: Sequence[AptRule], day_world: World) -> list:
    """Rules whose condition atom is present in the day's condition world."""
    return [rule for rule in program if rule.condition in day_world]


def qualify(triggered: Sequence[AptRule]) -> list:
    """Keep, per (head, delta_t) group, only the rule with maximal point probability.

    Ties collapse to the lexicographically smallest rule_id so one day
    never emits two identical predictions from tied rules. Rules whose
    heads differ in attack count are distinct groups and all survive.
    """
    best = {}
    for rule in triggered:
        key = (rule.head, rule.delta_t)
        incumbent = best.get(key)
        if (
            incumbent is None
            or rule.point_prob > incumbent.point_prob
            or (rule.point_prob == incumbent.point_prob and rule.rule_id < incumbent.rule_id)
        ):
            best[key] = rule
    return sorted(best.values(), key=lambda r: (str(r.head), r.delta_t, r.rule_id))


def generate_warnings(
    qualified: Sequence[AptRule],
    day: date,
    day_provenance: Mapping,
) -> list:
    """Emit head-count many warnings per qualified rule for one trigger day.

    ``day_provenance`` maps each condition atom present that day to the
    entry holding its posting ids and CVEs; a missing entry means the
    ingest side broke its contract and raises MissingProvenance.
    """
    out = []
    for rule in qualified:
        entry = day_provenance.get(rule.condition)
        if entry is None or not entry.posting_ids:
            raise MissingProvenance(
                f"no provenance for {rule.condition} on {day} (rule {rule.rule_id})"
            )
        provenance = WarningProvenance(
            cves=tuple(entry.cves),
            posting_ids=tuple(entry.posting_ids),
            entities=(rule.condition.entity,),
        )
        for seq in range(1, rule.head.count + 1):
            out.append(
                (
                    rule,
                    seq,
                    Warning(
                        warning_id=f"{rule.rule_id}-{day.isoformat()}-{seq}",
                        generated_on=day,
                        predicted_date=day + timedelta(days=rule.delta_t),
                        event_type=rule.head.event_type,
                        target_org=rule.head.org,
                        probability=rule.point_prob,
                        rule_id=rule.rule_id,
                        provenance=provenance,
                    ),
                )
            )
    out.sort(key=lambda item: (item[2].predicted_date, item[2].event_type.value, item[0].rule_id, item[1]))
    return [w for _, _, w in out]


def replay(
    program: Sequence[AptRule],
    mentions: Sequence[MentionRecord],
    mapping: CveMapping,
    date_range: tuple,
    per_site: bool = False,
) -> list:
    """Run the daily trigger/qualify/generate loop over a date range.

    Stateless across days: the output equals the concatenation of
    independent per-day runs, in date order. Mentions outside the range
    are ignored.
    """
    start, end = date_range
    by_day = defaultdict(list)
    for record in mentions:
        if start <= record.date <= end:
            by_day[record.date].append(record)

    warnings = []
    for day in iter_days(start, end):
        day_mentions = sorted(by_day.get(day, ()), key=lambda r: r.posting_id)
        if not day_mentions:
            continue
        index = day_condition_index(day_mentions, mapping, per_site)
        world = World(index.keys())
        qualified = qualify(triggered_rules(program, world))
        warnings.extend(generate_warnings(qualified, day, index))
    return warnings


def write_warnings(fp: IO, warnings: Sequence[Warning]) -> None:
    for w in warnings:
        fp.write(json.dumps(w.to_dict(), sort_keys=True))
        fp.write("\n")


def load_warnings(source, label: str = "warnings") -> list:
    """Parse a warnings JSONL file written by write_warnings."""
    if hasattr(source, "read"):
        lines = source.read().splitlines()
    else:
        lines = Path(source).read_text(encoding="utf-8").splitlines()
    out = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            prov = obj.get("provenance", {})
            out.append(
                Warning(
                    warning_id=str(obj["warning_id"]),
                    generated_on=date.fromisoformat(obj["generated_on"]),
                    predicted_date=date.fromisoformat(obj["predicted_date"]),
                    event_type=EventType(obj["event_type"]),
                    target_org=str(obj["target_org"]),
                    probability=float(obj["probability"]),
                    rule_id=str(obj["rule_id"]),
                    provenance=WarningProvenance(
                        cves=tuple(prov.get("cves", ())),
                        posting_ids=tuple(prov.get("posting_ids", ())),
                        entities=tuple(prov.get("entities", ())),
                    ),
                )
            )
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise ParseError(f"{label}:{lineno}: {exc}") from exc
    return out


def audit_trail(
    warning: Warning,
    rules_by_id: Mapping,
    mentions_by_id: Mapping,
) -> str:
    """Human-readable trail: warning -> rule -> postings -> CVEs."""
    lines = [
        f"warning {warning.warning_id}",
        f"  generated_on:   {warning.generated_on.isoformat()}",
        f"  predicted_date: {warning.predicted_date.isoformat()}",
        f"  event_type:     {warning.event_type.value}",
        f"  target_org:     {warning.target_org}",
        f"  probability:    {warning.probability}",
    ]
    rule = rules_by_id.get(warning.rule_id)
    if rule is None:
        lines.append(f"  rule {warning.rule_id}: NOT FOUND in rules file")
    else:
        lines.append(f"  rule {rule.rule_id}")
        lines.append(f"    condition: {rule.condition}")
        lines.append(f"    head:      {rule.head}")
        lines.append(
            f"    delta_t={rule.delta_t} p={rule.point_prob} "
            f"interval=[{rule.interval.l}, {rule.interval.u}] "
            f"support={rule.support}/{rule.trigger_count} prior={rule.prior}"
        )
    lines.append(f"  entities: {', '.join(warning.provenance.entities)}")
    lines.append(f"  cves: {', '.join(warning.provenance.cves)}")
    for pid in warning.provenance.posting_ids:
        record = mentions_by_id.get(pid)
        if record is None:
            lines.append(f"  posting {pid}: NOT FOUND in mentions file")
        else:
            snippet = (record.text or "")[:100]
            lines.append(f"  posting {pid} [{record.date.isoformat()} {record.site}] {snippet}")
    return "\n".join(lines)
