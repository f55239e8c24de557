"""File ingestion: mention postings, CVE mappings, ground-truth events.

Input formats:
  mentions.jsonl  one posting per line, with either raw ``text`` or a
                  pre-extracted ``cves`` list
  cve_map.json    {"CVE-....": {"cpe_groups": [...], "actors": [...]}}
  gt.jsonl        one attack event per line

``build_thread`` merges both sides into a day-indexed thread. Condition
atoms are set-valued per day (repeated mentions of one entity collapse),
action atoms carry the exact daily event count per (org, type). Every
atom keeps a provenance index entry pointing back at the posting ids /
event ids that produced it.
"""

from __future__ import annotations

import json
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping, Optional, Sequence, Union

from .core_model import (
    ActionAtom,
    ConditionAtom,
    EventType,
    Thread,
    World,
    parse_atom,
)
from .errors import ConfigInvalid, ParseError, StrictSpanError

__all__ = [
    "CVE_PATTERN",
    "MentionRecord",
    "CveMapping",
    "AttackEvent",
    "ProvenanceEntry",
    "IngestStats",
    "IngestResult",
    "extract_cves",
    "map_cve",
    "build_thread",
    "day_condition_index",
    "load_mentions",
    "load_cve_map",
    "load_gt",
    "save_thread",
    "load_thread",
    "iter_days",
    "parse_timestamp",
]

# Post-2014 identifier syntax: 4-digit year, 4-or-more-digit sequence.
CVE_PATTERN = re.compile(r"CVE-\d{4}-\d{4,}", re.IGNORECASE)

GLOBAL_SITE_SET = "all"


def extract_cves(text: str) -> list:
    """All CVE ids in ``text``, prefix-uppercased, deduplicated, in first-occurrence order."""
    seen = []
    for match in CVE_PATTERN.finditer(text or ""):
        normalized = "CVE" + match.group(0)[3:]
        if normalized not in seen:
            seen.append(normalized)
    return seen


@dataclass(frozen=True)
class MentionRecord:
    """One forum/marketplace posting, dated to a UTC calendar day."""

    posting_id: str
    date: date
    site: str
    text: Optional[str] = None
    cves: Optional[tuple] = None

    def extracted_cves(self) -> list:
        """CVE ids for this posting: the pre-extracted list when present, else regex extraction."""
        if self.cves is not None:
            out = []
            for cve in self.cves:
                normalized = "CVE" + cve[3:] if cve[:3].upper() == "CVE" else cve
                if normalized not in out:
                    out.append(normalized)
            return out
        return extract_cves(self.text or "")


@dataclass(frozen=True)
class CveMapping:
    """CVE id -> CPE groups and threat actors known to leverage it."""

    entries: Mapping

    def lookup(self, cve: str):
        return self.entries.get(cve)


def map_cve(cve: str, mapping: CveMapping) -> tuple:
    """Map one CVE id to its (cpe_groups, actors); unmapped ids yield two empty lists."""
    entry = mapping.lookup(cve)
    if entry is None:
        return [], []
    groups, actors = entry
    return list(groups), list(actors)


@dataclass(frozen=True)
class AttackEvent:
    """One ground-truth record from an enterprise log."""

    id: str
    format_version: str
    reported_time: datetime
    occurrence_time: datetime
    event_type: EventType
    target_org: str

    @property
    def occurrence_date(self) -> date:
        """UTC calendar day the event occurred on; this anchors it to a thread day."""
        return self.occurrence_time.astimezone(timezone.utc).date()


@dataclass
class ProvenanceEntry:
    """Source ids behind one (atom, day) cell."""

    posting_ids: tuple = ()
    cves: tuple = ()
    event_ids: tuple = ()


@dataclass
class IngestStats:
    n_mentions: int = 0
    n_events: int = 0
    n_cve_mentions: int = 0
    n_unmapped_cves: int = 0
    n_clipped_records: int = 0


@dataclass
class IngestResult:
    """A built thread plus its provenance index and ingest statistics."""

    thread: Thread
    provenance: dict  # (atom, date) -> ProvenanceEntry
    stats: IngestStats


def iter_days(start: date, end: date) -> Iterator[date]:
    d = start
    while d <= end:
        yield d
        d += timedelta(days=1)


def parse_timestamp(value: str) -> datetime:
    """ISO-8601 timestamp; a trailing Z and missing offsets both mean UTC."""
    raw = value.replace("Z", "+00:00") if value.endswith("Z") else value
    dt = datetime.fromisoformat(raw)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt


def day_condition_index(
    mentions: Iterable[MentionRecord],
    mapping: CveMapping,
    per_site: bool = False,
    stats: Optional[IngestStats] = None,
) -> dict:
    """Condition atoms for one day's postings, each with its provenance.

    Returns {ConditionAtom: ProvenanceEntry}. Set semantics: an entity
    mentioned by several postings on the day yields one atom whose entry
    aggregates every contributing posting id and CVE.
    """
    postings = defaultdict(set)
    cves_for = defaultdict(set)
    for record in mentions:
        site_set = record.site if per_site else GLOBAL_SITE_SET
        for cve in record.extracted_cves():
            if stats is not None:
                stats.n_cve_mentions += 1
            groups, actors = map_cve(cve, mapping)
            if not groups and not actors:
                if stats is not None:
                    stats.n_unmapped_cves += 1
                continue
            for entity in groups + actors:
                atom = ConditionAtom(site_set, entity)
                postings[atom].add(record.posting_id)
                cves_for[atom].add(cve)
    return {
        atom: ProvenanceEntry(
            posting_ids=tuple(sorted(postings[atom])),
            cves=tuple(sorted(cves_for[atom])),
        )
        for atom in postings
    }


def build_thread(
    mentions: Sequence[MentionRecord],
    mapping: CveMapping,
    events: Sequence[AttackEvent],
    span: tuple,
    strict_span: bool = False,
    per_site: bool = False,
) -> IngestResult:
    """Merge mentions and ground-truth events into a day-indexed thread.

    ``span`` is an inclusive (start, end) date pair; day 1 of the thread is
    ``start``. Records outside the span raise StrictSpanError in strict
    mode and are counted and dropped otherwise. The result is invariant
    under permutation of the input records.
    """
    start, end = span
    if start > end:
        raise ConfigInvalid(f"empty span: {start} > {end}")

    stats = IngestStats(n_mentions=len(mentions), n_events=len(events))
    by_day = defaultdict(list)
    for record in mentions:
        if not start <= record.date <= end:
            if strict_span:
                raise StrictSpanError(
                    f"mention {record.posting_id} dated {record.date} outside span {start}..{end}"
                )
            stats.n_clipped_records += 1
            continue
        by_day[record.date].append(record)

    event_counts = Counter()
    event_ids = defaultdict(list)
    for event in events:
        day = event.occurrence_date
        if not start <= day <= end:
            if strict_span:
                raise StrictSpanError(
                    f"event {event.id} occurring {day} outside span {start}..{end}"
                )
            stats.n_clipped_records += 1
            continue
        key = (event.target_org, event.event_type, day)
        event_counts[key] += 1
        event_ids[key].append(event.id)

    provenance = {}
    worlds = []
    for day in iter_days(start, end):
        atoms = set()
        # sort for deterministic traversal; atoms themselves are set-valued
        day_mentions = sorted(by_day.get(day, ()), key=lambda r: r.posting_id)
        for atom, entry in day_condition_index(day_mentions, mapping, per_site, stats).items():
            atoms.add(atom)
            provenance[(atom, day)] = entry
        for (org, event_type, event_day), count in event_counts.items():
            if event_day != day:
                continue
            atom = ActionAtom(org, event_type, count)
            atoms.add(atom)
            provenance[(atom, day)] = ProvenanceEntry(
                event_ids=tuple(sorted(event_ids[(org, event_type, day)]))
            )
        worlds.append(World(atoms))

    thread = Thread(start=start, worlds=tuple(worlds))
    return IngestResult(thread=thread, provenance=provenance, stats=stats)


# ---------------------------------------------------------------------------
# File loaders


def _read_lines(source: Union[str, Path, IO]) -> list:
    if hasattr(source, "read"):
        return source.read().splitlines()
    path = Path(source)
    return path.read_text(encoding="utf-8").splitlines()


def _load_jsonl(source, label: str) -> Iterator[tuple]:
    for lineno, line in enumerate(_read_lines(source), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{label}:{lineno}: invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise ParseError(f"{label}:{lineno}: expected an object")
        yield lineno, obj


def load_mentions(source, label: str = "mentions") -> list:
    """Parse a mentions JSONL file into MentionRecords; posting ids must be unique."""
    records = []
    seen_ids = set()
    for lineno, obj in _load_jsonl(source, label):
        try:
            posting_id = str(obj["posting_id"])
            day = date.fromisoformat(obj["date"])
            site = str(obj["site"])
        except KeyError as exc:
            raise ParseError(f"{label}:{lineno}: missing field {exc.args[0]!r}")
        except ValueError as exc:
            raise ParseError(f"{label}:{lineno}: bad date: {exc}")
        if not posting_id:
            raise ParseError(f"{label}:{lineno}: empty posting_id")
        if posting_id in seen_ids:
            raise ParseError(f"{label}:{lineno}: duplicate posting_id {posting_id!r}")
        seen_ids.add(posting_id)
        cves = obj.get("cves")
        if cves is not None and not isinstance(cves, list):
            raise ParseError(f"{label}:{lineno}: 'cves' must be a list")
        records.append(
            MentionRecord(
                posting_id=posting_id,
                date=day,
                site=site,
                text=obj.get("text"),
                cves=tuple(str(c) for c in cves) if cves is not None else None,
            )
        )
    return records


def load_cve_map(source, label: str = "cve_map") -> CveMapping:
    """Parse a CVE mapping JSON file; keys must use CVE identifier syntax."""
    if hasattr(source, "read"):
        raw = source.read()
    else:
        raw = Path(source).read_text(encoding="utf-8")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{label}: invalid JSON: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ParseError(f"{label}: expected a top-level object")
    entries = {}
    for cve, entry in data.items():
        if not CVE_PATTERN.fullmatch(cve):
            raise ParseError(f"{label}: key {cve!r} is not a CVE identifier")
        groups = tuple(entry.get("cpe_groups", ()))
        actors = tuple(entry.get("actors", ()))
        if any(not name for name in groups + actors):
            raise ParseError(f"{label}: empty group/actor name under {cve}")
        entries["CVE" + cve[3:]] = (groups, actors)
    return CveMapping(entries=entries)


def load_gt(source, label: str = "gt") -> list:
    """Parse a ground-truth JSONL file into AttackEvents."""
    events = []
    for lineno, obj in _load_jsonl(source, label):
        try:
            event = AttackEvent(
                id=str(obj["id"]),
                format_version=str(obj.get("format_version", "")),
                reported_time=parse_timestamp(obj["reported_time"]),
                occurrence_time=parse_timestamp(obj["occurrence_time"]),
                event_type=EventType(obj["event_type"]),
                target_org=str(obj["target_org"]),
            )
        except KeyError as exc:
            raise ParseError(f"{label}:{lineno}: missing field {exc.args[0]!r}")
        except ValueError as exc:
            raise ParseError(f"{label}:{lineno}: {exc}")
        events.append(event)
    return events


# ---------------------------------------------------------------------------
# Thread file round-trip (the `extract` stage output consumed by `learn --thread`)


def save_thread(result: IngestResult, fp: IO) -> None:
    """Serialize a built thread, provenance included, as deterministic JSON."""
    thread = result.thread
    worlds = [
        {
            "t": t,
            "date": thread.date_of(t).isoformat(),
            "atoms": sorted(str(a) for a in thread.world_at(t)),
        }
        for t in range(1, thread.t_max + 1)
    ]
    prov = [
        {
            "atom": str(atom),
            "date": day.isoformat(),
            "posting_ids": list(entry.posting_ids),
            "cves": list(entry.cves),
            "event_ids": list(entry.event_ids),
        }
        for (atom, day), entry in sorted(
            result.provenance.items(), key=lambda kv: (str(kv[0][0]), kv[0][1])
        )
    ]
    doc = {
        "start": thread.start.isoformat(),
        "end": thread.end.isoformat(),
        "t_max": thread.t_max,
        "worlds": worlds,
        "provenance": prov,
        "stats": vars(result.stats),
    }
    json.dump(doc, fp, indent=2, sort_keys=True)
    fp.write("\n")


def load_thread(source, label: str = "thread") -> IngestResult:
    """Load a thread file written by save_thread."""
    if hasattr(source, "read"):
        raw = source.read()
    else:
        raw = Path(source).read_text(encoding="utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{label}: invalid JSON: {exc.msg}") from exc
    try:
        start = date.fromisoformat(doc["start"])
        worlds = [World(parse_atom(a) for a in w["atoms"]) for w in doc["worlds"]]
        provenance = {}
        for item in doc.get("provenance", ()):
            key = (parse_atom(item["atom"]), date.fromisoformat(item["date"]))
            provenance[key] = ProvenanceEntry(
                posting_ids=tuple(item.get("posting_ids", ())),
                cves=tuple(item.get("cves", ())),
                event_ids=tuple(item.get("event_ids", ())),
            )
        stats = IngestStats(**doc.get("stats", {}))
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"{label}: malformed thread file: {exc}") from exc
    return IngestResult(
        thread=Thread(start=start, worlds=tuple(worlds)),
        provenance=provenance,
        stats=stats,
    )
