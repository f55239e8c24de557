"""Synthetic mention/ground-truth generator with planted rules, plus oracles.

The generator plants condition-to-attack patterns: whenever a planted
rule's condition entity is mentioned on a day (scheduled or by noise),
the ground truth receives its head's event count delta_t days later with
the configured firing probability. Background noise adds spurious
mentions and attacks. Postings carry fabricated CVE identifiers in the
reserved CVE-2099-9xxxx range together with a matching mapping file, so
downstream runs exercise the full extraction path instead of bypassing
it.

The truth manifest records each planted rule's realized trigger and
co-occurrence counts over the final event stream (noise collisions
included), which is exactly what the learner must recover.

``oracle_pfr`` is a deliberately separate implementation of the
conditional frequency: a flat loop over raw JSONL lines with its own CVE
regex, never touching the thread machinery. Tests compare the two paths.
"""

from __future__ import annotations

import json
import random
import re
from collections import Counter
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from fractions import Fraction
from pathlib import Path
from typing import Mapping

from .core_model import ActionAtom, EventType
from .errors import ConfigInvalid, NoTriggers

__all__ = ["PlantedRule", "SynthConfig", "SynthResult", "generate", "oracle_pfr"]

DEFAULT_START = date(2017, 1, 1)
_SITES = ("forum-1", "forum-2", "market-1")


@dataclass(frozen=True)
class PlantedRule:
    """One condition-to-attack pattern to plant into the dataset.

    Condition days come from ``condition_days`` (explicit 1-based day
    indices), from Bernoulli scheduling at ``condition_rate``, or both;
    entity mentions caused by background noise also count as condition
    days when firing is evaluated.
    """

    condition_entity: str
    org: str
    event_type: EventType
    count: int
    delta_t: int
    firing_prob: float
    condition_days: tuple = ()
    condition_rate: float = 0.0

    @property
    def head(self) -> ActionAtom:
        return ActionAtom(self.org, self.event_type, self.count)


@dataclass(frozen=True)
class SynthConfig:
    span_days: int
    entities: tuple
    planted_rules: tuple = ()
    condition_noise_rate: float = 0.0
    action_noise_rate: float = 0.0
    seed: int = 0
    start: date = DEFAULT_START

    def validate(self) -> None:
        if self.span_days < 1:
            raise ConfigInvalid("span_days must be >= 1")
        for rate in (self.condition_noise_rate, self.action_noise_rate):
            if not 0.0 <= rate <= 1.0:
                raise ConfigInvalid(f"noise rate {rate} outside [0, 1]")
        if not self.entities:
            raise ConfigInvalid("entities must be nonempty")
        for rule in self.planted_rules:
            if rule.delta_t < 1:
                raise ConfigInvalid("planted delta_t must be >= 1")
            if self.span_days < rule.delta_t + 1:
                raise ConfigInvalid("span_days must be >= delta_t + 1")
            if not 0.0 <= rule.firing_prob <= 1.0:
                raise ConfigInvalid(f"firing_prob {rule.firing_prob} outside [0, 1]")
            if not 0.0 <= rule.condition_rate <= 1.0:
                raise ConfigInvalid(f"condition_rate {rule.condition_rate} outside [0, 1]")
            if rule.count < 1:
                raise ConfigInvalid("planted count must be >= 1")
            if rule.condition_entity not in self.entities:
                raise ConfigInvalid(
                    f"planted entity {rule.condition_entity!r} missing from entities"
                )
            if any(not 1 <= d <= self.span_days for d in rule.condition_days):
                raise ConfigInvalid("condition_days outside 1..span_days")

    @classmethod
    def from_dict(cls, doc: Mapping) -> "SynthConfig":
        try:
            rules = tuple(
                PlantedRule(
                    condition_entity=r["condition_entity"],
                    org=r["org"],
                    event_type=EventType(r["event_type"]),
                    count=int(r["count"]),
                    delta_t=int(r["delta_t"]),
                    firing_prob=float(r["firing_prob"]),
                    condition_days=tuple(int(d) for d in r.get("condition_days", ())),
                    condition_rate=float(r.get("condition_rate", 0.0)),
                )
                for r in doc.get("planted_rules", ())
            )
            cfg = cls(
                span_days=int(doc["span_days"]),
                entities=tuple(doc["entities"]),
                planted_rules=rules,
                condition_noise_rate=float(doc.get("condition_noise_rate", 0.0)),
                action_noise_rate=float(doc.get("action_noise_rate", 0.0)),
                seed=int(doc.get("seed", 0)),
                start=date.fromisoformat(doc.get("start", DEFAULT_START.isoformat())),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigInvalid(f"bad synth config: {exc}") from exc
        cfg.validate()
        return cfg


@dataclass
class SynthResult:
    mentions_jsonl: str
    gt_jsonl: str
    cve_map: dict
    manifest: dict


def _cve_for(index: int) -> str:
    return f"CVE-2099-9{index:04d}"


def generate(cfg: SynthConfig) -> SynthResult:
    """Generate one dataset; byte-identical output for identical configs."""
    cfg.validate()
    rng = random.Random(cfg.seed)
    span = cfg.span_days
    entities = sorted(cfg.entities)
    cve_of = {entity: _cve_for(i) for i, entity in enumerate(entities)}

    # Phase 1: background mention noise, fixed (day, entity) draw order.
    mention_days = {entity: set() for entity in entities}
    for t in range(1, span + 1):
        for entity in entities:
            if cfg.condition_noise_rate and rng.random() < cfg.condition_noise_rate:
                mention_days[entity].add(t)

    # Phase 2: scheduled condition days per planted rule, config order.
    for rule in cfg.planted_rules:
        mention_days[rule.condition_entity].update(rule.condition_days)
        if rule.condition_rate:
            for t in range(1, span + 1):
                if rng.random() < rule.condition_rate:
                    mention_days[rule.condition_entity].add(t)

    # Phase 3: rule firing. Any mention day of the entity can fire.
    event_counts = Counter()
    for rule in cfg.planted_rules:
        for t in sorted(mention_days[rule.condition_entity]):
            if t + rule.delta_t > span:
                continue
            if rng.random() < rule.firing_prob:
                event_counts[(rule.org, rule.event_type, t + rule.delta_t)] += rule.count

    # Phase 4: spurious attacks against the planted (org, type) streams.
    streams = sorted({(r.org, r.event_type) for r in cfg.planted_rules})
    if cfg.action_noise_rate:
        for t in range(1, span + 1):
            for org, etype in streams:
                if rng.random() < cfg.action_noise_rate:
                    event_counts[(org, etype, t)] += 1

    mention_lines = []
    seq = 0
    for t in range(1, span + 1):
        day = cfg.start + timedelta(days=t - 1)
        for entity in entities:
            if t not in mention_days[entity]:
                continue
            seq += 1
            cve = cve_of[entity]
            mention_lines.append(
                json.dumps(
                    {
                        "posting_id": f"post-{seq:05d}",
                        "date": day.isoformat(),
                        "site": _SITES[seq % len(_SITES)],
                        "text": f"thread discussing {cve.lower()} exploitation and resale",
                    },
                    sort_keys=True,
                )
            )

    gt_lines = []
    seq = 0
    for t in range(1, span + 1):
        day = cfg.start + timedelta(days=t - 1)
        for org, etype in streams:
            total = event_counts.get((org, etype, t), 0)
            for i in range(total):
                seq += 1
                occurrence = f"{day.isoformat()}T{9 + (i % 12):02d}:00:00Z"
                reported = f"{day.isoformat()}T{9 + (i % 12):02d}:30:00Z"
                gt_lines.append(
                    json.dumps(
                        {
                            "id": f"gt-{seq:05d}",
                            "format_version": "1.0",
                            "reported_time": reported,
                            "occurrence_time": occurrence,
                            "event_type": etype.value,
                            "target_org": org,
                        },
                        sort_keys=True,
                    )
                )

    cve_map = {
        cve_of[entity]: {"cpe_groups": [entity], "actors": []} for entity in entities
    }

    # Realized conditional frequencies over the assembled stream. A noise
    # collision that bumps a day's count off the planted head no longer
    # counts as a co-occurrence, and that is what the learner will see.
    manifest_rules = []
    for rule in cfg.planted_rules:
        triggers = [
            t for t in sorted(mention_days[rule.condition_entity]) if t + rule.delta_t <= span
        ]
        m = len(triggers)
        k = sum(
            1
            for t in triggers
            if event_counts.get((rule.org, rule.event_type, t + rule.delta_t), 0) == rule.count
        )
        manifest_rules.append(
            {
                "condition_entity": rule.condition_entity,
                "cve": cve_of[rule.condition_entity],
                "org": rule.org,
                "event_type": rule.event_type.value,
                "count": rule.count,
                "delta_t": rule.delta_t,
                "firing_prob": rule.firing_prob,
                "triggers": m,
                "co_occurrences": k,
                "point_prob": (k / m) if m else None,
            }
        )

    manifest = {
        "seed": cfg.seed,
        "start": cfg.start.isoformat(),
        "span_days": span,
        "entities": entities,
        "condition_noise_rate": cfg.condition_noise_rate,
        "action_noise_rate": cfg.action_noise_rate,
        "n_mentions": len(mention_lines),
        "n_events": len(gt_lines),
        "rules": manifest_rules,
    }

    return SynthResult(
        mentions_jsonl="\n".join(mention_lines) + ("\n" if mention_lines else ""),
        gt_jsonl="\n".join(gt_lines) + ("\n" if gt_lines else ""),
        cve_map=cve_map,
        manifest=manifest,
    )


# ---------------------------------------------------------------------------
# Independent frequency oracle over raw files


_ORACLE_CVE_RX = re.compile(r"cve-\d{4}-\d{4,}", re.IGNORECASE)


def _raw_lines(source) -> list:
    # Path objects are read from disk; strings are taken as file content.
    if isinstance(source, Path):
        return source.read_text(encoding="utf-8").splitlines()
    if isinstance(source, str):
        return source.splitlines()
    return list(source)


def _oracle_day(stamp: str) -> date:
    raw = stamp.replace("Z", "+00:00") if stamp.endswith("Z") else stamp
    dt = datetime.fromisoformat(raw)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).date()


def oracle_pfr(
    mentions_source,
    gt_source,
    cve_map: Mapping,
    entity: str,
    head: ActionAtom,
    delta_t: int,
    span: tuple,
) -> Fraction:
    """Exact conditional frequency k/m by direct day enumeration over raw records.

    ``cve_map`` is the raw mapping dict ({cve: {"cpe_groups": [...],
    "actors": [...]}}). Sources are file paths, file contents, or line
    iterables. Raises NoTriggers when the entity is never mentioned
    inside the usable part of the span.
    """
    start, end = span
    mention_days = set()
    for line in _raw_lines(mentions_source):
        if not line.strip():
            continue
        obj = json.loads(line)
        day = date.fromisoformat(obj["date"])
        if not start <= day <= end:
            continue
        if obj.get("cves") is not None:
            found = [str(c) for c in obj["cves"]]
        else:
            found = _ORACLE_CVE_RX.findall(obj.get("text") or "")
        for raw_cve in found:
            cve = "CVE" + raw_cve[3:]
            entry = cve_map.get(cve, {})
            names = list(entry.get("cpe_groups", ())) + list(entry.get("actors", ()))
            if entity in names:
                mention_days.add(day)

    day_counts = Counter()
    for line in _raw_lines(gt_source):
        if not line.strip():
            continue
        obj = json.loads(line)
        day = _oracle_day(obj["occurrence_time"])
        if start <= day <= end:
            day_counts[(obj["target_org"], obj["event_type"], day)] += 1

    gap = timedelta(days=delta_t)
    triggers = [d for d in sorted(mention_days) if d + gap <= end]
    if not triggers:
        raise NoTriggers(f"{entity} never mentioned inside the usable span")
    hits = sum(
        1
        for d in triggers
        if day_counts.get((head.org, head.event_type.value, d + gap), 0) == head.count
    )
    return Fraction(hits, len(triggers))
