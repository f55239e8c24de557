"""Rule learning: point-frequency intervals, priors, admission filtering.

For a condition F, head G and gap delta_t, the point frequency over an
annotated thread is the interval

    [ sum(l' over co-occurrence days) / sum(u over trigger days),
      sum(u' over co-occurrence days) / sum(l over trigger days) ]

where trigger days are the t with F possibly true (annotation upper bound
positive) and t + delta_t still inside the thread, and co-occurrence days
are the trigger days whose t + delta_t world makes G possibly true. On
crisp data both bounds collapse to k/m: co-occurrence count over trigger
count.

A rule candidate is admitted when its support meets the configured
minimum and its derived lower probability bound exceeds the prior base
rate of its head, so only above-chance correlations enter the program.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import IO, Sequence

from .core_model import (
    ActionAtom,
    AnnotatedThread,
    Atom,
    ConditionAtom,
    Formula,
    ProbInterval,
    Thread,
    formula_annotation,
    parse_atom,
)
from .errors import ConfigInvalid, EmptyThread, NoTriggers, ParseError, ZeroPrior

__all__ = [
    "IntervalFormula",
    "LearnConfig",
    "AptRule",
    "compute_pfr",
    "prior",
    "derive_interval",
    "learn_program",
    "rule_satisfied",
    "percent_increase",
    "rules_to_doc",
    "write_rules",
    "load_rules",
    "heatmap_grid",
    "write_heatmap_csv",
]

DEFAULT_DELTA_T_RANGE = (1, 2, 3, 4, 5, 6, 7)


class IntervalFormula(str, Enum):
    """How the probability interval spread is derived from (p, n).

    STD_ERROR uses sqrt(p(1-p)/n), the standard error of a binomial
    proportion. PAPER_LITERAL uses p(1-p), i.e. n*p*(1-p)/n taken at face
    value; it is kept selectable for comparison.
    """

    STD_ERROR = "std-error"
    PAPER_LITERAL = "paper-literal"


class IntervalN(str, Enum):
    """Which count feeds the spread: supporting co-occurrences or trigger days."""

    SUPPORT = "support"
    TRIGGERS = "triggers"


@dataclass(frozen=True)
class LearnConfig:
    delta_t_range: tuple = DEFAULT_DELTA_T_RANGE
    min_support: int = 3
    min_point_prob: float = 0.0
    require_above_prior: bool = True
    interval_formula: IntervalFormula = IntervalFormula.STD_ERROR
    interval_n: IntervalN = IntervalN.SUPPORT

    def __post_init__(self) -> None:
        if not self.delta_t_range:
            raise ConfigInvalid("delta_t_range must be nonempty")
        if any(int(d) < 1 for d in self.delta_t_range):
            raise ConfigInvalid("all delta_t values must be >= 1")
        if self.min_support < 0:
            raise ConfigInvalid("min_support must be >= 0")
        if not 0.0 <= self.min_point_prob <= 1.0:
            raise ConfigInvalid("min_point_prob must be in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "delta_t_range": list(self.delta_t_range),
            "min_support": self.min_support,
            "min_point_prob": self.min_point_prob,
            "require_above_prior": self.require_above_prior,
            "interval_formula": self.interval_formula.value,
            "interval_n": self.interval_n.value,
        }


def rule_id_for(condition: ConditionAtom, head: ActionAtom, delta_t: int) -> str:
    digest = hashlib.sha256(f"{condition}|{head}|{delta_t}".encode("utf-8")).hexdigest()
    return digest[:12]


@dataclass(frozen=True)
class AptRule:
    """condition ~> head after exactly delta_t days, with probability in [l, u]."""

    condition: ConditionAtom
    head: ActionAtom
    delta_t: int
    interval: ProbInterval
    point_prob: float
    support: int
    trigger_count: int
    prior: float
    rule_id: str = ""

    def __post_init__(self) -> None:
        if not self.rule_id:
            object.__setattr__(
                self, "rule_id", rule_id_for(self.condition, self.head, self.delta_t)
            )
        if self.support > self.trigger_count:
            raise ValueError(f"support {self.support} exceeds trigger count {self.trigger_count}")
        if not self.interval.l <= self.point_prob <= self.interval.u:
            raise ValueError(f"point_prob {self.point_prob} outside {self.interval}")


def compute_pfr(
    at: AnnotatedThread, condition: Formula, action: Formula, delta_t: int
) -> ProbInterval:
    """Point-frequency interval of ``action`` following ``condition`` after exactly delta_t days.

    Trigger days with t + delta_t beyond the thread end are excluded from
    both numerator and denominator, so no lookahead past the data occurs.
    Raw bounds are clamped into [0, 1]. Raises NoTriggers when no trigger
    day exists, which callers treat as "unlearnable", not probability 0.
    """
    if delta_t < 1:
        raise ConfigInvalid(f"delta_t must be >= 1, got {delta_t}")
    num_l = num_u = 0.0
    den_l = den_u = 0.0
    triggers = 0
    for t in range(1, at.thread.t_max - delta_t + 1):
        cond_ann = formula_annotation(at, condition, t)
        if cond_ann.u <= 0.0:
            continue
        triggers += 1
        den_l += cond_ann.u
        den_u += cond_ann.l
        act_ann = formula_annotation(at, action, t + delta_t)
        if act_ann.u <= 0.0:
            continue
        num_l += act_ann.l
        num_u += act_ann.u
    if triggers == 0:
        raise NoTriggers(f"condition {condition} never triggers within range for delta_t={delta_t}")
    lower = num_l / den_l  # den_l > 0: every trigger contributed a positive upper bound
    upper = num_u / den_u if den_u > 0.0 else 1.0
    lower = min(max(lower, 0.0), 1.0)
    upper = min(max(upper, 0.0), 1.0)
    if lower > upper:
        lower, upper = upper, lower
    return ProbInterval(lower, upper)


def prior(thread: Thread, head: Atom) -> float:
    """Base rate of the head: fraction of thread days whose world contains it."""
    if thread.t_max < 1:
        raise EmptyThread("prior over an empty thread")
    hits = sum(1 for world in thread.worlds if head in world)
    return hits / thread.t_max


def derive_interval(
    p: float, n: int, formula: IntervalFormula = IntervalFormula.STD_ERROR
) -> ProbInterval:
    """Interval [p - s, p + s] clamped to [0, 1], with spread s derived from (p, n)."""
    if n < 1:
        raise ConfigInvalid(f"n must be >= 1, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ConfigInvalid(f"p must be in [0, 1], got {p}")
    if formula == IntervalFormula.STD_ERROR:
        s = (p * (1.0 - p) / n) ** 0.5
    else:
        s = p * (1.0 - p)
    return ProbInterval(max(p - s, 0.0), min(p + s, 1.0))


def learn_program(thread: Thread, cfg: LearnConfig = LearnConfig()) -> list:
    """Mine admitted rules over every (condition, head, delta_t) candidate.

    Candidates pair condition atoms and action atoms each observed at
    least once in the thread. Point probability is the crisp frequency
    k/m; support is k, trigger count m. Output order is deterministic:
    (head canonical string, delta_t, descending point probability,
    rule_id).
    """
    if thread.t_max < 1:
        raise EmptyThread("cannot learn from a thread with no days")

    observed = thread.observed_atoms()
    conditions = sorted((a for a in observed if isinstance(a, ConditionAtom)), key=str)
    heads = sorted((a for a in observed if isinstance(a, ActionAtom)), key=str)

    cond_days = {
        c: [t for t in range(1, thread.t_max + 1) if c in thread.world_at(t)] for c in conditions
    }
    head_days = {
        h: {t for t in range(1, thread.t_max + 1) if h in thread.world_at(t)} for h in heads
    }

    rules = []
    for head in heads:
        head_prior = len(head_days[head]) / thread.t_max
        for delta_t in sorted(set(int(d) for d in cfg.delta_t_range)):
            horizon = thread.t_max - delta_t
            for condition in conditions:
                trigger_ts = [t for t in cond_days[condition] if t <= horizon]
                m = len(trigger_ts)
                if m == 0:
                    continue  # NoTriggers: candidate is unlearnable
                k = sum(1 for t in trigger_ts if t + delta_t in head_days[head])
                p = k / m
                n = k if cfg.interval_n == IntervalN.SUPPORT else m
                interval = derive_interval(p, max(n, 1), cfg.interval_formula)
                if k < cfg.min_support:
                    continue
                if p < cfg.min_point_prob:
                    continue
                if cfg.require_above_prior and not interval.l > head_prior:
                    continue
                rules.append(
                    AptRule(
                        condition=condition,
                        head=head,
                        delta_t=delta_t,
                        interval=interval,
                        point_prob=p,
                        support=k,
                        trigger_count=m,
                        prior=head_prior,
                    )
                )
    rules.sort(key=lambda r: (str(r.head), r.delta_t, -r.point_prob, r.rule_id))
    return rules


def rule_satisfied(at: AnnotatedThread, rule: AptRule) -> bool:
    """True iff the thread's point frequency for the rule lies inside the rule's interval."""
    pfr = compute_pfr(at, rule.condition, rule.head, rule.delta_t)
    return rule.interval.contains(pfr)


def percent_increase(rule: AptRule) -> float:
    """Likelihood increase of the head under the rule, relative to its prior, in percent."""
    if rule.prior <= 0.0:
        raise ZeroPrior(f"rule {rule.rule_id} has zero prior")
    return 100.0 * (rule.point_prob - rule.prior) / rule.prior


# ---------------------------------------------------------------------------
# rules.json round-trip


def rules_to_doc(rules: Sequence[AptRule], cfg: LearnConfig) -> dict:
    return {
        "config": cfg.to_dict(),
        "rules": [
            {
                "rule_id": r.rule_id,
                "condition": str(r.condition),
                "head": str(r.head),
                "delta_t": r.delta_t,
                "l": r.interval.l,
                "u": r.interval.u,
                "point_prob": r.point_prob,
                "support": r.support,
                "trigger_count": r.trigger_count,
                "prior": r.prior,
                "percent_increase": percent_increase(r) if r.prior > 0 else None,
            }
            for r in rules
        ],
    }


def write_rules(fp: IO, rules: Sequence[AptRule], cfg: LearnConfig) -> None:
    json.dump(rules_to_doc(rules, cfg), fp, indent=2, sort_keys=True)
    fp.write("\n")


def load_rules(source, label: str = "rules") -> tuple:
    """Load (rules, config dict) from a rules.json file."""
    if hasattr(source, "read"):
        raw = source.read()
    else:
        raw = Path(source).read_text(encoding="utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{label}: invalid JSON: {exc.msg}") from exc
    rules = []
    try:
        for item in doc["rules"]:
            condition = parse_atom(item["condition"])
            head = parse_atom(item["head"])
            if not isinstance(condition, ConditionAtom) or not isinstance(head, ActionAtom):
                raise ParseError(f"{label}: rule {item.get('rule_id')}: atom kinds are swapped")
            rules.append(
                AptRule(
                    condition=condition,
                    head=head,
                    delta_t=int(item["delta_t"]),
                    interval=ProbInterval(float(item["l"]), float(item["u"])),
                    point_prob=float(item["point_prob"]),
                    support=int(item["support"]),
                    trigger_count=int(item["trigger_count"]),
                    prior=float(item["prior"]),
                    rule_id=str(item["rule_id"]),
                )
            )
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"{label}: malformed rules file: {exc}") from exc
    return rules, doc.get("config", {})


def heatmap_grid(rules: Sequence[AptRule]) -> tuple:
    """(heads, delta_ts, cells) for a head x delta_t percent-increase grid.

    Several rules can share a cell (different conditions); the strongest
    percent increase wins.
    """
    heads = sorted({str(r.head) for r in rules})
    delta_ts = sorted({r.delta_t for r in rules})
    cells = {}
    for r in rules:
        if r.prior <= 0.0:
            continue
        key = (str(r.head), r.delta_t)
        value = percent_increase(r)
        if key not in cells or value > cells[key]:
            cells[key] = value
    return heads, delta_ts, cells


def write_heatmap_csv(fp: IO, rules: Sequence[AptRule]) -> None:
    import csv

    heads, delta_ts, cells = heatmap_grid(rules)
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(["head"] + [f"dt={d}" for d in delta_ts])
    for head in heads:
        row = [head]
        for d in delta_ts:
            value = cells.get((head, d))
            row.append("" if value is None else f"{value:.3f}")
        writer.writerow(row)
