"""Logical vocabulary and satisfaction semantics.

The vocabulary is split into two disjoint atom families: condition atoms
record that an entity (a CPE group or a threat actor) was mentioned on a
set of sites on a given day, and action atoms record that an organization
saw an exact number of attack events of one type on a day. Worlds are
per-day atom sets, a thread is the day-indexed sequence of worlds, and
probabilistic time formulas (ptfs) attach probability intervals to
time-stamped formulas.

Observed data yields crisp annotations: a present atom carries [1, 1] and
an absent atom [0, 0]. A crisp observation [p, p] satisfies a ptf query
[l, u] iff l <= p <= u, i.e. the annotation interval must lie inside the
query interval. Wider annotation intervals are supported so interval
arithmetic stays testable, but the production path is crisp.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import date, timedelta
from enum import Enum
from typing import Iterable, Iterator, Mapping, Union

from .errors import OutOfRange, ParseError

__all__ = [
    "EventType",
    "ConditionAtom",
    "ActionAtom",
    "Atom",
    "ProbInterval",
    "CRISP_TRUE",
    "CRISP_FALSE",
    "World",
    "Thread",
    "Not",
    "And",
    "Or",
    "Formula",
    "TimeFormula",
    "Ptf",
    "AnnotatedThread",
    "parse_atom",
    "satisfies_time_formula",
    "satisfies_ptf",
    "formula_annotation",
]


class EventType(str, Enum):
    """The three ground-truth attack event types."""

    MALICIOUS_EMAIL = "malicious-email"
    MALICIOUS_DESTINATION = "malicious-destination"
    ENDPOINT_MALWARE = "endpoint-malware"

    def __str__(self) -> str:  # keep canonical strings free of Enum repr
        return self.value


# Names embedded in canonical atom strings must not contain structural chars.
_NAME_RX = re.compile(r"^[^(),]+$")


def _check_name(label: str, value: str) -> None:
    if not value or not _NAME_RX.match(value):
        raise ValueError(f"{label} must be nonempty and contain no '(', ')' or ',': {value!r}")


@dataclass(frozen=True)
class ConditionAtom:
    """An entity mentioned on a site set: ``mention_on(<site_set>,<entity>)``."""

    site_set: str
    entity: str

    def __post_init__(self) -> None:
        _check_name("site_set", self.site_set)
        _check_name("entity", self.entity)

    def canonical(self) -> str:
        return f"mention_on({self.site_set},{self.entity})"

    def __str__(self) -> str:
        return self.canonical()


@dataclass(frozen=True)
class ActionAtom:
    """An exact daily attack count: ``attack(<org>,<event_type>,<count>)``."""

    org: str
    event_type: EventType
    count: int

    def __post_init__(self) -> None:
        _check_name("org", self.org)
        if not isinstance(self.count, int) or self.count < 1:
            raise ValueError(f"attack count must be a positive integer: {self.count!r}")

    def canonical(self) -> str:
        return f"attack({self.org},{self.event_type.value},{self.count})"

    def __str__(self) -> str:
        return self.canonical()


Atom = Union[ConditionAtom, ActionAtom]

_ATOM_RX = re.compile(r"^(mention_on|attack)\((.*)\)$")


def parse_atom(text: str) -> Atom:
    """Parse a canonical atom string back into an atom.

    Raises ParseError on anything that does not round-trip through
    ``canonical()``.
    """
    m = _ATOM_RX.match(text.strip())
    if not m:
        raise ParseError(f"not a canonical atom string: {text!r}")
    pred, body = m.group(1), m.group(2)
    parts = body.split(",")
    try:
        if pred == "mention_on":
            if len(parts) != 2:
                raise ValueError("mention_on takes exactly 2 arguments")
            return ConditionAtom(parts[0], parts[1])
        if len(parts) != 3:
            raise ValueError("attack takes exactly 3 arguments")
        return ActionAtom(parts[0], EventType(parts[1]), int(parts[2]))
    except ValueError as exc:
        raise ParseError(f"bad atom {text!r}: {exc}") from exc


@dataclass(frozen=True)
class ProbInterval:
    """A probability interval [l, u] with 0 <= l <= u <= 1."""

    l: float
    u: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.l <= self.u <= 1.0):
            raise ValueError(f"invalid probability interval [{self.l}, {self.u}]")

    def contains(self, other: "ProbInterval") -> bool:
        """True iff ``other`` lies inside this interval."""
        return self.l <= other.l and other.u <= self.u

    def complement(self) -> "ProbInterval":
        """The interval of the negated event: [1-u, 1-l]."""
        return ProbInterval(1.0 - self.u, 1.0 - self.l)

    @property
    def width(self) -> float:
        return self.u - self.l

    def __str__(self) -> str:
        return f"[{self.l}, {self.u}]"


CRISP_TRUE = ProbInterval(1.0, 1.0)
CRISP_FALSE = ProbInterval(0.0, 0.0)


class World:
    """A set of ground atoms holding on one day. Insertion is idempotent."""

    __slots__ = ("atoms",)

    def __init__(self, atoms: Iterable[Atom] = ()):
        object.__setattr__(self, "atoms", frozenset(atoms))

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("World is immutable")

    def __contains__(self, atom: Atom) -> bool:
        return atom in self.atoms

    def __iter__(self) -> Iterator[Atom]:
        return iter(self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, World) and self.atoms == other.atoms

    def __hash__(self) -> int:
        return hash(self.atoms)

    def __repr__(self) -> str:
        inner = ", ".join(sorted(str(a) for a in self.atoms))
        return f"World({{{inner}}})"

    @property
    def conditions(self) -> frozenset:
        return frozenset(a for a in self.atoms if isinstance(a, ConditionAtom))

    @property
    def actions(self) -> frozenset:
        return frozenset(a for a in self.atoms if isinstance(a, ActionAtom))


@dataclass(frozen=True)
class Thread:
    """A day-granular sequence of worlds, time points t in 1..t_max.

    Time point t corresponds to calendar date ``start + (t - 1) days``;
    the mapping round-trips exactly.
    """

    start: date
    worlds: tuple

    @property
    def t_max(self) -> int:
        return len(self.worlds)

    def _check(self, t: int) -> None:
        if not 1 <= t <= self.t_max:
            raise OutOfRange(f"time point {t} outside 1..{self.t_max}")

    def world_at(self, t: int) -> World:
        self._check(t)
        return self.worlds[t - 1]

    def date_of(self, t: int) -> date:
        self._check(t)
        return self.start + timedelta(days=t - 1)

    def index_of(self, d: date) -> int:
        t = (d - self.start).days + 1
        self._check(t)
        return t

    @property
    def end(self) -> date:
        return self.start + timedelta(days=max(self.t_max - 1, 0))

    def observed_atoms(self) -> frozenset:
        return frozenset(a for w in self.worlds for a in w)


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


Formula = Union[ConditionAtom, ActionAtom, Not, And, Or]


@dataclass(frozen=True)
class TimeFormula:
    """A formula asserted at one time point."""

    formula: Formula
    t: int


@dataclass(frozen=True)
class Ptf:
    """A probabilistic time formula: the formula holds at t with probability in the interval."""

    tf: TimeFormula
    interval: ProbInterval


@dataclass(frozen=True)
class AnnotatedThread:
    """A thread plus per-(atom, t) probability annotations.

    Atoms without an explicit annotation default to the crisp reading of
    the underlying thread: [1, 1] when present in the world, [0, 0] when
    absent.
    """

    thread: Thread
    annotations: Mapping = field(default_factory=dict)

    @classmethod
    def crisp(cls, thread: Thread) -> "AnnotatedThread":
        return cls(thread=thread, annotations={})

    def annotation_of(self, atom: Atom, t: int) -> ProbInterval:
        explicit = self.annotations.get((atom, t))
        if explicit is not None:
            return explicit
        return CRISP_TRUE if atom in self.thread.world_at(t) else CRISP_FALSE


def _holds(world: World, formula: Formula) -> bool:
    if isinstance(formula, (ConditionAtom, ActionAtom)):
        return formula in world
    if isinstance(formula, Not):
        return not _holds(world, formula.child)
    if isinstance(formula, And):
        return _holds(world, formula.left) and _holds(world, formula.right)
    if isinstance(formula, Or):
        return _holds(world, formula.left) or _holds(world, formula.right)
    raise TypeError(f"unsupported formula node: {formula!r}")


def satisfies_time_formula(thread: Thread, tf: TimeFormula) -> bool:
    """Boolean satisfaction of a time formula against a thread.

    Atom leaves reduce to world membership at tf.t; negation, conjunction
    and disjunction recurse structurally. Raises OutOfRange when tf.t lies
    outside 1..t_max.
    """
    world = thread.world_at(tf.t)
    return _holds(world, tf.formula)


def satisfies_ptf(at: AnnotatedThread, ptf: Ptf) -> bool:
    """Interval satisfaction of a ptf against an annotated thread.

    Ground atoms are satisfied when their annotation interval lies inside
    the query interval; negation rewrites the query to its complement
    [1-u, 1-l]; conjunction requires both conjuncts at the same interval,
    disjunction either.
    """
    at.thread._check(ptf.tf.t)
    return _sat_ptf(at, ptf.tf.formula, ptf.tf.t, ptf.interval)


def _sat_ptf(at: AnnotatedThread, formula: Formula, t: int, interval: ProbInterval) -> bool:
    if isinstance(formula, (ConditionAtom, ActionAtom)):
        return interval.contains(at.annotation_of(formula, t))
    if isinstance(formula, Not):
        return _sat_ptf(at, formula.child, t, interval.complement())
    if isinstance(formula, And):
        return _sat_ptf(at, formula.left, t, interval) and _sat_ptf(at, formula.right, t, interval)
    if isinstance(formula, Or):
        return _sat_ptf(at, formula.left, t, interval) or _sat_ptf(at, formula.right, t, interval)
    raise TypeError(f"unsupported formula node: {formula!r}")


def formula_annotation(at: AnnotatedThread, formula: Formula, t: int) -> ProbInterval:
    """Derive the annotation interval of a formula at time t.

    Atoms take their stored annotation, negation complements, conjunction
    takes the pointwise minimum and disjunction the pointwise maximum. On
    crisp annotations this coincides with boolean evaluation, which is all
    the production path (single-atom formulas) relies on.
    """
    if isinstance(formula, (ConditionAtom, ActionAtom)):
        return at.annotation_of(formula, t)
    if isinstance(formula, Not):
        return formula_annotation(at, formula.child, t).complement()
    if isinstance(formula, And):
        a = formula_annotation(at, formula.left, t)
        b = formula_annotation(at, formula.right, t)
        return ProbInterval(min(a.l, b.l), min(a.u, b.u))
    if isinstance(formula, Or):
        a = formula_annotation(at, formula.left, t)
        b = formula_annotation(at, formula.right, t)
        return ProbInterval(max(a.l, b.l), max(a.u, b.u))
    raise TypeError(f"unsupported formula node: {formula!r}")
