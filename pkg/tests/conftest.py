"""Shared builders and oracles for the test suite."""

from __future__ import annotations

from collections import defaultdict
from datetime import date
from functools import lru_cache

import pytest

from aptwarn.core_model import (
    ActionAtom,
    AnnotatedThread,
    ConditionAtom,
    EventType,
    Thread,
    World,
)

START = date(2017, 7, 1)

COND_A = ConditionAtom("all", "Apache-Tomcat")
COND_B = ConditionAtom("all", "Intel")
COND_C = ConditionAtom("all", "Microsoft-Office")
HEAD_ME_1 = ActionAtom("armstrong", EventType.MALICIOUS_EMAIL, 1)
HEAD_ME_2 = ActionAtom("armstrong", EventType.MALICIOUS_EMAIL, 2)
HEAD_EM_1 = ActionAtom("armstrong", EventType.ENDPOINT_MALWARE, 1)


def make_thread(t_max: int, day_atoms: dict, start: date = START) -> Thread:
    """Thread with ``day_atoms[t]`` holding on day t (1-based); other days empty."""
    worlds = tuple(World(day_atoms.get(t, ())) for t in range(1, t_max + 1))
    return Thread(start=start, worlds=worlds)


def days_thread(t_max: int, atom_days: dict, start: date = START) -> Thread:
    """Thread built from {atom: iterable of day indices}."""
    day_atoms = {}
    for atom, days in atom_days.items():
        for t in days:
            day_atoms.setdefault(t, []).append(atom)
    return make_thread(t_max, day_atoms, start)


@pytest.fixture
def crisp():
    def _crisp(thread: Thread) -> AnnotatedThread:
        return AnnotatedThread.crisp(thread)

    return _crisp


def exhaustive_best_lead(n_warnings: int, qualified: dict) -> int:
    """Maximum total lead over every mutually exclusive pairing.

    The matching oracle: implicit exhaustive enumeration of all feasible
    pairings (each warning either skips or takes any unused qualified
    event), memoized over (warning index, used-event bitmask).
    """
    options = defaultdict(list)
    for (i, j), lead in qualified.items():
        options[i].append((j, lead))

    @lru_cache(maxsize=None)
    def go(i: int, used_mask: int) -> int:
        if i == n_warnings:
            return 0
        best = go(i + 1, used_mask)
        for j, lead in options.get(i, ()):
            if not used_mask & (1 << j):
                best = max(best, lead + go(i + 1, used_mask | (1 << j)))
        return best

    return go(0, 0)
