"""Vocabulary, interval and satisfaction semantics tests."""

from __future__ import annotations

import random
from datetime import date, timedelta

import pytest

from aptwarn.core_model import (
    CRISP_FALSE,
    CRISP_TRUE,
    ActionAtom,
    And,
    AnnotatedThread,
    ConditionAtom,
    EventType,
    Not,
    Or,
    ProbInterval,
    Ptf,
    Thread,
    TimeFormula,
    World,
    parse_atom,
    satisfies_ptf,
    satisfies_time_formula,
)
from aptwarn.errors import OutOfRange, ParseError

from conftest import COND_A, COND_B, HEAD_ME_1, make_thread


class TestAtoms:
    def test_condition_and_action_never_equal(self):
        # Disjoint vocabularies: the two atom kinds cannot collide.
        c = ConditionAtom("all", "debian")
        a = ActionAtom("armstrong", EventType.MALICIOUS_EMAIL, 1)
        assert c != a
        assert hash(c) != hash(a) or c != a

    def test_canonical_strings(self):
        assert str(COND_A) == "mention_on(all,Apache-Tomcat)"
        assert (
            str(ActionAtom("armstrong", EventType.ENDPOINT_MALWARE, 3))
            == "attack(armstrong,endpoint-malware,3)"
        )

    def test_parse_round_trip(self):
        for atom in (COND_A, HEAD_ME_1, ActionAtom("dexter", EventType.MALICIOUS_DESTINATION, 12)):
            assert parse_atom(str(atom)) == atom

    def test_actor_names_may_contain_spaces(self):
        atom = ConditionAtom("all", "HIDDEN COBRA")
        assert parse_atom(str(atom)) == atom

    def test_count_must_be_positive(self):
        with pytest.raises(ValueError):
            ActionAtom("armstrong", EventType.MALICIOUS_EMAIL, 0)

    def test_parse_rejects_garbage(self):
        for bad in ("mention_on(all)", "attack(o,bogus-type,1)", "attack(o,malicious-email,zero)", "foo(1,2)"):
            with pytest.raises(ParseError):
                parse_atom(bad)


class TestProbInterval:
    def test_ordering_enforced(self):
        with pytest.raises(ValueError):
            ProbInterval(0.6, 0.4)
        with pytest.raises(ValueError):
            ProbInterval(-0.1, 0.5)
        with pytest.raises(ValueError):
            ProbInterval(0.5, 1.1)

    def test_contains(self):
        assert ProbInterval(0.2, 0.8).contains(ProbInterval(0.3, 0.7))
        assert ProbInterval(0.2, 0.8).contains(ProbInterval(0.2, 0.8))
        assert not ProbInterval(0.3, 0.7).contains(ProbInterval(0.2, 0.8))

    def test_complement(self):
        assert ProbInterval(0.25, 0.75).complement() == ProbInterval(0.25, 0.75)
        assert ProbInterval(0.0, 0.25).complement() == ProbInterval(0.75, 1.0)

    def test_contains_is_partial_order(self):
        # reflexive, antisymmetric, transitive over random dyadic intervals
        rng = random.Random(11)

        def rand_interval():
            a, b = sorted((rng.randrange(65) / 64, rng.randrange(65) / 64))
            return ProbInterval(a, b)

        for _ in range(300):
            x, y, z = rand_interval(), rand_interval(), rand_interval()
            assert x.contains(x)
            if x.contains(y) and y.contains(x):
                assert x == y
            if x.contains(y) and y.contains(z):
                assert x.contains(z)


class TestWorldAndThread:
    def test_world_set_semantics(self):
        w = World([COND_A, COND_A, HEAD_ME_1])
        assert len(w) == 2
        assert COND_A in w
        assert w == World([HEAD_ME_1, COND_A])

    def test_empty_and_condition_only_worlds_are_allowed(self):
        # real calendars contain attack-free days
        thread = make_thread(3, {2: [COND_A]})
        assert len(thread.world_at(1)) == 0
        assert thread.world_at(2).conditions == frozenset({COND_A})
        assert thread.world_at(2).actions == frozenset()

    def test_date_index_round_trip(self):
        rng = random.Random(7)
        for _ in range(100):
            start = date(2016, 1, 1) + timedelta(days=rng.randrange(800))
            t_max = rng.randrange(1, 60)
            thread = make_thread(t_max, {}, start=start)
            t = rng.randrange(1, t_max + 1)
            assert thread.index_of(thread.date_of(t)) == t
            d = start + timedelta(days=rng.randrange(t_max))
            assert thread.date_of(thread.index_of(d)) == d

    def test_world_at_bounds(self):
        thread = make_thread(5, {})
        with pytest.raises(OutOfRange):
            thread.world_at(0)
        with pytest.raises(OutOfRange):
            thread.world_at(6)


class TestTimeFormulaSatisfaction:
    def test_membership_base_case(self):
        thread = make_thread(5, {3: [COND_A]})
        assert satisfies_time_formula(thread, TimeFormula(COND_A, 3))
        assert not satisfies_time_formula(thread, TimeFormula(COND_A, 2))

    def test_negation(self):
        thread = make_thread(5, {3: [COND_A]})
        assert not satisfies_time_formula(thread, TimeFormula(Not(COND_A), 3))
        assert satisfies_time_formula(thread, TimeFormula(Not(COND_A), 4))

    def test_conjunction_and_disjunction(self):
        thread = make_thread(5, {5: [COND_A, COND_B]})
        assert satisfies_time_formula(thread, TimeFormula(And(COND_A, COND_B), 5))
        assert not satisfies_time_formula(thread, TimeFormula(And(COND_A, HEAD_ME_1), 5))
        assert satisfies_time_formula(thread, TimeFormula(Or(COND_A, HEAD_ME_1), 5))

    def test_out_of_range(self):
        thread = make_thread(3, {})
        with pytest.raises(OutOfRange):
            satisfies_time_formula(thread, TimeFormula(COND_A, 4))


class TestPtfSatisfaction:
    def test_crisp_annotation_inside_query(self):
        thread = make_thread(3, {2: [COND_A]})
        at = AnnotatedThread.crisp(thread)
        assert satisfies_ptf(at, Ptf(TimeFormula(COND_A, 2), ProbInterval(0.4, 1.0)))
        assert not satisfies_ptf(at, Ptf(TimeFormula(COND_A, 2), ProbInterval(0.4, 0.9)))

    def test_negation_rewrites_to_complement(self):
        thread = make_thread(3, {2: [COND_A]})
        at = AnnotatedThread.crisp(thread)
        # query not-a at [0, 0.2] becomes a at [0.8, 1.0], satisfied by [1, 1]
        assert satisfies_ptf(at, Ptf(TimeFormula(Not(COND_A), 2), ProbInterval(0.0, 0.2)))

    def test_absent_atom(self):
        thread = make_thread(5, {})
        at = AnnotatedThread.crisp(thread)
        assert not satisfies_ptf(at, Ptf(TimeFormula(COND_A, 4), ProbInterval(0.5, 1.0)))
        assert satisfies_ptf(at, Ptf(TimeFormula(COND_A, 4), ProbInterval(0.0, 0.5)))

    def test_explicit_annotations_override_crisp_defaults(self):
        thread = make_thread(3, {})
        at = AnnotatedThread(thread, {(COND_A, 1): ProbInterval(0.5, 0.75)})
        assert satisfies_ptf(at, Ptf(TimeFormula(COND_A, 1), ProbInterval(0.25, 1.0)))
        assert not satisfies_ptf(at, Ptf(TimeFormula(COND_A, 1), ProbInterval(0.6, 1.0)))

    def test_out_of_range(self):
        thread = make_thread(3, {})
        at = AnnotatedThread.crisp(thread)
        with pytest.raises(OutOfRange):
            satisfies_ptf(at, Ptf(TimeFormula(COND_A, 0), ProbInterval(0.0, 1.0)))


# ---------------------------------------------------------------------------
# Randomized structural properties

ATOM_POOL = [
    COND_A,
    COND_B,
    ConditionAtom("all", "Debian"),
    HEAD_ME_1,
    ActionAtom("dexter", EventType.ENDPOINT_MALWARE, 2),
]


def random_formula(rng: random.Random, depth: int):
    if depth <= 0 or rng.random() < 0.35:
        return rng.choice(ATOM_POOL)
    node = rng.choice(("not", "and", "or"))
    if node == "not":
        return Not(random_formula(rng, depth - 1))
    left = random_formula(rng, depth - 1)
    right = random_formula(rng, depth - 1)
    return And(left, right) if node == "and" else Or(left, right)


def random_world(rng: random.Random) -> World:
    return World(a for a in ATOM_POOL if rng.random() < 0.5)


def dyadic_interval(rng: random.Random) -> ProbInterval:
    # dyadic endpoints keep 1-x exact, so complement rewrites stay lossless
    a, b = sorted((rng.randrange(65) / 64, rng.randrange(65) / 64))
    return ProbInterval(a, b)


def brute_truth(formula, true_atoms: frozenset) -> bool:
    """Independent truth-table evaluation used as the semantics oracle."""
    if isinstance(formula, Not):
        return not brute_truth(formula.child, true_atoms)
    if isinstance(formula, And):
        return brute_truth(formula.left, true_atoms) and brute_truth(formula.right, true_atoms)
    if isinstance(formula, Or):
        return brute_truth(formula.left, true_atoms) or brute_truth(formula.right, true_atoms)
    return formula in true_atoms


def test_time_formula_matches_truth_table_oracle():
    rng = random.Random(42)
    for _ in range(400):
        world = random_world(rng)
        thread = Thread(start=date(2017, 1, 1), worlds=(world,))
        formula = random_formula(rng, 4)
        assert satisfies_time_formula(thread, TimeFormula(formula, 1)) == brute_truth(
            formula, world.atoms
        )


def test_double_negation_is_identity():
    rng = random.Random(43)
    for _ in range(400):
        world = random_world(rng)
        at = AnnotatedThread.crisp(Thread(start=date(2017, 1, 1), worlds=(world,)))
        formula = random_formula(rng, 3)
        interval = dyadic_interval(rng)
        plain = satisfies_ptf(at, Ptf(TimeFormula(formula, 1), interval))
        doubled = satisfies_ptf(at, Ptf(TimeFormula(Not(Not(formula)), 1), interval))
        assert plain == doubled


def random_monotone_formula(rng: random.Random, depth: int):
    """Formula tree without negation; literals are atoms."""
    if depth <= 0 or rng.random() < 0.4:
        return rng.choice(ATOM_POOL)
    left = random_monotone_formula(rng, depth - 1)
    right = random_monotone_formula(rng, depth - 1)
    return And(left, right) if rng.random() < 0.5 else Or(left, right)


def test_crisp_ptf_on_monotone_formulas_matches_boolean_satisfaction():
    # Without negation the bullet recursion at [1, 1] is exactly boolean
    # truth. (With negation it is deliberately stricter: a [0, 0] query on
    # a conjunction demands both conjuncts false, not just one.)
    rng = random.Random(44)
    for _ in range(300):
        world = random_world(rng)
        thread = Thread(start=date(2017, 1, 1), worlds=(world,))
        at = AnnotatedThread.crisp(thread)
        formula = random_monotone_formula(rng, 4)
        assert satisfies_ptf(at, Ptf(TimeFormula(formula, 1), CRISP_TRUE)) == brute_truth(
            formula, world.atoms
        )


def test_crisp_constants():
    assert CRISP_TRUE == ProbInterval(1.0, 1.0)
    assert CRISP_FALSE == ProbInterval(0.0, 0.0)
