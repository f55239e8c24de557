"""Warning generation tests: triggering, qualification, replay, audit trail."""

from __future__ import annotations

import io
import random
from datetime import date, timedelta

import pytest

from aptwarn.core_model import ConditionAtom, EventType, ProbInterval, World
from aptwarn.errors import MissingProvenance
from aptwarn.ingest import CveMapping, MentionRecord, ProvenanceEntry
from aptwarn.learner import AptRule
from aptwarn.warn import (
    audit_trail,
    generate_warnings,
    load_warnings,
    qualify,
    replay,
    triggered_rules,
    write_warnings,
)

from conftest import COND_A, COND_B, HEAD_EM_1, HEAD_ME_1, HEAD_ME_2


def rule(condition, head, delta_t, p, rid=""):
    return AptRule(
        condition=condition,
        head=head,
        delta_t=delta_t,
        interval=ProbInterval(max(p - 0.1, 0.0), min(p + 0.1, 1.0)),
        point_prob=p,
        support=3,
        trigger_count=5,
        prior=0.05,
        rule_id=rid,
    )


def provenance_for(*conditions):
    return {
        c: ProvenanceEntry(posting_ids=(f"post-{c.entity}",), cves=(f"CVE-2099-9000{i}",))
        for i, c in enumerate(conditions)
    }


class TestTriggeredRules:
    def test_membership(self):
        program = [rule(COND_B, HEAD_ME_1, 3, 0.6), rule(COND_A, HEAD_ME_1, 3, 0.5)]
        world = World([COND_B])
        assert triggered_rules(program, world) == [program[0]]

    def test_empty_world_triggers_nothing(self):
        program = [rule(COND_A, HEAD_ME_1, 3, 0.5)]
        assert triggered_rules(program, World()) == []

    def test_multiple_entities(self):
        program = [rule(COND_A, HEAD_ME_1, 3, 0.5), rule(COND_B, HEAD_EM_1, 2, 0.4)]
        assert triggered_rules(program, World([COND_A, COND_B])) == program


class TestQualify:
    def test_same_head_same_gap_keeps_higher_probability(self):
        winner = rule(COND_A, HEAD_ME_2, 3, 0.6)
        loser = rule(COND_B, HEAD_ME_2, 3, 0.5)
        assert qualify([loser, winner]) == [winner]

    def test_different_counts_both_survive(self):
        two = rule(COND_A, HEAD_ME_2, 3, 0.6)
        one = rule(COND_B, HEAD_ME_1, 3, 0.5)
        survivors = qualify([two, one])
        assert set(survivors) == {two, one}
        # downstream this pair yields 2 + 1 = 3 warnings
        assert sum(r.head.count for r in survivors) == 3

    def test_single_rule_is_identity(self):
        only = rule(COND_A, HEAD_ME_1, 3, 0.5)
        assert qualify([only]) == [only]

    def test_probability_tie_breaks_on_rule_id(self):
        a = rule(COND_A, HEAD_ME_1, 3, 0.5, rid="aaa")
        b = rule(COND_B, HEAD_ME_1, 3, 0.5, rid="bbb")
        assert qualify([b, a]) == [a]
        assert qualify([a, b]) == [a]

    def test_one_survivor_per_group_property(self):
        rng = random.Random(23)
        conds = [COND_A, COND_B, ConditionAtom("all", "Debian"), ConditionAtom("all", "Intel-ME")]
        heads = [HEAD_ME_1, HEAD_ME_2, HEAD_EM_1]
        for _ in range(50):
            triggered = [
                rule(rng.choice(conds), rng.choice(heads), rng.randrange(1, 4), rng.randrange(11) / 10)
                for _ in range(rng.randrange(1, 10))
            ]
            survivors = qualify(triggered)
            groups = {(r.head, r.delta_t) for r in survivors}
            assert len(groups) == len(survivors)
            for survivor in survivors:
                peers = [
                    r for r in triggered if (r.head, r.delta_t) == (survivor.head, survivor.delta_t)
                ]
                assert survivor.point_prob == max(r.point_prob for r in peers)


class TestGenerateWarnings:
    DAY = date(2017, 7, 1)

    def test_head_count_many_warnings(self):
        r = rule(COND_A, HEAD_ME_2, 3, 0.6)
        out = generate_warnings([r], self.DAY, provenance_for(COND_A))
        assert len(out) == 2
        assert len({w.warning_id for w in out}) == 2
        for w in out:
            assert w.generated_on == self.DAY
            assert w.predicted_date == self.DAY + timedelta(days=3)
            assert (w.predicted_date - w.generated_on).days == r.delta_t
            assert w.event_type is EventType.MALICIOUS_EMAIL
            assert w.target_org == "armstrong"
            assert w.probability == 0.6
            assert w.provenance.posting_ids == ("post-Apache-Tomcat",)
            assert w.provenance.entities == ("Apache-Tomcat",)

    def test_no_qualified_rules(self):
        assert generate_warnings([], self.DAY, {}) == []

    def test_x_plus_y_warnings_same_predicted_date(self):
        qualified = qualify(
            [rule(COND_A, HEAD_ME_2, 3, 0.6), rule(COND_B, HEAD_ME_1, 3, 0.5)]
        )
        out = generate_warnings(qualified, self.DAY, provenance_for(COND_A, COND_B))
        assert len(out) == 3
        assert {w.predicted_date for w in out} == {self.DAY + timedelta(days=3)}

    def test_missing_provenance_raises(self):
        r = rule(COND_A, HEAD_ME_1, 3, 0.5)
        with pytest.raises(MissingProvenance):
            generate_warnings([r], self.DAY, {})

    def test_provenance_never_empty(self):
        r = rule(COND_A, HEAD_ME_2, 3, 0.6)
        for w in generate_warnings([r], self.DAY, provenance_for(COND_A)):
            assert not w.provenance.is_empty()


MAPPING = CveMapping(
    entries={
        "CVE-2099-90001": (("Apache-Tomcat",), ()),
        "CVE-2099-90002": (("Intel",), ()),
    }
)


def mention(pid, day, cve):
    return MentionRecord(posting_id=pid, date=day, site="forum-1", text=f"chatter about {cve}")


class TestReplay:
    RANGE = (date(2017, 7, 1), date(2017, 7, 10))

    def test_empty_stream(self):
        program = [rule(COND_A, HEAD_ME_1, 3, 0.5)]
        assert replay(program, [], MAPPING, self.RANGE) == []

    def test_single_mention_day(self):
        program = [rule(COND_A, HEAD_ME_1, 3, 0.5)]
        mentions = [mention("p1", date(2017, 7, 1), "cve-2099-90001")]
        [w] = replay(program, mentions, MAPPING, self.RANGE)
        assert w.generated_on == date(2017, 7, 1)
        assert w.predicted_date == date(2017, 7, 4)
        assert w.provenance.posting_ids == ("p1",)
        assert w.provenance.cves == ("CVE-2099-90001",)

    def test_determinism(self):
        program = [rule(COND_A, HEAD_ME_1, 3, 0.5), rule(COND_B, HEAD_EM_1, 2, 0.7)]
        mentions = [
            mention("p1", date(2017, 7, 1), "cve-2099-90001"),
            mention("p2", date(2017, 7, 1), "cve-2099-90002"),
            mention("p3", date(2017, 7, 5), "cve-2099-90001 and cve-2099-90002"),
        ]
        a = replay(program, mentions, MAPPING, self.RANGE)
        b = replay(program, list(reversed(mentions)), MAPPING, self.RANGE)
        assert a == b

    def test_compositionality_over_split(self):
        program = [rule(COND_A, HEAD_ME_1, 3, 0.5), rule(COND_B, HEAD_EM_1, 2, 0.7)]
        rng = random.Random(7)
        mentions = [
            mention(f"p{i}", date(2017, 7, 1) + timedelta(days=rng.randrange(10)),
                    rng.choice(("cve-2099-90001", "cve-2099-90002")))
            for i in range(12)
        ]
        whole = replay(program, mentions, MAPPING, self.RANGE)
        for offset in range(1, 9):
            cut = date(2017, 7, 1) + timedelta(days=offset)
            left = replay(program, mentions, MAPPING, (self.RANGE[0], cut))
            right = replay(program, mentions, MAPPING, (cut + timedelta(days=1), self.RANGE[1]))
            assert left + right == whole

    def test_warnings_on_different_days_may_share_predicted_date(self):
        # dt=3 fired on the 1st and dt=1 fired on the 3rd both predict the 4th
        program = [rule(COND_A, HEAD_ME_1, 3, 0.5), rule(COND_B, HEAD_ME_1, 1, 0.6)]
        mentions = [
            mention("p1", date(2017, 7, 1), "cve-2099-90001"),
            mention("p2", date(2017, 7, 3), "cve-2099-90002"),
        ]
        out = replay(program, mentions, MAPPING, self.RANGE)
        assert len(out) == 2
        assert {w.predicted_date for w in out} == {date(2017, 7, 4)}


class TestWarningsFile:
    def test_round_trip(self):
        program = [rule(COND_A, HEAD_ME_2, 3, 0.5)]
        mentions = [mention("p1", date(2017, 7, 1), "cve-2099-90001")]
        warnings = replay(program, mentions, MAPPING, (date(2017, 7, 1), date(2017, 7, 2)))
        buf = io.StringIO()
        write_warnings(buf, warnings)
        assert load_warnings(io.StringIO(buf.getvalue())) == warnings

    def test_audit_trail_resolves_everything(self):
        program = [rule(COND_A, HEAD_ME_1, 3, 0.5)]
        mentions = [mention("p1", date(2017, 7, 1), "cve-2099-90001")]
        [w] = replay(program, mentions, MAPPING, (date(2017, 7, 1), date(2017, 7, 2)))
        text = audit_trail(
            w,
            rules_by_id={r.rule_id: r for r in program},
            mentions_by_id={m.posting_id: m for m in mentions},
        )
        assert w.warning_id in text
        assert str(COND_A) in text
        assert "p1" in text
        assert "NOT FOUND" not in text
