import io
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fieldimpact.reconcile import (
    RuleError,
    RuleSet,
    compile_rules,
    match_address,
    normalize_address,
    reconcile_corpus,
)

from conftest import mk_corpus, pub

ORGS3 = [
    ("ORG_TV", "Tor Vergata", "U", None),
    ("ORG_A", "Org Alpha", "U", None),
    ("ORG_B", "Org Beta", "RI", None),
]


def ruleset(text: str, orgs=None) -> RuleSet:
    registry = {o[0]: o for o in (orgs or ORGS3)}
    corpus = mk_corpus([pub("p1")], orgs=orgs or ORGS3)
    return compile_rules(io.StringIO(text), corpus.organizations)


class TestNormalize:
    def test_diacritics_punctuation_whitespace(self):
        assert normalize_address("Univ. Roma  'Tor Vergatà'") == "univ roma tor vergata"

    def test_empty(self):
        assert normalize_address("") == ""

    @given(st.text(max_size=60))
    def test_idempotent(self, s):
        once = normalize_address(s)
        assert normalize_address(once) == once

    def test_is_lowercase_alnum_single_spaced(self):
        out = normalize_address("A--B   ç,; (x) 42")
        assert out == "a b c x 42"


class TestCompileRules:
    def test_disjoint_patterns_no_conflict(self):
        rs = ruleset("alpha lab\tORG_A\nbeta lab\tORG_B\n")
        assert len(rs.rules) == 2
        assert rs.conflicts == ()

    def test_containment_with_different_targets_reported(self):
        rs = ruleset("roma tor vergata\tORG_A\ntor vergata\tORG_B\n")
        assert len(rs.rules) == 2
        assert len(rs.conflicts) == 1
        pair = rs.conflicts[0]
        assert {pair.first.org_id, pair.second.org_id} == {"ORG_A", "ORG_B"}

    def test_containment_with_same_target_is_fine(self):
        rs = ruleset("roma tor vergata\tORG_TV\ntor vergata\tORG_TV\n")
        assert rs.conflicts == ()

    def test_unknown_org_is_error_with_line(self):
        with pytest.raises(RuleError, match="line 2.*X9"):
            ruleset("alpha\tORG_A\nbeta site\tX9\n")

    def test_empty_pattern_after_normalization_is_error(self):
        with pytest.raises(RuleError, match="empty"):
            ruleset("'''\tORG_A\n")

    def test_duplicate_pattern_target_deduplicated_with_warning(self):
        rs = ruleset("alpha\tORG_A\nalpha\tORG_A\n")
        assert len(rs.rules) == 1
        assert len(rs.warnings) == 1

    def test_comments_and_blank_lines_ignored(self):
        rs = ruleset("# comment\n\nalpha\tORG_A\n")
        assert len(rs.rules) == 1
        assert rs.rules[0].source_line == 3

    def test_subunit_must_belong_to_org(self):
        orgs = ORGS3 + [("SUB1", "Sub One", "RI", "ORG_B")]
        rs = ruleset("beta sub one\tORG_B\tSUB1\n", orgs=orgs)
        assert rs.rules[0].target == ("ORG_B", "SUB1")
        with pytest.raises(RuleError, match="does not belong"):
            ruleset("x\tORG_A\tSUB1\n", orgs=orgs)


class TestMatchAddress:
    def test_substring_match(self):
        rs = ruleset("roma tor vergata\tORG_TV\n")
        assert match_address("dip ing impresa univ roma tor vergata", rs) == ("ORG_TV", None)

    def test_no_rule_matches(self):
        rs = ruleset("alpha\tORG_A\n")
        assert match_address("completely different", rs) is None

    def test_first_match_wins_in_file_order(self):
        lines = ["# filler"] * 3 + ["alpha site\tORG_A"] + ["# filler"] * 6 + ["site\tORG_B"]
        rs = ruleset("\n".join(lines) + "\n")
        assert rs.rules[0].source_line == 4
        assert rs.rules[1].source_line == 11
        assert match_address("the alpha site x", rs) == ("ORG_A", None)

    @given(st.data())
    @settings(max_examples=60)
    def test_appending_rules_never_unmatches(self, data):
        words = st.sampled_from(["alpha", "beta", "gamma", "lab", "inst", "roma"])
        patterns = data.draw(st.lists(st.lists(words, min_size=1, max_size=3).map(" ".join),
                                      min_size=1, max_size=6))
        targets = data.draw(st.lists(st.sampled_from(["ORG_A", "ORG_B"]),
                                     min_size=len(patterns), max_size=len(patterns)))
        address = data.draw(st.lists(words, min_size=1, max_size=8).map(" ".join))
        base_text = "".join(f"{p}\t{t}\n" for p, t in zip(patterns, targets))
        extra = data.draw(st.lists(words, min_size=1, max_size=3).map(" ".join))
        rs_before = ruleset(base_text)
        rs_after = ruleset(base_text + f"{extra}\tORG_B\n")
        before = match_address(address, rs_before)
        if before is not None:
            assert match_address(address, rs_after) == before


class TestReconcileCorpus:
    def corpus_two_orgs(self, addresses):
        return mk_corpus([pub("p1", addresses=addresses)], orgs=ORGS3)

    def test_two_orgs_half_weight_each(self):
        corpus = self.corpus_two_orgs(["Org Alpha dept", "Org Beta lab"])
        rs = ruleset("org alpha\tORG_A\norg beta\tORG_B\n")
        rec = reconcile_corpus(corpus, rs).corpus.records[0]
        assert [(a.org_id, a.weight) for a in rec.attributions] == [
            ("ORG_A", Fraction(1, 2)),
            ("ORG_B", Fraction(1, 2)),
        ]

    def test_same_org_twice_collapses_to_weight_one(self):
        corpus = self.corpus_two_orgs(["Org Alpha dept", "ORG ALPHA, lab 2"])
        rs = ruleset("org alpha\tORG_A\n")
        rec = reconcile_corpus(corpus, rs).corpus.records[0]
        assert [(a.org_id, a.weight) for a in rec.attributions] == [("ORG_A", Fraction(1))]

    def test_subunit_targets_split_their_org_share(self):
        orgs = ORGS3 + [("SUB1", "Sub One", "RI", "ORG_B"), ("SUB2", "Sub Two", "RI", "ORG_B")]
        corpus = mk_corpus(
            [pub("p1", addresses=["beta sub one", "beta sub two", "org alpha"])], orgs=orgs
        )
        rs = ruleset(
            "beta sub one\tORG_B\tSUB1\nbeta sub two\tORG_B\tSUB2\norg alpha\tORG_A\n", orgs=orgs
        )
        rec = reconcile_corpus(corpus, rs).corpus.records[0]
        weights = {(a.org_id, a.subunit_id): a.weight for a in rec.attributions}
        assert weights == {
            ("ORG_A", None): Fraction(1, 2),
            ("ORG_B", "SUB1"): Fraction(1, 4),
            ("ORG_B", "SUB2"): Fraction(1, 4),
        }
        assert sum(weights.values()) == 1

    def test_unmatched_report_counts_sum(self):
        corpus = mk_corpus(
            [
                pub("p1", addresses=["nowhere inst", "org alpha"]),
                pub("p2", addresses=["nowhere inst"]),
                pub("p3", addresses=["elsewhere"]),
            ],
            orgs=ORGS3,
        )
        rs = ruleset("org alpha\tORG_A\n")
        result = reconcile_corpus(corpus, rs)
        assert result.unmatched.total_instances() == 3
        by_addr = {e.address: e for e in result.unmatched.entries}
        assert by_addr["nowhere inst"].count == 2
        assert set(by_addr["nowhere inst"].sample_ids) == {"p1", "p2"}
        assert result.stats.match_rate == pytest.approx(0.25)
        assert result.stats.n_unattributed == 2

    def test_unmatched_records_keep_empty_attributions(self):
        corpus = mk_corpus([pub("p1", addresses=["mystery place"])], orgs=ORGS3)
        rs = ruleset("org alpha\tORG_A\n")
        rec = reconcile_corpus(corpus, rs).corpus.records[0]
        assert rec.attributions == ()

    def test_thread_count_does_not_change_outcome(self):
        pubs = [
            pub(f"p{i:03d}", addresses=[["Org Alpha x", "Org Beta y", "nowhere"][i % 3]])
            for i in range(60)
        ]
        corpus = mk_corpus(pubs, orgs=ORGS3)
        rs = ruleset("org alpha\tORG_A\norg beta\tORG_B\n")
        one = reconcile_corpus(corpus, rs, threads=1)
        four = reconcile_corpus(corpus, rs, threads=4)
        assert one.corpus.records == four.corpus.records
        assert one.unmatched == four.unmatched
        assert one.stats == four.stats

    @given(st.data())
    @settings(max_examples=40)
    def test_weight_conservation_exact(self, data):
        words = ["alpha", "beta", "gamma", "tor", "vergata", "lab"]
        n_addr = data.draw(st.integers(min_value=1, max_value=6))
        addresses = [
            " ".join(data.draw(st.lists(st.sampled_from(words), min_size=1, max_size=4)))
            for _ in range(n_addr)
        ]
        corpus = mk_corpus([pub("p1", addresses=addresses)], orgs=ORGS3)
        rs = ruleset("alpha\tORG_A\nbeta\tORG_B\ngamma\tORG_TV\n")
        rec = reconcile_corpus(corpus, rs).corpus.records[0]
        if rec.attributions:
            assert sum((a.weight for a in rec.attributions), Fraction(0)) == 1
