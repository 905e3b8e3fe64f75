"""Affiliation reconciliation: normalized substring rules over addresses.

Raw affiliation strings are normalized (lowercase, diacritics stripped,
punctuation collapsed to single spaces) and matched against an ordered
rule set; the first rule in file order whose pattern is a substring of
the address wins. Matched records receive fractional attribution weights
that sum to exactly 1.
"""

from __future__ import annotations

import csv
import re
import sys
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import IO, Mapping

from .corpus import Attribution, Corpus, CorpusError, Organization, _open_text

_NON_ALNUM_RE = re.compile(r"[^0-9a-z]+")


class RuleError(CorpusError):
    """Raised for rule files that cannot be compiled."""


def normalize_address(raw: str) -> str:
    """Normalize an affiliation string for substring matching.

    Lowercases, strips diacritics to base letters, replaces every run of
    punctuation/whitespace (and any other non-alphanumeric character)
    with a single space, and trims. Idempotent.
    """
    decomposed = unicodedata.normalize("NFKD", raw)
    stripped = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
    return _NON_ALNUM_RE.sub(" ", stripped.lower()).strip()


@dataclass(frozen=True, slots=True)
class Rule:
    pattern: str
    org_id: str
    subunit_id: str | None
    source_line: int

    @property
    def target(self) -> tuple[str, str | None]:
        return (self.org_id, self.subunit_id)


@dataclass(frozen=True, slots=True)
class RuleConflict:
    """Two rules where one pattern contains the other but targets differ."""

    first: Rule
    second: Rule


@dataclass(frozen=True)
class RuleSet:
    """Ordered rules plus the compile-time conflict report.

    Read-only shared state; match results are memoized per distinct
    normalized address (benign under concurrent use).
    """

    rules: tuple[Rule, ...]
    conflicts: tuple[RuleConflict, ...]
    warnings: tuple[str, ...] = ()
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def match(self, normalized: str) -> Rule | None:
        hit = self._cache.get(normalized, _MISS)
        if hit is not _MISS:
            return hit
        found = None
        for rule in self.rules:
            if rule.pattern in normalized:
                found = rule
                break
        self._cache[normalized] = found
        return found


_MISS = object()


def compile_rules(
    rule_file: str | Path | IO[str],
    organizations: Mapping[str, Organization],
) -> RuleSet:
    """Compile a rule file (`PATTERN<TAB>ORG_ID[<TAB>SUBUNIT_ID]`).

    Patterns are normalized with the address normalizer. Unknown
    organizations or empty patterns are hard errors naming the line;
    duplicate (pattern, target) pairs are dropped with a warning.
    Containment between patterns with different targets is reported as a
    conflict, never resolved silently.
    """
    rules: list[Rule] = []
    warnings: list[str] = []
    seen: set[tuple[str, str, str | None]] = set()
    with _open_text(rule_file) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.rstrip("\n")
            if not text.strip() or text.lstrip().startswith("#"):
                continue
            parts = text.split("\t")
            if len(parts) not in (2, 3):
                raise RuleError(
                    f"rules line {lineno}: expected PATTERN<TAB>ORG_ID[<TAB>SUBUNIT_ID]"
                )
            pattern = normalize_address(parts[0])
            if not pattern:
                raise RuleError(f"rules line {lineno}: pattern is empty after normalization")
            org_id = parts[1].strip()
            if org_id not in organizations:
                raise RuleError(f"rules line {lineno}: unknown organization {org_id!r}")
            subunit_id = parts[2].strip() if len(parts) == 3 and parts[2].strip() else None
            if subunit_id is not None:
                subunit = organizations.get(subunit_id)
                if subunit is None:
                    raise RuleError(f"rules line {lineno}: unknown sub-unit {subunit_id!r}")
                if subunit.parent_id != org_id:
                    raise RuleError(
                        f"rules line {lineno}: sub-unit {subunit_id!r} does not belong to {org_id!r}"
                    )
            key = (pattern, org_id, subunit_id)
            if key in seen:
                warnings.append(
                    f"rules line {lineno}: duplicate rule {pattern!r} -> {org_id}"
                    + (f"/{subunit_id}" if subunit_id else "")
                )
                continue
            seen.add(key)
            rules.append(Rule(pattern, sys.intern(org_id), subunit_id, lineno))

    conflicts = [
        RuleConflict(a, b)
        for i, a in enumerate(rules)
        for b in rules[i + 1 :]
        if a.target != b.target and (a.pattern in b.pattern or b.pattern in a.pattern)
    ]
    return RuleSet(tuple(rules), tuple(conflicts), tuple(warnings))


def match_address(normalized: str, rules: RuleSet) -> tuple[str, str | None] | None:
    """First-match-wins lookup; returns (org_id, subunit_id) or None."""
    rule = rules.match(normalized)
    return rule.target if rule is not None else None


@dataclass(frozen=True, slots=True)
class UnmatchedAddress:
    address: str
    count: int
    sample_ids: tuple[str, ...]


@dataclass(frozen=True, slots=True)
class UnmatchedReport:
    """Distinct unmatched normalized addresses with occurrence counts."""

    entries: tuple[UnmatchedAddress, ...]

    def total_instances(self) -> int:
        return sum(e.count for e in self.entries)

    def to_csv(self, destination: str | Path | IO[str]) -> None:
        if isinstance(destination, (str, Path)):
            with open(destination, "w", encoding="utf-8", newline="") as fh:
                self._write(fh)
        else:
            self._write(destination)

    def _write(self, fh: IO[str]) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["address", "count", "sample_ids"])
        for entry in self.entries:
            writer.writerow([entry.address, entry.count, ";".join(entry.sample_ids)])


@dataclass(frozen=True, slots=True)
class ReconcileStats:
    total_addresses: int
    matched_addresses: int
    n_records: int
    n_attributed: int
    n_unattributed: int

    @property
    def match_rate(self) -> float:
        if self.total_addresses == 0:
            return 1.0
        return self.matched_addresses / self.total_addresses


@dataclass(frozen=True, slots=True)
class ReconcileResult:
    corpus: Corpus
    unmatched: UnmatchedReport
    stats: ReconcileStats


_SAMPLE_IDS = 5


def _attributions_for(matches: list[tuple[str, str | None]]) -> tuple[Attribution, ...]:
    """Distinct targets weighted 1/m per organization, split over its sub-units."""
    by_org: dict[str, set[str | None]] = {}
    for org_id, subunit_id in matches:
        by_org.setdefault(org_id, set()).add(subunit_id)
    m = len(by_org)
    return tuple(
        Attribution(org_id, subunit_id, Fraction(1, m * len(subunits)))
        for org_id, subunits in sorted(by_org.items())
        for subunit_id in sorted(subunits, key=lambda s: (s is not None, s or ""))
    )


def reconcile_corpus(corpus: Corpus, rules: RuleSet, threads: int = 1) -> ReconcileResult:
    """Attribute every record to the organizations its addresses match.

    A record's attributions are the distinct (org, sub-unit) targets of
    its matched addresses. Each distinct org-level entity gets weight
    1/m (m = number of distinct matched organizations); when several
    sub-unit targets of the same organization match, that organization's
    1/m is split equally among them, so weights always sum to exactly 1.
    Records with no match keep empty attributions.
    """
    records = corpus.records
    # Raw address strings repeat heavily in real exports; memoizing the
    # normalization keeps the per-record cost at two dict lookups.
    norm_cache: dict[str, str] = {}

    def process(chunk):
        out = []
        for rec in chunk:
            matches = []
            misses = []
            for raw in rec.addresses:
                normalized = norm_cache.get(raw)
                if normalized is None:
                    normalized = norm_cache.setdefault(raw, normalize_address(raw))
                rule = rules.match(normalized) if normalized else None
                if rule is None:
                    misses.append(normalized)
                else:
                    matches.append(rule.target)
            out.append((rec.id, matches, misses))
        return out

    if threads > 1 and len(records) > 1:
        chunk_size = max(1, (len(records) + threads - 1) // threads)
        chunks = [records[i : i + chunk_size] for i in range(0, len(records), chunk_size)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunk_results = list(pool.map(process, chunks))
        results = [item for chunk in chunk_results for item in chunk]
    else:
        results = process(records)

    attributions: dict[str, tuple[Attribution, ...]] = {}
    unmatched_counts: dict[str, int] = {}
    unmatched_samples: dict[str, list[str]] = {}
    total_addresses = 0
    matched_addresses = 0
    n_attributed = 0
    # Distinct match profiles are few; share one attribution tuple per profile.
    att_cache: dict[tuple, tuple[Attribution, ...]] = {}

    for rec_id, matches, misses in results:
        total_addresses += len(matches) + len(misses)
        matched_addresses += len(matches)
        for normalized in misses:
            unmatched_counts[normalized] = unmatched_counts.get(normalized, 0) + 1
            sample = unmatched_samples.setdefault(normalized, [])
            if len(sample) < _SAMPLE_IDS and rec_id not in sample:
                sample.append(rec_id)
        if not matches:
            continue
        n_attributed += 1
        profile = tuple(matches)
        atts = att_cache.get(profile)
        if atts is None:
            atts = att_cache.setdefault(profile, _attributions_for(matches))
        attributions[rec_id] = atts

    entries = tuple(
        UnmatchedAddress(addr, count, tuple(unmatched_samples[addr]))
        for addr, count in sorted(unmatched_counts.items(), key=lambda kv: (-kv[1], kv[0]))
    )
    stats = ReconcileStats(
        total_addresses=total_addresses,
        matched_addresses=matched_addresses,
        n_records=len(records),
        n_attributed=n_attributed,
        n_unattributed=len(records) - n_attributed,
    )
    return ReconcileResult(
        corpus=corpus.with_attributions(attributions),
        unmatched=UnmatchedReport(entries),
        stats=stats,
    )
