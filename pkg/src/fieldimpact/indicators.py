"""Standardized per-publication impact and grouped indicator rows.

A publication's field-standardized impact is its census citation count
divided by the expected citation rate of its (year, field) cell; for
multi-field publications the denominator is the arithmetic mean of the
expected rates of all its fields. Inside a single-field slice the
denominator is that field's rate alone, and inside a discipline slice
the mean runs over the publication's fields belonging to that
discipline. Aggregation weights are exact rationals (fractional
counting) and float reductions use exact compensated summation, so
results do not depend on evaluation order or thread count.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

from .benchmarks import (
    BenchmarkError,
    BenchmarkTables,
    CitationBenchmarkTable,
    TopJournalSet,
)
from .corpus import Corpus, CorpusError, OrgType, PublicationRecord

SLICE_KEYS = ("nation", "discipline", "field", "org_type", "org", "subunit", "year", "doc_type")
_ORG_KEYS = frozenset({"org_type", "org", "subunit"})


class IndicatorError(CorpusError):
    pass


def standardized_impact(pub: PublicationRecord, xcr_table: CitationBenchmarkTable) -> float:
    """Citations over the mean expected citation rate of the publication's fields."""
    rates = [xcr_table.expected(pub.year, f) for f in pub.field_ids]
    return pub.citations / (sum(rates) / len(rates))


def journal_standardized_impact(
    pub: PublicationRecord, jxcr_table: CitationBenchmarkTable
) -> float:
    """Citations over the expected citation rate of the publication's journal-year."""
    return pub.citations / jxcr_table.expected(pub.year, pub.journal_id)


@dataclass(frozen=True, slots=True)
class StandardizedImpact:
    publication_id: str
    cites_over_xcr: float
    cites_over_jxcr: float | None
    is_top_journal: bool


def score_publications(
    corpus: Corpus, benchmarks: BenchmarkTables, top_set: TopJournalSet
) -> tuple[list[StandardizedImpact], list[str]]:
    """Score every record at the cross-field level (fields' rates averaged).

    Returns the scores plus diagnostics for publications excluded due to
    missing or degenerate field benchmarks. A missing journal-year
    benchmark only suppresses cites_over_jxcr, never the publication.
    """
    scores: list[StandardizedImpact] = []
    exclusions: list[str] = []
    for rec in corpus.records:
        try:
            ratio = standardized_impact(rec, benchmarks.xcr)
        except BenchmarkError as exc:
            exclusions.append(f"record {rec.id}: {exc}")
            continue
        try:
            cjx = journal_standardized_impact(rec, benchmarks.jxcr)
        except BenchmarkError:
            cjx = None
        scores.append(
            StandardizedImpact(
                publication_id=rec.id,
                cites_over_xcr=ratio,
                cites_over_jxcr=cjx,
                is_top_journal=top_set.is_top_for(rec.journal_id, rec.field_ids),
            )
        )
    return scores, exclusions


@dataclass(frozen=True, slots=True)
class IndicatorRow:
    """Aggregate indicators for one entity within one slice."""

    entity: tuple[tuple[str, object], ...]
    weight: float
    weight_exact: Fraction
    n_pubs: int
    n_excluded: int
    mean_cx: float
    mean_citations: float
    top_share_pct: float
    mean_cjx: float | None
    top_decile_mean_cx: float | None = None

    def entity_id(self) -> str:
        return "|".join("" if v is None else str(v) for _, v in self.entity)

    def entity_dict(self) -> dict[str, object]:
        return dict(self.entity)

    def value(self, metric: str) -> float | None:
        if metric == "weight":
            return self.weight
        if metric in ("mean_cx", "mean_citations", "top_share_pct", "mean_cjx", "top_decile_mean_cx"):
            return getattr(self, metric)
        raise IndicatorError(f"unknown metric {metric!r}")


class _Acc:
    __slots__ = (
        "weight_num",
        "wr_parts",
        "top_num",
        "cjx_num",
        "wcjx_parts",
        "cit_num",
        "n_pubs",
        "n_excluded",
        "scored",
    )

    def __init__(self, keep_scored: bool):
        self.weight_num: dict[int, int] = {}
        self.wr_parts: list[float] = []
        self.top_num: dict[int, int] = {}
        self.cjx_num: dict[int, int] = {}
        self.wcjx_parts: list[float] = []
        self.cit_num: dict[int, int] = {}
        self.n_pubs = 0
        self.n_excluded = 0
        self.scored: list[tuple[float, str]] | None = [] if keep_scored else None


def _exact(num_by_den: Mapping[int, int]) -> Fraction:
    return sum((Fraction(num, den) for den, num in num_by_den.items()), Fraction(0))


def _validate_slice(slice_spec: Sequence[str]) -> tuple[str, ...]:
    keys = tuple(slice_spec)
    if not keys:
        raise IndicatorError("slice_spec must name at least one grouping key")
    unknown = [k for k in keys if k not in SLICE_KEYS]
    if unknown:
        raise IndicatorError(f"unknown slice key(s) {unknown}, allowed: {SLICE_KEYS}")
    if len(set(keys)) != len(keys):
        raise IndicatorError("slice_spec keys must be unique")
    return keys


def aggregate(
    corpus: Corpus,
    slice_spec: Sequence[str],
    benchmarks: BenchmarkTables,
    top_set: TopJournalSet,
    *,
    with_top_decile: bool = False,
    decile_fraction: float = 0.10,
) -> list[IndicatorRow]:
    """Aggregate standardized impacts over the requested grouping keys.

    Weights follow fractional counting on organizational slices and are
    1 per publication elsewhere; a multi-field publication belongs to
    every field/discipline group it maps to. Publications whose required
    benchmark cells are missing or degenerate are excluded from the
    group and counted in its n_excluded. Empty groups are omitted.
    """
    keys = _validate_slice(slice_spec)
    org_sliced = any(k in _ORG_KEYS for k in keys)
    by_field = "field" in keys
    by_discipline = "discipline" in keys
    scheme = corpus.field_scheme
    xcr = benchmarks.xcr
    jxcr = benchmarks.jxcr

    accs: dict[tuple, _Acc] = {}

    for rec in corpus.records:
        if org_sliced and not rec.attributions:
            continue

        # Ratio per standardization context; None marks an excluded context.
        if by_field:
            contexts = [
                (
                    {"field": f, "discipline": scheme.discipline_of(f)},
                    _field_ratio(rec, f, xcr),
                )
                for f in rec.field_ids
            ]
        elif by_discipline:
            discs = sorted({scheme.discipline_of(f) for f in rec.field_ids})
            contexts = [
                ({"discipline": d}, _discipline_ratio(rec, d, scheme, xcr)) for d in discs
            ]
        else:
            contexts = [({}, _cross_field_ratio(rec, xcr))]

        if org_sliced:
            org_parts = [
                (
                    att.weight.numerator,
                    att.weight.denominator,
                    {
                        "org_type": corpus.organizations[att.org_id].org_type.value,
                        "org": att.org_id,
                        "subunit": att.subunit_id or "",
                    },
                )
                for att in rec.attributions
            ]
        else:
            org_parts = [(1, 1, {})]

        try:
            cjx = journal_standardized_impact(rec, jxcr)
        except BenchmarkError:
            cjx = None
        is_top = top_set.is_top_for(rec.journal_id, rec.field_ids)

        touched: set[tuple] = set()
        for ctx_vals, ratio in contexts:
            for num, den, org_vals in org_parts:
                key = _group_key(keys, rec, ctx_vals, org_vals)
                acc = accs.get(key)
                if acc is None:
                    acc = accs[key] = _Acc(with_top_decile)
                if ratio is None:
                    if (key, "x") not in touched:
                        touched.add((key, "x"))
                        acc.n_excluded += 1
                    continue
                acc.weight_num[den] = acc.weight_num.get(den, 0) + num
                acc.cit_num[den] = acc.cit_num.get(den, 0) + num * rec.citations
                acc.wr_parts.append((num / den) * ratio)
                if is_top:
                    acc.top_num[den] = acc.top_num.get(den, 0) + num
                    if cjx is not None:
                        acc.cjx_num[den] = acc.cjx_num.get(den, 0) + num
                        acc.wcjx_parts.append((num / den) * cjx)
                if key not in touched:
                    touched.add(key)
                    acc.n_pubs += 1
                    if acc.scored is not None:
                        acc.scored.append((ratio, rec.id))

    rows = []
    for key in sorted(accs, key=_key_sort):
        acc = accs[key]
        weight_exact = _exact(acc.weight_num)
        if weight_exact == 0:
            continue
        weight = float(weight_exact)
        mean_cx = math.fsum(acc.wr_parts) / weight
        mean_citations = float(_exact(acc.cit_num) / weight_exact)
        top_exact = _exact(acc.top_num)
        top_share = 100.0 * float(top_exact / weight_exact)
        cjx_exact = _exact(acc.cjx_num)
        mean_cjx = math.fsum(acc.wcjx_parts) / float(cjx_exact) if cjx_exact > 0 else None
        top_decile = None
        if acc.scored:
            _, top_decile = top_decile_mean(acc.scored, decile_fraction)
        rows.append(
            IndicatorRow(
                entity=key,
                weight=weight,
                weight_exact=weight_exact,
                n_pubs=acc.n_pubs,
                n_excluded=acc.n_excluded,
                mean_cx=mean_cx,
                mean_citations=mean_citations,
                top_share_pct=top_share,
                mean_cjx=mean_cjx,
                top_decile_mean_cx=top_decile,
            )
        )
    return rows


def _field_ratio(rec: PublicationRecord, field_id: str, xcr: CitationBenchmarkTable) -> float | None:
    try:
        return rec.citations / xcr.expected(rec.year, field_id)
    except BenchmarkError:
        return None


def _discipline_ratio(rec, discipline, scheme, xcr) -> float | None:
    rates = []
    for f in rec.field_ids:
        if scheme.discipline_of(f) != discipline:
            continue
        try:
            rates.append(xcr.expected(rec.year, f))
        except BenchmarkError:
            return None
    return rec.citations / (sum(rates) / len(rates)) if rates else None


def _cross_field_ratio(rec: PublicationRecord, xcr: CitationBenchmarkTable) -> float | None:
    try:
        return standardized_impact(rec, xcr)
    except BenchmarkError:
        return None


def _group_key(keys, rec, ctx_vals, org_vals) -> tuple:
    parts = []
    for k in keys:
        if k == "nation":
            parts.append((k, "all"))
        elif k == "year":
            parts.append((k, rec.year))
        elif k == "doc_type":
            parts.append((k, rec.doc_type.value))
        elif k in ("field", "discipline"):
            parts.append((k, ctx_vals[k]))
        else:
            parts.append((k, org_vals[k]))
    return tuple(parts)


def _key_sort(key: tuple) -> tuple:
    return tuple((k, (0, v) if isinstance(v, int) else (1, str(v))) for k, v in key)


def top_decile_mean(scored: Sequence[tuple[float, str]], fraction: float = 0.10) -> tuple[list[tuple[float, str]], float]:
    """Top ceil(fraction*n) of (ratio, id) pairs by ratio, and their mean."""
    if not scored:
        raise IndicatorError("no scored publications")
    if not 0 < fraction <= 1:
        raise IndicatorError(f"fraction must be in (0, 1], got {fraction}")
    ordered = sorted(scored, key=lambda item: (-item[0], item[1]))
    k = math.ceil(fraction * len(ordered))
    subset = ordered[:k]
    return subset, math.fsum(r for r, _ in subset) / k


def top_decile_publications(
    scored: Sequence[StandardizedImpact], fraction: float = 0.10
) -> tuple[tuple[StandardizedImpact, ...], float]:
    """Highest-impact ceil(fraction*n) publications and their unweighted mean.

    Ordering is by cites_over_xcr descending with publication id as the
    deterministic tie-break.
    """
    if not scored:
        raise IndicatorError("no scored publications")
    if not 0 < fraction <= 1:
        raise IndicatorError(f"fraction must be in (0, 1], got {fraction}")
    ordered = sorted(scored, key=lambda s: (-s.cites_over_xcr, s.publication_id))
    k = math.ceil(fraction * len(ordered))
    subset = tuple(ordered[:k])
    return subset, math.fsum(s.cites_over_xcr for s in subset) / k


# Concentration of organization types across disciplines.


@dataclass(frozen=True, slots=True)
class ConcentrationIndex:
    org_type: OrgType
    discipline: str
    value: float


def concentration_index_from_shares(
    group_share_in_discipline: float, group_overall_share: float
) -> float:
    """Ratio of a group's within-discipline share to its overall share."""
    if group_overall_share <= 0:
        raise IndicatorError("group overall share must be positive")
    if group_share_in_discipline < 0:
        raise IndicatorError("shares must be non-negative")
    return group_share_in_discipline / group_overall_share


def org_type_discipline_weights(corpus: Corpus):
    """Exact attributed weights: per (org_type, discipline), per discipline,
    per org_type overall, and the overall total.

    Multi-field publications count once per distinct discipline (double
    counting, as in discipline-level output tables); the overall totals
    count each publication once. Unattributed records are excluded.
    """
    scheme = corpus.field_scheme
    w_td: dict[tuple[OrgType, str], Fraction] = {}
    w_d: dict[str, Fraction] = {}
    w_t: dict[OrgType, Fraction] = {}
    total = Fraction(0)
    for rec in corpus.records:
        if not rec.attributions:
            continue
        discs = sorted({scheme.discipline_of(f) for f in rec.field_ids})
        for att in rec.attributions:
            org_type = corpus.organizations[att.org_id].org_type
            w_t[org_type] = w_t.get(org_type, Fraction(0)) + att.weight
            total += att.weight
            for d in discs:
                w_td[(org_type, d)] = w_td.get((org_type, d), Fraction(0)) + att.weight
                w_d[d] = w_d.get(d, Fraction(0)) + att.weight
    return w_td, w_d, w_t, total


def concentration_index(corpus: Corpus, org_type: OrgType | str, discipline: str) -> float:
    """Within-discipline output share of an org type over its overall share."""
    if isinstance(org_type, str):
        org_type = OrgType(org_type)
    w_td, w_d, w_t, total = org_type_discipline_weights(corpus)
    disc_total = w_d.get(discipline, Fraction(0))
    if disc_total == 0:
        raise IndicatorError(f"discipline {discipline!r} has no attributed publications")
    overall = w_t.get(org_type, Fraction(0))
    if overall == 0:
        raise IndicatorError(f"org type {org_type.value} has no attributed publications")
    share_in_discipline = w_td.get((org_type, discipline), Fraction(0)) / disc_total
    overall_share = overall / total
    return float(share_in_discipline / overall_share)


def concentration_table(corpus: Corpus) -> list[ConcentrationIndex]:
    """Concentration index for every (org_type, discipline) with output."""
    w_td, w_d, w_t, total = org_type_discipline_weights(corpus)
    out = []
    for d in sorted(w_d):
        for org_type in OrgType:
            overall = w_t.get(org_type, Fraction(0))
            if overall == 0:
                continue
            share = w_td.get((org_type, d), Fraction(0)) / w_d[d]
            out.append(ConcentrationIndex(org_type, d, float(share / (overall / total))))
    return out


# Delimited output: fixed 4-decimal CSV plus a full-precision JSON mirror.

_INDICATOR_COLUMNS = ("weight", "n_excluded", "mean_cx", "top_share_pct", "mean_cjx")


def write_indicator_csv(rows: Iterable[IndicatorRow], destination: str | Path | IO[str]) -> None:
    rows = list(rows)
    slice_keys = [k for k, _ in rows[0].entity] if rows else []
    if isinstance(destination, (str, Path)):
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            _write_indicator_rows(rows, slice_keys, fh)
    else:
        _write_indicator_rows(rows, slice_keys, destination)


def _write_indicator_rows(rows, slice_keys, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(list(slice_keys) + list(_INDICATOR_COLUMNS))
    for row in rows:
        values = [v for _, v in row.entity]
        writer.writerow(
            values
            + [
                f"{row.weight:.4f}",
                row.n_excluded,
                f"{row.mean_cx:.4f}",
                f"{row.top_share_pct:.4f}",
                "" if row.mean_cjx is None else f"{row.mean_cjx:.4f}",
            ]
        )


def write_indicator_json(rows: Iterable[IndicatorRow], destination: str | Path | IO[str]) -> None:
    payload = [
        dict(row.entity)
        | {
            "weight": row.weight,
            "n_excluded": row.n_excluded,
            "mean_cx": row.mean_cx,
            "top_share_pct": row.top_share_pct,
            "mean_cjx": row.mean_cjx,
        }
        for row in rows
    ]
    text = json.dumps(payload, indent=2)
    if isinstance(destination, (str, Path)):
        Path(destination).write_text(text + "\n", encoding="utf-8")
    else:
        destination.write(text + "\n")
