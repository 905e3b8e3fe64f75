"""World benchmark tables: expected citation rates and top-journal sets.

The expected citation rate of a (year, field) cell is the exact
arithmetic mean of the census citation counts of every benchmark
publication in that cell; multi-field publications contribute their full
count to each of their field cells. The journal-level table is keyed by
(year, journal). Top journals are those whose impact factor falls in the
top decile of the impact-factor distribution of any of their fields.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Mapping, NamedTuple

from .corpus import Corpus, CorpusError, FieldScheme, Journal, _open_text


class BenchmarkError(CorpusError):
    """Base class for benchmark construction and lookup failures."""


class MissingBenchmarkError(BenchmarkError):
    def __init__(self, year: int, key: str, kind: str):
        self.year = year
        self.key = key
        super().__init__(f"missing benchmark for ({year}, {key}) [{kind}]")


class DegenerateBenchmarkError(BenchmarkError):
    def __init__(self, year: int, key: str, kind: str):
        self.year = year
        self.key = key
        super().__init__(f"degenerate benchmark (mean 0) for ({year}, {key}) [{kind}]")


class BenchmarkCell(NamedTuple):
    n: int
    mean: float


@dataclass(frozen=True, slots=True)
class CitationBenchmarkTable:
    """Mean census citations per (year, key) cell; key is field or journal."""

    kind: str
    cells: Mapping[tuple[int, str], BenchmarkCell]

    def expected(self, year: int, key: str) -> float:
        cell = self.cells.get((year, key))
        if cell is None:
            raise MissingBenchmarkError(year, key, self.kind)
        if cell.mean == 0.0:
            raise DegenerateBenchmarkError(year, key, self.kind)
        return cell.mean

    def get(self, year: int, key: str) -> BenchmarkCell | None:
        return self.cells.get((year, key))

    def degenerate_cells(self) -> tuple[tuple[int, str], ...]:
        return tuple(sorted(k for k, c in self.cells.items() if c.mean == 0.0))


def _mean_table(kind: str, pairs: Iterable[tuple[tuple[int, str], int]]) -> CitationBenchmarkTable:
    totals: dict[tuple[int, str], int] = {}
    counts: dict[tuple[int, str], int] = {}
    for key, citations in pairs:
        totals[key] = totals.get(key, 0) + citations
        counts[key] = counts.get(key, 0) + 1
    if not counts:
        raise BenchmarkError("no benchmark data")
    cells = {key: BenchmarkCell(counts[key], totals[key] / counts[key]) for key in counts}
    return CitationBenchmarkTable(kind, cells)


def compute_xcr(benchmark_corpus: Corpus) -> CitationBenchmarkTable:
    """Expected citation rate per (year, field) over the benchmark corpus."""
    return _mean_table(
        "field",
        (
            ((rec.year, field_id), rec.citations)
            for rec in benchmark_corpus.records
            for field_id in rec.field_ids
        ),
    )


def compute_jxcr(benchmark_corpus: Corpus) -> CitationBenchmarkTable:
    """Expected citation rate per (year, journal) over the benchmark corpus."""
    return _mean_table(
        "journal",
        (((rec.year, rec.journal_id), rec.citations) for rec in benchmark_corpus.records),
    )


@dataclass(frozen=True, slots=True)
class BenchmarkTables:
    xcr: CitationBenchmarkTable
    jxcr: CitationBenchmarkTable


def compute_benchmarks(benchmark_corpus: Corpus) -> BenchmarkTables:
    return BenchmarkTables(compute_xcr(benchmark_corpus), compute_jxcr(benchmark_corpus))


@dataclass(frozen=True, slots=True)
class TopJournalSet:
    """Per-field sets of journals in the top impact-factor decile.

    A journal can be top in one of its fields and not another; a
    publication counts as a top-journal publication if its journal is top
    in any of the publication's fields.
    """

    by_field: Mapping[str, frozenset[str]]
    fraction: float

    def is_top_in(self, field_id: str, journal_id: str) -> bool:
        return journal_id in self.by_field.get(field_id, frozenset())

    def is_top_for(self, journal_id: str, field_ids: Iterable[str]) -> bool:
        return any(journal_id in self.by_field.get(f, frozenset()) for f in field_ids)


def classify_top_journals(
    journals: Mapping[str, Journal] | Iterable[Journal],
    field_scheme: FieldScheme | None = None,
    fraction: float = 0.10,
) -> TopJournalSet:
    """Per field: top ceil(fraction * n) journals by impact factor, ties included.

    All journals sharing the boundary impact factor are included. Fields
    known to the scheme but carrying no journals map to empty sets.
    """
    if not 0 < fraction <= 1:
        raise BenchmarkError(f"fraction must be in (0, 1], got {fraction}")
    journal_list = list(journals.values()) if isinstance(journals, Mapping) else list(journals)
    per_field: dict[str, list[Journal]] = {}
    for journal in journal_list:
        for field_id in journal.field_ids:
            per_field.setdefault(field_id, []).append(journal)
    if field_scheme is not None:
        for field_id in field_scheme.fields():
            per_field.setdefault(field_id, [])

    by_field: dict[str, frozenset[str]] = {}
    for field_id, members in per_field.items():
        if not members:
            by_field[field_id] = frozenset()
            continue
        members.sort(key=lambda j: (-j.impact_factor, j.id))
        k = math.ceil(fraction * len(members))
        boundary = members[k - 1].impact_factor
        by_field[field_id] = frozenset(j.id for j in members if j.impact_factor >= boundary)
    return TopJournalSet(by_field, fraction)


# CSV import/export. Means round-trip at full precision (repr formatting)
# so externally supplied world benchmarks can drive a national analysis.


def export_benchmark_csv(table: CitationBenchmarkTable, destination: str | Path | IO[str]) -> None:
    key_col = "field_id" if table.kind == "field" else "journal_id"
    value_col = "xcr" if table.kind == "field" else "jxcr"
    rows = sorted(table.cells.items())
    _write_csv(
        destination,
        [("year", key_col, "n", value_col)]
        + [(year, key, cell.n, repr(cell.mean)) for (year, key), cell in rows],
    )


def load_benchmark_csv(source: str | Path | IO[str], kind: str) -> CitationBenchmarkTable:
    if kind not in ("field", "journal"):
        raise BenchmarkError(f"unknown benchmark kind {kind!r}")
    key_col = "field_id" if kind == "field" else "journal_id"
    value_col = "xcr" if kind == "field" else "jxcr"
    cells: dict[tuple[int, str], BenchmarkCell] = {}
    with _open_text(source) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["year", key_col, "n", value_col]:
            raise BenchmarkError(
                f"expected header year,{key_col},n,{value_col}, got {header!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not any(cell.strip() for cell in row):
                continue
            try:
                year, key, n, mean = int(row[0]), row[1].strip(), int(row[2]), float(row[3])
            except (ValueError, IndexError) as exc:
                raise BenchmarkError(f"benchmark CSV line {lineno}: {exc}") from exc
            if n < 1:
                raise BenchmarkError(f"benchmark CSV line {lineno}: n must be >= 1")
            cells[(year, key)] = BenchmarkCell(n, mean)
    if not cells:
        raise BenchmarkError("no benchmark data")
    return CitationBenchmarkTable(kind, cells)


def export_top_journals_csv(top_set: TopJournalSet, destination: str | Path | IO[str]) -> None:
    rows = [("field_id", "journal_id")] + [
        (field_id, journal_id)
        for field_id in sorted(top_set.by_field)
        for journal_id in sorted(top_set.by_field[field_id])
    ]
    _write_csv(destination, rows)


def load_top_journals_csv(source: str | Path | IO[str], fraction: float = 0.10) -> TopJournalSet:
    by_field: dict[str, set[str]] = {}
    with _open_text(source) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["field_id", "journal_id"]:
            raise BenchmarkError(f"expected header field_id,journal_id, got {header!r}")
        for row in reader:
            if not any(cell.strip() for cell in row):
                continue
            by_field.setdefault(row[0].strip(), set()).add(row[1].strip())
    return TopJournalSet({f: frozenset(js) for f, js in by_field.items()}, fraction)


def _write_csv(destination: str | Path | IO[str], rows: Iterable[tuple]) -> None:
    if isinstance(destination, (str, Path)):
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerows(rows)
    else:
        writer = csv.writer(destination, lineterminator="\n")
        writer.writerows(rows)
