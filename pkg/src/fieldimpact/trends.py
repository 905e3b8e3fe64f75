"""Per-year indicator series and average-annual-increase statistics."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Sequence

from .benchmarks import BenchmarkTables, TopJournalSet
from .corpus import Corpus, CorpusError
from .indicators import IndicatorRow, aggregate


class GrowthError(CorpusError):
    pass


@dataclass(frozen=True, slots=True)
class AnnualSeries:
    """Ordered (year, IndicatorRow) points for one entity."""

    entity: tuple[tuple[str, object], ...]
    points: tuple[tuple[int, IndicatorRow], ...]

    @property
    def years(self) -> tuple[int, ...]:
        return tuple(year for year, _ in self.points)

    @property
    def has_gaps(self) -> bool:
        years = self.years
        return bool(years) and (years[-1] - years[0] + 1) != len(years)

    @property
    def insufficient_for_growth(self) -> bool:
        return len(self.points) < 2

    def entity_id(self) -> str:
        return "|".join("" if v is None else str(v) for _, v in self.entity)

    def metric_values(self, metric: str) -> list[float | None]:
        return [row.value(metric) for _, row in self.points]


def annual_series(
    corpus: Corpus,
    slice_spec: Sequence[str],
    benchmarks: BenchmarkTables,
    top_set: TopJournalSet,
) -> list[AnnualSeries]:
    """One indicator row per (entity, year); entities ordered deterministically.

    The year key is appended internally and must not appear in slice_spec.
    """
    keys = tuple(slice_spec)
    if "year" in keys:
        raise GrowthError("slice_spec must not include 'year'; it is added internally")
    rows = aggregate(corpus, keys + ("year",), benchmarks, top_set)
    grouped: dict[tuple, list[tuple[int, IndicatorRow]]] = {}
    for row in rows:
        entity = tuple(kv for kv in row.entity if kv[0] != "year")
        year = dict(row.entity)["year"]
        grouped.setdefault(entity, []).append((int(year), row))
    series = []
    for entity in sorted(grouped, key=lambda e: tuple(str(v) for _, v in e)):
        points = tuple(sorted(grouped[entity], key=lambda p: p[0]))
        series.append(AnnualSeries(entity=entity, points=points))
    return series


def avg_annual_increase(series_values: Sequence[float]) -> float:
    """Compound annual growth rate of an ordered positive series, in percent.

    With T points the rate is (last/first)^(1/(T-1)) - 1; any non-positive
    value or a single point leaves growth undefined.
    """
    values = list(series_values)
    if len(values) < 2:
        raise GrowthError("growth needs at least two points")
    if any(v is None or v <= 0 for v in values):
        raise GrowthError("undefined growth: series contains non-positive values")
    return ((values[-1] / values[0]) ** (1.0 / (len(values) - 1)) - 1.0) * 100.0


#: Metrics eligible for growth statistics.
GROWTH_METRICS = ("mean_cx", "top_share_pct", "mean_cjx", "weight")

#: First-value floor below which percent-metric growth is flagged unstable.
DEFAULT_UNSTABLE_FLOOR = 1.0


@dataclass(frozen=True, slots=True)
class GrowthStat:
    entity: tuple[tuple[str, object], ...]
    metric: str
    first_year: int
    last_year: int
    avg_annual_increase_pct: float
    unstable_base: bool

    def entity_id(self) -> str:
        return "|".join("" if v is None else str(v) for _, v in self.entity)


def series_growth(
    series: AnnualSeries,
    metric: str,
    unstable_floor: float | None = None,
) -> GrowthStat:
    """Growth statistic for one metric of one series.

    Percent metrics with a first value below the floor are flagged as
    having an unstable base (tiny shares make growth rates fragile).
    """
    if metric not in GROWTH_METRICS:
        raise GrowthError(f"unknown growth metric {metric!r}, allowed: {GROWTH_METRICS}")
    if series.insufficient_for_growth:
        raise GrowthError(f"entity {series.entity_id()!r}: single-point series")
    values = series.metric_values(metric)
    rate = avg_annual_increase(values)
    floor = unstable_floor
    if floor is None:
        floor = DEFAULT_UNSTABLE_FLOOR if metric == "top_share_pct" else 0.0
    return GrowthStat(
        entity=series.entity,
        metric=metric,
        first_year=series.years[0],
        last_year=series.years[-1],
        avg_annual_increase_pct=rate,
        unstable_base=values[0] < floor,
    )


def write_trend_csv(stats: Iterable[GrowthStat], destination: str | Path | IO[str]) -> None:
    stats = list(stats)
    slice_keys = [k for k, _ in stats[0].entity] if stats else []
    if isinstance(destination, (str, Path)):
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            _write_trend_rows(stats, slice_keys, fh)
    else:
        _write_trend_rows(stats, slice_keys, destination)


def _write_trend_rows(stats, slice_keys, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(
        list(slice_keys)
        + ["metric", "first_year", "last_year", "avg_annual_increase_pct", "unstable_base_flag"]
    )
    for stat in stats:
        writer.writerow(
            [v for _, v in stat.entity]
            + [
                stat.metric,
                stat.first_year,
                stat.last_year,
                f"{stat.avg_annual_increase_pct:.4f}",
                str(stat.unstable_base).lower(),
            ]
        )
