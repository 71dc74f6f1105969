"""Firm-year technology indicators and their validation analytics.

Sentence predictions aggregate into per-technology dummies per firm-year,
either contemporaneous (flag on in years with qualifying sentences) or
cumulative (flag latches on at first detected use). The overall dt dummy is
the disjunction of the six technology flags.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import pandas as pd

from .classify import Prediction
from .corpus import Sentence

log = logging.getLogger(__name__)

TECHNOLOGIES = ("ai", "bd", "cc", "iot", "bc", "mi")

LABEL_TO_TECH = {
    "AI": "ai",
    "BIG_DATA": "bd",
    "CLOUD_COMPUTING": "cc",
    "IOT": "iot",
    "BLOCKCHAIN": "bc",
    "MOBILE_INTERNET": "mi",
}

MODE_CONTEMPORANEOUS = "CONTEMPORANEOUS"
MODE_CUMULATIVE = "CUMULATIVE"

INDICATOR_CSV_HEADER = ["firm_id", "year", *TECHNOLOGIES, "dt", "mode"]


class IndicatorError(ValueError):
    pass


@dataclass(frozen=True)
class FirmYearIndicators:
    firm_id: str
    year: int
    flags: Mapping[str, int]
    dt: int
    mode: str

    def __post_init__(self):
        expected = int(any(self.flags[t] for t in TECHNOLOGIES))
        if self.dt != expected:
            raise IndicatorError(
                f"dt must be the disjunction of the technology flags for ({self.firm_id}, {self.year})"
            )


def build_indicators(
    predictions: Sequence[Prediction],
    sentences: Sequence[Sentence],
    mode: str = MODE_CUMULATIVE,
    min_sentences: int = 1,
) -> list[FirmYearIndicators]:
    """Aggregate sentence predictions into firm-year indicator rows.

    A technology flag is 1 in a firm-year when at least `min_sentences`
    sentences of that firm-year are predicted as the technology; in
    CUMULATIVE mode the flag then stays 1 for all later years of the firm.
    Firm-years present in the sentence corpus always get a row, all-zero if
    nothing was detected.
    """
    if mode not in (MODE_CONTEMPORANEOUS, MODE_CUMULATIVE):
        raise IndicatorError(f"unknown mode {mode!r}")
    if min_sentences < 1:
        raise IndicatorError("min_sentences must be >= 1")
    sentence_key = {s.sentence_id: (s.firm_id, s.year) for s in sentences}
    firm_years = sorted({(s.firm_id, s.year) for s in sentences})

    counts: dict[tuple[str, int, str], int] = {}
    for pred in predictions:
        if pred.sentence_id not in sentence_key:
            raise IndicatorError(f"prediction references unknown sentence {pred.sentence_id}")
        tech = LABEL_TO_TECH.get(pred.label)
        if tech is None:
            continue
        firm, year = sentence_key[pred.sentence_id]
        key = (firm, year, tech)
        counts[key] = counts.get(key, 0) + 1

    rows: list[FirmYearIndicators] = []
    running: dict[tuple[str, str], int] = {}
    for firm, year in firm_years:  # sorted, so years ascend within a firm
        flags = {}
        for tech in TECHNOLOGIES:
            flag = int(counts.get((firm, year, tech), 0) >= min_sentences)
            if mode == MODE_CUMULATIVE:
                flag = max(flag, running.get((firm, tech), 0))
                running[(firm, tech)] = flag
            flags[tech] = flag
        rows.append(FirmYearIndicators(firm, year, flags, int(any(flags.values())), mode))
    return rows


def adoption_trend(indicators: Sequence[FirmYearIndicators]) -> pd.DataFrame:
    """Share of firms with each technology flag on, per year.

    Expects CUMULATIVE indicators; on a balanced panel each technology's
    share series is non-decreasing.
    """
    _require_mode(indicators, MODE_CUMULATIVE)
    frame = indicators_frame(indicators)
    shares = frame.groupby("year")[list(TECHNOLOGIES)].mean()
    shares["dt"] = frame.groupby("year")["dt"].mean()
    return shares


def industry_table(
    indicators: Sequence[FirmYearIndicators],
    naics_map: Mapping[str, str],
    sector_names: Mapping[str, str] | None = None,
) -> pd.DataFrame:
    """Per-sector share of firms ever flagged for each technology, plus an
    unweighted Mean row across sectors. Firms without a sector mapping land
    in an 'unknown' sector."""
    _require_mode(indicators, MODE_CUMULATIVE)
    frame = indicators_frame(indicators)
    final = frame.sort_values("year").groupby("firm_id").tail(1).copy()
    final["sector"] = [naics_map.get(f, "unknown") for f in final["firm_id"]]
    if sector_names:
        final["sector"] = [sector_names.get(s, s) for s in final["sector"]]
    table = final.groupby("sector")[list(TECHNOLOGIES)].mean().sort_index()
    mean_row = table.mean(axis=0).to_frame().T
    mean_row.index = ["Mean"]
    return pd.concat([table, mean_row])


def patent_overlap(
    indicators: Sequence[FirmYearIndicators],
    patents: Iterable[tuple[str, str, int]],
) -> dict[str, float | None]:
    """Per technology: the share of patent-holding firms also flagged.

    Patenting a technology implies use, so the rate reads as recall against
    the patentee set; firms flagged without patents are not penalized since
    the reverse inference does not hold. Technologies with no patentees
    report None.
    """
    frame = indicators_frame(indicators)
    ever = frame.groupby("firm_id")[list(TECHNOLOGIES)].max()
    patentees: dict[str, set[str]] = {t: set() for t in TECHNOLOGIES}
    for firm_id, tech, _year in patents:
        key = tech.lower()
        if key not in patentees:
            raise IndicatorError(f"unknown patent technology {tech!r}")
        patentees[key].add(firm_id)
    out: dict[str, float | None] = {}
    for tech in TECHNOLOGIES:
        holders = patentees[tech]
        if not holders:
            out[tech] = None
            continue
        flagged = sum(
            1 for f in holders if f in ever.index and ever.loc[f, tech] == 1
        )
        out[tech] = flagged / len(holders)
    return out


def size_bins(
    indicators: Sequence[FirmYearIndicators],
    employees: Mapping[str, int | None],
    bin_edges: Sequence[int],
    year: int,
    technology: str = "ai",
) -> tuple[pd.DataFrame, int]:
    """Share of firms with the technology flag on, by employee-count bin, in
    the chosen year. Returns (table, n_excluded_for_missing_employee_count)."""
    if technology not in TECHNOLOGIES:
        raise IndicatorError(f"unknown technology {technology!r}")
    frame = indicators_frame(indicators)
    frame = frame[frame["year"] == year]
    rows = []
    excluded = 0
    for _, row in frame.iterrows():
        n_emp = employees.get(row["firm_id"])
        if n_emp is None:
            excluded += 1
            continue
        rows.append((n_emp, row[technology]))
    if not rows:
        return pd.DataFrame(columns=["share", "n"]), excluded
    df = pd.DataFrame(rows, columns=["employees", "flag"])
    edges = list(bin_edges)
    labels = [f"[{lo}, {hi})" for lo, hi in zip(edges[:-1], edges[1:])]
    df["bin"] = pd.cut(df["employees"], bins=edges, labels=labels, right=False)
    grouped = df.groupby("bin", observed=True)["flag"]
    table = pd.DataFrame({"share": grouped.mean(), "n": grouped.size()})
    return table, excluded


def indicators_frame(indicators: Sequence[FirmYearIndicators]) -> pd.DataFrame:
    records = [
        {"firm_id": r.firm_id, "year": r.year, **{t: r.flags[t] for t in TECHNOLOGIES}, "dt": r.dt}
        for r in indicators
    ]
    return pd.DataFrame(records)


def _require_mode(indicators: Sequence[FirmYearIndicators], mode: str) -> None:
    if any(r.mode != mode for r in indicators):
        raise IndicatorError(f"operation requires {mode} indicators")


def write_indicators_csv(indicators: Sequence[FirmYearIndicators], path: str | Path) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(INDICATOR_CSV_HEADER)
        for r in sorted(indicators, key=lambda r: (r.firm_id, r.year)):
            writer.writerow(
                [r.firm_id, r.year, *(r.flags[t] for t in TECHNOLOGIES), r.dt, r.mode]
            )


def read_indicators_csv(path: str | Path) -> list[FirmYearIndicators]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != INDICATOR_CSV_HEADER:
            raise IndicatorError(f"{path}: unexpected indicator CSV header")
        for row in reader:
            flags = {t: int(row[t]) for t in TECHNOLOGIES}
            out.append(
                FirmYearIndicators(row["firm_id"], int(row["year"]), flags, int(row["dt"]), row["mode"])
            )
    return out


def read_patents_csv(path: str | Path) -> list[tuple[str, str, int]]:
    """Patents CSV: firm_id,technology,year."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = {"firm_id", "technology", "year"}
        if set(reader.fieldnames or []) != expected:
            raise IndicatorError(f"{path}: expected header firm_id,technology,year")
        for row in reader:
            out.append((row["firm_id"], row["technology"], int(row["year"])))
    return out
