"""Market report library: short regional price-index texts, one file per period.

Files are named ``{scope}_{granularity}_{period_start}.txt`` with an ISO
period-start date, e.g. ``kingcounty_monthly_2015-02-01.txt``. A lookup finds
the report covering the period immediately before the one containing the
target date, preferring monthly over quarterly coverage.
"""
from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass
from pathlib import Path

log = logging.getLogger(__name__)

GRANULARITIES = ("monthly", "quarterly")


@dataclass(frozen=True)
class MarketReport:
    region_scope: str
    period_start: dt.date
    period_end: dt.date
    granularity: str
    body: str

    def __post_init__(self):
        if self.granularity not in GRANULARITIES:
            raise ValueError(f"unknown granularity {self.granularity!r}")
        if self.period_start > self.period_end:
            raise ValueError("report period_start after period_end")
        if not self.body.strip():
            raise ValueError("report body is empty")


def _month_start(date: dt.date) -> dt.date:
    return date.replace(day=1)


def _add_months(date: dt.date, months: int) -> dt.date:
    month = date.month - 1 + months
    return dt.date(date.year + month // 12, month % 12 + 1, 1)


def _quarter_start(date: dt.date) -> dt.date:
    return dt.date(date.year, 3 * ((date.month - 1) // 3) + 1, 1)


def period_of(date: dt.date, granularity: str) -> tuple[dt.date, dt.date]:
    """(start, end) of the monthly or quarterly period containing the date."""
    if granularity == "monthly":
        start = _month_start(date)
        return start, _add_months(start, 1) - dt.timedelta(days=1)
    start = _quarter_start(date)
    return start, _add_months(start, 3) - dt.timedelta(days=1)


def load_report_library(directory: str | Path) -> list[MarketReport]:
    directory = Path(directory)
    reports = []
    for path in sorted(directory.glob("*.txt")):
        try:
            scope, granularity, start_text = path.stem.rsplit("_", 2)
            start = dt.date.fromisoformat(start_text)
        except ValueError:
            log.warning("skipping report file with unparseable name: %s", path.name)
            continue
        if granularity not in GRANULARITIES:
            log.warning("skipping report file with unknown granularity: %s", path.name)
            continue
        _, end = period_of(start, granularity)
        body = path.read_text(encoding="utf-8").strip()
        if not body:
            log.warning("skipping empty report file: %s", path.name)
            continue
        reports.append(
            MarketReport(
                region_scope=scope,
                period_start=start,
                period_end=end,
                granularity=granularity,
                body=body,
            )
        )
    return reports


def select_report(
    library: list[MarketReport], target_date: dt.date, scope: str
) -> MarketReport | None:
    """The scope's report for the period immediately preceding the target's.

    Monthly coverage wins over quarterly when both exist. Returns None when
    no prior-period report is available (callers fall back to a no-report
    prompt with a warning).
    """
    scoped = [r for r in library if r.region_scope == scope]
    for granularity in GRANULARITIES:
        period_start, _ = period_of(target_date, granularity)
        wanted = period_start - dt.timedelta(days=1)  # any day in the prior period
        prior_start, _ = period_of(wanted, granularity)
        for report in scoped:
            if report.granularity == granularity and report.period_start == prior_start:
                return report
    log.warning("no %s report precedes %s", scope, target_date)
    return None
