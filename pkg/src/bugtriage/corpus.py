"""Bug-report datasets: parsing, cleaning, chronological ordering and splits.

Canonical input is a UTF-8 CSV with the header::

    bug_id,open_date,closed_date,assignee,status,severity,component,description

Dates are ISO-8601 (``YYYY-MM-DD``) unless a different ``date_format`` is
configured. Rows that cannot be parsed are kept in ``Corpus.rejects`` with a
reason instead of being dropped silently.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

from ._io import atomic_open

REQUIRED_COLUMNS = (
    "bug_id",
    "open_date",
    "closed_date",
    "assignee",
    "status",
    "severity",
    "component",
    "description",
)


class CorpusError(ValueError):
    """Raised for unusable datasets (missing columns, nothing left, ...)."""


class Severity(str, enum.Enum):
    BLOCKER = "blocker"
    CRITICAL = "critical"
    MAJOR = "major"
    NORMAL = "normal"
    MINOR = "minor"
    TRIVIAL = "trivial"
    REGRESSION = "regression"
    ENHANCEMENT = "enhancement"

    @classmethod
    def parse(cls, text: str) -> "Severity":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown severity {text!r}") from None


class Status(str, enum.Enum):
    NEW = "NEW"
    ASSIGNED = "ASSIGNED"
    RESOLVED = "RESOLVED"
    CLOSED = "CLOSED"
    INVALID = "INVALID"
    REVISED = "REVISED"
    DUPLICATE = "DUPLICATE"
    OTHER = "OTHER"

    @classmethod
    def parse(cls, text: str) -> "Status":
        try:
            return cls(text.strip().upper())
        except ValueError:
            return cls.OTHER


FIXED_STATUSES = frozenset({Status.CLOSED, Status.RESOLVED})


@dataclass(frozen=True)
class BugReport:
    bug_id: str
    open_date: Optional[dt.date]
    closed_date: Optional[dt.date]
    assignee: str
    status: Status
    severity: Optional[Severity]
    component: str
    description: str
    # original status text, so OTHER round-trips unchanged
    status_text: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.status_text:
            object.__setattr__(self, "status_text", self.status.value)

    @property
    def fix_time_days(self) -> int:
        if self.open_date is None or self.closed_date is None:
            raise ValueError(f"bug {self.bug_id} has no complete date pair")
        return (self.closed_date - self.open_date).days

    def is_complete(self) -> bool:
        return bool(
            self.bug_id
            and self.open_date is not None
            and self.closed_date is not None
            and self.assignee
            and self.status_text.strip()
            and self.severity is not None
            and self.component
            and self.description.strip()
        )

    def sort_key(self):
        return (self.open_date or dt.date.min, self.bug_id)


@dataclass(frozen=True)
class Reject:
    line: int
    row: dict
    reason: str


@dataclass(frozen=True)
class Corpus:
    """An ordered collection of bug reports.

    ``n_raw`` is the number of data rows read from disk; ``n_filtered`` counts
    parsed reports removed by :func:`clean`. Together with ``rejects`` they
    account for every raw row.
    """

    reports: tuple[BugReport, ...]
    rejects: tuple[Reject, ...] = ()
    cleaned: bool = False
    n_raw: int = 0
    n_filtered: int = 0

    def __len__(self) -> int:
        return len(self.reports)

    @property
    def developers(self) -> tuple[str, ...]:
        return tuple(sorted({r.assignee for r in self.reports if r.assignee}))

    def subset(self, start: int, stop: int) -> list[BugReport]:
        return list(self.reports[start:stop])


class SplitMode(str, enum.Enum):
    TIME_SERIES = "timeseries"
    FIXED_8020 = "fixed8020"


TIME_SERIES_ITERATIONS = 9


@dataclass(frozen=True)
class SplitPlan:
    train_range: tuple[int, int]
    test_range: tuple[int, int]
    iteration: int
    mode: SplitMode

    @property
    def n_train(self) -> int:
        return self.train_range[1] - self.train_range[0]

    @property
    def n_test(self) -> int:
        return self.test_range[1] - self.test_range[0]

    @property
    def n_considered(self) -> int:
        return self.test_range[1]

    def train(self, corpus: Corpus) -> list[BugReport]:
        return corpus.subset(*self.train_range)

    def test(self, corpus: Corpus) -> list[BugReport]:
        return corpus.subset(*self.test_range)


@dataclass(frozen=True)
class FormatConfig:
    delimiter: str = ","
    date_format: str = "%Y-%m-%d"
    encoding: str = "utf-8"


def _parse_date(text: str, fmt: str) -> Optional[dt.date]:
    text = text.strip()
    if not text:
        return None
    return dt.datetime.strptime(text, fmt).date()


def parse_row(row: dict, fmt: FormatConfig = FormatConfig()) -> BugReport:
    """Build a report from one CSV row; raises ``ValueError`` with a reason."""
    get = lambda k: (row.get(k) or "").strip()  # noqa: E731
    try:
        open_date = _parse_date(get("open_date"), fmt.date_format)
        closed_date = _parse_date(get("closed_date"), fmt.date_format)
    except ValueError:
        raise ValueError("malformed date") from None
    sev_text = get("severity")
    severity = Severity.parse(sev_text) if sev_text else None
    if open_date and closed_date and closed_date < open_date:
        raise ValueError("negative fix time")
    status_text = get("status")
    return BugReport(
        bug_id=get("bug_id"),
        open_date=open_date,
        closed_date=closed_date,
        assignee=get("assignee"),
        status=Status.parse(status_text),
        severity=severity,
        component=get("component"),
        description=(row.get("description") or "").strip(),
        status_text=status_text,
    )


def parse_dataset(path, fmt: FormatConfig = FormatConfig()) -> Corpus:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset not found: {path}")
    reports: list[BugReport] = []
    rejects: list[Reject] = []
    n_raw = 0
    with open(path, newline="", encoding=fmt.encoding) as fh:
        reader = csv.DictReader(fh, delimiter=fmt.delimiter)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise CorpusError(f"missing required column(s): {', '.join(missing)}")
        reader.fieldnames = header
        for row in reader:
            n_raw += 1
            try:
                reports.append(parse_row(row, fmt))
            except ValueError as exc:
                rejects.append(Reject(reader.line_num, dict(row), str(exc)))
    if not reports:
        raise CorpusError(f"no parseable rows in {path}")
    return Corpus(tuple(reports), tuple(rejects), cleaned=False, n_raw=n_raw)


def clean(corpus: Corpus, min_fixed: int = 10) -> Corpus:
    """Keep fixed, complete reports whose assignee fixed at least ``min_fixed``.

    The developer threshold is applied once, on the status/completeness
    filtered set. Removing a developer never changes another developer's
    count, so a second pass would be a no-op.
    """
    kept = [r for r in corpus.reports if r.status in FIXED_STATUSES and r.is_complete()]
    counts = Counter(r.assignee for r in kept)
    kept = [r for r in kept if counts[r.assignee] >= min_fixed]
    if not kept:
        raise CorpusError("corpus is empty after cleaning")
    kept.sort(key=BugReport.sort_key)
    dropped = len(corpus.reports) - len(kept)
    return Corpus(
        tuple(kept),
        corpus.rejects,
        cleaned=True,
        n_raw=corpus.n_raw or len(corpus.reports) + len(corpus.rejects),
        n_filtered=corpus.n_filtered + dropped,
    )


def sort_chronological(reports: Iterable[BugReport]) -> list[BugReport]:
    return sorted(reports, key=BugReport.sort_key)


def split(corpus: Corpus, mode: SplitMode | str, iteration: int = 1) -> SplitPlan:
    """Index ranges for one evaluation round.

    Time-series round ``i`` (1..9) trains on the first ``i`` tenths and tests
    on the next tenth; the 80/20 split trains on the first 80%. Boundaries are
    ``floor(fraction * n)``.
    """
    mode = SplitMode(mode)
    n = len(corpus)
    if mode is SplitMode.TIME_SERIES:
        if not 1 <= iteration <= TIME_SERIES_ITERATIONS:
            raise ValueError(f"time-series iteration must be in 1..9, got {iteration}")
        cut = iteration * n // 10
        end = (iteration + 1) * n // 10
    else:
        if iteration != 1:
            raise ValueError("the 80/20 split has a single iteration")
        cut = 8 * n // 10
        end = n
    if cut == 0 or end <= cut:
        raise CorpusError(f"corpus of {n} reports is too small for a {mode.value} split")
    return SplitPlan((0, cut), (cut, end), iteration, mode)


def iterations_for(mode: SplitMode | str) -> range:
    mode = SplitMode(mode)
    return range(1, TIME_SERIES_ITERATIONS + 1) if mode is SplitMode.TIME_SERIES else range(1, 2)


def _report_row(r: BugReport, fmt: FormatConfig) -> list[str]:
    fmt_date = lambda d: d.strftime(fmt.date_format) if d else ""  # noqa: E731
    return [
        r.bug_id,
        fmt_date(r.open_date),
        fmt_date(r.closed_date),
        r.assignee,
        r.status_text,
        r.severity.value if r.severity else "",
        r.component,
        r.description,
    ]


def write_dataset(path, reports: Sequence[BugReport], fmt: FormatConfig = FormatConfig()) -> None:
    with atomic_open(path, newline="", encoding=fmt.encoding) as fh:
        w = csv.writer(fh, delimiter=fmt.delimiter, lineterminator="\n")
        w.writerow(REQUIRED_COLUMNS)
        for r in reports:
            w.writerow(_report_row(r, fmt))


def rejects_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".rejects.csv")


def write_rejects(path, rejects: Sequence[Reject], fmt: FormatConfig = FormatConfig()) -> None:
    with atomic_open(path, newline="", encoding=fmt.encoding) as fh:
        w = csv.writer(fh, delimiter=fmt.delimiter, lineterminator="\n")
        w.writerow(REQUIRED_COLUMNS + ("reason",))
        for rej in rejects:
            w.writerow([rej.row.get(c, "") or "" for c in REQUIRED_COLUMNS] + [rej.reason])


def with_reports(corpus: Corpus, reports: Sequence[BugReport]) -> Corpus:
    return replace(corpus, reports=tuple(reports))
