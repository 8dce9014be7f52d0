import datetime as dt
from pathlib import Path

import pytest

from bugtriage.corpus import BugReport, Severity, Status

FIXTURES = Path(__file__).parent / "fixtures"

# lines collected by test_acceptance and printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def make_report(
    bug_id="B1",
    open_day=0,
    fix_days=1,
    assignee="dev",
    status=Status.CLOSED,
    severity=Severity.NORMAL,
    component="core",
    description="kernel panic",
):
    start = dt.date(2020, 1, 1) + dt.timedelta(days=open_day)
    return BugReport(
        bug_id=bug_id,
        open_date=start,
        closed_date=start + dt.timedelta(days=fix_days),
        assignee=assignee,
        status=status,
        severity=severity,
        component=component,
        description=description,
    )


@pytest.fixture
def report():
    return make_report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
