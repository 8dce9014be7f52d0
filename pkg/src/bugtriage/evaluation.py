"""Time reduction, workload ranges, prediction accuracy and report files."""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from ._io import atomic_open, write_text
from .corpus import BugReport
from .matching import AssignmentPlan
from .scoring import FactorMatrices

TABLE_COLUMNS = ("#I", "#Ds", "#TrD", "#TsD", "RWL", "#K", "Opt_W", "ResWL", "P_Acc", "T_Opt")
PAPER_TABLE_COLUMNS = ("Project", "#Ds", "#TrD", "#TsD", "RWL", "#K", "Opt_W", "ResWl", "P_Acc", "T_Opt", "R_CostTriage")


class EvaluationError(ValueError):
    pass


def estimate_assigned_time(
    pairs: Sequence[tuple[str, str]], topics: Mapping[str, int], factors: FactorMatrices
) -> float:
    """Sum of expected fix days over (bug_id, developer) pairs.

    Each pair costs the training median of that developer on the bug's
    topic, falling back to the topic-wide and then the global median.
    """
    dev_index = {d: i for i, d in enumerate(factors.developers)}
    total = 0.0
    for bug_id, dev in pairs:
        k = topics[bug_id]
        if dev in dev_index:
            total += factors.expected_days(dev_index[dev], k)
        else:
            t = factors.topic_medians[k] if 0 <= k < factors.K else np.nan
            total += float(t) if not np.isnan(t) else factors.global_median
    return total


def real_time(reports: Sequence[BugReport]) -> float:
    return float(sum(r.fix_time_days for r in reports))


def time_reduction(ts_real: float, ts_assigned: float) -> float:
    if ts_real == 0:
        raise EvaluationError("TS_Real is zero; time reduction is undefined")
    return (ts_real - ts_assigned) / ts_real * 100


def load_range(counts: Mapping[str, int], developers: Sequence[str]) -> tuple[int, int]:
    vals = [counts.get(d, 0) for d in developers]
    return (min(vals), max(vals))


def workload_ranges(
    test: Sequence[BugReport], plan: AssignmentPlan, developers: Sequence[str]
) -> tuple[tuple[int, int], tuple[int, int]]:
    """(min, max) bugs per developer under the real assignees and under the plan.

    Developers with no bug count as zero load.
    """
    real = Counter(r.assignee for r in test)
    planned = Counter(d for _, d, _ in plan.assignments)
    return load_range(real, developers), load_range(planned, developers)


def prediction_accuracy(plan: AssignmentPlan, test: Sequence[BugReport]) -> float:
    if not test:
        return 0.0
    assigned = plan.developer_of()
    hits = sum(1 for r in test if assigned.get(r.bug_id) == r.assignee)
    return 100.0 * hits / len(test)


@dataclass
class EvalReport:
    iteration: int
    mode: str
    n_dataset: int
    n_train: int
    n_test: int
    n_developers: int
    k: int
    coherence: dict
    opt_w: list
    de_fitness: float
    rwl: tuple
    res_wl: tuple
    p_acc: float
    t_opt: float
    ts_real: float
    ts_assigned: float
    baseline_t_opt: Optional[float] = None
    fitness_on_test: bool = False
    flagged_docs: int = 0
    extra: dict = field(default_factory=dict)

    def check(self) -> None:
        """Internal consistency of the stored numbers."""
        if abs(time_reduction(self.ts_real, self.ts_assigned) - self.t_opt) > 1e-9:
            raise EvaluationError("T_Opt does not match the stored totals")
        rwl_w = self.rwl[1] - self.rwl[0]
        res_w = self.res_wl[1] - self.res_wl[0]
        if rwl_w >= 1 and res_w > rwl_w:
            raise EvaluationError("plan workload range is wider than the manual one")

    def to_json(self) -> dict:
        d = asdict(self)
        d["rwl"] = list(self.rwl)
        d["res_wl"] = list(self.res_wl)
        d["coherence"] = {str(k): v for k, v in self.coherence.items()}
        return d

    @classmethod
    def from_json(cls, data: dict) -> "EvalReport":
        data = dict(data)
        data["rwl"] = tuple(data["rwl"])
        data["res_wl"] = tuple(data["res_wl"])
        data["coherence"] = {int(k): v for k, v in data["coherence"].items()}
        return cls(**data)

    def table_row(self) -> list[str]:
        return [
            str(self.iteration),
            str(self.n_dataset),
            str(self.n_train),
            str(self.n_test),
            f"{self.rwl[0]}-{self.rwl[1]}",
            str(self.k),
            " ".join(f"{w:.7g}" for w in self.opt_w),
            f"{self.res_wl[0]}-{self.res_wl[1]}",
            f"{self.p_acc:.4g}",
            f"{self.t_opt:.2f}",
        ]


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_reports(
    reports: Sequence[EvalReport],
    out_dir,
    project: Optional[str] = None,
    plot_data: bool = False,
) -> list[Path]:
    """One JSON per iteration plus ``results.csv``; with ``project`` also the
    comparison-table layout in ``table_ix.csv``."""
    out_dir = Path(out_dir)
    written = []
    for rep in reports:
        p = out_dir / f"report_{rep.mode}_{rep.iteration:02d}.json"
        with atomic_open(p) as fh:
            json.dump(rep.to_json(), fh, indent=1, sort_keys=True)
            fh.write("\n")
        written.append(p)
    p = out_dir / "results.csv"
    write_text(p, _csv_text(TABLE_COLUMNS, [r.table_row() for r in reports]))
    written.append(p)
    if project is not None:
        rows = []
        for r in reports:
            row = r.table_row()
            rows.append([project] + row[1:9] + [row[9] + " %", ""])
        p = out_dir / "table_ix.csv"
        write_text(p, _csv_text(PAPER_TABLE_COLUMNS, rows))
        written.append(p)
    if plot_data:
        for metric in ("t_opt", "p_acc", "k"):
            p = out_dir / f"plot_{metric}.csv"
            write_text(p, _csv_text(("iteration", metric), [(r.iteration, repr(getattr(r, metric))) for r in reports]))
            written.append(p)
    return written


def read_report(path) -> EvalReport:
    return EvalReport.from_json(json.loads(Path(path).read_text("utf-8")))
