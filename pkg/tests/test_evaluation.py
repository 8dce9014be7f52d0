import json
from collections import Counter

import numpy as np
import pytest

from bugtriage.evaluation import (
    PAPER_TABLE_COLUMNS,
    TABLE_COLUMNS,
    EvalReport,
    EvaluationError,
    estimate_assigned_time,
    prediction_accuracy,
    read_report,
    real_time,
    time_reduction,
    workload_ranges,
    write_reports,
)
from bugtriage.matching import AssignmentPlan, iterative_assign
from bugtriage.scoring import factor_matrices
from bugtriage.synth import SynthConfig, generate
from conftest import make_report


def plan_of(pairs):
    loads = Counter(d for _, d in pairs)
    return AssignmentPlan([(b, d, 0) for b, d in pairs], dict(loads))


def history():
    reps = [
        make_report("h1", fix_days=4, assignee="ann"),
        make_report("h2", fix_days=6, assignee="ann"),
        make_report("h3", fix_days=20, assignee="bob"),
        make_report("h4", fix_days=30, assignee="bob"),
        make_report("h5", fix_days=9, assignee="bob"),
    ]
    topics = {"h1": 0, "h2": 0, "h3": 0, "h4": 1, "h5": 1}
    return reps, topics


def test_estimate_primary_branch():
    reps, topics = history()
    f = factor_matrices(reps, topics, ["ann", "bob"], 2)
    est = estimate_assigned_time([("t1", "ann"), ("t2", "bob")], {"t1": 0, "t2": 1}, f)
    assert est == 5 + 19.5


def test_estimate_fallbacks():
    reps, topics = history()
    f = factor_matrices(reps, topics, ["ann", "bob", "cid"], 3)
    # ann has no topic-1 history: topic-1 median of 30 and 9
    assert estimate_assigned_time([("t", "ann")], {"t": 1}, f) == 19.5
    # topic 2 never seen: global median
    assert estimate_assigned_time([("t", "cid")], {"t": 2}, f) == 9
    # developer missing from the score matrix
    assert estimate_assigned_time([("t", "zed")], {"t": 0}, f) == 6


def test_estimate_close_to_generator_expectation():
    cfg = SynthConfig(n_reports=2000, n_developers=6, n_topics=3, seed=3)
    res = generate(cfg)
    reps = list(res.corpus.reports)
    train, test = reps[:1500], reps[1500:]
    f = factor_matrices(train, {r.bug_id: res.truth.topics[r.bug_id] for r in train}, res.truth.developers, 3)
    rng = np.random.default_rng(0)
    devs = res.truth.developers
    pairs = [(r.bug_id, devs[rng.integers(len(devs))]) for r in test]
    topics = {r.bug_id: res.truth.topics[r.bug_id] for r in test}
    est = estimate_assigned_time(pairs, topics, f)
    expected = sum(res.truth.expected_fix_days(d, topics[b]) for b, d in pairs)
    assert abs(est - expected) / expected < 0.10


def test_time_reduction_examples():
    assert time_reduction(100, 20) == 80.0
    assert time_reduction(100, 100) == 0.0
    assert time_reduction(100, 150) == -50.0
    with pytest.raises(EvaluationError):
        time_reduction(0, 5)
    assert real_time([make_report(fix_days=3), make_report(fix_days=4)]) == 7


def test_workload_exact_chunking():
    rng = np.random.default_rng(0)
    devs = ["a", "b", "c", "d"]
    bugs = [f"b{i}" for i in range(12)]
    scores = rng.random((4, 2))
    plan = iterative_assign(bugs, devs, rng.random((12, 4)), [0, 1] * 6, scores)
    test = [make_report(b, assignee="a") for b in bugs]
    rwl, res = workload_ranges(test, plan, devs)
    assert res == (3, 3)
    assert rwl == (0, 12)


def test_workload_histogram_oracle():
    rng = np.random.default_rng(1)
    devs = [f"d{i}" for i in range(5)]
    test = [make_report(f"b{i}", assignee=devs[rng.integers(5)]) for i in range(23)]
    plan = iterative_assign([r.bug_id for r in test], devs, rng.random((23, 5)), [0] * 23, rng.random((5, 1)))
    rwl, res = workload_ranges(test, plan, devs)
    real = [sum(r.assignee == d for r in test) for d in devs]
    planned = [sum(d2 == d for _, d2, _ in plan.assignments) for d in devs]
    assert rwl == (min(real), max(real)) and res == (min(planned), max(planned))


def test_prediction_accuracy():
    test = [make_report(f"b{i}", assignee=f"d{i}") for i in range(10)]
    assert prediction_accuracy(plan_of([(r.bug_id, r.assignee) for r in test]), test) == 100.0
    assert prediction_accuracy(plan_of([(r.bug_id, "other") for r in test]), test) == 0.0
    pairs = [(r.bug_id, r.assignee if i in (1, 4, 7) else "x") for i, r in enumerate(test)]
    assert prediction_accuracy(plan_of(pairs), test) == 30.0


def sample_report(**kw):
    base = dict(
        iteration=1, mode="fixed8020", n_dataset=100, n_train=80, n_test=20, n_developers=4, k=3,
        coherence={1: -10.0, 2: -8.5, 3: -7.25}, opt_w=[0.2, 0.3, 0.5], de_fitness=12.5,
        rwl=(2, 9), res_wl=(5, 5), p_acc=25.0, t_opt=time_reduction(200, 150), ts_real=200.0,
        ts_assigned=150.0, baseline_t_opt=-3.0,
    )
    base.update(kw)
    return EvalReport(**base)


def test_report_check():
    sample_report().check()
    with pytest.raises(EvaluationError):
        sample_report(t_opt=30.0).check()
    with pytest.raises(EvaluationError):
        sample_report(res_wl=(0, 9)).check()
    sample_report(rwl=(3, 3), res_wl=(2, 3)).check()


def test_report_files(tmp_path):
    reps = [sample_report(iteration=i, mode="timeseries") for i in (1, 2)]
    written = write_reports(reps, tmp_path, project="Demo", plot_data=True)
    names = sorted(p.name for p in written)
    assert names == sorted([
        "report_timeseries_01.json", "report_timeseries_02.json", "results.csv", "table_ix.csv",
        "plot_t_opt.csv", "plot_p_acc.csv", "plot_k.csv",
    ])
    back = read_report(tmp_path / "report_timeseries_02.json")
    assert back == reps[1]
    data = json.loads((tmp_path / "report_timeseries_01.json").read_text())
    assert data["t_opt"] == pytest.approx((data["ts_real"] - data["ts_assigned"]) / data["ts_real"] * 100, abs=1e-9)
    lines = (tmp_path / "results.csv").read_text().splitlines()
    assert lines[0] == ",".join(TABLE_COLUMNS)
    assert lines[1] == "1,100,80,20,2-9,3,0.2 0.3 0.5,5-5,25,25.00"
    table = (tmp_path / "table_ix.csv").read_text().splitlines()
    assert table[0] == ",".join(PAPER_TABLE_COLUMNS)
    assert table[1] == "Demo,100,80,20,2-9,3,0.2 0.3 0.5,5-5,25,25.00 %,"
    assert (tmp_path / "plot_t_opt.csv").read_text().splitlines() == ["iteration,t_opt", "1,25.0", "2,25.0"]
