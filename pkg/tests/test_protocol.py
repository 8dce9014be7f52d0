import numpy as np
import pytest

from bugtriage.config import RunConfig
from bugtriage.corpus import Corpus, clean
from bugtriage.evaluation import time_reduction
from bugtriage.protocol import ProtocolError, holdout_split, run_protocol
from bugtriage.synth import expert_per_topic, generate

QUICK = dict(k_max=6, lda_iterations=200, lda_burn_in=100, de_gens=30, de_pop=16)


@pytest.fixture(scope="module")
def corpus():
    return clean(generate(expert_per_topic(seed=3)).corpus)


@pytest.fixture(scope="module")
def timeseries(corpus):
    return run_protocol(corpus, "timeseries", RunConfig(seed=1, **QUICK))


def test_timeseries_nine_consistent_reports(corpus, timeseries):
    assert [r.iteration for r in timeseries] == list(range(1, 10))
    n = len(corpus)
    for r in timeseries:
        assert r.n_train == r.iteration * n // 10
        assert r.n_test == (r.iteration + 1) * n // 10 - r.n_train
        assert r.t_opt == pytest.approx(time_reduction(r.ts_real, r.ts_assigned), abs=1e-9)
        assert r.res_wl[1] - r.res_wl[0] <= 1
        assert r.res_wl[1] - r.res_wl[0] <= r.rwl[1] - r.rwl[0]
        assert sum(r.opt_w) == pytest.approx(1.0) and min(r.opt_w) >= 1e-4 - 1e-12
        assert r.n_developers == 8 and not r.fitness_on_test


def test_timeseries_beats_random_baseline(timeseries):
    assert np.mean([r.t_opt for r in timeseries]) > np.mean([r.baseline_t_opt for r in timeseries])


def test_fitness_on_test_flag(corpus):
    cfg = RunConfig(seed=1, fitness_on_test=True, **QUICK)
    leaky = run_protocol(corpus, "fixed8020", cfg)[0]
    honest = run_protocol(corpus, "fixed8020", cfg.replace(fitness_on_test=False))[0]
    assert leaky.fitness_on_test and not honest.fitness_on_test
    # with the leak, the DE objective is exactly the reported test-split TR
    assert leaky.de_fitness == pytest.approx(leaky.t_opt, abs=1e-9)


def test_requires_cleaned_corpus(corpus):
    with pytest.raises(ProtocolError):
        run_protocol(Corpus(corpus.reports), "fixed8020", RunConfig(**QUICK))


def test_iteration_failure_names_iteration(corpus):
    tiny = clean(Corpus(corpus.reports[:25]), min_fixed=1)
    with pytest.raises(ProtocolError, match="iteration 1"):
        run_protocol(tiny, "timeseries", RunConfig(**QUICK))


def test_holdout_split():
    assert holdout_split(100, 0.1) == 90
    assert holdout_split(5, 0.1) == 4
    with pytest.raises(ProtocolError):
        holdout_split(1, 0.1)
