"""End-to-end training, assignment and the evaluation protocols.

One protocol round:

1. split the cleaned corpus (time-series round i, or 80/20)
2. build the vocabulary on the training descriptions
3. choose K by coherence and fit LDA on the training split
4. tune the score weights with DE against a held-out chronological tail
5. score developers on the whole training split
6. fold-in label the test split and assign it chunk by chunk
7. cost the plan and the recorded manual triage
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .config import RunConfig, derive_seed
from .corpus import BugReport, Corpus, SplitMode, iterations_for, split
from .evaluation import (
    EvalReport,
    estimate_assigned_time,
    prediction_accuracy,
    real_time,
    time_reduction,
    workload_ranges,
)
from .matching import AssignmentPlan, iterative_assign, recommend
from .optimizer import DEResult, TriageFitness, optimize
from .scoring import DeveloperScoreMatrix, FactorMatrices, factor_matrices
from .textprep import DocTermMatrix, TextPipeline, Vocabulary, build_matrix, load_exceptions, load_stoplist, transform
from .topics import KSelection, TopicLabeling, TopicModel, fit_lda, label, select_k

log = logging.getLogger(__name__)

# stage ids mixed into derived seeds
_LDA, _LDA_HOLDOUT, _DE, _BASELINE = 1, 2, 3, 4


class ProtocolError(RuntimeError):
    pass


def text_pipeline(cfg: RunConfig) -> TextPipeline:
    kw = {}
    if cfg.stoplist:
        kw["stoplist"] = load_stoplist(cfg.stoplist)
    if cfg.lemma_exceptions:
        kw["exceptions"] = load_exceptions(cfg.lemma_exceptions)
    return TextPipeline(**kw)


def vectorize(reports: Sequence[BugReport], pipe: TextPipeline, cfg: RunConfig) -> tuple[Vocabulary, DocTermMatrix]:
    docs = pipe.docs((r.bug_id, r.description) for r in reports)
    return build_matrix(docs, cfg.min_df, cfg.max_df_fraction)


def fold_in(model: TopicModel, reports: Sequence[BugReport], pipe: TextPipeline) -> TopicLabeling:
    docs = pipe.docs((r.bug_id, r.description) for r in reports)
    return label(model, transform(docs, model.vocabulary))


@dataclass
class Trained:
    """Everything learned from one training split."""

    vocabulary: Vocabulary
    selection: KSelection
    model: TopicModel
    topics: dict  # training bug_id -> topic
    weights_search: DEResult
    score_matrix: DeveloperScoreMatrix

    @property
    def factors(self) -> FactorMatrices:
        return self.score_matrix.factors


def holdout_split(n: int, fraction: float) -> int:
    """Index where the chronological validation tail starts."""
    cut = int(np.floor(n * (1.0 - fraction)))
    if cut < 1 or cut >= n:
        raise ProtocolError(f"training split of {n} reports is too small for a {fraction:.0%} validation tail")
    return cut


def tune_weights(
    train: Sequence[BugReport],
    K: int,
    developers: Sequence[str],
    cfg: RunConfig,
    pipe: TextPipeline,
    seed: int,
    leaky_slice: Optional[tuple[Sequence[BugReport], np.ndarray, dict, FactorMatrices]] = None,
) -> DEResult:
    """DE over the weights; objective is TR on the validation tail.

    The tail is labeled by a model fitted on the earlier part only, so no
    tail information reaches the scores. ``leaky_slice`` replaces the tail
    with the test split (reports, theta, train topics, full-train factors).
    """
    sev = cfg.sev_weights()
    if leaky_slice is not None:
        reports, theta, topics, factors = leaky_slice
        fitness = TriageFitness(
            train, topics, reports, theta, developers, sev,
            cfg.empty_rule, cfg.partial_rule, cfg.time_cap, factors=factors,
        )
    else:
        cut = holdout_split(len(train), cfg.validation_fraction)
        history, tail = list(train[:cut]), list(train[cut:])
        vocab, matrix = vectorize(history, pipe, cfg)
        tmpl = cfg.topic_template(derive_seed(seed, _LDA_HOLDOUT))
        model = fit_lda(matrix, replace(tmpl, K=K), vocab)
        hist_topics = dict(zip(model.doc_ids, (int(k) for k in model.labels())))
        tail_theta = fold_in(model, tail, pipe).theta
        fitness = TriageFitness(
            history, hist_topics, tail, tail_theta, developers, sev,
            cfg.empty_rule, cfg.partial_rule, cfg.time_cap,
        )
    return optimize(fitness, cfg.de_config(derive_seed(seed, _DE)))


def train(
    train_reports: Sequence[BugReport],
    developers: Sequence[str],
    cfg: RunConfig,
    seed: int,
    test_reports: Optional[Sequence[BugReport]] = None,
) -> Trained:
    """Topic model, tuned weights and score matrix for one training split.

    ``test_reports`` is only consulted when ``cfg.fitness_on_test`` is set.
    """
    pipe = text_pipeline(cfg)
    vocab, matrix = vectorize(train_reports, pipe, cfg)
    selection = select_k(
        matrix, cfg.k_range, cfg.topic_template(derive_seed(seed, _LDA)), vocab, cfg.coherence_top_n, cfg.jobs
    )
    model = selection.model
    topics = dict(zip(model.doc_ids, (int(k) for k in model.labels())))
    factors = factor_matrices(train_reports, topics, developers, model.K, cfg.sev_weights(), cfg.time_cap)
    leaky = None
    if cfg.fitness_on_test:
        if not test_reports:
            raise ProtocolError("fitness_on_test needs the test reports")
        leaky = (test_reports, fold_in(model, test_reports, pipe).theta, topics, factors)
    search = tune_weights(train_reports, model.K, developers, cfg, pipe, seed, leaky)
    scores = DeveloperScoreMatrix(factors, search.best, factors.combine(search.best, cfg.empty_rule), cfg.empty_rule)
    return Trained(vocab, selection, model, topics, search, scores)


@dataclass
class Assignment:
    labeling: TopicLabeling
    dr: np.ndarray
    plan: AssignmentPlan


def assign(
    model: TopicModel,
    developers: Sequence[str],
    scores: np.ndarray,
    test_reports: Sequence[BugReport],
    pipe: TextPipeline,
    partial_rule: str = "dr_sum",
) -> Assignment:
    labeling = fold_in(model, test_reports, pipe)
    dr = recommend(labeling.theta, scores)
    plan = iterative_assign(
        [r.bug_id for r in test_reports], developers, dr, [int(k) for k in labeling.labels], scores, partial_rule
    )
    return Assignment(labeling, dr, plan)


def random_baseline(
    test_reports: Sequence[BugReport], topics: dict, developers: Sequence[str], factors: FactorMatrices, seed: int
) -> float:
    """TR of a uniform-random assignment costed with the same estimator."""
    rng = np.random.default_rng(seed)
    picks = rng.integers(len(developers), size=len(test_reports))
    pairs = [(r.bug_id, developers[i]) for r, i in zip(test_reports, picks)]
    return time_reduction(real_time(test_reports), estimate_assigned_time(pairs, topics, factors))


def run_iteration(corpus: Corpus, mode: SplitMode, iteration: int, cfg: RunConfig) -> EvalReport:
    plan_split = split(corpus, mode, iteration)
    seed = derive_seed(cfg.seed, iteration)
    developers = corpus.developers
    train_reports = plan_split.train(corpus)
    test_reports = plan_split.test(corpus)
    trained = train(train_reports, developers, cfg, seed, test_reports)
    pipe = text_pipeline(cfg)
    result = assign(trained.model, developers, trained.score_matrix.scores, test_reports, pipe, cfg.partial_rule)
    test_topics = result.labeling.label_of()
    pairs = [(b, d) for b, d, _ in result.plan.assignments]
    ts_real = real_time(test_reports)
    ts_assigned = estimate_assigned_time(pairs, test_topics, trained.factors)
    rwl, res_wl = workload_ranges(test_reports, result.plan, developers)
    baseline = None
    if cfg.baseline:
        baseline = random_baseline(test_reports, test_topics, developers, trained.factors, derive_seed(seed, _BASELINE))
    report = EvalReport(
        iteration=iteration,
        mode=mode.value,
        n_dataset=plan_split.n_considered,
        n_train=plan_split.n_train,
        n_test=plan_split.n_test,
        n_developers=len(developers),
        k=trained.model.K,
        coherence=dict(trained.selection.table),
        opt_w=trained.score_matrix.weights.to_list(),
        de_fitness=trained.weights_search.best_fitness,
        rwl=rwl,
        res_wl=res_wl,
        p_acc=prediction_accuracy(result.plan, test_reports),
        t_opt=time_reduction(ts_real, ts_assigned),
        ts_real=ts_real,
        ts_assigned=ts_assigned,
        baseline_t_opt=baseline,
        fitness_on_test=cfg.fitness_on_test,
        flagged_docs=len(result.labeling.flagged),
    )
    report.check()
    return report


def run_protocol(corpus: Corpus, mode: SplitMode | str, cfg: RunConfig) -> list[EvalReport]:
    """Nine time-series rounds or one 80/20 round; seeds derive from ``cfg.seed``."""
    mode = SplitMode(mode)
    if not corpus.cleaned:
        raise ProtocolError("run_protocol expects a cleaned corpus")
    reports = []
    for i in iterations_for(mode):
        log.info("%s round %d", mode.value, i)
        try:
            reports.append(run_iteration(corpus, mode, i, cfg))
        except Exception as exc:
            raise ProtocolError(f"iteration {i} failed: {exc}") from exc
    return reports
