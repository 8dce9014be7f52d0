"""Differential evolution over the three score weights.

The search space is the probability simplex with every coordinate at least
``epsilon``. Trial vectors are repaired by :func:`project_simplex` rather
than penalised.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from ._io import atomic_open
from .corpus import BugReport
from .evaluation import estimate_assigned_time, real_time, time_reduction
from .matching import iterative_assign
from .scoring import WEIGHT_FLOOR, FactorMatrices, SeverityWeights, WeightVector, factor_matrices

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DEConfig:
    population_size: int = 30
    F: float = 0.8
    CR: float = 0.9
    generations: int = 100
    seed: int = 0
    epsilon: float = WEIGHT_FLOOR

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError("population_size must be >= 4")
        if not 0 < self.F <= 2:
            raise ValueError("F must be in (0, 2]")
        if not 0 <= self.CR <= 1:
            raise ValueError("CR must be in [0, 1]")
        if self.epsilon < WEIGHT_FLOOR or 3 * self.epsilon >= 1:
            raise ValueError(f"epsilon must be in [{WEIGHT_FLOOR}, 1/3)")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")


@dataclass
class DEResult:
    best: WeightVector
    best_fitness: float
    history: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"weights": self.best.to_list(), "fitness": self.best_fitness, "history": self.history}


def project_simplex(v: Sequence[float], epsilon: float = WEIGHT_FLOOR) -> WeightVector:
    """Clamp to ``>= epsilon`` and renormalise; floored entries stay at epsilon.

    Plain clamp-then-divide can push a floored coordinate back below the
    floor, so coordinates at the floor are pinned and the remaining mass is
    shared among the rest in proportion.
    """
    x = np.asarray(v, dtype=float)
    if x.shape != (3,) or not np.all(np.isfinite(x)):
        raise ValueError("expected three finite values")
    if np.all(x <= 0):
        return WeightVector(1 / 3, 1 / 3, 1 - 2 / 3)
    x = np.maximum(x, epsilon)
    pinned = np.zeros(3, dtype=bool)
    for _ in range(3):
        free = ~pinned
        share = (1.0 - epsilon * pinned.sum()) * x[free] / x[free].sum()
        out = np.full(3, epsilon)
        out[free] = share
        low = free & (out < epsilon)
        if not low.any():
            break
        pinned |= low
    out[2] = 1.0 - out[0] - out[1]
    return WeightVector(float(out[0]), float(out[1]), float(out[2]))


def _initial_population(rng: np.random.Generator, n: int, epsilon: float) -> np.ndarray:
    # normalised exponentials are a Dirichlet(1, 1, 1) sample
    e = rng.exponential(size=(n, 3))
    return np.array([project_simplex(row / row.sum(), epsilon).as_array() for row in e])


def optimize(fitness: Callable[[WeightVector], float], config: DEConfig = DEConfig()) -> DEResult:
    """Maximise ``fitness`` with DE/rand/1/bin and greedy (>=) selection."""
    rng = np.random.default_rng(config.seed)
    NP, eps = config.population_size, config.epsilon
    pop = _initial_population(rng, NP, eps)
    fit = np.array([fitness(WeightVector(*map(float, row))) for row in pop])
    history = [float(fit.max())]
    for gen in range(config.generations):
        next_pop, next_fit = pop.copy(), fit.copy()
        for i in range(NP):
            others = [j for j in range(NP) if j != i]
            r1, r2, r3 = rng.choice(others, size=3, replace=False)
            mutant = pop[r1] + config.F * (pop[r2] - pop[r3])
            cross = rng.random(3) < config.CR
            cross[rng.integers(3)] = True
            trial_w = project_simplex(np.where(cross, mutant, pop[i]), eps)
            f = fitness(trial_w)
            if f >= fit[i]:
                next_pop[i] = trial_w.as_array()
                next_fit[i] = f
        pop, fit = next_pop, next_fit
        history.append(float(fit.max()))
        log.debug("generation %d best %.6g", gen + 1, history[-1])
    best = int(np.argmax(fit))
    return DEResult(WeightVector(*map(float, pop[best])), float(fit[best]), history)


class TriageFitness:
    """Time reduction achieved on an evaluation slice by a weight vector.

    Score factors come from ``history`` (labels in ``history_topics``); the
    slice is assigned with its fold-in ``theta`` and costed with the
    history medians. Everything that does not depend on the weights is
    computed once here.
    """

    def __init__(
        self,
        history: Sequence[BugReport],
        history_topics: Mapping[str, int],
        slice_reports: Sequence[BugReport],
        slice_theta: np.ndarray,
        developers: Sequence[str],
        sev_weights: SeverityWeights = SeverityWeights(),
        empty_rule: str = "zero",
        partial_rule: str = "dr_sum",
        time_cap: Optional[float] = None,
        factors: Optional[FactorMatrices] = None,
    ):
        self.theta = np.asarray(slice_theta, dtype=float)
        K = self.theta.shape[1]
        self.factors = factors or factor_matrices(history, history_topics, developers, K, sev_weights, time_cap)
        self.bug_ids = [r.bug_id for r in slice_reports]
        self.topics = {b: int(k) for b, k in zip(self.bug_ids, np.argmax(self.theta, axis=1))}
        self.bug_topics = [self.topics[b] for b in self.bug_ids]
        self.ts_real = real_time(slice_reports)
        self.empty_rule = empty_rule
        self.partial_rule = partial_rule

    def plan(self, weights: WeightVector):
        scores = self.factors.combine(weights, self.empty_rule)
        dr = self.theta @ scores.T
        return iterative_assign(self.bug_ids, self.factors.developers, dr, self.bug_topics, scores, self.partial_rule)

    def __call__(self, weights: WeightVector) -> float:
        plan = self.plan(weights)
        pairs = [(b, d) for b, d, _ in plan.assignments]
        return time_reduction(self.ts_real, estimate_assigned_time(pairs, self.topics, self.factors))


def triage_fitness(
    weights: WeightVector,
    history: Sequence[BugReport],
    history_topics: Mapping[str, int],
    validation: Sequence[BugReport],
    validation_theta: np.ndarray,
    developers: Sequence[str],
    sev_weights: SeverityWeights = SeverityWeights(),
    **kw,
) -> float:
    """One-shot form of :class:`TriageFitness`."""
    return TriageFitness(history, history_topics, validation, validation_theta, developers, sev_weights, **kw)(weights)


def write_result(result: DEResult, path) -> None:
    with atomic_open(path) as fh:
        json.dump(result.to_json(), fh, indent=1)
        fh.write("\n")
