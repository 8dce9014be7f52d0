"""Recommendation matrix and chunked Gale-Shapley assignment.

Test bugs are cut, in chronological order, into chunks of as many bugs as
there are developers. Each chunk is matched one-to-one with bug reports
proposing, so across the plan every developer receives the same number of
bugs give or take one.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._io import atomic_open

PARTIAL_RULES = ("dr_sum", "least_loaded")


class MatchingError(ValueError):
    pass


def recommend(theta: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """bugs x topics times (developers x topics)^T -> bugs x developers."""
    theta = np.asarray(theta, dtype=float)
    scores = np.asarray(scores, dtype=float)
    if theta.ndim != 2 or scores.ndim != 2 or theta.shape[1] != scores.shape[1]:
        raise MatchingError(f"dimension mismatch: theta {theta.shape} vs scores {scores.shape}")
    return theta @ scores.T


@dataclass
class PreferenceProfile:
    """Strict preference lists over chunk-local indices.

    ``bug_prefs[b]`` lists developer positions, best first;
    ``dev_prefs[d]`` lists bug positions, best first.
    """

    bug_prefs: list[list[int]]
    dev_prefs: list[list[int]]
    bugs: list[str] = field(default_factory=list)
    developers: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.bug_prefs)

    def validate(self) -> None:
        n = self.n
        if len(self.dev_prefs) != n:
            raise MatchingError(f"{n} bugs but {len(self.dev_prefs)} developers")
        target = list(range(n))
        for side, prefs in (("bug", self.bug_prefs), ("developer", self.dev_prefs)):
            for i, p in enumerate(prefs):
                if sorted(p) != target:
                    raise MatchingError(f"{side} {i} preference list is not a permutation")


def build_preferences(
    bug_ids: Sequence[str],
    developers: Sequence[str],
    dr: np.ndarray,
    bug_topics: Sequence[int],
    scores: np.ndarray,
) -> PreferenceProfile:
    """Bug side ranks by the developers' score in the bug's topic; developer
    side ranks by the recommendation value.

    ``dr`` is chunk bugs x ``developers``; ``scores`` is ``developers`` x K;
    ``bug_ids`` must be in chronological order. Ties go to the lower
    developer id and to the earlier bug.
    """
    n = len(bug_ids)
    if len(developers) != n:
        raise MatchingError("chunk size must equal the number of developers considered")
    dev_order = sorted(range(n), key=lambda d: developers[d])
    bug_prefs = []
    for b in range(n):
        col = scores[:, bug_topics[b]]
        bug_prefs.append(sorted(dev_order, key=lambda d: -col[d]))
    dev_prefs = [sorted(range(n), key=lambda b: -dr[b, d]) for d in range(n)]
    return PreferenceProfile(bug_prefs, dev_prefs, list(bug_ids), list(developers))


def gale_shapley(profile: PreferenceProfile) -> list[int]:
    """Bug-proposing deferred acceptance; returns the developer of each bug."""
    profile.validate()
    n = profile.n
    rank = np.empty((n, n), dtype=np.int64)
    for d, prefs in enumerate(profile.dev_prefs):
        rank[d, prefs] = np.arange(n)
    next_choice = [0] * n
    holder = [-1] * n  # developer -> bug
    free = deque(range(n))
    while free:
        b = free.popleft()
        d = profile.bug_prefs[b][next_choice[b]]
        next_choice[b] += 1
        cur = holder[d]
        if cur < 0:
            holder[d] = b
        elif rank[d, b] < rank[d, cur]:
            holder[d] = b
            free.append(cur)
        else:
            free.append(b)
    match = [0] * n
    for d, b in enumerate(holder):
        match[b] = d
    return match


def blocking_pairs(profile: PreferenceProfile, match: Sequence[int]) -> list[tuple[int, int]]:
    """Pairs (bug, developer) that both prefer each other to their partners."""
    n = profile.n
    bug_rank = [{d: i for i, d in enumerate(p)} for p in profile.bug_prefs]
    dev_rank = [{b: i for i, b in enumerate(p)} for p in profile.dev_prefs]
    partner_of_dev = {d: b for b, d in enumerate(match)}
    out = []
    for b in range(n):
        for d in range(n):
            if d == match[b]:
                continue
            if bug_rank[b][d] < bug_rank[b][match[b]] and dev_rank[d][b] < dev_rank[d][partner_of_dev[d]]:
                out.append((b, d))
    return out


@dataclass
class AssignmentPlan:
    assignments: list[tuple[str, str, int]]  # (bug_id, developer, chunk)
    loads: dict[str, int]

    def developer_of(self) -> dict[str, str]:
        return {b: d for b, d, _ in self.assignments}

    @property
    def n_chunks(self) -> int:
        return 1 + max((c for _, _, c in self.assignments), default=-1)


def _partial_subset(dr_chunk: np.ndarray, developers: Sequence[str], m: int, rule: str, loads: dict) -> list[int]:
    idx = range(len(developers))
    if rule == "dr_sum":
        sums = dr_chunk.sum(axis=0)
        chosen = sorted(idx, key=lambda d: (-sums[d], developers[d]))[:m]
    elif rule == "least_loaded":
        chosen = sorted(idx, key=lambda d: (loads[developers[d]], developers[d]))[:m]
    else:
        raise MatchingError(f"unknown partial-chunk rule {rule!r}")
    return sorted(chosen, key=lambda d: developers[d])


def iterative_assign(
    bug_ids: Sequence[str],
    developers: Sequence[str],
    dr: np.ndarray,
    bug_topics: Sequence[int],
    scores: np.ndarray,
    partial_rule: str = "dr_sum",
) -> AssignmentPlan:
    """Match chronologically ordered test bugs chunk by chunk.

    ``dr`` is bugs x developers and ``scores`` developers x K, both in the
    order of ``developers``. The last chunk, when shorter than the developer
    list, is matched against a subset chosen by ``partial_rule``.
    """
    if not len(bug_ids):
        raise MatchingError("no test bugs to assign")
    dr = np.asarray(dr, dtype=float)
    scores = np.asarray(scores, dtype=float)
    # canonical column order so the outcome ignores the caller's developer order
    perm = sorted(range(len(developers)), key=lambda d: developers[d])
    developers = [developers[d] for d in perm]
    dr = dr[:, perm]
    scores = scores[perm]
    n_dev = len(developers)
    loads = {d: 0 for d in developers}
    assignments: list[tuple[str, str, int]] = []
    for chunk, start in enumerate(range(0, len(bug_ids), n_dev)):
        rows = list(range(start, min(start + n_dev, len(bug_ids))))
        sub = dr[rows]
        if len(rows) == n_dev:
            cols = list(range(n_dev))
        else:
            cols = _partial_subset(sub, developers, len(rows), partial_rule, loads)
        profile = build_preferences(
            [bug_ids[r] for r in rows],
            [developers[c] for c in cols],
            sub[:, cols],
            [bug_topics[r] for r in rows],
            scores[cols],
        )
        for b, d in enumerate(gale_shapley(profile)):
            dev = profile.developers[d]
            assignments.append((profile.bugs[b], dev, chunk))
            loads[dev] += 1
    return AssignmentPlan(assignments, loads)


def write_plan(plan: AssignmentPlan, path) -> None:
    with atomic_open(path, newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bug_id", "developer", "chunk"])
        w.writerows(plan.assignments)


def read_plan(path) -> list[tuple[str, str, int]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [(r["bug_id"], r["developer"], int(r["chunk"])) for r in csv.DictReader(fh)]


def write_dr(dr: np.ndarray, bug_ids: Sequence[str], developers: Sequence[str], path) -> None:
    with atomic_open(path, newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bug_id"] + list(developers))
        for b, row in zip(bug_ids, dr):
            w.writerow([b] + [repr(float(x)) for x in row])
