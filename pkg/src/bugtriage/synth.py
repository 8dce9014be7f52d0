"""Synthetic bug-report corpora with planted topics, skills and fix-time law.

Every report draws a topic, a description from that topic's vocabulary, a
real assignee (biased toward apt developers by ``manual_bias``; 0 means
uniform manual triage) and a fix time

    fix_days = max(0, round(base_days * (1 - aptitude)) + U),
    U ~ uniform integer in [-noise_days, noise_days].
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ._io import atomic_open
from .corpus import BugReport, Corpus, Severity, Status, write_dataset
from .textprep import TextPipeline

SEVERITY_ORDER = tuple(Severity)
DEFAULT_SEVERITY_PROBS = (0.03, 0.07, 0.15, 0.45, 0.12, 0.06, 0.04, 0.08)

_ONSETS = "bkmnptvz"
_VOWELS = "aiou"
_FINALS = "bkmnptv"


class SynthError(ValueError):
    pass


@dataclass
class SynthConfig:
    n_topics: int = 4
    vocab_per_topic: int = 12
    n_developers: int = 8
    n_reports: int = 800
    # developers x topics aptitude in (0, 1]; None -> expert-per-topic layout
    skill_matrix: Optional[list] = None
    expert_aptitude: float = 0.9
    base_aptitude: float = 0.2
    base_days: float = 60.0
    noise_days: int = 3
    manual_bias: float = 0.0
    doc_length: tuple = (12, 24)
    noise_words: int = 30
    noise_rate: float = 0.1
    shared_words: int = 0
    topic_prior: Optional[list] = None
    severity_probs: tuple = DEFAULT_SEVERITY_PROBS
    components_per_topic: int = 3
    start_date: str = "2005-01-01"
    max_gap_days: int = 2
    seed: int = 0

    def __post_init__(self):
        self.doc_length = tuple(self.doc_length)
        self.severity_probs = tuple(self.severity_probs)

    def validate(self) -> None:
        if self.n_topics < 1 or self.n_developers < 1:
            raise SynthError("need at least one topic and one developer")
        if self.vocab_per_topic < 1 and self.shared_words < 1:
            raise SynthError("zero vocabulary")
        if self.n_reports < self.n_developers:
            raise SynthError("n_reports must be >= n_developers")
        if not (1 <= self.doc_length[0] <= self.doc_length[1]):
            raise SynthError("bad doc_length range")
        if len(self.severity_probs) != len(SEVERITY_ORDER):
            raise SynthError("severity_probs needs 8 entries")
        if self.components_per_topic < 1:
            raise SynthError("components_per_topic must be >= 1")
        apt = self.aptitude()
        if apt.shape != (self.n_developers, self.n_topics):
            raise SynthError("skill_matrix must be n_developers x n_topics")
        if (apt <= 0).any() or (apt > 1).any():
            raise SynthError("aptitudes must lie in (0, 1]")

    @property
    def disjoint(self) -> bool:
        return self.shared_words == 0

    def aptitude(self) -> np.ndarray:
        if self.skill_matrix is not None:
            return np.asarray(self.skill_matrix, dtype=float)
        apt = np.full((self.n_developers, self.n_topics), self.base_aptitude)
        for d in range(self.n_developers):
            if d < self.n_topics:
                apt[d, d] = self.expert_aptitude
        return apt

    def prior(self) -> np.ndarray:
        p = np.ones(self.n_topics) if self.topic_prior is None else np.asarray(self.topic_prior, float)
        return p / p.sum()

    def developer_ids(self) -> list[str]:
        return [f"dev{d:02d}" for d in range(self.n_developers)]


@dataclass
class GroundTruth:
    topics: dict  # bug_id -> planted topic
    aptitude: list
    developers: list
    topic_words: list
    config: dict = field(default_factory=dict)

    def expected_fix_days(self, developer: str, topic: int) -> float:
        """Exact expectation of the fix-time law for one (developer, topic)."""
        cfg = self.config
        apt = self.aptitude[self.developers.index(developer)][topic]
        return expected_fix_days(apt, cfg["base_days"], cfg["noise_days"])

    def to_json(self) -> dict:
        return asdict(self)


def expected_fix_days(aptitude: float, base_days: float, noise_days: int) -> float:
    centre = round(base_days * (1.0 - aptitude))
    vals = [max(0, centre + u) for u in range(-noise_days, noise_days + 1)]
    return float(np.mean(vals))


def _pseudo_words(n: int, rng: np.random.Generator, pipeline: TextPipeline) -> list[str]:
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < n:
        syl = rng.integers(2, 4)
        w = "".join(_ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))] for _ in range(syl))
        w += _FINALS[rng.integers(len(_FINALS))]
        # keep only words the text pipeline leaves untouched
        if w in seen or pipeline(w) != [w]:
            continue
        seen.add(w)
        words.append(w)
    return words


@dataclass
class SynthResult:
    corpus: Corpus
    truth: GroundTruth


def generate(config: SynthConfig) -> SynthResult:
    config.validate()
    rng = np.random.default_rng(config.seed)
    word_rng = np.random.default_rng(1_000_003)
    K = config.n_topics
    pool = _pseudo_words(K * config.vocab_per_topic + config.shared_words + config.noise_words, word_rng, TextPipeline())
    topic_words = [pool[t * config.vocab_per_topic:(t + 1) * config.vocab_per_topic] for t in range(K)]
    off = K * config.vocab_per_topic
    shared = pool[off:off + config.shared_words]
    noise = pool[off + config.shared_words:]
    for t in range(K):
        topic_words[t] = topic_words[t] + shared

    apt = config.aptitude()
    devs = config.developer_ids()
    prior = config.prior()
    assign_p = apt ** config.manual_bias
    assign_p = assign_p / assign_p.sum(axis=0, keepdims=True)
    sev_p = np.asarray(config.severity_probs, float)
    sev_p = sev_p / sev_p.sum()

    day = dt.date.fromisoformat(config.start_date)
    reports: list[BugReport] = []
    topics: dict[str, int] = {}
    for i in range(config.n_reports):
        t = int(rng.choice(K, p=prior))
        n_words = int(rng.integers(config.doc_length[0], config.doc_length[1] + 1))
        words = []
        for _ in range(n_words):
            if noise and rng.random() < config.noise_rate:
                words.append(noise[rng.integers(len(noise))])
            else:
                vocab = topic_words[t]
                words.append(vocab[rng.integers(len(vocab))])
        d = int(rng.choice(config.n_developers, p=assign_p[:, t]))
        centre = round(config.base_days * (1.0 - apt[d, t]))
        fix = max(0, centre + int(rng.integers(-config.noise_days, config.noise_days + 1)))
        day = day + dt.timedelta(days=int(rng.integers(0, config.max_gap_days + 1)))
        bug_id = f"SYN-{i + 1:06d}"
        reports.append(
            BugReport(
                bug_id=bug_id,
                open_date=day,
                closed_date=day + dt.timedelta(days=fix),
                assignee=devs[d],
                status=Status.RESOLVED if rng.random() < 0.5 else Status.CLOSED,
                severity=SEVERITY_ORDER[int(rng.choice(len(SEVERITY_ORDER), p=sev_p))],
                component=f"t{t}c{int(rng.integers(config.components_per_topic))}",
                description=" ".join(words),
            )
        )
        topics[bug_id] = t
    cfg_dict = asdict(config)
    truth = GroundTruth(topics, apt.tolist(), devs, topic_words, cfg_dict)
    corpus = Corpus(tuple(reports), (), cleaned=False, n_raw=len(reports))
    return SynthResult(corpus, truth)


def write_synth(result: SynthResult, out_dir, name: str = "corpus.csv") -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    csv_path = out_dir / name
    truth_path = out_dir / "ground_truth.json"
    write_dataset(csv_path, result.corpus.reports)
    with atomic_open(truth_path) as fh:
        json.dump(result.truth.to_json(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    return csv_path, truth_path


def planted_topic_corpus(
    n_topics: int, docs_per_topic: int = 50, seed: int = 0, vocab_per_topic: int = 12, **kw
) -> SynthResult:
    """Balanced disjoint-vocabulary corpus for topic-recovery checks."""
    n_dev = kw.pop("n_developers", 4)
    cfg = SynthConfig(
        n_topics=n_topics,
        vocab_per_topic=vocab_per_topic,
        n_developers=n_dev,
        n_reports=n_topics * docs_per_topic,
        noise_words=kw.pop("noise_words", 0),
        noise_rate=kw.pop("noise_rate", 0.0),
        seed=seed,
        **kw,
    )
    cfg.validate()
    res = generate(cfg)
    return res


def expert_per_topic(n_developers: int = 8, n_reports: int = 800, n_topics: int = 4, seed: int = 0, **kw) -> SynthConfig:
    """One expert developer per topic, the rest weak; manual triage is uniform."""
    return SynthConfig(n_topics=n_topics, n_developers=n_developers, n_reports=n_reports, seed=seed, manual_bias=0.0, **kw)


def purity(true_labels: Sequence[int], predicted: Sequence[int]) -> float:
    """Fraction matched under the best one-to-one relabeling of predicted ids.

    Exhaustive over permutations, so keep the label counts small.
    """
    from itertools import permutations

    true_labels = np.asarray(true_labels)
    predicted = np.asarray(predicted)
    t_ids = sorted(set(true_labels.tolist()))
    p_ids = sorted(set(predicted.tolist()))
    conf = np.zeros((len(p_ids), len(t_ids)), dtype=int)
    for t, p in zip(true_labels, predicted):
        conf[p_ids.index(p), t_ids.index(t)] += 1
    n = min(len(p_ids), len(t_ids))
    best = 0
    for rows in permutations(range(len(p_ids)), n):
        for cols in permutations(range(len(t_ids)), n) if len(t_ids) > n else [tuple(range(n))]:
            best = max(best, int(sum(conf[r, c] for r, c in zip(rows, cols))))
    return best / len(true_labels)
