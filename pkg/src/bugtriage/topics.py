"""LDA by collapsed Gibbs sampling, UMass coherence, K selection and labeling.

Random draws come from a counter-based generator keyed by
``hash(seed, bug_id)``, the sweep number and the token position, and
documents are swept in key order. A fit is therefore a pure function of the
*set* of (bug_id, document) pairs: shuffling the input rows shuffles the
theta rows and changes nothing else.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numba
import numpy as np

from ._io import atomic_open
from .textprep import DocTermMatrix, Vocabulary

log = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1
_FOLDIN_SALT = 0x5F0D1E5A17
_INIT_SWEEP = -1


class TopicModelError(ValueError):
    pass


@dataclass(frozen=True)
class TopicModelConfig:
    K: int
    alpha: Optional[float] = None  # None -> 50 / K
    beta: float = 0.01
    iterations: int = 500
    burn_in: int = 300
    thin: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.alpha is not None and self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.beta <= 0:
            raise ValueError("beta must be > 0")
        if not (self.iterations > self.burn_in >= 0):
            raise ValueError("need iterations > burn_in >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")

    @property
    def doc_alpha(self) -> float:
        return 50.0 / self.K if self.alpha is None else float(self.alpha)

    def sample_sweeps(self) -> list[int]:
        sweeps = [s for s in range(self.burn_in, self.iterations) if (s + 1 - self.burn_in) % self.thin == 0]
        return sweeps or [self.iterations - 1]


@dataclass
class TopicModel:
    config: TopicModelConfig
    phi: np.ndarray  # K x V
    theta: np.ndarray  # M x K, rows follow doc_ids
    vocabulary: Vocabulary
    doc_ids: tuple[str, ...]
    empty_docs: tuple[str, ...] = ()

    @property
    def K(self) -> int:
        return self.config.K

    def labels(self) -> np.ndarray:
        return np.argmax(self.theta, axis=1)

    def top_terms(self, n: int = 10) -> list[list[int]]:
        n = min(n, self.phi.shape[1])
        # stable sort on -phi keeps the lowest term id first among ties
        return [list(np.argsort(-row, kind="stable")[:n]) for row in self.phi]


@dataclass
class TopicLabeling:
    doc_ids: tuple[str, ...]
    theta: np.ndarray
    flagged: tuple[str, ...] = ()

    @property
    def labels(self) -> np.ndarray:
        # np.argmax returns the first maximum, i.e. the lowest topic id
        return np.argmax(self.theta, axis=1)

    def label_of(self) -> dict[str, int]:
        return dict(zip(self.doc_ids, (int(k) for k in self.labels)))

    def theta_of(self) -> dict[str, np.ndarray]:
        return {b: self.theta[i] for i, b in enumerate(self.doc_ids)}


# -- random stream -----------------------------------------------------------


def doc_key(bug_id: str, seed: int, salt: int = 0) -> np.uint64:
    h = hashlib.blake2b(f"{seed}:{salt}:{bug_id}".encode("utf-8"), digest_size=8)
    return np.uint64(int.from_bytes(h.digest(), "little"))


@numba.njit(cache=True, inline="always")
def _splitmix(x):
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


@numba.njit(cache=True, inline="always")
def _uniform(key, sweep, pos):
    x = _splitmix(key ^ _splitmix(np.uint64(sweep + 2) * np.uint64(0xD6E8FEB86659FD93) + np.uint64(pos)))
    return (x >> np.uint64(11)) * (1.0 / 9007199254740992.0)


# -- kernels -----------------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _init_state(doc_ptr, words, keys, z, ndk, nkw, nk, K):
    for d in range(doc_ptr.shape[0] - 1):
        for i in range(doc_ptr[d], doc_ptr[d + 1]):
            k = int(_uniform(keys[d], -1, i - doc_ptr[d]) * K)
            if k >= K:
                k = K - 1
            z[i] = k
            ndk[d, k] += 1
            nkw[k, words[i]] += 1
            nk[k] += 1


@numba.njit(cache=True, nogil=True)
def _sweep(doc_ptr, words, keys, z, ndk, nkw, nk, alpha, beta, sweep):
    K = nk.shape[0]
    vbeta = nkw.shape[1] * beta
    p = np.empty(K)
    for d in range(doc_ptr.shape[0] - 1):
        for i in range(doc_ptr[d], doc_ptr[d + 1]):
            w = words[i]
            k = z[i]
            ndk[d, k] -= 1
            nkw[k, w] -= 1
            nk[k] -= 1
            total = 0.0
            for t in range(K):
                total += (ndk[d, t] + alpha) * (nkw[t, w] + beta) / (nk[t] + vbeta)
                p[t] = total
            u = _uniform(keys[d], sweep, i - doc_ptr[d]) * total
            k = 0
            while k < K - 1 and p[k] <= u:
                k += 1
            z[i] = k
            ndk[d, k] += 1
            nkw[k, w] += 1
            nk[k] += 1


@numba.njit(cache=True, nogil=True)
def _fold_in(doc_ptr, words, keys, phi, alpha, iterations, sample_mask, theta_out):
    K = phi.shape[0]
    p = np.empty(K)
    for d in range(doc_ptr.shape[0] - 1):
        lo = doc_ptr[d]
        hi = doc_ptr[d + 1]
        n = hi - lo
        if n == 0:
            continue
        z = np.empty(n, dtype=np.int64)
        ndk = np.zeros(K)
        for j in range(n):
            k = int(_uniform(keys[d], -1, j) * K)
            if k >= K:
                k = K - 1
            z[j] = k
            ndk[k] += 1.0
        n_samples = 0
        for s in range(iterations):
            for j in range(n):
                w = words[lo + j]
                ndk[z[j]] -= 1.0
                total = 0.0
                for t in range(K):
                    total += (ndk[t] + alpha) * phi[t, w]
                    p[t] = total
                u = _uniform(keys[d], s, j) * total
                k = 0
                while k < K - 1 and p[k] <= u:
                    k += 1
                z[j] = k
                ndk[k] += 1.0
            if sample_mask[s]:
                n_samples += 1
                for t in range(K):
                    theta_out[d, t] += (ndk[t] + alpha) / (n + K * alpha)
        for t in range(K):
            theta_out[d, t] /= n_samples


# -- public API --------------------------------------------------------------


def _flatten(matrix: DocTermMatrix, order: np.ndarray):
    rows = [matrix.row_tokens(int(i)) for i in order]
    lengths = np.array([len(r) for r in rows], dtype=np.int64)
    doc_ptr = np.zeros(len(rows) + 1, dtype=np.int64)
    np.cumsum(lengths, out=doc_ptr[1:])
    words = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    return doc_ptr, words.astype(np.int64), lengths


def _keys_and_order(doc_ids: Sequence[str], seed: int, salt: int = 0):
    keys = np.array([doc_key(b, seed, salt) for b in doc_ids], dtype=np.uint64)
    order = np.array(sorted(range(len(doc_ids)), key=lambda i: (int(keys[i]), doc_ids[i], i)), dtype=np.int64)
    return keys, order


def fit_lda(matrix: DocTermMatrix, config: TopicModelConfig, vocabulary: Optional[Vocabulary] = None) -> TopicModel:
    """Collapsed Gibbs LDA; phi/theta averaged over thinned post-burn-in sweeps."""
    V = matrix.n_terms
    if V == 0:
        raise TopicModelError("empty vocabulary")
    if matrix.counts.sum() == 0:
        raise TopicModelError("degenerate input: zero tokens")
    K, alpha, beta = config.K, config.doc_alpha, config.beta
    keys, order = _keys_and_order(matrix.doc_ids, config.seed)
    doc_ptr, words, lengths = _flatten(matrix, order)
    okeys = keys[order]
    M = len(order)

    z = np.zeros(len(words), dtype=np.int64)
    ndk = np.zeros((M, K), dtype=np.int64)
    nkw = np.zeros((K, V), dtype=np.int64)
    nk = np.zeros(K, dtype=np.int64)
    _init_state(doc_ptr, words, okeys, z, ndk, nkw, nk, K)

    samples = set(config.sample_sweeps())
    phi = np.zeros((K, V))
    theta = np.zeros((M, K))
    for s in range(config.iterations):
        _sweep(doc_ptr, words, okeys, z, ndk, nkw, nk, alpha, beta, s)
        if s in samples:
            phi += (nkw + beta) / (nk[:, None] + V * beta)
            theta += (ndk + alpha) / (lengths[:, None] + K * alpha)
    phi /= phi.sum(axis=1, keepdims=True)
    theta /= theta.sum(axis=1, keepdims=True)

    out = np.empty_like(theta)
    out[order] = theta
    empty = tuple(matrix.doc_ids[i] for i in np.flatnonzero(matrix.empty))
    if vocabulary is None:
        vocabulary = Vocabulary(tuple(str(i) for i in range(V)), tuple(0 for _ in range(V)))
    return TopicModel(config, phi, out, vocabulary, tuple(matrix.doc_ids), empty)


def label(model: TopicModel, matrix: DocTermMatrix) -> TopicLabeling:
    """Fold-in inference with phi frozen; argmax (lowest id on ties) is the label.

    Documents with no in-vocabulary token get a uniform theta (label 0) and
    are reported in ``flagged``.
    """
    cfg = model.config
    K = cfg.K
    keys, _ = _keys_and_order(matrix.doc_ids, cfg.seed, _FOLDIN_SALT)
    doc_ptr, words, lengths = _flatten(matrix, np.arange(matrix.n_docs))
    mask = np.zeros(cfg.iterations, dtype=np.bool_)
    mask[cfg.sample_sweeps()] = True
    theta = np.zeros((matrix.n_docs, K))
    _fold_in(doc_ptr, words, keys, np.ascontiguousarray(model.phi), cfg.doc_alpha, cfg.iterations, mask, theta)
    empty = lengths == 0
    theta[empty] = 1.0 / K
    theta /= theta.sum(axis=1, keepdims=True)
    flagged = tuple(matrix.doc_ids[i] for i in np.flatnonzero(empty))
    if flagged:
        log.warning("%d document(s) have no in-vocabulary token; labeled topic 0", len(flagged))
    return TopicLabeling(tuple(matrix.doc_ids), theta, flagged)


def training_labeling(model: TopicModel) -> TopicLabeling:
    return TopicLabeling(model.doc_ids, model.theta, model.empty_docs)


def _doc_presence(matrix: DocTermMatrix):
    b = matrix.counts.copy()
    b.data = np.ones_like(b.data)
    return b.tocsc()


def topic_coherence(top: Sequence[int], presence) -> float:
    """UMass score of one ranked term list.

    Sum over pairs (i later than j in the ranking) of
    ``log((D(w_i, w_j) + 1) / D(w_j))``.
    """
    if len(top) < 2:
        raise TopicModelError("a topic needs at least 2 top terms for coherence")
    sub = presence[:, list(top)]
    co = (sub.T @ sub).toarray()
    score = 0.0
    for i in range(1, len(top)):
        for j in range(i):
            if co[j, j] == 0:
                raise TopicModelError(f"term {top[j]} occurs in no document")
            score += math.log((co[i, j] + 1.0) / co[j, j])
    return score


def coherence(model: TopicModel, matrix: DocTermMatrix, top_n: int = 10) -> tuple[list[float], float]:
    presence = _doc_presence(matrix)
    per_topic = [topic_coherence(top, presence) for top in model.top_terms(top_n)]
    return per_topic, float(np.mean(per_topic))


@dataclass
class KSelection:
    best_k: int
    table: dict[int, float]
    models: dict[int, TopicModel]

    @property
    def model(self) -> TopicModel:
        return self.models[self.best_k]


def select_k(
    matrix: DocTermMatrix,
    k_range: Sequence[int] = range(1, 16),
    template: Optional[TopicModelConfig] = None,
    vocabulary: Optional[Vocabulary] = None,
    top_n: int = 10,
    jobs: int = 1,
) -> KSelection:
    """Fit one model per K (seed = template seed + K); keep the most coherent.

    Ties go to the smaller K. K = 1 only wins when no K >= 2 was evaluated.
    """
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ValueError("empty K range")
    template = template or TopicModelConfig(K=1)

    def fit_one(k):
        cfg = replace(template, K=k, seed=template.seed + k)
        m = fit_lda(matrix, cfg, vocabulary)
        return k, m, coherence(m, matrix, top_n)[1]

    if jobs > 1 and len(ks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(fit_one, ks))
    else:
        results = [fit_one(k) for k in ks]

    table = {k: c for k, _, c in results}
    models = {k: m for k, m, _ in results}
    candidates = [k for k in ks if k >= 2] or ks
    best = max(candidates, key=lambda k: (table[k], -k))
    log.info("coherence by K: %s -> K=%d", {k: round(v, 3) for k, v in table.items()}, best)
    return KSelection(best, table, models)


# -- persistence -------------------------------------------------------------


def model_to_dict(model: TopicModel, extra: Optional[dict] = None) -> dict:
    return {
        "format": "bugtriage.topic_model",
        "version": MODEL_FORMAT_VERSION,
        "config": asdict(model.config),
        "vocabulary": {"terms": list(model.vocabulary.terms), "doc_freq": list(model.vocabulary.doc_freq)},
        "doc_ids": list(model.doc_ids),
        "empty_docs": list(model.empty_docs),
        "phi": model.phi.tolist(),
        "theta": model.theta.tolist(),
        **({"extra": extra} if extra else {}),
    }


def model_from_dict(data: dict) -> TopicModel:
    if data.get("format") != "bugtriage.topic_model":
        raise TopicModelError("not a topic model file")
    if data.get("version") != MODEL_FORMAT_VERSION:
        raise TopicModelError(f"unsupported model version {data.get('version')}")
    voc = data["vocabulary"]
    K = data["config"]["K"]
    theta = np.asarray(data["theta"], dtype=float).reshape(-1, K)
    return TopicModel(
        TopicModelConfig(**data["config"]),
        np.asarray(data["phi"], dtype=float),
        theta,
        Vocabulary(tuple(voc["terms"]), tuple(voc["doc_freq"])),
        tuple(data["doc_ids"]),
        tuple(data.get("empty_docs", ())),
    )


def save_model(model: TopicModel, path, extra: Optional[dict] = None) -> None:
    with atomic_open(path) as fh:
        json.dump(model_to_dict(model, extra), fh)


def load_model(path) -> tuple[TopicModel, dict]:
    data = json.loads(Path(path).read_text("utf-8"))
    return model_from_dict(data), data.get("extra", {})
