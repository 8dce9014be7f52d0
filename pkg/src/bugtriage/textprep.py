"""Description text to bag-of-words: tokenize, drop stop words, lemmatize, count."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_MIN_STEM = 3
_KEEP_DOUBLE = frozenset("lsfz")
_VOWELS = frozenset("aeiouy")
# stem endings that lost a silent "e" to -ed/-ing/-er; the first group only
# after a consonant (created/treated), the second always
_RESTORE_E_AFTER_CONSONANT = ("ag", "am", "at", "bl", "id", "im", "iz", "od", "ok", "uc", "ud", "ul", "ur", "ut", "av", "os", "ip")
_RESTORE_E = ("aus", "as", "iv", "lv", "rg", "rs", "rv", "yp")


class EmptyVocabularyError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    """Split on whitespace/punctuation, lowercase, drop numbers and 1-char tokens."""
    tokens = []
    for tok in _TOKEN_RE.findall(text.lower()):
        if len(tok) < 2 or tok.isnumeric():
            continue
        tokens.append(tok)
    return tokens


def load_stoplist(path=None) -> frozenset[str]:
    """One term per line; ``None`` loads the bundled English list."""
    if path is None:
        text = resources.files("bugtriage.data").joinpath("stopwords_en.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip() and not w.startswith("#"))


def load_exceptions(path=None) -> dict[str, str]:
    """``form<TAB>lemma`` rows; ``None`` loads the bundled table."""
    if path is None:
        text = resources.files("bugtriage.data").joinpath("lemma_exceptions.tsv").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    table = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        form, lemma = line.split("\t")
        table[form.strip().lower()] = lemma.strip().lower()
    return table


@lru_cache(maxsize=None)
def default_stoplist() -> frozenset[str]:
    return load_stoplist()


@lru_cache(maxsize=None)
def default_exceptions() -> dict[str, str]:
    return load_exceptions()


def remove_stopwords(tokens: Sequence[str], stoplist: Optional[Iterable[str]] = None) -> list[str]:
    stop = default_stoplist() if stoplist is None else stoplist
    return [t for t in tokens if t not in stop]


def _has_vowel(stem: str) -> bool:
    return any(c in _VOWELS for c in stem)


def _undouble(stem: str) -> str:
    if len(stem) > _MIN_STEM and stem[-1] == stem[-2] and stem[-1] not in _VOWELS | _KEEP_DOUBLE:
        return stem[:-1]
    return stem


def _restore_e(stem: str) -> str:
    if stem.endswith(_RESTORE_E):
        return stem + "e"
    if stem.endswith(_RESTORE_E_AFTER_CONSONANT) and len(stem) >= 3 and stem[-3] not in _VOWELS:
        return stem + "e"
    return stem


def _strip(stem: str) -> str:
    """Stem left after an -ed/-ing/-er suffix: undouble or restore a final e."""
    if len(stem) >= 6 and stem.endswith("ell"):
        return stem[:-1]
    single = _undouble(stem)
    return single if single != stem else _restore_e(stem)


def lemmatize_word(word: str, exceptions: Optional[dict] = None) -> str:
    table = default_exceptions() if exceptions is None else exceptions
    if word in table:
        return table[word]
    if word.endswith("ies") and len(word) - 3 >= _MIN_STEM - 1:
        return word[:-3] + "y"
    if word.endswith("sses"):
        return word[:-2]
    if word.endswith(("ches", "shes", "xes", "zes")) and len(word) - 2 >= _MIN_STEM:
        return word[:-2]
    if word.endswith("s") and not word.endswith(("ss", "us", "is")) and len(word) - 1 >= _MIN_STEM:
        return word[:-1]
    if word.endswith("ing"):
        stem = word[:-3]
        if len(stem) >= _MIN_STEM and _has_vowel(stem):
            return _strip(stem)
        return word
    if word.endswith("ied") and len(word) - 3 >= _MIN_STEM - 1:
        return word[:-3] + "y"
    if word.endswith("ed") and not word.endswith("eed"):
        stem = word[:-2]
        if len(stem) >= _MIN_STEM and _has_vowel(stem):
            return _strip(stem)
        return word
    if word.endswith("er"):
        stem = word[:-2]
        if len(stem) >= _MIN_STEM + 1 and _has_vowel(stem):
            return _strip(stem)
    return word


def lemmatize(tokens: Sequence[str], exceptions: Optional[dict] = None) -> list[str]:
    return [lemmatize_word(t, exceptions) for t in tokens]


@dataclass(frozen=True)
class TokenizedDoc:
    bug_id: str
    tokens: tuple[str, ...]


@dataclass
class TextPipeline:
    """Tokenize -> stop words -> lemmatize -> stop words.

    The second stop-word pass catches lemmas such as ``was -> be``.
    """

    stoplist: frozenset = field(default_factory=default_stoplist)
    exceptions: dict = field(default_factory=default_exceptions)

    def __call__(self, text: str) -> list[str]:
        tokens = remove_stopwords(tokenize(text), self.stoplist)
        tokens = lemmatize(tokens, self.exceptions)
        return [t for t in remove_stopwords(tokens, self.stoplist) if len(t) >= 2]

    def docs(self, items: Iterable[tuple[str, str]]) -> list[TokenizedDoc]:
        return [TokenizedDoc(bug_id, tuple(self(text))) for bug_id, text in items]


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    doc_freq: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.terms)})

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term) -> bool:
        return term in self._index

    def id(self, term: str) -> int:
        return self._index[term]

    def get(self, term: str, default=None):
        return self._index.get(term, default)


@dataclass(frozen=True)
class DocTermMatrix:
    """Sparse document-term counts with the row order's bug ids."""

    counts: sp.csr_matrix
    doc_ids: tuple[str, ...]

    @property
    def n_docs(self) -> int:
        return self.counts.shape[0]

    @property
    def n_terms(self) -> int:
        return self.counts.shape[1]

    @property
    def empty(self) -> np.ndarray:
        return np.asarray(self.counts.sum(axis=1)).ravel() == 0

    def row_tokens(self, i: int) -> np.ndarray:
        """Word ids of row ``i`` expanded by count, in ascending id order."""
        lo, hi = self.counts.indptr[i], self.counts.indptr[i + 1]
        return np.repeat(self.counts.indices[lo:hi], self.counts.data[lo:hi]).astype(np.int64)

    def take(self, rows: Sequence[int]) -> "DocTermMatrix":
        rows = list(rows)
        return DocTermMatrix(self.counts[rows], tuple(self.doc_ids[i] for i in rows))


def _count_rows(docs: Sequence[TokenizedDoc], vocab: Vocabulary) -> sp.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[int] = []
    for doc in docs:
        c = Counter(vocab.get(t) for t in doc.tokens)
        c.pop(None, None)
        for j in sorted(c):
            indices.append(j)
            data.append(c[j])
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.asarray(data, dtype=np.int64), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(docs), len(vocab)),
    )


def build_matrix(
    docs: Sequence[TokenizedDoc], min_df: int = 2, max_df_fraction: float = 0.5
) -> tuple[Vocabulary, DocTermMatrix]:
    """Vocabulary of terms with ``min_df <= df <= max_df_fraction * n_docs``.

    Terms are ordered alphabetically, so ids do not depend on document order.
    Documents left with no surviving token are kept as zero rows.
    """
    if not any(d.tokens for d in docs):
        raise EmptyVocabularyError("no document has any token")
    df = Counter()
    for d in docs:
        df.update(set(d.tokens))
    limit = max_df_fraction * len(docs)
    terms = sorted(t for t, n in df.items() if n >= min_df and n <= limit)
    if not terms:
        raise EmptyVocabularyError(
            f"every term was filtered (min_df={min_df}, max_df_fraction={max_df_fraction})"
        )
    vocab = Vocabulary(tuple(terms), tuple(df[t] for t in terms))
    return vocab, DocTermMatrix(_count_rows(docs, vocab), tuple(d.bug_id for d in docs))


def transform(docs: Sequence[TokenizedDoc], vocab: Vocabulary) -> DocTermMatrix:
    """Count ``docs`` against an existing vocabulary; unseen terms are dropped."""
    return DocTermMatrix(_count_rows(docs, vocab), tuple(d.bug_id for d in docs))
