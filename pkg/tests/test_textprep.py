from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bugtriage.textprep import (
    EmptyVocabularyError,
    TextPipeline,
    TokenizedDoc,
    build_matrix,
    default_stoplist,
    lemmatize,
    lemmatize_word,
    load_exceptions,
    load_stoplist,
    remove_stopwords,
    tokenize,
    transform,
)
from conftest import FIXTURES


def golden_lemmas():
    rows = []
    for line in (FIXTURES / "lemma_golden.tsv").read_text("utf-8").splitlines():
        if line and not line.startswith("#"):
            form, lemma = line.split("\t")
            rows.append((form, lemma))
    return rows


def test_tokenize_examples():
    assert tokenize("Kernel panic in ext4 driver!") == ["kernel", "panic", "in", "ext4", "driver"]
    assert tokenize("") == []
    assert tokenize("NullPointerException at line 42") == ["nullpointerexception", "at", "line"]


def test_tokenize_splits_punctuation_and_unicode():
    assert tokenize("foo_bar/baz-qux (x) a.b") == ["foo", "bar", "baz", "qux"]
    assert tokenize("Überlauf\tim Treiber") == ["überlauf", "im", "treiber"]


@given(st.lists(st.integers(0, 10**9), max_size=20), st.lists(st.text("abcdefg", min_size=2, max_size=6), max_size=20))
def test_numeric_tokens_dropped(numbers, words):
    text = " ".join([str(n) for n in numbers] + words)
    assert tokenize(text) == words


def test_remove_stopwords():
    assert remove_stopwords(["the", "kernel", "panic"]) == ["kernel", "panic"]
    assert remove_stopwords([]) == []
    for w in ("a", "an", "who", "that", "the", "in"):
        assert w in default_stoplist()


def test_random_non_stop_tokens_unchanged():
    rng = np.random.default_rng(0)
    stop = default_stoplist()
    letters = np.array(list("bcdfghjklmnpqrstvwxz"))
    toks = ["".join(rng.choice(letters, size=rng.integers(3, 9))) for _ in range(1000)]
    toks = [t for t in toks if t not in stop]
    assert len(toks) > 990
    assert remove_stopwords(toks) == toks


def test_lemmatize_examples():
    assert lemmatize(["crashes", "crashing", "crashed"]) == ["crash", "crash", "crash"]
    assert lemmatize(["bus"]) == ["bus"]
    assert lemmatize(["kernel"]) == ["kernel"]


@pytest.mark.parametrize("form,lemma", golden_lemmas())
def test_lemma_golden_table(form, lemma):
    assert lemmatize_word(form) == lemma


def test_golden_table_size():
    assert len(golden_lemmas()) >= 50


def test_min_stem_guard_without_exception_table():
    assert lemmatize_word("bus", exceptions={}) == "bus"
    assert lemmatize_word("gas", exceptions={}) == "gas"
    assert lemmatize_word("sing", exceptions={}) == "sing"
    assert lemmatize_word("red", exceptions={}) == "red"


def test_custom_stoplist_and_exceptions(tmp_path):
    sp = tmp_path / "stop.txt"
    sp.write_text("kernel\n# comment\n\npanic\n")
    ex = tmp_path / "ex.tsv"
    ex.write_text("oopses\toops\n")
    pipe = TextPipeline(load_stoplist(sp), load_exceptions(ex))
    assert pipe("the kernel oopses in panic") == ["the", "oops", "in"]


def test_pipeline_second_stop_pass():
    # "was" lemmatizes to "be", which is itself a stop word
    assert TextPipeline(stoplist=frozenset({"be"}))("was crashing") == ["crash"]


words_st = st.lists(st.sampled_from(
    "the kernel crashes crashed was is driver drivers in an panic a who that box boxes running"
    " file files x 42 ext4 being".split()
), max_size=30)


@given(words_st)
def test_pipeline_never_emits_stop_or_empty(words):
    pipe = TextPipeline()
    out = pipe(" ".join(words))
    assert all(t and t not in pipe.stoplist and t == t.lower() for t in out)


def test_build_matrix_shared_term():
    docs = [TokenizedDoc("a", ("kernel", "panic")), TokenizedDoc("b", ("kernel", "oops"))]
    vocab, m = build_matrix(docs, min_df=2, max_df_fraction=1.0)
    assert vocab.terms == ("kernel",)
    assert m.counts.toarray().tolist() == [[1], [1]]


def test_build_matrix_repeated_doc_and_empty_rows():
    d = ("alpha", "beta", "beta")
    docs = [TokenizedDoc(f"d{i}", d) for i in range(3)] + [TokenizedDoc("z", ("gamma",))] * 3
    vocab, m = build_matrix(docs, min_df=2, max_df_fraction=0.5)
    rows = m.counts.toarray()
    assert (rows[0] == rows[1]).all() and (rows[1] == rows[2]).all()
    assert vocab.terms == ("alpha", "beta", "gamma")
    docs.append(TokenizedDoc("lonely", ("omega",)))
    vocab, m = build_matrix(docs, min_df=2, max_df_fraction=0.5)
    assert m.empty.tolist() == [False] * 6 + [True]


def test_build_matrix_errors():
    with pytest.raises(EmptyVocabularyError):
        build_matrix([TokenizedDoc("a", ())])
    with pytest.raises(EmptyVocabularyError):
        build_matrix([TokenizedDoc("a", ("x",)), TokenizedDoc("b", ("y",))])


def test_row_sums_match_naive_recount():
    rng = np.random.default_rng(3)
    words = [f"w{c}{d}" for c in "abcdefghij" for d in "xyz"]
    texts = [" ".join(rng.choice(words, size=rng.integers(0, 25))) for _ in range(100)]
    pipe = TextPipeline()
    docs = pipe.docs((f"b{i}", t) for i, t in enumerate(texts))
    vocab, m = build_matrix(docs, min_df=2, max_df_fraction=0.5)
    df = Counter(t for d in docs for t in set(d.tokens))
    kept = {t for t, n in df.items() if 2 <= n <= 50}
    assert set(vocab.terms) == kept
    naive = [sum(1 for t in d.tokens if t in kept) for d in docs]
    assert np.asarray(m.counts.sum(axis=1)).ravel().tolist() == naive
    for i, d in enumerate(docs):
        assert Counter(vocab.terms[j] for j in m.row_tokens(i)) == Counter(t for t in d.tokens if t in kept)


def test_build_matrix_deterministic_and_order_free():
    docs = TextPipeline().docs([("a", "kernel panic panic"), ("b", "kernel oops"), ("c", "oops disk"), ("d", "disk")])
    v1, m1 = build_matrix(docs, max_df_fraction=1.0)
    v2, m2 = build_matrix(docs, max_df_fraction=1.0)
    assert v1 == v2 and (m1.counts != m2.counts).nnz == 0
    v3, _ = build_matrix(list(reversed(docs)), max_df_fraction=1.0)
    assert v3.terms == v1.terms


def test_transform_drops_unseen_terms():
    docs = TextPipeline().docs([("a", "kernel panic"), ("b", "kernel panic oops")])
    vocab, _ = build_matrix(docs, max_df_fraction=1.0)
    m = transform(TextPipeline().docs([("n", "panic unseen panic")]), vocab)
    assert m.counts.toarray().tolist() == [[0, 2]]
