import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bugsum.vsm import CorpusStats, aggregate_unit, build_stats, cosine, cosine_matrix, vectorize


def test_build_stats_counts_units_and_document_frequency():
    stats = build_stats([["a", "b"], ["a"]])
    assert stats.n_units == 2
    assert stats.doc_freq == {"a": 2, "b": 1}
    assert build_stats([["a", "a", "a"]]).doc_freq["a"] == 1


def test_build_stats_rejects_empty_corpus():
    with pytest.raises(ValueError):
        build_stats([])


def test_vectorize_examples():
    stats = build_stats([["a", "b"], ["a"]])
    assert vectorize(["a", "a"], stats) == {"a": 0.0}
    assert vectorize(["b"], stats)["b"] == pytest.approx(0.6931471805599453, abs=1e-15)
    assert vectorize([], stats) == {}


def test_unseen_term_counts_as_one_unit():
    stats = build_stats([["a"], ["b"], ["c"]])
    assert vectorize(["zzz"], stats)["zzz"] == pytest.approx(math.log(3))


def test_cosine_examples():
    v = {"a": 2.0, "b": 1.0}
    assert cosine(v, v) == pytest.approx(1.0)
    assert cosine({"a": 1.0}, {"b": 1.0}) == 0.0
    assert cosine({"a": 1.0}, {"a": 1.0, "b": 1.0}) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert cosine({}, v) == 0.0


def test_aggregate_unit():
    stats = build_stats([["a", "b"], ["a"], ["c"]])
    s = ["a", "b"]
    assert aggregate_unit([s], stats) == vectorize(s, stats)
    doubled = aggregate_unit([s, s], stats)
    assert doubled == {t: 2 * w for t, w in vectorize(s, stats).items()}
    assert cosine(doubled, vectorize(s, stats)) == pytest.approx(1.0)
    # report of s1, s2: summed counts times IDF, by hand
    rep = aggregate_unit([["a", "b"], ["b", "c"]], stats)
    assert rep == pytest.approx({"a": math.log(3 / 2), "b": 2 * math.log(3), "c": math.log(3)})


def _brute_weights(corpus, tokens):
    n = len(corpus)
    out = {}
    for t in set(tokens):
        f = 0
        for tok in tokens:
            if tok == t:
                f += 1
        nt = 0
        for unit in corpus:
            for tok in unit:
                if tok == t:
                    nt += 1
                    break
        out[t] = f * math.log(n / nt)
    return out


units = st.lists(st.lists(st.sampled_from("abcdefg"), max_size=8), min_size=1, max_size=10)


@given(units)
@settings(max_examples=200, deadline=None)
def test_vectorize_matches_double_loop_oracle(corpus):
    stats = build_stats(corpus)
    for unit in corpus:
        got = vectorize(unit, stats)
        want = _brute_weights(corpus, unit)
        assert got.keys() == want.keys()
        for t in want:
            assert abs(got[t] - want[t]) <= 1e-12


vecs = st.dictionaries(st.sampled_from("abcdef"), st.floats(0, 10, allow_nan=False), max_size=6)


@given(vecs, vecs, st.floats(0.01, 100))
@settings(max_examples=300, deadline=None)
def test_cosine_properties(u, v, alpha):
    c = cosine(u, v)
    assert 0.0 <= c <= 1.0
    assert c == pytest.approx(cosine(v, u), abs=1e-12)
    assert cosine({t: alpha * w for t, w in u.items()}, v) == pytest.approx(c, abs=1e-9)


def test_cosine_matrix_agrees_with_pairwise_cosine():
    rng = np.random.default_rng(0)
    corpus = [list(rng.choice(list("abcdefgh"), rng.integers(0, 6))) for _ in range(12)]
    stats = build_stats(corpus)
    vs = [vectorize(u, stats) for u in corpus]
    M = cosine_matrix(vs)
    for i in range(len(vs)):
        for j in range(len(vs)):
            want = (1.0 if vs[i] and any(vs[i].values()) else 0.0) if i == j else cosine(vs[i], vs[j])
            assert M[i, j] == pytest.approx(want, abs=1e-12)


def test_stats_cache_round_trip(tmp_path):
    stats = build_stats([["a", "b"], ["a"], ["c", "c"]])
    stats.save(tmp_path / "s.json")
    again = CorpusStats.load(tmp_path / "s.json")
    assert again.n_units == 3 and dict(again.doc_freq) == dict(stats.doc_freq)
    (tmp_path / "bad.json").write_text('{"format": "other"}')
    with pytest.raises(ValueError):
        CorpusStats.load(tmp_path / "bad.json")


def test_log_base_does_not_change_cosine():
    corpus = [list("aab"), list("bc"), list("cd"), list("a")]
    stats = build_stats(corpus)
    u, v = vectorize(corpus[0], stats), vectorize(corpus[1], stats)
    u2 = {t: w / math.log(10) for t, w in u.items()}
    v2 = {t: w / math.log(10) for t, w in v.items()}
    assert cosine(u, v) == pytest.approx(cosine(u2, v2), abs=1e-12)
