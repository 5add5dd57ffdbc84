import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bugsum import baselines as Bl
from bugsum.vsm import cosine, stats_for_reports, vectorize
from synth import make_report, synthetic_corpus

RANKERS = [Bl.centroid_rank, Bl.mmr_rank, Bl.grasshopper_rank, Bl.divrank_rank, Bl.hurried_rank]


def _random_W(rng, n):
    W = rng.random((n, n)) * (rng.random((n, n)) < 0.6)
    W = (W + W.T) / 2
    np.fill_diagonal(W, 0.0)
    return W


def _power_stationary(P, iters=20000):
    p = np.full(P.shape[0], 1.0 / P.shape[0])
    for _ in range(iters):
        p = p @ P
    return p


def _grasshopper_oracle(W, damping):
    n = W.shape[0]
    P = Bl.teleport_matrix(W, damping)
    pi = _power_stationary(P)
    order = [int(np.argmax(pi))]
    while len(order) < n:
        rest = [i for i in range(n) if i not in order]
        Q = P[np.ix_(rest, rest)]
        # expected visits: sum_k start Q^k with a uniform start
        start = np.full(len(rest), 1.0 / len(rest))
        visits = np.zeros(len(rest))
        cur = start
        for _ in range(5000):
            visits += cur
            cur = cur @ Q
        order.append(rest[int(np.argmax(visits))])
    return order


def test_grasshopper_matches_power_iteration_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(2, 7))
        W = _random_W(rng, n)
        graph = Bl.SentenceGraph(tuple(str(i) for i in range(n)), W)
        got = [int(i) for i, _ in Bl.grasshopper(graph)]
        assert got == _grasshopper_oracle(W, 0.85)


def test_stationary_distribution_is_fixed_point():
    rng = np.random.default_rng(1)
    P = Bl.teleport_matrix(_random_W(rng, 6), 0.85)
    pi = Bl.stationary_distribution(P)
    assert pi.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(pi @ P, pi, atol=1e-12)


def _divrank_oracle(W, alpha, damping, iters):
    n = len(W)
    P0 = []
    for i in range(n):
        deg = sum(W[i])
        a = alpha if deg > 0 else 0.0
        P0.append([a * (W[i][j] / deg if deg > 0 else 0.0) + (1 - a) * (i == j) for j in range(n)])
    p = [1.0 / n] * n
    for _ in range(iters):
        nxt = [0.0] * n
        for i in range(n):
            z = sum(P0[i][k] * p[k] for k in range(n))
            for j in range(n):
                nxt[j] += p[i] * P0[i][j] * p[j] / z
        nxt = [damping * x + (1 - damping) / n for x in nxt]
        s = sum(nxt)
        p = [x / s for x in nxt]
    return p


def test_divrank_matches_plain_recurrence():
    rng = np.random.default_rng(2)
    for _ in range(10):
        W = _random_W(rng, int(rng.integers(2, 6)))
        cfg = Bl.WalkConfig(max_iters=50, tol=1e-300)
        got = Bl.divrank_scores(W, cfg)
        want = _divrank_oracle(W.tolist(), cfg.divrank_alpha, cfg.damping, 50)
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_divrank_promotes_isolated_sentence_over_duplicate():
    # A and B are near-duplicates, A also touches satellite D, C is isolated
    W = np.array([
        [0.0, 0.9, 0.0, 0.3],
        [0.9, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
        [0.3, 0.0, 0.0, 0.0],
    ])
    p = Bl.divrank_scores(W)
    assert p.sum() == pytest.approx(1.0)
    assert p[2] == pytest.approx(0.25, abs=1e-9)
    assert p[0] > p[2] > p[1]
    ranked = Bl.rank_by_scores(["A", "B", "C", "D"], p)
    assert [i for i, _ in ranked][:2] == ["A", "C"]


def test_divrank_history_converges():
    rng = np.random.default_rng(3)
    hist = []
    Bl.divrank_scores(_random_W(rng, 5), history=hist)
    assert np.abs(hist[-1] - hist[-2]).sum() < 1e-10


def _pagerank_oracle(W, v, d):
    P = Bl.transition_matrix(W)
    v = v / v.sum()
    p = np.full(len(v), 1.0 / len(v))
    for _ in range(5000):
        p = d * p @ P + (1 - d) * v
    return p


def test_pagerank_matches_power_iteration():
    rng = np.random.default_rng(4)
    for _ in range(10):
        n = int(rng.integers(2, 8))
        W = _random_W(rng, n)
        v = rng.random(n) + 1e-3
        np.testing.assert_allclose(Bl.pagerank(W, v), _pagerank_oracle(W, v, 0.85), atol=1e-12)


def test_hurried_personalization_components():
    T = make_report("h", [("a", ["Startup crash in Firefox.", "Great fix works."]), ("b", ["Unrelated words."])],
                    title="Startup crash in Firefox")
    stats = stats_for_reports([T, make_report("x", [("a", ["Other filler text."])])])
    v = Bl.hurried_personalization(T, stats)
    assert v[0] == pytest.approx(1.0 + 1.0 + 0.0 + Bl.HURRIED_EPS)
    assert v[1] == pytest.approx(0.0 + 1.0 + 1.0 + Bl.HURRIED_EPS)
    assert v[2] == pytest.approx(Bl.HURRIED_EPS)


def test_mmr_with_full_relevance_weight_is_centroid_order():
    corpus = synthetic_corpus(4, seed=6)
    stats = stats_for_reports(corpus.reports)
    for T in corpus.reports:
        assert [i for i, _ in Bl.mmr_rank(T, stats, 1.0)] == [i for i, _ in Bl.centroid_rank(T, stats)]
    with pytest.raises(ValueError):
        Bl.mmr_rank(corpus.reports[0], stats, 1.5)


def test_mmr_skips_exact_duplicate():
    T = make_report("d", [("a", ["Startup crash firefox.", "Startup crash firefox.", "Profile corrupt startup."])])
    stats = stats_for_reports([T, make_report("x", [("a", ["Filler."])])])
    order = [i for i, _ in Bl.mmr_rank(T, stats)]
    assert order[0] == "1.1" and order[1] == "1.3"


def test_grasshopper_avoids_second_copy():
    T = make_report("g", [("a", ["Startup crash firefox.", "Startup crash firefox.", "Startup crash profile.",
                                 "Printer margin layout.", "Printer margin preview."])])
    stats = stats_for_reports([T, make_report("x", [("a", ["Filler."])])])
    order = [i for i, _ in Bl.grasshopper_rank(T, stats)]
    assert order[0] == "1.1" and order[1] in ("1.4", "1.5")


@pytest.mark.parametrize("ranker", RANKERS, ids=lambda f: f.__name__)
def test_rankers_return_permutations(ranker):
    corpus = synthetic_corpus(6, seed=12)
    stats = stats_for_reports(corpus.reports)
    for T in corpus.reports:
        ranked = ranker(T, stats)
        assert sorted(i for i, _ in ranked) == sorted(s.id for s in T.sentences)
        assert ranker(T, stats) == ranked


@pytest.mark.parametrize("ranker", RANKERS, ids=lambda f: f.__name__)
def test_rankers_handle_single_sentence(ranker):
    T = make_report("one", [("a", ["Only sentence here."])])
    assert [i for i, _ in ranker(T, stats_for_reports([T]))] == ["1.1"]


@pytest.mark.parametrize("ranker", RANKERS, ids=lambda f: f.__name__)
def test_rankers_handle_disconnected_graph(ranker):
    T = make_report("z", [("a", ["Alpha.", "Beta.", "Gamma."])])
    stats = stats_for_reports([T, make_report("x", [("a", ["Delta."])])])
    assert sorted(i for i, _ in ranker(T, stats)) == ["1.1", "1.2", "1.3"]


@given(st.integers(2, 6), st.integers(0, 10_000))
@settings(max_examples=50, deadline=None)
def test_walks_are_distributions(n, seed):
    W = _random_W(np.random.default_rng(seed), n)
    for p in (Bl.divrank_scores(W), Bl.pagerank(W, np.ones(n)), Bl.stationary_distribution(Bl.teleport_matrix(W, 0.85))):
        assert (p >= 0).all() and p.sum() == pytest.approx(1.0)


def test_walk_config_validation():
    with pytest.raises(ValueError):
        Bl.WalkConfig(damping=1.0)
    with pytest.raises(ValueError):
        Bl.WalkConfig(divrank_alpha=0.0)


def test_centroid_examples():
    T = make_report("c", [("a", ["Startup crash.", "Startup crash."])])
    stats = stats_for_reports([T, make_report("x", [("a", ["Filler."])])])
    assert [i for i, _ in Bl.centroid_rank(T, stats)] == ["1.1", "1.2"]
    toy = make_report("t", [("a", ["alpha beta", "alpha gamma", "delta"])])
    stats = stats_for_reports([toy, make_report("x", [("a", ["Filler."])])])
    vecs = [vectorize(s.tokens, stats) for s in toy.sentences]
    pseudo = {}
    for v in vecs:
        for t, w in v.items():
            pseudo[t] = pseudo.get(t, 0.0) + w / 3
    want = sorted(range(3), key=lambda i: (-cosine(vecs[i], pseudo), i))
    assert [i for i, _ in Bl.centroid_rank(toy, stats)] == [toy.sentences[i].id for i in want]


def test_grasshopper_symmetric_pair():
    graph = Bl.SentenceGraph(("a", "b"), np.array([[0.0, 0.5], [0.5, 0.0]]))
    assert [i for i, _ in Bl.grasshopper(graph)] == ["a", "b"]


def test_divrank_first_iterate_matches_pagerank_on_regular_graph():
    W = np.ones((4, 4)) - np.eye(4)
    hist = []
    Bl.divrank_scores(W, history=hist)
    np.testing.assert_allclose(hist[0], Bl.pagerank(W, np.ones(4)), atol=1e-12)


def test_hurried_score_monotone_in_personalization():
    rng = np.random.default_rng(11)
    W = _random_W(rng, 4)
    v = rng.random(4) + 0.1
    base = Bl.pagerank(W, v)
    for bump in (0.1, 0.5, 2.0):
        raised = v.copy()
        raised[0] += bump
        assert Bl.pagerank(W, raised)[0] >= base[0]
