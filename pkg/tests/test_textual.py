import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import cosine
from sot_align.errors import ShapeError
from sot_align.kg import KnowledgeGraph
from sot_align.textual import (
    DEFAULT_EPS,
    DEFAULT_TOP_N,
    WordEmbeddingTable,
    embed_names,
    extract_pseudo_pairs,
    load_word_vectors,
    similarity_matrix,
    tokenize,
    top_n_candidates,
    write_oov_report,
)


def kg_of(*names):
    return KnowledgeGraph.build([(f"e{k}", n) for k, n in enumerate(names)])


TABLE = WordEmbeddingTable(2, {"heart": np.array([1.0, 0.0]), "attack": np.array([0.0, 1.0])})


def test_tokenize():
    assert tokenize("Heart-Attack (acute),  type_2") == ["heart", "attack", "acute", "type", "2"]
    assert tokenize("myocardialInfarction", split_camel=True) == ["myocardial", "infarction"]


class TestEmbedNames:
    def test_mean_of_tokens(self):
        out = embed_names(kg_of("heart attack"), TABLE)
        np.testing.assert_array_equal(out.matrix[0], [0.5, 0.5])

    def test_single_known_token(self):
        out = embed_names(kg_of("Heart of gold"), TABLE)
        np.testing.assert_array_equal(out.matrix[0], [1.0, 0.0])

    def test_all_oov(self, tmp_path):
        kg = kg_of("heart", "unknown words")
        out = embed_names(kg, TABLE)
        np.testing.assert_array_equal(out.matrix[1], [0.0, 0.0])
        assert out.oov == (1,)
        write_oov_report(tmp_path / "oov.tsv", kg, out)
        assert (tmp_path / "oov.tsv").read_text() == "e1\toov\n"


def test_load_word_vectors(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("heart 1 0\nattack 0 1.5\n")
    table = load_word_vectors(p)
    assert table.dimension == 2
    np.testing.assert_array_equal(table.vectors["attack"], [0.0, 1.5])


class TestSimilarity:
    @pytest.mark.parametrize(
        "a, b, expected",
        [((1, 0), (1, 0), 1.0), ((1, 0), (0, 1), 0.0), ((3, 4), (4, 3), 24 / 25), ((0, 0), (1, 1), 0.0)],
    )
    def test_examples(self, a, b, expected):
        s = similarity_matrix(np.array([a], float), np.array([b], float))
        assert s[0, 0] == pytest.approx(expected, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            similarity_matrix(np.ones((2, 3)), np.ones((2, 4)))

    def test_against_scalar_oracle(self, rng):
        A = rng.normal(size=(7, 5))
        B = rng.normal(size=(4, 5))
        A[2] = 0.0
        S = similarity_matrix(A, B)
        ref = np.array([[cosine(a, b) for b in B] for a in A])
        np.testing.assert_allclose(S, ref, atol=1e-12)


mats = arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 4)), elements=st.floats(-10, 10))


@given(mats, mats)
def test_similarity_bounded_and_transposes(a, b):
    d = min(a.shape[1], b.shape[1])
    a, b = a[:, :d], b[:, :d]
    s = similarity_matrix(a, b)
    assert np.all(np.abs(s) <= 1 + 1e-9)
    np.testing.assert_allclose(s, similarity_matrix(b, a).T, atol=1e-12)


class TestPseudoPairs:
    def test_default_eps(self):
        assert DEFAULT_EPS == 0.99

    def test_identity(self):
        assert extract_pseudo_pairs(np.eye(4), 0.99).pairs == ((0, 0), (1, 1), (2, 2), (3, 3))

    def test_row_with_two_above_threshold(self):
        S = np.array([[0.995, 0.992], [0.30, 0.40]])
        assert extract_pseudo_pairs(S, 0.99).pairs == ()

    def test_column_conflict(self):
        S = np.array([[0.995, 0.1], [0.996, 0.2], [0.0, 0.999]])
        assert extract_pseudo_pairs(S, 0.99).pairs == ((2, 1),)

    def test_bad_eps(self):
        with pytest.raises(ValueError):
            extract_pseudo_pairs(np.eye(2), 1.0)


sims = arrays(np.float64, st.tuples(st.integers(1, 7), st.integers(1, 7)), elements=st.floats(-1, 1))


@given(sims, st.floats(0.01, 0.98), st.floats(0.0, 0.5))
def test_pseudo_pairs_exclusive_and_threshold_behaviour(S, eps, bump):
    low = extract_pseudo_pairs(S, eps)
    i = [p[0] for p in low.pairs]
    j = [p[1] for p in low.pairs]
    assert len(set(i)) == len(i) and len(set(j)) == len(j)
    for a, b in low.pairs:
        assert S[a, b] > eps
        assert np.sum(S[a] > eps) == 1 and np.sum(S[:, b] > eps) == 1
    # A higher threshold can only add a pair by silencing a competitor that
    # sat between the two thresholds in its row or column.
    eps2 = min(eps + bump, 0.999)
    for a, b in set(extract_pseudo_pairs(S, eps2).pairs) - set(low.pairs):
        rivals = np.concatenate([np.delete(S[a], b), np.delete(S[:, b], a)])
        assert np.any((rivals > eps) & (rivals <= eps2))


def test_higher_threshold_can_unlock_a_pair():
    S = np.array([[1.0, 0.5]])
    assert extract_pseudo_pairs(S, 0.25).pairs == ()
    assert extract_pseudo_pairs(S, 0.75).pairs == ((0, 0),)


class TestTopN:
    def test_default(self):
        assert DEFAULT_TOP_N == 3

    def test_order_statistics(self):
        assert sorted(j for _, j in top_n_candidates(np.array([[0.9, 0.1, 0.5]]), 2)) == [0, 2]

    def test_tie_break(self):
        assert top_n_candidates(np.array([[0.3, 0.3, 0.3]]), 1) == [(0, 0)]

    def test_truncates_to_n(self):
        assert len(top_n_candidates(np.ones((2, 2)), 5)) == 4

    def test_size(self, rng):
        assert len(top_n_candidates(rng.random((6, 9)), 3)) == 18
