from pathlib import Path

import numpy as np
import pytest

from sentibench.data import Vocabulary
from sentibench.embeddings import EmbeddingMatrix
from sentibench.exceptions import InvalidHyperparameterException, LexiconFormatException, ShapeMismatchException, VocabularyMismatchException
from sentibench.retrofit import LexiconGraph, RetrofitConfig, Retrofitter, load_lexicon, retrofit_embeddings, retrofit_objective, retrofit_objective_terms
from tests.config import SYNONYM_PAIRS


def random_problem(rng: np.random.Generator):
    size = int(rng.integers(2, 51))
    words = [f"w{index:02d}" for index in range(size)]
    pairs = [(words[i], words[j]) for i in range(size) for j in range(i + 1, size) if rng.random() < 0.15]
    matrix = EmbeddingMatrix(vocab=Vocabulary.from_words(words), matrix=rng.normal(size=(size, 4)))
    return matrix, LexiconGraph.from_pairs(pairs)


# pylint: disable=missing-class-docstring,missing-function-docstring
class TestLexiconGraph:
    def test_symmetric_and_deduplicated(self):
        graph = LexiconGraph.from_pairs([("b", "a"), ("a", "b"), ("a", "c"), ("c", "c")])
        assert graph.neighbours("a") == ("b", "c")
        assert graph.neighbours("b") == ("a",)
        assert graph.edges == frozenset({("a", "b"), ("a", "c")})
        assert graph.degree("a") == 2
        assert graph.degree("unknown") == 0

    def test_self_loops_are_dropped(self):
        graph = LexiconGraph.from_pairs([("a", "a")])
        assert not graph.vertices


class TestRetrofitConfig:
    @pytest.mark.parametrize("overrides", [{"iterations": -1}, {"alpha": 0.0}, {"alpha_overrides": {"a": -1.0}}, {"beta": "uniform"}, {"beta": 0.0}])
    def test_invalid(self, overrides: dict):
        with pytest.raises(InvalidHyperparameterException):
            RetrofitConfig(**overrides)

    def test_inverse_degree_weight_is_symmetric(self):
        graph = LexiconGraph.from_pairs([("a", "b"), ("a", "c"), ("a", "d")])
        config = RetrofitConfig()
        assert config.edge_weight(graph, "a", "b") == pytest.approx(0.5 * (1 / 3 + 1))
        assert config.edge_weight(graph, "a", "b") == config.edge_weight(graph, "b", "a")

    def test_constant_beta(self):
        graph = LexiconGraph.from_pairs([("a", "b")])
        assert RetrofitConfig(beta=0.3).edge_weight(graph, "a", "b") == 0.3


class TestRetrofit:
    def test_two_word_fixed_point(self):
        matrix = EmbeddingMatrix(vocab=Vocabulary.from_words(["a", "b"]), matrix=np.array([[0.0], [3.0]]))
        retrofitted = retrofit_embeddings(matrix, LexiconGraph.from_pairs([("a", "b")]), RetrofitConfig(iterations=10))
        assert retrofitted.lookup("a")[0] == pytest.approx(1.0, abs=2e-6)
        assert retrofitted.lookup("b")[0] == pytest.approx(2.0, abs=2e-6)

    def test_words_without_edges_are_unchanged(self, toy_embeddings: EmbeddingMatrix):
        retrofitted = retrofit_embeddings(toy_embeddings, LexiconGraph.from_pairs(SYNONYM_PAIRS))
        assert np.array_equal(retrofitted.lookup("movie"), toy_embeddings.lookup("movie"))
        assert not np.array_equal(retrofitted.lookup("good"), toy_embeddings.lookup("good"))

    def test_zero_iterations(self, toy_embeddings: EmbeddingMatrix):
        retrofitted = retrofit_embeddings(toy_embeddings, LexiconGraph.from_pairs(SYNONYM_PAIRS), RetrofitConfig(iterations=0))
        assert np.array_equal(retrofitted.matrix, toy_embeddings.matrix)

    def test_empty_graph_is_identity(self, toy_embeddings: EmbeddingMatrix):
        retrofitted = retrofit_embeddings(toy_embeddings, LexiconGraph.from_pairs([]))
        assert np.array_equal(retrofitted.matrix, toy_embeddings.matrix)

    def test_neighbours_move_closer(self, toy_embeddings: EmbeddingMatrix):
        retrofitted = retrofit_embeddings(toy_embeddings, LexiconGraph.from_pairs(SYNONYM_PAIRS))
        before = np.linalg.norm(toy_embeddings.lookup("good") - toy_embeddings.lookup("great"))
        after = np.linalg.norm(retrofitted.lookup("good") - retrofitted.lookup("great"))
        assert after < before

    def test_objective_never_increases(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            matrix, graph = random_problem(rng)
            retrofitter = Retrofitter(config=RetrofitConfig(iterations=5))
            retrofitter.fit(matrix, graph)
            history = retrofitter.objective_history
            assert len(history) == 6
            for previous, current in zip(history, history[1:]):
                assert current <= previous + 1e-9 * max(1.0, previous)

    def test_independent_of_row_order(self):
        rng = np.random.default_rng(5)
        matrix, graph = random_problem(rng)
        order = rng.permutation(len(matrix.vocab))
        shuffled = EmbeddingMatrix(vocab=Vocabulary.from_words([matrix.vocab.words[row] for row in order]), matrix=matrix.matrix[order])
        first = retrofit_embeddings(matrix, graph)
        second = retrofit_embeddings(shuffled, graph)
        for word in matrix.vocab.words:
            assert np.allclose(first.lookup(word), second.lookup(word), atol=1e-12)

    def test_alpha_override_anchors_a_word(self):
        matrix = EmbeddingMatrix(vocab=Vocabulary.from_words(["a", "b"]), matrix=np.array([[1.0], [0.0]]))
        graph = LexiconGraph.from_pairs([("a", "b")])
        loose = retrofit_embeddings(matrix, graph)
        anchored = retrofit_embeddings(matrix, graph, RetrofitConfig(alpha_overrides={"a": 100.0}))
        assert anchored.lookup("a")[0] > loose.lookup("a")[0]

    def test_unknown_graph_word(self, toy_embeddings: EmbeddingMatrix):
        with pytest.raises(VocabularyMismatchException):
            retrofit_embeddings(toy_embeddings, LexiconGraph.from_pairs([("good", "unheard")]))


class TestObjective:
    def test_terms(self):
        vocab = Vocabulary.from_words(["a", "b"])
        q_hat = np.array([[1.0], [0.0]])
        q = np.array([[0.5], [0.5]])
        anchor, edge = retrofit_objective_terms(q, q_hat, vocab, LexiconGraph.from_pairs([("a", "b")]))
        assert anchor == pytest.approx(0.5)
        assert edge == pytest.approx(0.0)
        assert retrofit_objective(q_hat, q_hat, vocab, LexiconGraph.from_pairs([("a", "b")])) == pytest.approx(1.0)

    def test_shape_mismatch(self):
        vocab = Vocabulary.from_words(["a", "b"])
        with pytest.raises(ShapeMismatchException):
            retrofit_objective(np.zeros((2, 2)), np.zeros((2, 3)), vocab, LexiconGraph.from_pairs([]))


class TestLoadLexicon:
    def test_formats_and_filtering(self, tmp_path: Path):
        path = tmp_path / "lexicon.txt"
        path.write_text("Good\tgreat\nbad awful terrible\n\nfine unknown\n", encoding="utf-8")
        vocab = Vocabulary.from_words(["good", "great", "bad", "awful", "terrible", "fine"])
        graph = load_lexicon(path, vocab)
        assert graph.neighbours("good") == ("great",)
        assert graph.neighbours("bad") == ("awful", "terrible")
        assert "fine" not in graph.vertices

    def test_single_word_line(self, tmp_path: Path):
        path = tmp_path / "lexicon.txt"
        path.write_text("good great\nlonely\n", encoding="utf-8")
        with pytest.raises(LexiconFormatException):
            load_lexicon(path, Vocabulary.from_words(["good", "great"]))

    def test_invalid_utf8(self, tmp_path: Path):
        path = tmp_path / "lexicon.txt"
        path.write_bytes(b"good \xff\xfe\n")
        with pytest.raises(LexiconFormatException):
            load_lexicon(path, Vocabulary.from_words(["good"]))
