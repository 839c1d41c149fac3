from pathlib import Path

import numpy as np
import pytest

from sentibench.data import Vocabulary
from sentibench.exceptions import EmptyVocabularyException, InvalidDatasetException, InvalidHyperparameterException, ShapeMismatchException
from sentibench.joint import (
    DistantExample,
    DistantMarkers,
    JointConfig,
    JointScorer,
    JointTrainer,
    corrupt_window,
    distant_label,
    hinge_losses,
    joint_losses,
    load_distant_corpus,
    sentiment_hinge_accuracy,
    strip_markers,
    train_joint,
)
from sentibench.neural import gradient_check
from tests.config import FILLER_WORDS

GRADIENT_TOLERANCE = 1e-4
CHECK_SEEDS = range(100)


def polar_corpus(count: int, seed: int = 0):
    """Texts of four fillers around a single polarity word p or n"""
    rng = np.random.default_rng(seed)
    corpus = []
    for index in range(count):
        fillers = [str(word) for word in rng.choice(FILLER_WORDS, size=4)]
        polarity = 1 if index % 2 else -1
        corpus.append(DistantExample(tokens=tuple(fillers[:2] + ["p" if polarity == 1 else "n"] + fillers[2:]), polarity=polarity))
    return corpus


def small_scorer(seed: int) -> JointScorer:
    rng = np.random.default_rng(seed)
    return JointScorer.initialize(Vocabulary.from_words(["a", "b", "c", "d", "e"]), JointConfig(dim=4, window=3, hidden=6), rng)


# pylint: disable=missing-class-docstring,missing-function-docstring
class TestDistantSupervision:
    @pytest.mark.parametrize("text, expected", [("great day :)", 1), ("awful :(", -1), ("mixed :) :(", None), ("no marker", None), ("so fun :D", 1)])
    def test_distant_label(self, text: str, expected):
        assert distant_label(text) == expected

    def test_hashtags(self):
        markers = DistantMarkers(positive_hashtags=("#happy",), negative_hashtags=("#sad",))
        assert distant_label("today #sad", markers) == -1
        assert distant_label("today #sad", DistantMarkers()) is None

    def test_strip_markers(self):
        assert strip_markers("good :-) day :)").split() == ["good", "day"]

    def test_load_distant_corpus(self, tmp_path: Path):
        path = tmp_path / "tweets.txt"
        path.write_text("great day :)\nawful :(\nmixed :) :(\nneutral text\n:)\n", encoding="utf-8")
        corpus = load_distant_corpus(path)
        assert corpus == [DistantExample(tokens=("great", "day"), polarity=1), DistantExample(tokens=("awful",), polarity=-1)]

    def test_invalid_polarity(self):
        with pytest.raises(InvalidDatasetException):
            DistantExample(tokens=("good",), polarity=0)


class TestJointConfig:
    @pytest.mark.parametrize("overrides", [{"window": 2}, {"window": 0}, {"alpha": 1.5}, {"dim": 0}, {"learning_rate": 0.0}, {"epochs": -1}, {"batch_size": 0}])
    def test_invalid(self, overrides: dict):
        with pytest.raises(InvalidHyperparameterException):
            JointConfig(**overrides)


class TestHingeLosses:
    def test_values(self):
        loss_cw, loss_s, combined = hinge_losses(np.array([0.2]), np.array([0.5]), np.array([2.0]), np.array([0.0]), np.array([1]), 0.5)
        assert loss_cw[0] == pytest.approx(1.3)
        assert loss_s[0] == pytest.approx(0.0)
        assert combined[0] == pytest.approx(0.65)

    def test_negative_polarity_flips_the_sentiment_hinge(self):
        _, loss_s, _ = hinge_losses(np.zeros(1), np.zeros(1), np.array([2.0]), np.array([0.0]), np.array([-1]), 0.0)
        assert loss_s[0] == pytest.approx(3.0)

    def test_combined_is_linear_in_alpha(self):
        rng = np.random.default_rng(0)
        scores = [rng.normal(size=10) for _ in range(4)]
        polarity = rng.choice([-1, 1], size=10)
        loss_cw, loss_s, _ = hinge_losses(*scores, polarity, 0.0)
        for alpha in (0.0, 0.25, 1.0):
            _, _, combined = hinge_losses(*scores, polarity, alpha)
            assert np.allclose(combined, alpha * loss_cw + (1 - alpha) * loss_s)

    def test_losses_are_non_negative(self):
        rng = np.random.default_rng(1)
        for loss in hinge_losses(*(rng.normal(scale=5, size=50) for _ in range(4)), rng.choice([-1, 1], size=50), 0.3):
            assert np.all(loss >= 0)

    def test_alpha_out_of_range(self):
        with pytest.raises(InvalidHyperparameterException):
            hinge_losses(np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1), np.ones(1), 1.1)


class TestCorruptWindow:
    def test_replaces_only_the_center(self):
        rng = np.random.default_rng(2)
        window = np.array([1, 2, 3])
        for _ in range(200):
            corrupted = corrupt_window(window, 5, rng)
            assert corrupted[0] == 1 and corrupted[2] == 3
            assert corrupted[1] != 2
            assert 0 <= corrupted[1] < 5
        assert np.array_equal(window, [1, 2, 3])

    def test_covers_every_other_word(self):
        rng = np.random.default_rng(3)
        centers = {int(corrupt_window(np.array([0, 2, 0]), 4, rng)[1]) for _ in range(200)}
        assert centers == {0, 1, 3}

    def test_needs_two_words(self):
        with pytest.raises(EmptyVocabularyException):
            corrupt_window(np.array([0]), Vocabulary.from_words(["only"]), np.random.default_rng(0))


class TestJointScorer:
    def test_windows_are_padded(self):
        scorer = small_scorer(0)
        windows = scorer.windows(["a", "unknown", "b"])
        assert windows.tolist() == [[5, 0, 1], [0, 1, 5]]
        assert scorer.windows(["unknown"]).shape == (0, 3)

    def test_forward_shapes(self):
        scorer = small_scorer(0)
        f_cw, f_s, _ = scorer.forward(np.array([[0, 1, 2], [1, 2, 3]]))
        assert f_cw.shape == (2,)
        assert f_s.shape == (2, 2)

    def test_window_length_mismatch(self):
        with pytest.raises(ShapeMismatchException):
            small_scorer(0).forward(np.array([[0, 1]]))

    def test_joint_losses_shape_mismatch(self):
        with pytest.raises(ShapeMismatchException):
            joint_losses(small_scorer(0), np.array([[0, 1, 2]]), np.array([[0, 1, 2], [0, 3, 2]]), 1, 0.5)

    @pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0])
    @pytest.mark.parametrize("seed", CHECK_SEEDS)
    def test_gradients(self, alpha: float, seed: int):
        scorer = small_scorer(seed)
        rng = np.random.default_rng(seed)
        windows = rng.integers(6, size=(4, 3))
        windows[:, 1] = rng.integers(5, size=4)
        corrupted = np.stack([corrupt_window(window, 5, rng) for window in windows])
        polarity = rng.choice([-1, 1], size=4)

        def loss() -> float:
            return scorer.loss_and_gradients(windows, corrupted, polarity, alpha)[0]

        _, gradients = scorer.loss_and_gradients(windows, corrupted, polarity, alpha)
        errors = gradient_check(loss, scorer.parameters(), gradients)
        for name, error in errors.items():
            assert error < GRADIENT_TOLERANCE, f"{name}: relative error {error}"

    def test_sparse_embedding_gradient(self):
        scorer = small_scorer(1)
        windows, corrupted = np.array([[0, 1, 2], [2, 3, 4]]), np.array([[0, 4, 2], [2, 0, 4]])
        _, dense = scorer.loss_and_gradients(windows, corrupted, np.array([1, -1]), 0.5)
        _, sparse = scorer.loss_and_gradients(windows, corrupted, np.array([1, -1]), 0.5, dense_embeddings=False)
        rebuilt = np.zeros_like(scorer.embeddings)
        np.add.at(rebuilt, sparse["embedding_rows"], sparse["embedding_updates"])
        assert np.allclose(rebuilt, dense["embeddings"])

    def test_loss_matches_joint_losses(self):
        scorer = small_scorer(2)
        windows, corrupted, polarity = np.array([[0, 1, 2], [2, 3, 4]]), np.array([[0, 4, 2], [2, 0, 4]]), np.array([1, -1])
        loss, _ = scorer.loss_and_gradients(windows, corrupted, polarity, 0.3)
        assert loss == pytest.approx(joint_losses(scorer, windows, corrupted, polarity, 0.3)[2])

    def test_embedding_matrix_drops_the_padding_row(self):
        scorer = small_scorer(0)
        matrix = scorer.embedding_matrix()
        assert matrix.matrix.shape == (5, 4)
        assert np.array_equal(matrix.lookup("a"), scorer.embeddings[0])


class TestJointTraining:
    @pytest.fixture(scope="class")
    def trained(self):
        trainer = JointTrainer(config=JointConfig(dim=10, window=3, hidden=10, alpha=0.5, epochs=10, seed=4))
        trainer.fit(polar_corpus(200))
        return trainer

    def test_monitor_loss_decreases(self, trained: JointTrainer):
        assert len(trained.loss_history) == 11
        assert trained.loss_history[-1] < trained.loss_history[0]

    def test_sentiment_head_separates_polarity_words(self, trained: JointTrainer):
        scorer = trained.scorer
        windows = np.concatenate([scorer.windows(example.tokens)[2:3] for example in polar_corpus(100, seed=1) if example.polarity == 1])
        corrupted = windows.copy()
        corrupted[:, 1] = scorer.vocab.index("n")
        assert sentiment_hinge_accuracy(scorer, windows, corrupted, np.ones(len(windows))) > 0.9

    def test_returns_word_rows(self, trained: JointTrainer):
        matrix = trained.scorer.embedding_matrix()
        assert "p" in matrix.vocab and "n" in matrix.vocab
        assert matrix.dim == 10

    def test_deterministic(self):
        config = JointConfig(dim=5, hidden=5, epochs=2, seed=9)
        first, second = train_joint(polar_corpus(40), config), train_joint(polar_corpus(40), config)
        assert np.array_equal(first.matrix, second.matrix)

    def test_single_polarity_warns(self, caplog):
        corpus = [example for example in polar_corpus(40) if example.polarity == 1]
        train_joint(corpus, JointConfig(dim=5, hidden=5, epochs=1))
        assert any("single polarity" in record.message for record in caplog.records)

    def test_too_small_vocabulary(self):
        with pytest.raises(EmptyVocabularyException):
            train_joint([DistantExample(tokens=("same", "same"), polarity=1)], JointConfig(dim=5, hidden=5, epochs=1))
