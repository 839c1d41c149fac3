import numpy as np
import pytest
from scipy import sparse

from sentibench.exceptions import InvalidDatasetException, InvalidHyperparameterException, ShapeMismatchException
from sentibench.linear_models import HINGE, LOGISTIC, LinearConfig, LinearModel, decision_scores, predict_linear, train_logreg, train_svm


def separable_problem(seed: int = 0, classes: int = 3, size: int = 150):
    """Gaussian blobs around well separated class centers"""
    rng = np.random.default_rng(seed)
    centers = 4.0 * np.eye(classes, 4)
    labels = np.arange(size) % classes
    return centers[labels] + rng.normal(scale=0.5, size=(size, 4)), labels


def assert_non_increasing(history):
    for previous, current in zip(history, history[1:]):
        assert current <= previous + 1e-12


# pylint: disable=missing-class-docstring,missing-function-docstring
class TestLogisticRegression:
    def test_fits_separable_data(self):
        features, labels = separable_problem()
        model = train_logreg(features, labels, l2=0.01)
        assert model.loss == LOGISTIC
        assert model.num_classes == 3
        assert np.mean(predict_linear(model, features) == labels) > 0.95

    def test_objective_is_non_increasing(self):
        features, labels = separable_problem(seed=1)
        model = train_logreg(features, labels, l2=0.1, config=LinearConfig(max_iterations=200))
        assert len(model.objective_history) > 1
        assert_non_increasing(model.objective_history)

    def test_sparse_features_match_dense(self):
        features, labels = separable_problem(seed=2)
        config = LinearConfig(max_iterations=50)
        dense = train_logreg(features, labels, l2=0.1, config=config)
        from_sparse = train_logreg(sparse.csr_matrix(features), labels, l2=0.1, config=config)
        assert np.allclose(dense.weights, from_sparse.weights)
        assert np.allclose(dense.bias, from_sparse.bias)

    def test_stronger_penalty_shrinks_weights(self):
        features, labels = separable_problem(seed=3)
        weak = train_logreg(features, labels, l2=0.001, config=LinearConfig(max_iterations=300))
        strong = train_logreg(features, labels, l2=1.0, config=LinearConfig(max_iterations=300))
        assert np.linalg.norm(strong.weights) < np.linalg.norm(weak.weights)

    def test_num_classes_beyond_labels(self):
        features, labels = separable_problem(classes=2)
        model = train_logreg(features, labels, l2=0.1, num_classes=4, config=LinearConfig(max_iterations=20))
        assert model.weights.shape == (4, 4)

    def test_single_class(self, caplog):
        model = train_logreg(np.ones((5, 2)), np.full(5, 1), l2=0.1, num_classes=3)
        assert predict_linear(model, np.zeros((2, 2))).tolist() == [1, 1]
        assert any("single class" in record.message for record in caplog.records)

    def test_negative_penalty(self):
        with pytest.raises(InvalidHyperparameterException):
            train_logreg(np.ones((2, 2)), np.array([0, 1]), l2=-1.0)

    def test_label_mismatch(self):
        with pytest.raises(ShapeMismatchException):
            train_logreg(np.ones((3, 2)), np.array([0, 1]), l2=0.1)

    def test_label_out_of_range(self):
        with pytest.raises(InvalidDatasetException):
            train_logreg(np.ones((2, 2)), np.array([0, 3]), l2=0.1, num_classes=2)


class TestSVM:
    def test_fits_separable_data(self):
        features, labels = separable_problem(seed=4)
        model = train_svm(features, labels, l2=0.01)
        assert model.loss == HINGE
        assert np.mean(predict_linear(model, features) == labels) > 0.95

    def test_binary_problem_has_one_row_per_class(self):
        features, labels = separable_problem(seed=5, classes=2)
        model = train_svm(features, labels, l2=0.01, config=LinearConfig(max_iterations=100))
        assert model.weights.shape == (2, 4)

    def test_objective_is_non_increasing(self):
        features, labels = separable_problem(seed=6)
        model = train_svm(features, labels, l2=0.1, config=LinearConfig(max_iterations=100))
        assert_non_increasing(model.objective_history)


class TestPrediction:
    def test_ties_go_to_the_lowest_class(self):
        model = LinearModel(weights=np.zeros((3, 2)), bias=np.array([0.0, 1.0, 1.0]), l2=0.0, loss=LOGISTIC)
        assert predict_linear(model, np.ones((1, 2))).tolist() == [1]

    def test_feature_dimension_mismatch(self):
        model = LinearModel(weights=np.zeros((2, 3)), bias=np.zeros(2), l2=0.0, loss=LOGISTIC)
        with pytest.raises(ShapeMismatchException):
            decision_scores(model, np.ones((1, 2)))

    def test_invalid_model(self):
        with pytest.raises(InvalidHyperparameterException):
            LinearModel(weights=np.zeros((2, 3)), bias=np.zeros(2), l2=0.0, loss="squared")

    def test_constant_bias_shift_keeps_predictions(self):
        features, labels = separable_problem(seed=5)
        model = train_logreg(features, labels, l2=0.1, config=LinearConfig(max_iterations=100))
        shifted = LinearModel(weights=model.weights, bias=model.bias + 3.5, l2=model.l2, loss=model.loss)
        assert np.array_equal(predict_linear(shifted, features), predict_linear(model, features))


class TestToySplit:
    @pytest.mark.parametrize("trainer", [train_logreg, train_svm])
    def test_four_separable_examples_are_fit_exactly(self, trainer):
        features = sparse.csr_matrix(np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
        labels = np.array([1, 0, 1, 0])
        model = trainer(features, labels, l2=1e-3)
        assert predict_linear(model, features).tolist() == labels.tolist()


class TestProperties:
    @pytest.mark.parametrize("trainer", [train_logreg, train_svm])
    def test_two_separable_points(self, trainer):
        features, labels = np.array([[1.0, 2.0], [-1.0, -2.0]]), np.array([1, 0])
        model = trainer(features, labels, l2=1e-6)
        assert predict_linear(model, features).tolist() == [1, 0]

    @pytest.mark.parametrize("trainer", [train_logreg, train_svm])
    def test_duplicated_dataset_gives_the_same_boundary(self, trainer):
        features, labels = separable_problem(seed=6, size=60)
        config = LinearConfig(max_iterations=200)
        single = trainer(features, labels, l2=0.1, config=config)
        doubled = trainer(np.vstack([features, features]), np.concatenate([labels, labels]), l2=0.1, config=config)
        assert np.allclose(doubled.weights, single.weights, atol=1e-8)
        assert np.allclose(doubled.bias, single.bias, atol=1e-8)

    def test_scaled_features_with_scaled_penalty(self):
        features, labels = separable_problem(seed=7, size=60)
        scale, l2 = 2.0, 1.0
        model = train_logreg(features, labels, l2=l2)
        scaled = train_logreg(scale * features, labels, l2=l2 * scale**2)
        assert np.array_equal(predict_linear(scaled, scale * features), predict_linear(model, features))
        assert np.allclose(decision_scores(scaled, scale * features), decision_scores(model, features), atol=1e-3)
