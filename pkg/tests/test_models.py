"""
Tests for the from-scratch classifiers.
"""

import itertools
import os
import unittest
import sys

import numpy as np
from scipy.stats import norm

# Add parent directory to path to import module under test
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from vbd_workbench import models
from vbd_workbench.dataset import LabeledDataset
from vbd_workbench.exceptions import TrainingError, ValidationError
from vbd_workbench.models import ClassifierSpec, TrainedClassifier


def naive_bayes_oracle(x, features, labels):
    """Log-odds of class 1 from per-class Gaussian densities."""
    epsilon = 1e-9 * features.var() if features.var() > 0 else 1e-9
    joint = []
    for label in (0, 1):
        members = features[labels == label]
        scale = np.sqrt(members.var() + epsilon)
        joint.append(norm.logpdf(x, loc=members.mean(), scale=scale) + np.log(len(members) / len(features)))
    return joint[1] - joint[0]


class TestClassifierSpec(unittest.TestCase):
    """Tests for ClassifierSpec validation."""

    def test_defaults(self):
        spec = ClassifierSpec()
        self.assertEqual(spec.kind, "logistic")
        self.assertEqual(spec.hidden_sizes, (16,))

    def test_invalid_values(self):
        for bad in ({"kind": "forest"}, {"learning_rate": 0}, {"epochs": 0}, {"batch_size": 0},
                    {"l2": -1.0}, {"momentum": 1.0}, {"kind": "mlp", "hidden_sizes": ()}):
            with self.assertRaises(ValidationError):
                ClassifierSpec(**bad)

    def test_from_dict_rejects_unknown_fields(self):
        with self.assertRaises(ValidationError) as ctx:
            ClassifierSpec.from_dict({"kind": "mlp", "depth": 3})
        self.assertIn("depth", str(ctx.exception))

    def test_dict_round_trip(self):
        spec = ClassifierSpec(kind="mlp", hidden_sizes=(8, 4), seed=3)
        self.assertEqual(ClassifierSpec.from_dict(spec.to_dict()), spec)


class TestNaiveBayes(unittest.TestCase):
    """Tests for Gaussian Naive Bayes."""

    def test_two_points(self):
        model = models.fit(ClassifierSpec(kind="naive_bayes"), LabeledDataset([[0.0], [1.0]], [0, 1]))
        self.assertGreater(models.predict_proba(model, [1.0]), 0.5)

    def test_symmetric_midpoint(self):
        data = LabeledDataset([[-2.0], [-1.0], [1.0], [2.0]], [0, 0, 1, 1])
        model = models.fit(ClassifierSpec(kind="naive_bayes"), data)
        self.assertAlmostEqual(models.predict_proba(model, [0.0]), 0.5, delta=1e-12)

    def test_exhaustive_small_datasets(self):
        values = [0.0, 1.0, 2.5]
        for n in range(2, 7):
            for labels in itertools.product((0, 1), repeat=n):
                labels = np.array(labels)
                if labels.sum() in (0, n):
                    continue
                features = np.array([values[i % 3] + 0.1 * i for i in range(n)])
                model = models.fit(ClassifierSpec(kind="naive_bayes"), LabeledDataset(features[:, None], labels))
                for x in (-1.0, 0.5, 1.7):
                    expected = naive_bayes_oracle(x, features, labels)
                    np.testing.assert_allclose(models.decision_function(model, [x]), expected,
                                               rtol=1e-9, atol=1e-5)


class TestGradientModels(unittest.TestCase):
    """Tests for the gradient-trained classifiers."""

    def setUp(self):
        """Set up test fixtures."""
        self.separable = LabeledDataset([[-1.0], [1.0]], [0, 1])

    def test_logistic_separable(self):
        spec = ClassifierSpec(kind="logistic", learning_rate=0.5, epochs=200, batch_size=2)
        model = models.fit(spec, self.separable)
        np.testing.assert_array_equal(models.predict(model, self.separable.features), [0, 1])

    def test_zero_weights_give_one_half(self):
        model = TrainedClassifier("logistic", 3, {"w": np.zeros(3), "b": np.zeros(1)})
        self.assertEqual(models.predict_proba(model, [4.0, -2.0, 7.0]), 0.5)

    def test_svm_margin_zero_gives_one_half(self):
        model = TrainedClassifier("linear_svm", 2, {"w": np.array([1.0, -1.0]), "b": np.zeros(1)})
        self.assertEqual(models.decision_function(model, [3.0, 3.0]), 0.0)
        self.assertEqual(models.predict_proba(model, [3.0, 3.0]), 0.5)

    def test_svm_separable_signs(self):
        model = models.fit_linear_svm(self.separable, ClassifierSpec(learning_rate=0.1, epochs=100, batch_size=2))
        self.assertEqual(model.kind, "linear_svm")
        margins = models.decision_function(model, self.separable.features)
        self.assertLess(margins[0], 0)
        self.assertGreater(margins[1], 0)

    def test_svm_scaled_features(self):
        spec = ClassifierSpec(learning_rate=0.1, epochs=100, batch_size=2, l2=0.0)
        scaled = LabeledDataset(self.separable.features * 2, self.separable.labels)
        model = models.fit_linear_svm(self.separable, spec)
        scaled_model = models.fit_linear_svm(scaled, ClassifierSpec(learning_rate=0.025, epochs=100, batch_size=2,
                                                                    l2=0.0))
        np.testing.assert_array_equal(models.predict(model, self.separable.features),
                                      models.predict(scaled_model, scaled.features))

    def test_mlp_separates_blobs(self):
        rng = np.random.default_rng(8)
        features = np.vstack([rng.normal(size=(20, 2)) * 0.3 - 2.0, rng.normal(size=(20, 2)) * 0.3 + 2.0])
        data = LabeledDataset(features, [0] * 20 + [1] * 20)
        spec = ClassifierSpec(kind="mlp", hidden_sizes=(8,), learning_rate=0.1, epochs=100, batch_size=8, seed=2)
        model = models.fit(spec, data)
        np.testing.assert_array_equal(models.predict(model, features), data.labels)

    def test_probability_bounds(self):
        rng = np.random.default_rng(1)
        data = LabeledDataset(rng.normal(size=(30, 3)), np.r_[np.ones(10), np.zeros(20)])
        for kind in models.KINDS:
            model = models.fit(ClassifierSpec(kind=kind, epochs=20, hidden_sizes=(4,)), data)
            probabilities = models.predict_proba(model, rng.normal(size=(50, 3)) * 10)
            self.assertTrue(np.all((probabilities >= 0) & (probabilities <= 1)))

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        data = LabeledDataset(rng.normal(size=(25, 2)), np.r_[np.ones(8), np.zeros(17)])
        spec = ClassifierSpec(kind="mlp", epochs=15, batch_size=4, seed=9)
        first, second = models.fit(spec, data), models.fit(spec, data)
        for name, value in first.params.items():
            np.testing.assert_array_equal(value, second.params[name])

    def test_single_class(self):
        with self.assertRaises(ValidationError):
            models.fit(ClassifierSpec(), LabeledDataset([[0.0], [1.0]], [1, 1]))

    def test_dimension_mismatch(self):
        model = models.fit(ClassifierSpec(epochs=1), self.separable)
        with self.assertRaises(ValidationError):
            models.predict_proba(model, [1.0, 2.0])

    def test_non_finite_loss(self):
        data = LabeledDataset([[1e308], [-1e308]], [1, 0])
        spec = ClassifierSpec(learning_rate=1e10, epochs=3, batch_size=2)
        with self.assertRaises(TrainingError) as ctx:
            models.fit(spec, data)
        self.assertGreaterEqual(ctx.exception.epoch, 1)

    def test_json_round_trip(self):
        model = models.fit(ClassifierSpec(kind="mlp", epochs=2, hidden_sizes=(3,)), self.separable)
        restored = TrainedClassifier.from_dict(model.to_dict())
        self.assertEqual(models.predict_proba(restored, [0.3]), models.predict_proba(model, [0.3]))


class TestGradientCheck(unittest.TestCase):
    """Tests for finite-difference gradient checks."""

    def test_random_small_instances(self):
        rng = np.random.default_rng(12)
        for _ in range(5):
            d, n = int(rng.integers(1, 6)), int(rng.integers(2, 11))
            X = rng.normal(size=(n, d))
            y = rng.integers(0, 2, size=n).astype(float)

            logistic = {"w": rng.normal(size=d), "b": rng.normal(size=1)}
            self.assertLess(models.gradient_check("logistic", logistic, X, y, l2=0.01), 1e-5)

            mlp = {"W0": rng.normal(size=(d, 4)), "b0": rng.normal(size=4) * 0.1,
                   "W1": rng.normal(size=(4, 1)), "b1": rng.normal(size=1) * 0.1}
            self.assertLess(models.gradient_check("mlp", mlp, X, y, l2=0.01), 1e-5)

    def test_unsupported_kind(self):
        with self.assertRaises(ValidationError):
            models.gradient_check("naive_bayes", {}, np.zeros((1, 1)), np.zeros(1))


if __name__ == "__main__":
    unittest.main()
