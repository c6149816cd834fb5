"""
Tests for Cross-Concatenation projection and centroid-pair classification.
"""

import os
import unittest
import sys
from unittest.mock import patch

import numpy as np

# Add parent directory to path to import module under test
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from vbd_workbench import models
from vbd_workbench.crossconcat import (CCModel, cc_fit, cc_predict, cc_predict_batch, cross_concatenate, decide,
                                      margin_stats, project_test)
from vbd_workbench.dataset import NormalizationStats
from vbd_workbench.exceptions import ValidationError
from vbd_workbench.models import ClassifierSpec, TrainedClassifier


def brute_force_cross_min(a, b):
    best = np.inf
    for x in a:
        for y in b:
            best = min(best, float(np.sqrt(np.sum((x - y) ** 2))))
    return best


class TestCrossConcatenate(unittest.TestCase):
    """Tests for cross_concatenate."""

    def test_sizes_and_dimension(self):
        rng = np.random.default_rng(0)
        pair = cross_concatenate(rng.normal(size=(3, 4)), rng.normal(size=(5, 4)))
        self.assertEqual(pair.projected_minority.shape, (15, 8))
        self.assertEqual(pair.projected_majority.shape, (15, 8))

    def test_one_by_one(self):
        pair = cross_concatenate([[0.0]], [[1.0]])
        np.testing.assert_array_equal(pair.projected_minority, [[0.0, 1.0]])
        np.testing.assert_array_equal(pair.projected_majority, [[1.0, 0.0]])

    def test_enumeration_order(self):
        minority = np.array([[1.0], [2.0]])
        majority = np.array([[10.0], [20.0], [30.0]])
        pair = cross_concatenate(minority, majority)
        np.testing.assert_array_equal(pair.projected_minority,
                                      [[1, 10], [1, 20], [1, 30], [2, 10], [2, 20], [2, 30]])
        np.testing.assert_array_equal(pair.projected_majority,
                                      [[10, 1], [20, 1], [30, 1], [10, 2], [20, 2], [30, 2]])

    def test_balance_for_random_sizes(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            m, n = int(rng.integers(1, 12)), int(rng.integers(1, 12))
            pair = cross_concatenate(rng.normal(size=(m, 2)), rng.normal(size=(n, 2)))
            self.assertEqual(len(pair), m * n)
            self.assertEqual(pair.projected_majority.shape[0], m * n)
            data = pair.to_dataset()
            self.assertEqual(data.class_counts(), (m * n, m * n))

    def test_cap_subsamples_deterministically(self):
        rng = np.random.default_rng(2)
        minority, majority = rng.normal(size=(4, 2)), rng.normal(size=(6, 2))
        first = cross_concatenate(minority, majority, max_pairs=10)
        second = cross_concatenate(minority, majority, max_pairs=10)
        self.assertEqual(len(first), 10)
        np.testing.assert_array_equal(first.projected_minority, second.projected_minority)

    def test_dimension_mismatch_and_empty(self):
        with self.assertRaises(ValidationError):
            cross_concatenate([[0.0, 1.0]], [[1.0]])
        with self.assertRaises(ValidationError):
            cross_concatenate(np.empty((0, 1)), [[1.0]])


class TestMarginStats(unittest.TestCase):
    """Tests for the cross-class margin after projection."""

    def test_single_points(self):
        stats = margin_stats([[0.0]], [[1.0]])
        self.assertEqual(stats.original_min, 1.0)
        self.assertAlmostEqual(stats.projected_min, np.sqrt(2.0), delta=1e-12)

    def test_identical_point_in_both_classes(self):
        stats = margin_stats([[0.5, 0.5], [1.0, 0.0]], [[0.5, 0.5]])
        self.assertEqual(stats.original_min, 0.0)
        self.assertEqual(stats.projected_min, 0.0)

    def test_ratio_against_exhaustive_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(15):
            m, n, d = int(rng.integers(1, 21)), int(rng.integers(1, 21)), int(rng.integers(1, 5))
            minority, majority = rng.normal(size=(m, d)), rng.normal(size=(n, d)) + 0.5
            pair = cross_concatenate(minority, majority)

            original = brute_force_cross_min(minority, majority)
            projected = brute_force_cross_min(pair.projected_minority, pair.projected_majority)
            self.assertAlmostEqual(projected, np.sqrt(2.0) * original, delta=1e-9)

            stats = margin_stats(minority, majority)
            self.assertAlmostEqual(stats.projected_min, projected, delta=1e-9)
            self.assertAlmostEqual(stats.ratio, np.sqrt(2.0), delta=1e-9)


class TestCentroidDecision(unittest.TestCase):
    """Tests for project_test and the decision rule."""

    def test_project_test(self):
        w, z = project_test([5.0], [0.0], [1.0])
        np.testing.assert_array_equal(w, [5.0, 0.0])
        np.testing.assert_array_equal(z, [5.0, 1.0])

    def test_project_test_degenerate(self):
        w, z = project_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        self.assertEqual(w.shape, (6,))
        np.testing.assert_array_equal(w, z)

    def test_project_test_mismatch(self):
        with self.assertRaises(ValidationError):
            project_test([1.0, 2.0], [0.0], [1.0])

    def test_decide(self):
        self.assertEqual(decide(0.7, 0.4), 0)
        self.assertEqual(decide(0.4, 0.4), 1)
        self.assertEqual(decide(0.2, 0.9), 1)

    def test_swapping_flips_label(self):
        rng = np.random.default_rng(4)
        for p_w, p_z in rng.random((50, 2)):
            if p_w != p_z:
                self.assertNotEqual(decide(p_w, p_z), decide(p_z, p_w))


class TestCCModel(unittest.TestCase):
    """Tests for cc_fit and cc_predict."""

    def setUp(self):
        """Set up test fixtures."""
        self.spec = ClassifierSpec(kind="logistic", learning_rate=0.5, epochs=300, batch_size=8, seed=1)
        self.minority = np.array([[0.0], [0.1]])
        self.majority = np.array([[0.9], [1.0]])

    def test_fit_trains_on_both_projections(self):
        with patch("vbd_workbench.crossconcat.models.fit", wraps=models.fit) as mock_fit:
            model = cc_fit(self.spec, self.minority, self.majority)

        training = mock_fit.call_args[0][1]
        self.assertEqual(training.instance_count, 8)
        self.assertEqual(training.class_counts(), (4, 4))
        self.assertEqual(model.base.input_dim, 2)
        np.testing.assert_allclose(model.minority_centroid, [0.05])
        np.testing.assert_allclose(model.majority_centroid, [0.95])

    def test_toy_prediction(self):
        model = cc_fit(self.spec, self.minority, self.majority)
        prediction = cc_predict(model, [0.05])
        self.assertEqual(prediction.label, 1)
        self.assertTrue(0.0 <= prediction.p_w <= 1.0)
        self.assertEqual(cc_predict(model, [0.95]).label, 0)

    def test_deterministic(self):
        first = cc_fit(self.spec, self.minority, self.majority)
        second = cc_fit(self.spec, self.minority, self.majority)
        for name, value in first.base.params.items():
            np.testing.assert_array_equal(value, second.base.params[name])
        t = np.linspace(0, 1, 11)[:, None]
        np.testing.assert_array_equal(cc_predict_batch(first, t)[3], cc_predict_batch(second, t)[3])

    def test_centroid_pair_probabilities(self):
        # Base with zero weights except a positive weight on the second half
        base = TrainedClassifier("logistic", 2, {"w": np.array([0.0, 4.0]), "b": np.array([-1.0])})
        model = CCModel(base, minority_centroid=np.array([0.0]), majority_centroid=np.array([1.0]))
        prediction = cc_predict(model, [0.3])
        self.assertAlmostEqual(prediction.p_w, 1.0 - models.predict_proba(base, [0.3, 0.0]))
        self.assertAlmostEqual(prediction.p_z, models.predict_proba(base, [0.3, 1.0]))
        self.assertEqual(prediction.label, 1)

    def test_normalization_applies_to_raw_points(self):
        stats = NormalizationStats.fit(np.array([[10.0], [20.0]]))
        model = cc_fit(self.spec, self.minority, self.majority, normalization=stats)
        plain = cc_fit(self.spec, self.minority, self.majority)
        raw = np.array([[10.5], [19.0], [12.0]])

        labels, p_w, p_z, _ = cc_predict_batch(model, raw)
        expected = cc_predict_batch(plain, stats.apply(raw))
        np.testing.assert_array_equal(labels, expected[0])
        np.testing.assert_allclose(p_w, expected[1])
        np.testing.assert_allclose(p_z, expected[2])
        self.assertEqual(cc_predict(model, [10.5]).label, 1)
        self.assertEqual(cc_predict(model, [19.0]).label, 0)

    def test_batch_matches_single(self):
        model = cc_fit(self.spec, self.minority, self.majority)
        points = np.array([[0.0], [0.4], [0.6], [1.2]])
        labels, p_w, p_z, scores = cc_predict_batch(model, points)
        for i, point in enumerate(points):
            single = cc_predict(model, point)
            self.assertEqual(labels[i], single.label)
            self.assertAlmostEqual(p_w[i], single.p_w)
            self.assertAlmostEqual(p_z[i], single.p_z)
        np.testing.assert_array_equal(scores >= 0.5, labels == 1)

    def test_empty_minority(self):
        with self.assertRaises(ValidationError):
            cc_fit(self.spec, np.empty((0, 1)), self.majority)

    def test_dimension_mismatch(self):
        model = cc_fit(self.spec, self.minority, self.majority)
        with self.assertRaises(ValidationError):
            cc_predict(model, [0.1, 0.2])


if __name__ == "__main__":
    unittest.main()
