"""
Tests for Virtual Big Data synthesis.
"""

import os
import shutil
import tempfile
import unittest
import sys

import numpy as np

# Add parent directory to path to import module under test
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from vbd_workbench.dataset import load_csv
from vbd_workbench.exceptions import ValidationError
from vbd_workbench.vbd import (ConcatConfig, concat, diversity_stats, split_halves, synth_large, synth_small,
                               write_virtual_csv)


class TestConcat(unittest.TestCase):
    """Tests for concat and split_halves."""

    def test_concat(self):
        np.testing.assert_array_equal(concat([[1, 2], [3, 4]]), [1, 2, 3, 4])
        np.testing.assert_array_equal(concat([[7, 8]]), [7, 8])
        self.assertEqual(concat([[1], [2], [3]]).shape, (3,))

    def test_concat_mismatch(self):
        with self.assertRaises(ValidationError):
            concat([[1, 2], [3]])
        with self.assertRaises(ValidationError):
            concat([])

    def test_split_halves(self):
        first, second = split_halves([1, 2, 3, 4])
        np.testing.assert_array_equal(first, [1, 2])
        np.testing.assert_array_equal(second, [3, 4])
        np.testing.assert_array_equal(concat([first, second]), [1, 2, 3, 4])

    def test_split_odd_dimension(self):
        with self.assertRaises(ValidationError):
            split_halves([1, 2, 3, 4, 5])


class TestSynthSmall(unittest.TestCase):
    """Tests for the full cross-product synthesis."""

    def test_two_points(self):
        a, b = [0.0, 0.0], [1.0, 0.0]
        virtual = synth_small([a, b])
        self.assertEqual(len(virtual), 4)
        np.testing.assert_array_equal(virtual.vectors, [a + a, a + b, b + a, b + b])
        self.assertEqual(virtual.dimension, 4)

    def test_single_point(self):
        virtual = synth_small([[3.0, 5.0]])
        np.testing.assert_array_equal(virtual.vectors, [[3.0, 5.0, 3.0, 5.0]])

    def test_empty(self):
        with self.assertRaises(ValidationError):
            synth_small(np.empty((0, 2)))

    def test_size_and_membership(self):
        rng = np.random.default_rng(5)
        data = rng.normal(size=(7, 3))
        virtual = synth_small(data)
        self.assertEqual(len(virtual), 49)
        for row in virtual.vectors:
            first, second = split_halves(row)
            self.assertTrue(np.any(np.all(data == first, axis=1)))
            self.assertTrue(np.any(np.all(data == second, axis=1)))

    def test_max_distance_grows_by_sqrt_two(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            n = int(rng.integers(2, 51))
            d = int(rng.integers(1, 6))
            data = rng.normal(size=(n, d))
            original = diversity_stats(data).max
            virtual = diversity_stats(synth_small(data).vectors).max
            self.assertAlmostEqual(virtual, np.sqrt(2.0) * original, delta=1e-9)

    def test_permutation_covariant(self):
        rng = np.random.default_rng(2)
        data = rng.normal(size=(5, 2))
        perm = rng.permutation(5)
        original = synth_small(data).vectors.reshape(5, 5, 4)
        permuted = synth_small(data[perm]).vectors.reshape(5, 5, 4)
        np.testing.assert_array_equal(permuted, original[perm][:, perm])


class TestSynthLarge(unittest.TestCase):
    """Tests for sampled synthesis."""

    def test_shape(self):
        data = np.random.default_rng(0).normal(size=(10, 4))
        virtual = synth_large(data, ConcatConfig(c=2, u=5, seed=1))
        self.assertEqual(virtual.vectors.shape, (5, 8))
        virtual = synth_large(data[:, :2], ConcatConfig(c=3, u=4, seed=1))
        self.assertEqual(virtual.dimension, 6)

    def test_deterministic(self):
        data = np.random.default_rng(0).normal(size=(12, 3))
        first = synth_large(data, ConcatConfig(c=2, u=30, seed=7))
        second = synth_large(data, ConcatConfig(c=2, u=30, seed=7))
        np.testing.assert_array_equal(first.vectors, second.vectors)

    def test_segments_are_distinct_instances(self):
        data = np.arange(8.0).reshape(8, 1)
        virtual = synth_large(data, ConcatConfig(c=4, u=200, seed=3))
        for row in virtual.vectors:
            self.assertEqual(len(set(row.tolist())), 4)
            self.assertTrue(set(row.tolist()) <= set(range(8)))

    def test_too_few_instances(self):
        with self.assertRaises(ValidationError):
            synth_large([[1.0], [2.0]], ConcatConfig(c=3, u=1))

    def test_invalid_config(self):
        with self.assertRaises(ValidationError):
            ConcatConfig(c=2, u=0)
        with self.assertRaises(ValidationError):
            ConcatConfig(c=1, u=3)


class TestDiversityStats(unittest.TestCase):
    """Tests for diversity_stats."""

    def test_two_points(self):
        stats = diversity_stats([[0, 0], [1, 0]])
        self.assertEqual((stats.min, stats.max, stats.mean), (1.0, 1.0, 1.0))

    def test_vbd_of_two_points(self):
        self.assertAlmostEqual(diversity_stats(synth_small([[0, 0], [1, 0]]).vectors).max, np.sqrt(2.0))

    def test_brute_force_agreement(self):
        points = np.random.default_rng(4).normal(size=(5, 3))
        distances = [np.sqrt(np.sum((points[i] - points[j]) ** 2)) for i in range(5) for j in range(i + 1, 5)]
        stats = diversity_stats(points)
        self.assertAlmostEqual(stats.min, min(distances), delta=1e-12)
        self.assertAlmostEqual(stats.max, max(distances), delta=1e-12)
        self.assertAlmostEqual(stats.mean, float(np.mean(distances)), delta=1e-12)
        self.assertTrue(0 <= stats.min <= stats.mean <= stats.max)

    def test_single_row(self):
        with self.assertRaises(ValidationError):
            diversity_stats([[1.0, 2.0]])


class TestWriteVirtualCsv(unittest.TestCase):
    """Tests for the virtual CSV export."""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def test_labeled_export_loads_back(self):
        virtual = synth_small([[0.25, 0.5], [1.0 / 3.0, 0.75]])
        path = os.path.join(self.tmp, "vbd.csv")
        write_virtual_csv(virtual, path, labels=[1, 0, 0, 1], metadata={"tool": "vbd-workbench"})

        loaded = load_csv(path, -1, 1)
        np.testing.assert_array_equal(loaded.features, virtual.vectors)
        np.testing.assert_array_equal(loaded.labels, [1, 0, 0, 1])


if __name__ == "__main__":
    unittest.main()
