"""
Tests for dataset loading, normalization, splitting and folding.
"""

import gzip
import os
import shutil
import struct
import tempfile
import unittest
import sys
from unittest.mock import patch

import numpy as np
import pandas as pd

# Add parent directory to path to import module under test
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from vbd_workbench.dataset import (IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC, LabeledDataset, NormalizationStats,
                                   centroid, fit_apply_minmax, load_csv, load_idx, split_binary,
                                   stratified_kfold, write_csv)
from vbd_workbench.exceptions import DataFormatError, ValidationError


def write_idx(images_path, labels_path, images, labels, compress=False):
    opener = gzip.open if compress else open
    n, rows, cols = images.shape
    with opener(images_path, "wb") as f:
        f.write(struct.pack(">4I", IDX_IMAGES_MAGIC, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())
    with opener(labels_path, "wb") as f:
        f.write(struct.pack(">2I", IDX_LABELS_MAGIC, n))
        f.write(np.asarray(labels, dtype=np.uint8).tobytes())


class TestLoadCsv(unittest.TestCase):
    """Tests for load_csv and write_csv."""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def write(self, name, text):
        path = os.path.join(self.tmp, name)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        return path

    def test_two_row_file(self):
        path = self.write("tiny.csv", "1,2,A\n3,4,B\n")
        data = load_csv(path, 2, "A")
        self.assertEqual(data.instance_count, 2)
        self.assertEqual(data.feature_count, 2)
        np.testing.assert_array_equal(data.labels, [1, 0])
        np.testing.assert_array_equal(data.features, [[1, 2], [3, 4]])

    def test_label_column_by_name_with_header(self):
        path = self.write("named.csv", "a,class,b\n1,yes,2\n3,no,4\n5,no,6\n")
        data = load_csv(path, "class", "yes", header=True)
        np.testing.assert_array_equal(data.labels, [1, 0, 0])
        np.testing.assert_array_equal(data.features, [[1, 2], [3, 4], [5, 6]])

    def test_numeric_positive_label_and_negative_index(self):
        path = self.write("numeric.csv", "30,64,1,1\n30,62,3,2\n31,65,4,1\n")
        data = load_csv(path, -1, 2)
        np.testing.assert_array_equal(data.labels, [0, 1, 0])

    def test_bad_cell_is_located(self):
        path = self.write("bad.csv", "1,2,A\n3,x,B\n")
        with self.assertRaises(DataFormatError) as ctx:
            load_csv(path, 2, "A")
        self.assertIn("'x'", str(ctx.exception))
        self.assertIn("line 2", str(ctx.exception))
        self.assertIn("column 1", str(ctx.exception))

    def test_bad_cell_after_comment_lines(self):
        path = self.write("commented.csv", "# tool: \"vbd-workbench\"\n\n1,2,A\n3,x,B\n")
        with self.assertRaises(DataFormatError) as ctx:
            load_csv(path, 2, "A")
        self.assertIn("line 4", str(ctx.exception))

    def test_hash_inside_cell_is_data(self):
        path = self.write("hash.csv", "1,2,A\n3,4,B#x\n5,6,B#x\n")
        data = load_csv(path, -1, "A")
        np.testing.assert_array_equal(data.labels, [1, 0, 0])
        np.testing.assert_array_equal(data.features[1], [3, 4])

    def test_invalid_utf8(self):
        path = os.path.join(self.tmp, "latin.csv")
        with open(path, "wb") as f:
            f.write(b"1,2,A\n3,\xff\xfe,B\n")
        with self.assertRaises(DataFormatError) as ctx:
            load_csv(path, -1, "A")
        self.assertIn("line 2", str(ctx.exception))

    def test_unlocated_parse_failure(self):
        path = self.write("odd.csv", "1,2,A\n3,x,B\n")
        with patch("vbd_workbench.dataset.pd.to_numeric",
                   side_effect=lambda column, errors: pd.Series(0.0, index=column.index)):
            with self.assertRaises(DataFormatError) as ctx:
                load_csv(path, 2, "A")
        self.assertIn("not all numeric", str(ctx.exception))

    def test_more_than_two_classes(self):
        path = self.write("three.csv", "1,A\n2,B\n3,C\n")
        with self.assertRaises(DataFormatError):
            load_csv(path, 1, "A")

    def test_missing_label_column(self):
        path = self.write("short.csv", "1,A\n2,B\n")
        with self.assertRaises(DataFormatError):
            load_csv(path, 5, "A")

    def test_empty_file(self):
        path = self.write("empty.csv", "")
        with self.assertRaises(DataFormatError):
            load_csv(path, 0, "A")

    def test_round_trip_full_precision(self):
        rng = np.random.default_rng(3)
        original = LabeledDataset(rng.normal(size=(15, 4)) * 1e3, rng.integers(0, 2, size=15))
        original = LabeledDataset(original.features, np.r_[[0, 1], original.labels[2:]])
        path = os.path.join(self.tmp, "round.csv")
        write_csv(original, path, metadata={"tool": "vbd-workbench"})

        loaded = load_csv(path, -1, 1)
        np.testing.assert_array_equal(loaded.features, original.features)
        np.testing.assert_array_equal(loaded.labels, original.labels)


class TestLoadIdx(unittest.TestCase):
    """Tests for the IDX reader."""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        rng = np.random.default_rng(0)
        self.images = rng.integers(0, 256, size=(6, 4, 4))
        self.labels = [0, 1, 2, 0, 7, 0]

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def paths(self, suffix=""):
        return os.path.join(self.tmp, f"images{suffix}"), os.path.join(self.tmp, f"labels{suffix}")

    def test_limit_and_scaling(self):
        images_path, labels_path = self.paths()
        write_idx(images_path, labels_path, self.images, self.labels)
        data = load_idx(images_path, labels_path, limit=4)
        self.assertEqual(data.instance_count, 4)
        self.assertEqual(data.feature_count, 16)
        self.assertTrue(np.all((data.features >= 0) & (data.features <= 1)))
        np.testing.assert_allclose(data.features[1], self.images[1].ravel() / 255.0)
        np.testing.assert_array_equal(data.labels, [1, 0, 0, 1])

    def test_limit_larger_than_file(self):
        images_path, labels_path = self.paths(".gz")
        write_idx(images_path, labels_path, self.images, self.labels, compress=True)
        data = load_idx(images_path, labels_path, limit=100, positive_class=7)
        self.assertEqual(data.instance_count, 6)
        np.testing.assert_array_equal(data.labels, [0, 0, 0, 0, 1, 0])

    def test_corrupted_header(self):
        images_path, labels_path = self.paths()
        write_idx(images_path, labels_path, self.images, self.labels)
        with open(images_path, "r+b") as f:
            f.write(struct.pack(">I", 0x1234))
        with self.assertRaises(DataFormatError):
            load_idx(images_path, labels_path, limit=2)

    def test_truncated_payload(self):
        images_path, labels_path = self.paths()
        write_idx(images_path, labels_path, self.images, self.labels)
        with open(images_path, "r+b") as f:
            f.truncate(16 + 20)
        with self.assertRaises(DataFormatError):
            load_idx(images_path, labels_path, limit=6)


class TestNormalization(unittest.TestCase):
    """Tests for min-max normalization."""

    def test_fit_apply_on_itself(self):
        data = LabeledDataset([[2.0], [4.0], [6.0]], [1, 0, 0])
        stats, normalized = fit_apply_minmax(data, data)
        np.testing.assert_array_equal(normalized.features[:, 0], [0.0, 0.5, 1.0])
        np.testing.assert_array_equal(stats.minimum, [2.0])

    def test_constant_feature(self):
        data = LabeledDataset([[5.0, 1.0], [5.0, 3.0]], [1, 0])
        stats, normalized = fit_apply_minmax(data, data)
        np.testing.assert_array_equal(normalized.features[:, 0], [0.0, 0.0])
        np.testing.assert_array_equal(stats.constant, [True, False])

    def test_clamp(self):
        stats = NormalizationStats.fit(np.array([[2.0], [6.0]]))
        np.testing.assert_array_equal(stats.apply(np.array([[8.0], [0.0]])), [[1.0], [0.0]])

    def test_fitting_set_lands_in_unit_interval(self):
        rng = np.random.default_rng(11)
        features = rng.normal(size=(40, 5)) * 100
        scaled = NormalizationStats.fit(features).apply(features)
        self.assertEqual(scaled.min(), 0.0)
        self.assertEqual(scaled.max(), 1.0)

    def test_dimension_mismatch(self):
        with self.assertRaises(ValidationError):
            fit_apply_minmax(LabeledDataset([[1.0]], [1]), LabeledDataset([[1.0, 2.0]], [1]))


class TestSplitAndCentroid(unittest.TestCase):
    """Tests for split_binary and centroid."""

    def test_minority_is_smaller_class(self):
        data = LabeledDataset(np.arange(7.0)[:, None], [1, 1, 1, 0, 0, 0, 0])
        split = split_binary(data)
        self.assertEqual(split.minority.shape[0], 3)
        self.assertEqual(split.majority.shape[0], 4)
        self.assertEqual(split.minority_label, 1)

    def test_label_zero_minority(self):
        data = LabeledDataset(np.arange(5.0)[:, None], [1, 1, 1, 0, 0])
        split = split_binary(data)
        self.assertEqual(split.minority_label, 0)
        self.assertEqual(split.majority_label, 1)
        np.testing.assert_array_equal(split.minority[:, 0], [3.0, 4.0])

    def test_tie_goes_to_label_one(self):
        data = LabeledDataset(np.arange(4.0)[:, None], [0, 1, 0, 1])
        split = split_binary(data)
        self.assertEqual(split.minority_label, 1)
        np.testing.assert_array_equal(split.minority[:, 0], [1.0, 3.0])

    def test_single_class(self):
        with self.assertRaises(ValidationError):
            split_binary(LabeledDataset([[1.0], [2.0]], [0, 0]))

    def test_centroid(self):
        np.testing.assert_array_equal(centroid([[0, 0], [2, 2]]), [1, 1])
        np.testing.assert_array_equal(centroid([[3, -1]]), [3, -1])
        np.testing.assert_array_equal(centroid([[1, 0], [0, 1], [-1, 0], [0, -1]]), [0, 0])

    def test_centroid_of_duplicated_set(self):
        points = np.random.default_rng(1).normal(size=(9, 3))
        np.testing.assert_allclose(centroid(np.vstack([points, points])), centroid(points), rtol=1e-12)

    def test_centroid_empty(self):
        with self.assertRaises(ValidationError):
            centroid([])


class TestStratifiedKFold(unittest.TestCase):
    """Tests for stratified fold plans."""

    def test_one_of_each_class_per_fold(self):
        data = LabeledDataset(np.zeros((10, 1)), [1] * 5 + [0] * 5)
        plan = stratified_kfold(data, 5, seed=0)
        for _, _, test_index in plan.folds():
            self.assertEqual(sorted(data.labels[test_index].tolist()), [0, 1])

    def test_deterministic(self):
        data = LabeledDataset(np.zeros((30, 1)), [1] * 10 + [0] * 20)
        first = stratified_kfold(data, 5, seed=4)
        second = stratified_kfold(data, 5, seed=4)
        np.testing.assert_array_equal(first.assignments, second.assignments)

    def test_too_many_folds(self):
        data = LabeledDataset(np.zeros((10, 1)), [1] * 5 + [0] * 5)
        with self.assertRaises(ValidationError):
            stratified_kfold(data, 11, seed=0)

    def test_random_plans_are_balanced(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            positives = int(rng.integers(3, 20))
            negatives = int(rng.integers(3, 40))
            k = int(rng.integers(2, min(positives, negatives) + 1))
            data = LabeledDataset(np.zeros((positives + negatives, 1)), [1] * positives + [0] * negatives)
            plan = stratified_kfold(data, k, seed=int(rng.integers(1000)))

            sizes = np.bincount(plan.assignments, minlength=k)
            self.assertLessEqual(sizes.max() - sizes.min(), 1)
            fold_positives = np.bincount(plan.assignments[data.labels == 1], minlength=k)
            self.assertTrue(np.all(np.abs(fold_positives - np.ceil(positives / k)) <= 1))
            for fold, train_index, test_index in plan.folds():
                self.assertEqual(len(np.intersect1d(train_index, test_index)), 0)
                self.assertEqual(len(train_index) + len(test_index), positives + negatives)


if __name__ == "__main__":
    unittest.main()
