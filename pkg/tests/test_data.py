import struct

import numpy as np
import pytest

from elmerge.data import (
    DataFormatError,
    Dataset,
    load_csv,
    load_idx,
    idx_dimensions,
    normalize_minmax,
    one_hot,
    save_csv,
    synthetic_blobs,
)
from elmerge.model import Activation, compute_hidden_matrix, generate_feature_map
from elmerge.solvers import solve_primal


def write_idx_pair(tmp_path, pixels, labels, rows, cols):
    """Build a minimal IDX image/label file pair by hand."""
    count = len(labels)
    img = tmp_path / "images-idx3-ubyte"
    lab = tmp_path / "labels-idx1-ubyte"
    img.write_bytes(struct.pack(">IIII", 0x803, count, rows, cols) + bytes(pixels))
    lab.write_bytes(struct.pack(">II", 0x801, count) + bytes(labels))
    return img, lab


class TestLoadIdx:
    def test_single_image_scaling(self, tmp_path):
        img, lab = write_idx_pair(tmp_path, [0, 255, 128, 0], [7], rows=2, cols=2)
        ds = load_idx(img, lab)
        expected = np.array([0.0, 1.0, 128 / 255, 0.0])
        assert np.array_equal(ds.features[:, 0], expected)
        assert ds.features[2, 0] == 0.5019607843137255
        assert ds.labels.tolist() == [7]
        assert ds.input_dim == 4 and ds.sample_count == 1

    def test_row_major_flattening(self, tmp_path):
        # 2x3 image: pixel (row, col) lands at feature index row*3 + col
        img, lab = write_idx_pair(tmp_path, [10, 20, 30, 40, 50, 60], [1], rows=2, cols=3)
        ds = load_idx(img, lab)
        assert np.array_equal(ds.features[:, 0] * 255, [10, 20, 30, 40, 50, 60])

    def test_bad_image_magic(self, tmp_path):
        img, lab = write_idx_pair(tmp_path, [0], [0], rows=1, cols=1)
        img.write_bytes(b"\x00\x00\x08\x99" + img.read_bytes()[4:])
        with pytest.raises(DataFormatError, match="byte offset 0"):
            load_idx(img, lab)

    def test_truncated_payload(self, tmp_path):
        img, lab = write_idx_pair(tmp_path, [0, 1, 2, 3], [5], rows=2, cols=2)
        img.write_bytes(img.read_bytes()[:-2])
        with pytest.raises(DataFormatError, match="expected 20"):
            load_idx(img, lab)

    def test_count_mismatch(self, tmp_path):
        img, _ = write_idx_pair(tmp_path, [0, 1, 2, 3], [5], rows=2, cols=2)
        lab = tmp_path / "two-labels-idx1-ubyte"
        lab.write_bytes(struct.pack(">II", 0x801, 2) + bytes([1, 2]))
        with pytest.raises(DataFormatError, match="does not match"):
            load_idx(img, lab)

    def test_idx_dimensions(self, tmp_path):
        img, lab = write_idx_pair(tmp_path, [0, 0, 0, 0, 0, 0, 0, 0], [3, 9], rows=2, cols=2)
        assert idx_dimensions(img) == (2, 2, 2)
        assert idx_dimensions(lab) == (2,)


class TestLoadCsv:
    def test_label_remap(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("1.0,2.0,5\n3.0,4.0,9\n5.0,6.0,5\n")
        ds = load_csv(p)
        assert ds.labels.tolist() == [0, 1, 0]
        assert ds.class_count == 2
        assert np.array_equal(ds.features, [[1.0, 3.0, 5.0], [2.0, 4.0, 6.0]])

    def test_header_skipped(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("a,b,label\n1.0,2.0,0\n3.0,4.0,1\n")
        ds = load_csv(p, has_header=True)
        assert ds.sample_count == 2

    def test_label_column_index(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("3,1.5,2.5\n4,0.5,1.5\n")
        ds = load_csv(p, label_column=0)
        assert ds.labels.tolist() == [0, 1]
        assert np.array_equal(ds.features, [[1.5, 0.5], [2.5, 1.5]])

    def test_ragged_row_rejected(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("1,2,0\n1,2,3,0\n")
        with pytest.raises(DataFormatError, match="row 1"):
            load_csv(p)

    def test_non_numeric_cell_rejected(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("1,2,0\n1,x,1\n")
        with pytest.raises(DataFormatError, match="row 1, column 1"):
            load_csv(p)

    def test_non_integer_label_rejected(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("1,2,0.5\n")
        with pytest.raises(DataFormatError, match="not an integer"):
            load_csv(p)

    def test_round_trip(self, tmp_path):
        ds = synthetic_blobs(seed=3, n=17, d=5, class_count=4, spread=0.3)
        p = tmp_path / "rt.csv"
        save_csv(ds, p)
        back = load_csv(p, name=ds.name)
        assert np.array_equal(back.features, ds.features)
        assert np.array_equal(back.labels, ds.labels)


class TestOneHot:
    def test_basic_row(self):
        assert one_hot(np.array([0]), 3).tolist() == [[1.0, 0.0, 0.0]]

    def test_identity_case(self):
        assert np.array_equal(one_hot(np.array([0, 1, 2]), 3), np.eye(3))

    def test_rows_sum_to_one(self):
        labels = np.random.default_rng(0).integers(0, 10, 200)
        Y = one_hot(labels, 10)
        assert np.array_equal(Y.sum(axis=1), np.ones(200))

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            one_hot(np.array([3]), 3)


class TestNormalize:
    def make(self, cols, split="train"):
        arr = np.array(cols, dtype=float)
        return Dataset(arr, np.zeros(arr.shape[1], dtype=np.int64), 1, "t", split)

    def test_affine_map(self):
        ds = self.make([[0.0, 50.0, 100.0]])
        out = normalize_minmax(ds)
        assert out.features.tolist() == [[0.0, 0.5, 1.0]]

    def test_constant_dimension_maps_to_zero(self):
        ds = self.make([[7.0, 7.0]])
        out = normalize_minmax(ds)
        assert out.features.tolist() == [[0.0, 0.0]]

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        ds = self.make(rng.uniform(0, 1, (3, 40)))
        once = normalize_minmax(ds)
        twice = normalize_minmax(once)
        assert np.max(np.abs(twice.features - once.features)) <= 1e-15

    def test_test_split_uses_train_stats_and_clamps(self):
        train = self.make([[0.0, 10.0]])
        test = self.make([[-5.0, 5.0, 15.0]], split="test")
        out = normalize_minmax(test, reference=train)
        assert out.features.tolist() == [[0.0, 0.5, 1.0]]

    def test_labels_preserved(self):
        ds = synthetic_blobs(seed=1, n=12, d=3, class_count=3, spread=0.1)
        out = normalize_minmax(ds)
        assert np.array_equal(out.labels, ds.labels)


class TestSyntheticBlobs:
    def test_deterministic(self):
        a = synthetic_blobs(seed=1, n=30, d=2, class_count=3, spread=0.05)
        b = synthetic_blobs(seed=1, n=30, d=2, class_count=3, spread=0.05)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)

    def test_zero_spread_sits_on_corners(self):
        ds = synthetic_blobs(seed=2, n=8, d=3, class_count=4, spread=0.0)
        corners = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype=float)
        for i in range(8):
            assert np.array_equal(ds.features[:, i], corners[ds.labels[i]])

    def test_separated_clusters_are_learnable(self):
        ds = synthetic_blobs(seed=1, n=30, d=2, class_count=3, spread=0.05)
        fmap = generate_feature_map(2, 50, Activation.SIGMOID, seed=0)
        H = compute_hidden_matrix(fmap, ds.features)
        W = solve_primal(H, one_hot(ds.labels, 3))
        predicted = np.argmax(H @ W, axis=1)
        assert np.array_equal(predicted, ds.labels)

    def test_invalid_counts_rejected(self):
        with pytest.raises(ValueError):
            synthetic_blobs(seed=0, n=2, d=2, class_count=3, spread=0.1)
        with pytest.raises(ValueError):
            synthetic_blobs(seed=0, n=5, d=0, class_count=2, spread=0.1)


class TestDatasetValidation:
    def test_label_range_checked(self):
        with pytest.raises(ValueError, match="labels"):
            Dataset(np.ones((2, 3)), np.array([0, 1, 5]), 3, "t", "train")

    def test_non_finite_rejected(self):
        feats = np.ones((2, 2))
        feats[0, 0] = np.inf
        with pytest.raises(ValueError, match="finite"):
            Dataset(feats, np.zeros(2, dtype=np.int64), 1, "t", "train")


@pytest.mark.usefixtures("pendigits_paths")
class TestPendigitsFiles:
    def test_shapes_and_normalization(self, pendigits_paths):
        test = load_csv(pendigits_paths["test"], split="test")
        assert test.input_dim == 16
        assert test.class_count == 10
        assert test.sample_count in (3497, 3498)  # distribution copies differ by one row
        train = load_csv(pendigits_paths["train"], split="train")
        assert train.sample_count == 7494
        norm = normalize_minmax(train)
        assert norm.features.min() >= 0.0 and norm.features.max() <= 1.0
