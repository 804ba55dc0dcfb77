import numpy as np
import pytest

from elmerge.model import (
    Activation,
    RandomFeatureMap,
    compute_hidden_matrix,
    concat_feature_maps,
    generate_feature_map,
    load_weights,
    save_weights,
    split_feature_map,
)

from oracles import naive_hidden_matrix


class TestGenerateFeatureMap:
    def test_weights_in_range_and_deterministic(self):
        fm = generate_feature_map(2, 3, Activation.SIGMOID, seed=7)
        assert fm.weights.shape == (3, 2)
        assert np.all(fm.weights >= -1.0) and np.all(fm.weights <= 1.0)
        assert np.all(fm.biases >= -1.0) and np.all(fm.biases <= 1.0)
        again = generate_feature_map(2, 3, Activation.SIGMOID, seed=7)
        assert np.array_equal(fm.weights, again.weights)
        assert np.array_equal(fm.biases, again.biases)

    def test_radbas_bias_positive(self):
        fm = generate_feature_map(1, 1, Activation.RADBAS, seed=0)
        assert 0.0 < fm.biases[0] <= 1.0

    def test_radbas_bias_range_many_seeds(self):
        for seed in range(50):
            fm = generate_feature_map(2, 20, Activation.RADBAS, seed=seed)
            assert np.all(fm.biases > 0.0) and np.all(fm.biases <= 1.0)

    def test_weight_mean_near_zero(self):
        # law of large numbers: 10,000 regenerated entries average to ~0
        entries = []
        seed = 0
        while len(entries) < 10_000:
            fm = generate_feature_map(5, 4, Activation.SIGMOID, seed=42 + seed)
            entries.extend(fm.weights.ravel().tolist())
            seed += 1
        assert abs(np.mean(entries[:10_000])) < 0.05

    def test_zero_dimensions_rejected(self):
        with pytest.raises(ValueError):
            generate_feature_map(0, 3, Activation.SIGMOID, seed=1)
        with pytest.raises(ValueError):
            generate_feature_map(3, 0, Activation.SIGMOID, seed=1)

    def test_different_seeds_differ(self):
        a = generate_feature_map(4, 5, Activation.SIGMOID, seed=1)
        b = generate_feature_map(4, 5, Activation.SIGMOID, seed=2)
        assert not np.array_equal(a.weights, b.weights)

    def test_maps_are_immutable(self):
        fm = generate_feature_map(2, 2, Activation.SIGMOID, seed=3)
        with pytest.raises(ValueError):
            fm.weights[0, 0] = 5.0


class TestComputeHiddenMatrix:
    def test_sigmoid_zero_argument_gives_half(self):
        fm = RandomFeatureMap(
            input_dim=3,
            hidden_count=2,
            weights=np.array([[0.4, -0.2, 0.9], [-0.5, 0.1, 0.3]]),
            biases=np.zeros(2),
            activation=Activation.SIGMOID,
            seed=0,
        )
        H = compute_hidden_matrix(fm, np.zeros((3, 1)))
        assert np.array_equal(H, np.full((1, 2), 0.5))

    def test_radbas_at_center_is_one(self):
        fm = generate_feature_map(3, 4, Activation.RADBAS, seed=5)
        X = fm.weights[2].reshape(3, 1)  # sample sits exactly on unit 2
        H = compute_hidden_matrix(fm, X)
        assert H[0, 2] == 1.0

    def test_matches_scalar_loop_sigmoid(self):
        rng = np.random.default_rng(1)
        fm = generate_feature_map(3, 4, Activation.SIGMOID, seed=1)
        X = rng.uniform(-1, 1, (3, 5))
        H = compute_hidden_matrix(fm, X)
        expected = naive_hidden_matrix(fm, X)
        assert np.max(np.abs(H - expected)) <= 1e-15

    def test_matches_scalar_loop_radbas(self):
        rng = np.random.default_rng(2)
        fm = generate_feature_map(4, 6, Activation.RADBAS, seed=9)
        X = rng.uniform(-1, 1, (4, 7))
        H = compute_hidden_matrix(fm, X)
        expected = naive_hidden_matrix(fm, X)
        assert np.max(np.abs(H - expected)) <= 1e-13

    def test_dimension_mismatch_rejected(self):
        fm = generate_feature_map(3, 4, Activation.SIGMOID, seed=1)
        with pytest.raises(ValueError, match="input_dim"):
            compute_hidden_matrix(fm, np.zeros((2, 5)))

    def test_non_finite_input_rejected(self):
        fm = generate_feature_map(2, 3, Activation.SIGMOID, seed=1)
        X = np.zeros((2, 4))
        X[1, 2] = np.nan
        with pytest.raises(ValueError, match="finite"):
            compute_hidden_matrix(fm, X)

    def test_sigmoid_entries_strictly_inside_unit_interval(self):
        rng = np.random.default_rng(3)
        for seed in range(20):
            fm = generate_feature_map(4, 8, Activation.SIGMOID, seed=seed)
            H = compute_hidden_matrix(fm, rng.uniform(0, 1, (4, 30)))
            assert np.all(H > 0.0) and np.all(H < 1.0)

    def test_radbas_entries_in_half_open_unit_interval(self):
        rng = np.random.default_rng(4)
        for seed in range(20):
            fm = generate_feature_map(4, 8, Activation.RADBAS, seed=seed)
            H = compute_hidden_matrix(fm, rng.uniform(0, 1, (4, 30)))
            assert np.all(H > 0.0) and np.all(H <= 1.0)


class TestSplitFeatureMap:
    def test_even_split_concat_is_bit_equal(self):
        rng = np.random.default_rng(0)
        fm = generate_feature_map(3, 4, Activation.SIGMOID, seed=11)
        X = rng.uniform(0, 1, (3, 9))
        parts = split_feature_map(fm, [2, 2])
        H_full = compute_hidden_matrix(fm, X)
        H_cat = np.hstack([compute_hidden_matrix(p, X) for p in parts])
        assert np.array_equal(H_full, H_cat)

    def test_uneven_split_is_legal(self):
        fm = generate_feature_map(2, 5, Activation.RADBAS, seed=3)
        parts = split_feature_map(fm, [3, 2])
        assert [p.hidden_count for p in parts] == [3, 2]
        X = np.random.default_rng(1).uniform(0, 1, (2, 6))
        H_cat = np.hstack([compute_hidden_matrix(p, X) for p in parts])
        assert np.array_equal(compute_hidden_matrix(fm, X), H_cat)

    def test_sum_mismatch_rejected(self):
        fm = generate_feature_map(2, 4, Activation.SIGMOID, seed=3)
        with pytest.raises(ValueError, match="sum"):
            split_feature_map(fm, [2, 3])

    def test_nonpositive_block_rejected(self):
        fm = generate_feature_map(2, 4, Activation.SIGMOID, seed=3)
        with pytest.raises(ValueError, match="positive"):
            split_feature_map(fm, [0, 4])

    @pytest.mark.parametrize("activation", list(Activation))
    @pytest.mark.parametrize("sizes", [[1, 7], [3, 5], [2, 2, 2, 2], [5, 1, 2]])
    def test_partition_identity_random(self, activation, sizes):
        rng = np.random.default_rng(sum(sizes))
        fm = generate_feature_map(5, 8, activation, seed=77)
        X = rng.uniform(-2, 2, (5, 25))
        H_full = compute_hidden_matrix(fm, X)
        H_cat = np.hstack([compute_hidden_matrix(p, X) for p in split_feature_map(fm, sizes)])
        assert np.array_equal(H_full, H_cat)

    @pytest.mark.parametrize("activation", list(Activation))
    def test_partition_identity_large_kernel_path(self, activation):
        # n*d above the dense-kernel threshold exercises the GEMM path
        rng = np.random.default_rng(8)
        fm = generate_feature_map(8, 8, activation, seed=123)
        X = rng.uniform(-2, 2, (8, 9000))
        H_full = compute_hidden_matrix(fm, X)
        H_cat = np.hstack([compute_hidden_matrix(p, X) for p in split_feature_map(fm, [3, 5])])
        assert np.array_equal(H_full, H_cat)

    def test_concat_round_trip(self):
        fm = generate_feature_map(3, 6, Activation.SIGMOID, seed=2)
        left, right = split_feature_map(fm, [4, 2])
        back = concat_feature_maps(left, right)
        assert np.array_equal(back.weights, fm.weights)
        assert np.array_equal(back.biases, fm.biases)

    def test_concat_rejects_mixed_activations(self):
        a = generate_feature_map(3, 2, Activation.SIGMOID, seed=1)
        b = generate_feature_map(3, 2, Activation.RADBAS, seed=1)
        with pytest.raises(ValueError, match="activation"):
            concat_feature_maps(a, b)


class TestWeightDump:
    def test_round_trip(self, tmp_path):
        W = np.random.default_rng(5).standard_normal((7, 3))
        path = tmp_path / "w.bin"
        save_weights(W, path)
        assert np.array_equal(load_weights(path), W)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "w.bin"
        path.write_bytes(b"NOTMAGIC" + b"\0" * 16)
        with pytest.raises(ValueError, match="magic"):
            load_weights(path)

    def test_truncated_rejected(self, tmp_path):
        W = np.ones((2, 2))
        path = tmp_path / "w.bin"
        save_weights(W, path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValueError, match="bytes"):
            load_weights(path)
