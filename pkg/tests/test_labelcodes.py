"""Label-set target codes from random hyperplanes."""

import numpy as np
import pytest

from streamhash import EmptyLabelError, ideal_code, sample_label_matrix, sign


class TestSampleLabelMatrix:
    def test_shape_and_seed_determinism(self):
        a = sample_label_matrix(6, 16, seed=3)
        b = sample_label_matrix(6, 16, seed=3)
        assert a.L.shape == (6, 16)
        np.testing.assert_array_equal(a.L, b.L)

    def test_different_seeds_differ(self):
        a = sample_label_matrix(6, 16, seed=3)
        b = sample_label_matrix(6, 16, seed=4)
        assert not np.array_equal(a.L, b.L)

    def test_rows_look_standard_normal(self):
        lm = sample_label_matrix(4, 10000, seed=5)
        row_means = lm.L.mean(axis=1)
        assert np.all(np.abs(row_means) < 5.0 / np.sqrt(10000))
        assert np.all(np.abs(lm.L.std(axis=1) - 1.0) < 0.1)

    def test_invalid_sizes_rejected(self):
        with pytest.raises(ValueError):
            sample_label_matrix(0, 8, seed=0)
        with pytest.raises(ValueError):
            sample_label_matrix(4, 0, seed=0)

    def test_matrix_is_read_only(self):
        lm = sample_label_matrix(3, 4, seed=0)
        with pytest.raises(ValueError):
            lm.L[0, 0] = 0.0


class TestIdealCode:
    def test_singleton_is_row_sign(self):
        lm = sample_label_matrix(5, 12, seed=6)
        np.testing.assert_array_equal(ideal_code(lm, {2}), sign(lm.L[2]))

    def test_pair_is_sign_of_summed_rows(self):
        lm = sample_label_matrix(5, 12, seed=7)
        np.testing.assert_array_equal(
            ideal_code(lm, {1, 3}), sign(lm.L[1] + lm.L[3])
        )

    def test_order_and_container_invariance(self):
        lm = sample_label_matrix(8, 20, seed=8)
        base = ideal_code(lm, [4, 1, 6])
        np.testing.assert_array_equal(ideal_code(lm, [6, 4, 1]), base)
        np.testing.assert_array_equal(ideal_code(lm, {1, 4, 6}), base)
        np.testing.assert_array_equal(ideal_code(lm, (1, 6, 4)), base)

    def test_duplicates_collapse(self):
        lm = sample_label_matrix(5, 12, seed=9)
        np.testing.assert_array_equal(ideal_code(lm, [2, 2, 2]), ideal_code(lm, {2}))

    def test_empty_set_rejected(self):
        lm = sample_label_matrix(5, 12, seed=10)
        with pytest.raises(EmptyLabelError):
            ideal_code(lm, set())

    def test_out_of_range_rejected(self):
        lm = sample_label_matrix(5, 12, seed=11)
        with pytest.raises(ValueError):
            ideal_code(lm, {5})
        with pytest.raises(ValueError):
            ideal_code(lm, {-1})


class TestCollisionTrend:
    def test_shared_classes_agree_more_than_disjoint(self):
        nbits = 32
        lm = sample_label_matrix(24, nbits, seed=12)
        rng = np.random.default_rng(13)
        shared_agree, disjoint_agree = [], []
        for _ in range(1000):
            classes = rng.choice(24, size=4, replace=False)
            common = {int(classes[0])}
            a = common | {int(classes[1])}
            b = common | {int(classes[2])}
            ga, gb = ideal_code(lm, a), ideal_code(lm, b)
            shared_agree.append(float(np.mean(ga == gb)))
            ga = ideal_code(lm, {int(classes[0]), int(classes[1])})
            gb = ideal_code(lm, {int(classes[2]), int(classes[3])})
            disjoint_agree.append(float(np.mean(ga == gb)))
        assert np.mean(shared_agree) > np.mean(disjoint_agree)

    def test_disjoint_one_hot_distance_near_half(self):
        nbits = 32
        lm = sample_label_matrix(40, nbits, seed=14)
        rng = np.random.default_rng(15)
        dists = []
        for _ in range(1000):
            a, b = rng.choice(40, size=2, replace=False)
            ga, gb = ideal_code(lm, {int(a)}), ideal_code(lm, {int(b)})
            dists.append(int(np.sum(ga != gb)))
        mean = np.mean(dists)
        assert 0.4 * nbits <= mean <= 0.6 * nbits
