import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import brute_carve, brute_min_seam, loop_energy, path_total, vertical_paths
from seampool.errors import ConfigError, ShapeError
from seampool.seam import (
    HORIZONTAL,
    VERTICAL,
    IndexMap,
    Seam,
    carve,
    cumulative_energy,
    energy_map,
    extract_min_seam,
    remove_seam,
    retarget_image,
)

grids = st.tuples(st.integers(1, 6), st.integers(1, 7)).flatmap(
    lambda hw: arrays(np.float64, hw, elements=st.floats(0, 100, allow_nan=False))
)


class TestEnergy:
    def test_constant_is_zero(self):
        assert np.all(energy_map(np.full((3, 5, 4), 0.7)) == 0)

    def test_two_by_two(self):
        np.testing.assert_array_equal(energy_map(np.array([[[0, 1], [0, 1.0]]])), [[1, 0], [1, 0]])

    def test_channel_sum(self):
        x = np.array([[[0, 1], [0, 1.0]]] * 2)
        np.testing.assert_array_equal(energy_map(x), [[2, 0], [2, 0]])

    def test_matches_loop_oracle(self):
        x = np.random.default_rng(0).normal(size=(3, 6, 7))
        np.testing.assert_allclose(energy_map(x), loop_energy(x), rtol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (2, 4, 5), elements=st.floats(-1e3, 1e3)))
    def test_non_negative(self, x):
        assert np.all(energy_map(x) >= 0)


class TestCumulative:
    def test_single_row(self):
        e = np.array([[3.0, 1.0, 2.0]])
        np.testing.assert_array_equal(cumulative_energy(e), e)

    def test_hand_example(self):
        np.testing.assert_array_equal(cumulative_energy(np.array([[1, 2, 3], [4, 5, 6.0]])), [[1, 2, 3], [5, 6, 8]])

    def test_uniform(self):
        m = cumulative_energy(np.full((4, 5), 2.5))
        for i in range(4):
            assert np.all(m[i] == (i + 1) * 2.5)

    def test_horizontal_is_transpose(self):
        e = np.random.default_rng(1).random((4, 6))
        np.testing.assert_array_equal(cumulative_energy(e, HORIZONTAL), cumulative_energy(e.T).T)

    @settings(max_examples=50, deadline=None)
    @given(grids)
    def test_invariants(self, e):
        m = cumulative_energy(e)
        np.testing.assert_array_equal(m[0], e[0])
        assert np.all(m >= e)

    def test_bad_axis(self):
        with pytest.raises(ConfigError):
            cumulative_energy(np.zeros((2, 2)), "diagonal")


class TestExtractSeam:
    def test_hand_example(self):
        e = np.array([[1, 2, 3], [4, 5, 6.0]])
        seam = extract_min_seam(cumulative_energy(e))
        assert seam.indices.tolist() == [0, 0]
        assert seam.total(e) == 5
        assert len(vertical_paths(2, 3)) == 7  # connected 2-row paths on width 3
        assert brute_min_seam(e) == ([0, 0], 5)

    def test_uniform_takes_leftmost(self):
        seam = extract_min_seam(cumulative_energy(np.ones((5, 4))))
        assert seam.indices.tolist() == [0] * 5

    def test_zero_column(self):
        e = np.random.default_rng(2).uniform(1, 2, (6, 7))
        e[:, 4] = 0
        assert extract_min_seam(cumulative_energy(e)).indices.tolist() == [4] * 6

    @settings(max_examples=200, deadline=None)
    @given(grids)
    def test_dp_optimal(self, e):
        # paths may differ when two sums round to the same float; totals may not
        seam = extract_min_seam(cumulative_energy(e))
        assert seam.is_connected()
        assert seam.total(e) == brute_min_seam(e)[1]

    def test_integer_ties_match_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            e = rng.integers(0, 3, size=(rng.integers(1, 7), rng.integers(1, 8))).astype(float)
            assert extract_min_seam(cumulative_energy(e)).indices.tolist() == brute_min_seam(e)[0]

    def test_horizontal(self):
        e = np.random.default_rng(4).random((5, 6))
        seam = extract_min_seam(cumulative_energy(e, HORIZONTAL), HORIZONTAL)
        assert seam.axis == HORIZONTAL
        assert seam.indices.tolist() == brute_min_seam(e.T)[0]

    def test_batched_matches_single(self):
        e = np.random.default_rng(5).random((3, 5, 6))
        batch = extract_min_seam(cumulative_energy(e))
        for k in range(3):
            assert batch.indices[k].tolist() == extract_min_seam(cumulative_energy(e[k])).indices.tolist()


class TestRemoveSeam:
    def test_hand_example(self):
        out, imap = remove_seam(np.array([[[1, 2], [3, 4.0]]]), Seam(VERTICAL, np.array([0, 1])))
        np.testing.assert_array_equal(out, [[[2], [3]]])
        assert (imap.rows[0, 0], imap.cols[0, 0]) == (0, 1)
        assert (imap.rows[1, 0], imap.cols[1, 0]) == (1, 0)

    def test_leftmost_straight_seam(self):
        x = np.random.default_rng(6).random((2, 4, 5))
        out, _ = remove_seam(x, Seam(VERTICAL, np.zeros(4, dtype=int)))
        np.testing.assert_array_equal(out, x[:, :, 1:])

    def test_horizontal_seam(self):
        x = np.arange(12.0).reshape(1, 3, 4)
        out, imap = remove_seam(x, Seam(HORIZONTAL, np.array([2, 2, 1, 0])))
        np.testing.assert_array_equal(out, [[[0, 1, 2, 7], [4, 5, 10, 11]]])
        assert imap.is_injective()

    def test_shape_law(self):
        x = np.random.default_rng(7).random((3, 5, 6))
        seam = extract_min_seam(cumulative_energy(energy_map(x)))
        out, imap = remove_seam(x, seam)
        assert out.shape == (3, 5, 5)
        assert imap.shape == (5, 5)

    def test_width_one_rejected(self):
        with pytest.raises(ShapeError):
            remove_seam(np.zeros((1, 3, 1)), Seam(VERTICAL, np.zeros(3, dtype=int)))

    def test_disconnected_seam_rejected(self):
        with pytest.raises(ShapeError):
            remove_seam(np.zeros((1, 3, 4)), Seam(VERTICAL, np.array([0, 2, 2])))

    def test_composes_with_existing_map(self):
        x = np.random.default_rng(8).random((1, 4, 5))
        y, m1 = remove_seam(x, Seam(VERTICAL, np.array([1, 2, 2, 3])))
        z, m2 = remove_seam(y, Seam(VERTICAL, np.array([0, 0, 1, 1])), m1)
        assert m2.is_injective() and m2.in_bounds(4, 5)
        np.testing.assert_array_equal(m2.gather(x), z)


class TestCarve:
    def test_four_by_four_to_four_by_two(self):
        x = np.random.default_rng(9).random((1, 4, 4))
        out, imap = carve(x, 2, 0)
        assert out.shape == (1, 4, 2)

    def test_zero_seams_is_identity(self):
        x = np.random.default_rng(10).random((2, 4, 5))
        out, imap = carve(x, 0, 0)
        np.testing.assert_array_equal(out, x)
        np.testing.assert_array_equal(imap.rows, IndexMap.identity(4, 5).rows)
        np.testing.assert_array_equal(imap.cols, IndexMap.identity(4, 5).cols)

    def test_energy_removed_matches_sequential_brute_force(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            x = rng.random((1, 6, 6))
            _, _, seams = carve(x, 3, 0, return_seams=True)
            cur = x.copy()
            for seam in seams:
                e = loop_energy(cur)
                path, total = brute_min_seam(e)
                assert seam.indices.tolist() == path
                assert seam.total(e) == total
                cur = np.stack([np.array([np.delete(row, path[i]) for i, row in enumerate(cur[0])])])

    def test_matches_sequential_oracle_both_axes(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            x = rng.random((2, 5, 6))
            out, imap = carve(x, 2, 2)
            ref, src = brute_carve(x, 2, 2)
            np.testing.assert_array_equal(out, ref)
            assert [[(int(r), int(c)) for r, c in zip(rr, cc)] for rr, cc in zip(imap.rows, imap.cols)] == src

    def test_over_carving(self):
        with pytest.raises(ShapeError):
            carve(np.zeros((1, 4, 4)), 4, 0)
        with pytest.raises(ShapeError):
            carve(np.zeros((1, 4, 4)), 0, 4)

    @settings(max_examples=40, deadline=None)
    @given(
        arrays(np.float64, (2, 6, 7), elements=st.floats(-10, 10)),
        st.integers(0, 6),
        st.integers(0, 5),
    )
    def test_permutation_discipline(self, x, kv, kh):
        out, imap = carve(x, kv, kh)
        assert out.shape == (2, 6 - kh, 7 - kv)
        assert imap.is_injective() and imap.in_bounds(6, 7)
        # values are copied from their recorded source, never altered
        np.testing.assert_array_equal(out, imap.gather(x))

    def test_batched_equals_per_element(self):
        x = np.random.default_rng(13).random((4, 3, 8, 8))
        out, imap = carve(x, 4, 4)
        for k in range(4):
            o, m = carve(x[k], 4, 4)
            np.testing.assert_array_equal(out[k], o)
            np.testing.assert_array_equal(imap.rows[k], m.rows)
            np.testing.assert_array_equal(imap.cols[k], m.cols)


class TestRetarget:
    def test_same_size_is_identity(self):
        img = np.random.default_rng(14).integers(0, 256, (10, 12, 3), dtype=np.uint8)
        res = retarget_image(img, 12, 10)
        assert res.image.dtype == np.uint8
        assert res.image.tobytes() == img.tobytes()

    def test_solid_color_stays_solid(self):
        img = np.zeros((8, 8, 3), dtype=np.uint8)
        img[...] = (12, 200, 77)
        res = retarget_image(img, 3, 5)
        assert res.image.shape == (5, 3, 3)
        assert np.all(res.image == (12, 200, 77))
        assert np.all(res.energy == 0)

    def test_shape_contract(self):
        img = np.random.default_rng(15).integers(0, 256, (32, 32, 3), dtype=np.uint8)
        res = retarget_image(img, 16, 32)
        assert res.image.shape == (32, 16, 3)
        # 16 columns' worth of pixels painted in the overlay
        removed = np.all(res.overlay == (255, 0, 0), axis=-1) & ~np.all(img == (255, 0, 0), axis=-1)
        assert removed.sum() == 32 * 16

    @pytest.mark.parametrize("w,h", [(0, 5), (9, 5), (5, 9)])
    def test_bad_targets(self, w, h):
        with pytest.raises(ConfigError):
            retarget_image(np.zeros((8, 8, 3), dtype=np.uint8), w, h)


def test_path_total_is_top_down_fold():
    e = np.array([[0.1], [0.2], [0.3]])
    assert path_total(e, (0, 0, 0)) == (0.1 + 0.2) + 0.3
