import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import brute_carve, numeric_grad, rel_error, window_max
from seampool.errors import ConfigError, ShapeError, StateError
from seampool.pooling import (
    MaxPool2d,
    PoolSpec,
    SeamPool,
    make_pool,
    max_pool_backward,
    max_pool_forward,
    seam_pool_backward,
    seam_pool_forward,
)


def seam_grad_check(x, g):
    """Analytic vs finite-difference gradient of <seam_pool(x), g>; None if a seam flips."""
    out, cache = seam_pool_forward(x)
    analytic = seam_pool_backward(g, cache)
    state = {}

    def f(z):
        o, c = seam_pool_forward(z)
        state["sig"] = (c.index_map.rows.tobytes(), c.index_map.cols.tobytes())
        return float(np.sum(o * g))

    fd = numeric_grad(f, x, signature=lambda: state["sig"])
    return None if fd is None else rel_error(analytic, fd)


class TestSeamPool:
    def test_reference_shape(self):
        out, cache = seam_pool_forward(np.random.default_rng(0).random((16, 32, 32)))
        assert out.shape == (16, 16, 16)
        assert cache.index_map.shape[-2:] == (16, 16)

    def test_constant_input(self):
        out, _ = seam_pool_forward(np.full((3, 2, 2), 4.25))
        assert out.shape == (3, 1, 1)
        assert np.all(out == 4.25)

    def test_matches_brute_force_oracle_on_ramp(self):
        x = np.arange(1, 17, dtype=float).reshape(1, 4, 4)
        out, cache = seam_pool_forward(x)
        ref, src = brute_carve(x, 2, 2)
        np.testing.assert_array_equal(out, ref)
        np.testing.assert_array_equal(out[0], [[x[0, r, c] for r, c in row] for row in src])

    def test_odd_size_rejected(self):
        with pytest.raises(ShapeError, match="pad or crop"):
            seam_pool_forward(np.zeros((1, 5, 4)))

    def test_backward_counting_law(self):
        x = np.random.default_rng(1).random((3, 8, 8))
        out, cache = seam_pool_forward(x)
        g = seam_pool_backward(np.ones_like(out), cache)
        assert g.shape == x.shape
        for c in range(3):
            assert np.count_nonzero(g[c]) == 16
            assert set(np.unique(g[c])) == {0.0, 1.0}

    def test_backward_zero(self):
        out, cache = seam_pool_forward(np.random.default_rng(2).random((2, 4, 4)))
        assert np.all(seam_pool_backward(np.zeros_like(out), cache) == 0)

    def test_backward_shape_mismatch(self):
        _, cache = seam_pool_forward(np.random.default_rng(3).random((2, 4, 4)))
        with pytest.raises(StateError):
            seam_pool_backward(np.zeros((2, 3, 3)), cache)

    def test_finite_differences(self):
        rng = np.random.default_rng(4)
        checked = 0
        while checked < 3:
            err = seam_grad_check(rng.random((1, 6, 6)), rng.normal(size=(1, 3, 3)))
            if err is not None:
                assert err < 1e-4
                checked += 1

    def test_batch_elements_independent(self):
        x = np.random.default_rng(5).random((4, 2, 8, 8))
        out, _ = seam_pool_forward(x)
        for k in range(4):
            np.testing.assert_array_equal(out[k], seam_pool_forward(x[k])[0])


class TestMaxPool:
    def test_two_by_two(self):
        out, _ = max_pool_forward(np.array([[[1, 2], [3, 4.0]]]))
        np.testing.assert_array_equal(out, [[[4]]])

    def test_one_by_two_window(self):
        out, _ = max_pool_forward(np.random.default_rng(6).random((1, 4, 4)), PoolSpec("max", (1, 2), (1, 2)))
        assert out.shape == (1, 4, 2)

    def test_matches_window_scan_oracle(self):
        x = np.random.default_rng(7).random((1, 4, 4))
        out, cache = max_pool_forward(x)
        ref, arg = window_max(x, 2, 2, 2, 2)
        np.testing.assert_array_equal(out, ref)
        np.testing.assert_array_equal(cache.index_map.rows[0], arg[..., 0])
        np.testing.assert_array_equal(cache.index_map.cols[0], arg[..., 1])

    def test_ties_take_first_position(self):
        x = np.array([[[1.0, 5.0], [5.0, 5.0]]])
        _, cache = max_pool_forward(x)
        assert (cache.index_map.rows.item(), cache.index_map.cols.item()) == (0, 1)

    def test_overlapping_windows_match_oracle(self):
        x = np.random.default_rng(8).random((2, 5, 7))
        out, _ = max_pool_forward(x, PoolSpec("max", (3, 3), (2, 2)))
        np.testing.assert_array_equal(out, window_max(x, 3, 3, 2, 2)[0])

    def test_window_must_tile(self):
        with pytest.raises(ShapeError):
            max_pool_forward(np.zeros((1, 5, 4)))

    def test_backward_argmax_gate(self):
        _, cache = max_pool_forward(np.array([[[1, 2], [3, 4.0]]]))
        np.testing.assert_array_equal(max_pool_backward(np.array([[[7.0]]]), cache), [[[0, 0], [0, 7]]])

    def test_backward_zero(self):
        out, cache = max_pool_forward(np.random.default_rng(9).random((2, 4, 4)))
        assert np.all(max_pool_backward(np.zeros_like(out), cache) == 0)

    def test_backward_mismatch(self):
        _, cache = max_pool_forward(np.zeros((1, 4, 4)))
        with pytest.raises(StateError):
            max_pool_backward(np.zeros((1, 4, 4)), cache)

    def test_finite_differences(self):
        rng = np.random.default_rng(10)
        x = rng.permutation(64).reshape(1, 8, 8) / 8.0  # distinct values, gaps of 1/8
        g = rng.normal(size=(1, 4, 4))
        out, cache = max_pool_forward(x)
        fd = numeric_grad(lambda z: float(np.sum(max_pool_forward(z)[0] * g)), x)
        assert rel_error(max_pool_backward(g, cache), fd) < 1e-4

    def test_cache_kinds_not_interchangeable(self):
        _, mcache = max_pool_forward(np.zeros((1, 2, 2)))
        with pytest.raises(StateError):
            seam_pool_backward(np.zeros((1, 1, 1)), mcache)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (2, 3, 6, 8), elements=st.floats(-5, 5)), st.sampled_from(["seam", "max"]))
def test_selection_and_scatter_laws(x, kind):
    layer = make_pool(kind)
    out = layer.forward(x)
    assert out.shape == (2, 3, 3, 4)
    # every output value appears in the same channel of the input
    for n in range(2):
        for c in range(3):
            assert np.all(np.isin(out[n, c], x[n, c]))
    g = np.random.default_rng(0).normal(size=out.shape)
    gi = layer.backward(g)
    assert np.sum(np.abs(gi)) == pytest.approx(np.sum(np.abs(g)), rel=1e-12)


def test_layer_wrappers():
    assert isinstance(make_pool("seam"), SeamPool)
    assert isinstance(make_pool(PoolSpec("max")), MaxPool2d)
    assert MaxPool2d().output_shape(16, 32, 32) == (16, 16, 16)
    assert SeamPool().output_shape(16, 32, 32) == (16, 16, 16)
    with pytest.raises(StateError):
        SeamPool().backward(np.zeros((1, 1, 1)))
    with pytest.raises(ConfigError):
        PoolSpec("average")
