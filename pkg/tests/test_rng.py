"""Stream derivation, reproducibility, and batch/scalar consistency."""

import numpy as np
import pytest

from arrayneat import RngStream


def test_same_seed_and_path_reproduces():
    a = RngStream(42, (1, 2, 3)).uniforms(100)
    b = RngStream(42, (1, 2, 3)).uniforms(100)
    assert np.array_equal(a, b)


def test_different_paths_differ():
    a = RngStream(42).child(0).uniforms(50)
    b = RngStream(42).child(1).uniforms(50)
    c = RngStream(43).child(0).uniforms(50)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_child_order_matters():
    assert not np.array_equal(RngStream(7).child(1, 2).uniforms(10),
                              RngStream(7).child(2, 1).uniforms(10))


def test_split_matches_child():
    # vectorized children must reproduce scalar child streams exactly
    batch = RngStream(9).child(5).split(np.arange(8)).uniforms(16)
    for i in range(8):
        scalar = RngStream(9).child(5, i).uniforms(16)
        assert np.array_equal(batch[i], scalar)


def test_split_normals_match_child():
    batch = RngStream(9).child(2).split(np.arange(5)).normals(7)
    for i in range(5):
        assert np.array_equal(batch[i], RngStream(9).child(2, i).normals(7))


def test_sequential_draws_continue_the_stream():
    s = RngStream(3, (1,))
    first = s.uniforms(10)
    second = s.uniforms(10)
    both = RngStream(3, (1,)).uniforms(20)
    assert np.array_equal(np.concatenate([first, second]), both)


def test_uniforms_open_interval_and_roughly_uniform():
    u = RngStream(0).uniforms(200_000)
    assert np.all(u > 0.0) and np.all(u < 1.0)
    assert abs(u.mean() - 0.5) < 5e-3
    assert abs(u.var() - 1.0 / 12.0) < 5e-3


def test_normals_moments():
    z = RngStream(1).normals(200_000)
    assert abs(z.mean()) < 1e-2
    assert abs(z.std() - 1.0) < 1e-2


def test_no_short_cycles_or_duplicates():
    bits = RngStream(11, (4,)).uniforms(10_000)
    assert np.unique(bits).size == bits.size


def test_negative_tokens_allowed():
    a = RngStream(5).child(-1).uniforms(4)
    b = RngStream(5).child(1).uniforms(4)
    assert not np.array_equal(a, b)


def test_split_requires_1d():
    with pytest.raises(ValueError):
        RngStream(0).split(np.zeros((2, 2), dtype=np.int64))


def test_sparse_uniforms_match_dense_grid():
    dense_stream = RngStream(6).child(1).split(np.arange(5))
    dense = dense_stream.uniforms(9)
    sparse_stream = RngStream(6).child(1).split(np.arange(5))
    rows = np.array([0, 0, 2, 4, 4, 3])
    cols = np.array([0, 8, 3, 1, 7, 5])
    sparse = sparse_stream.uniforms_at(9, rows, cols)
    assert np.array_equal(sparse, dense[rows, cols])
    assert sparse_stream._counter == dense_stream._counter
    # subsequent draws stay aligned
    assert np.array_equal(sparse_stream.uniforms(4), dense_stream.uniforms(4))


def test_sparse_normals_match_dense_grid():
    dense = RngStream(8).child(2).split(np.arange(4)).normals(6)
    stream = RngStream(8).child(2).split(np.arange(4))
    rows = np.array([1, 3, 3])
    cols = np.array([5, 0, 2])
    assert np.array_equal(stream.uniforms_at(0, [], []), np.array([]))  # no-op block
    sparse = stream.normals_at(6, rows, cols)
    assert np.array_equal(sparse, dense[rows, cols])


def test_batch_shape_and_draw_shapes():
    s = RngStream(0).child(1).split(np.arange(6))
    assert s.batch_shape == (6,)
    assert s.uniforms(3, 2).shape == (6, 3, 2)
    assert s.normals(4).shape == (6, 4)
    scalar = RngStream(0).child(1, 0)
    assert scalar.uniforms(3).shape == (3,)
