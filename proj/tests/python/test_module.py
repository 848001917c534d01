import numpy as np
import pytest

import nsn


def test_load_idx(digits):
    assert digits.shape == (120, 28, 28, 1)
    assert digits.min() >= 0.0 and digits.max() <= 1.0


def test_train_shapes(small_net):
    assert small_net.depth == 3
    assert small_net.architecture == "4x4/2,3x3/2,6x6/2"
    assert small_net.input_shape == (28, 28, 1)
    assert all(c >= 1 for c in small_net.filter_counts)


def test_forward_chain(small_net, digits):
    maps = nsn.forward(small_net, digits[0])
    assert [m.shape[:2] for m in maps] == [(13, 13), (6, 6), (1, 1)]
    assert [m.shape[2] for m in maps] == small_net.filter_counts
    assert all(((m > 0) & (m < 1)).all() for m in maps)


def test_generate_is_reproducible(small_net):
    cfg = nsn.GenConfig(delta1=20.0, seed=5)
    a = nsn.generate(small_net, 6, cfg)
    b = nsn.generate(small_net, 6, cfg)
    assert a.shape == (6, 28, 28, 1)
    assert np.array_equal(a, b)
    assert np.isfinite(a).all() and a.min() >= 0.0 and a.max() <= 1.0


def test_model_bytes_roundtrip(small_net, tmp_path):
    path = tmp_path / "m.nsn"
    small_net.save(str(path))
    again = nsn.Network.load(str(path))
    assert again == small_net
    assert again.to_bytes() == path.read_bytes()
    assert nsn.Network.from_bytes(small_net.to_bytes()) == small_net


def test_corrupt_model(tmp_path):
    path = tmp_path / "bad.nsn"
    path.write_bytes(b"NSN1" + b"\x00" * 10)
    with pytest.raises(nsn.FormatError):
        nsn.Network.load(str(path))


def test_inpaint_empty_mask(small_net, digits):
    res = nsn.inpaint(small_net, digits[1], np.zeros((28, 28), dtype=bool))
    assert np.array_equal(res["modified_map"], res["first_map"])
    assert not any(res["replaced_cells"])
    with pytest.raises(nsn.ShapeError):
        nsn.inpaint(small_net, digits[1], np.zeros((27, 28), dtype=bool))


def test_apps(small_net, digits):
    assert nsn.style(small_net, digits[2], 3).shape == (3, 28, 28, 1)
    assert nsn.interpolate(small_net, 0, 1, 5).shape == (5, 28, 28, 1)
    assert nsn.arith(small_net, "0 + 1", 2).shape == (6, 28, 28, 1)
    assert nsn.sample_layer(small_net, 1, 3).shape == (3, 4, 4, 1)
    with pytest.raises(IndexError):
        nsn.sample_layer(small_net, 9, 1)


def test_expressions():
    assert nsn.parse_filter_expression("0+1-2") == ([0, 1, 2], [1.0, 1.0, -1.0])
    with pytest.raises(ValueError):
        nsn.parse_filter_expression("0+")


def test_weight_vector():
    w = nsn.weight_vector([0.0, 0.5, 1.0, 0.2], nsn.GenConfig(n=7, seed=2))
    assert abs(sum(w) - 1.0) < 1e-12
    assert sum(x > 0 for x in w) <= 7


def test_tile_grid():
    imgs = np.random.default_rng(0).random((5, 3, 4, 1))
    grid = nsn.tile_grid(imgs, 2)
    assert grid.shape == (3 * 3 + 2 * 2, 2 * 4 + 2, 1)
    assert np.array_equal(grid[:3, :4], imgs[0])
