import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lowres.images import grid_shape, normalize_columns, read_pgm, receptive_field_image, tile, write_pgm


def _pillow_read(path):
    """Decode with an external reader when available."""
    Image = pytest.importorskip("PIL.Image")
    with Image.open(path) as im:
        return np.asarray(im)


class TestWritePgm:
    def test_zero_image_bytes(self, tmp_path):
        p = write_pgm(np.zeros((2, 2)), tmp_path / "z.pgm")
        assert p.read_bytes() == b"P5\n2 2\n255\n" + bytes(4)

    def test_one_is_255(self, tmp_path):
        p = write_pgm(np.ones((1, 1)), tmp_path / "o.pgm")
        assert p.read_bytes()[-1] == 255

    def test_row_major(self, tmp_path):
        img = np.array([[0.0, 1.0, 0.0]])
        raw = write_pgm(img, tmp_path / "r.pgm").read_bytes()
        assert raw.startswith(b"P5\n3 1\n")
        assert raw[-3:] == bytes([0, 255, 0])

    def test_clamps_with_warning(self, tmp_path):
        with pytest.warns(UserWarning):
            p = write_pgm(np.array([[-0.5, 1.5]]), tmp_path / "c.pgm")
        assert read_pgm(p).tolist() == [[0, 255]]

    def test_rejects_non_2d(self, tmp_path):
        with pytest.raises(ValueError):
            write_pgm(np.zeros(4), tmp_path / "x.pgm")

    def test_digit_round_trip_external(self, tmp_path):
        rng = np.random.default_rng(0)
        digit = rng.random((28, 28))
        p = write_pgm(digit, tmp_path / "d.pgm")
        back = _pillow_read(p).astype(float)
        assert back.shape == (28, 28)
        assert np.max(np.abs(back - digit * 255)) <= 1.0

    @given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
    @settings(max_examples=30)
    def test_own_reader_round_trip(self, h, w, seed):
        import tempfile
        from pathlib import Path

        img = np.random.default_rng(seed).random((h, w))
        with tempfile.TemporaryDirectory() as d:
            back = read_pgm(write_pgm(img, Path(d) / "a.pgm"))
        assert np.max(np.abs(back - img * 255)) <= 0.5 + 1e-9


class TestTiling:
    def test_sizes(self):
        tiles = [np.zeros((2, 3))] * 6
        assert tile(tiles, 2, 3).shape == (2 * 2 + 1, 3 * 3 + 2)

    def test_separator_fill(self):
        out = tile([np.zeros((1, 1))] * 2, 1, 2, fill=0.7)
        assert out.tolist() == [[0.0, 0.7, 0.0]]

    def test_too_many(self):
        with pytest.raises(ValueError):
            tile([np.zeros((1, 1))] * 5, 2, 2)

    @pytest.mark.parametrize("n, shape", [(1, (1, 1)), (2, (1, 2)), (4, (2, 2)), (5, (2, 3)), (64, (8, 8)), (10, (3, 4))])
    def test_grid_shape(self, n, shape):
        assert grid_shape(n) == shape


class TestReceptiveFields:
    def test_four_columns_square_layout(self):
        W = np.arange(16, dtype=float).reshape(4, 4)
        img = receptive_field_image(W, (2, 2))
        # 2 x 2 tiles of 2 x 2 pixels plus one separator each way
        assert img.shape == (5, 5)

    def test_column_normalization(self):
        W = np.array([[0.0, -3.0], [2.0, -1.0], [1.0, -2.0], [0.5, -3.0]])
        img = receptive_field_image(W, (2, 2))
        np.testing.assert_allclose(img[:2, :2], [[0.0, 1.0], [0.5, 0.25]])
        np.testing.assert_allclose(img[:2, 3:], [[0.0, 1.0], [0.5, 0.0]])

    def test_constant_column_mid_gray(self):
        W = np.column_stack([np.full(4, 0.3), np.arange(4.0)])
        assert np.all(normalize_columns(W)[:, 0] == 0.5)

    def test_single_column_no_separators(self):
        img = receptive_field_image(np.arange(4.0)[:, None], (2, 2))
        assert img.shape == (2, 2)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            receptive_field_image(np.zeros((5, 2)), (2, 2))
