import numpy as np
import pytest

from liveprint.errors import ImageTooSmall, MalformedHeader, TruncatedData, UnsupportedDepth
from liveprint.modules.image_core import (
    GrayImage,
    block_partition,
    load_pgm,
    read_pgm,
    save_pgm,
    write_pgm,
)


class TestGrayImage:
    def test_from_array_rounds_and_clips(self):
        img = GrayImage.from_array(np.array([[-3.0, 12.4], [12.6, 300.0]]))
        assert img.pixels.tolist() == [[0, 12], [13, 255]]
        assert img.shape == (2, 2)

    def test_pixels_are_read_only(self):
        img = GrayImage.from_array(np.zeros((4, 4)))
        with pytest.raises(ValueError):
            img.pixels[0, 0] = 1

    def test_equality_by_content(self):
        a = GrayImage.from_array(np.arange(12).reshape(3, 4))
        b = GrayImage.from_array(np.arange(12).reshape(3, 4))
        assert a == b
        assert hash(a) == hash(b)

    def test_to_unit(self):
        img = GrayImage.from_array(np.array([[0, 255]]))
        np.testing.assert_allclose(img.to_unit(), [[0.0, 1.0]])


class TestPGM:
    def test_canonical_encoding(self):
        img = GrayImage.from_array(np.array([[1, 2, 3], [4, 5, 6]], dtype=np.uint8))
        assert save_pgm(img) == b"P5\n3 2\n255\n" + bytes([1, 2, 3, 4, 5, 6])

    def test_decode_encoded_image(self):
        img = GrayImage.from_array(np.arange(20, dtype=np.uint8).reshape(4, 5) * 10)
        assert load_pgm(save_pgm(img)) == img

    def test_header_comments_and_whitespace(self):
        data = b"P5 # comment\n  2\t# width above\n1\n255\n" + bytes([7, 9])
        img = load_pgm(data)
        assert img.pixels.tolist() == [[7, 9]]

    def test_low_maxval_rescaled(self):
        img = load_pgm(b"P5\n3 1\n15\n" + bytes([0, 7, 15]))
        assert img.pixels.tolist() == [[0, 119, 255]]

    def test_values_above_maxval_clipped(self):
        img = load_pgm(b"P5\n1 1\n15\n" + bytes([200]))
        assert img.pixels.tolist() == [[255]]

    def test_extra_trailing_bytes_ignored(self):
        img = load_pgm(b"P5\n1 1\n255\n" + bytes([5, 6, 7]))
        assert img.pixels.tolist() == [[5]]

    @pytest.mark.parametrize("data", [
        b"P2\n1 1\n255\n0",
        b"P5\n0 4\n255\n",
        b"P5\n4 x\n255\n",
        b"P5\n1 1\n0\n\x00",
        b"P5\n1 1\n255",
    ])
    def test_malformed_header(self, data):
        with pytest.raises(MalformedHeader):
            load_pgm(data)

    def test_sixteen_bit_rejected(self):
        with pytest.raises(UnsupportedDepth):
            load_pgm(b"P5\n1 1\n65535\n\x00\x00")

    def test_truncated_raster(self):
        with pytest.raises(TruncatedData):
            load_pgm(b"P5\n4 4\n255\n" + bytes(10))

    def test_file_helpers(self, tmp_path):
        img = GrayImage.from_array(np.full((8, 6), 77))
        path = tmp_path / "x.pgm"
        write_pgm(path, img)
        assert read_pgm(path) == img


class TestBlockGrid:
    def test_partial_strips_dropped(self):
        grid = block_partition(GrayImage.from_array(np.zeros((70, 100))), 16)
        assert (grid.nx, grid.ny) == (6, 4)
        assert grid.n_blocks == 24
        assert grid.covered_shape == (64, 96)

    def test_too_small(self):
        with pytest.raises(ImageTooSmall):
            block_partition(GrayImage.from_array(np.zeros((10, 40))), 16)

    def test_block_size_lower_bound(self):
        with pytest.raises(ValueError):
            block_partition(GrayImage.from_array(np.zeros((32, 32))), 3)

    def test_rect_and_center(self):
        grid = block_partition(GrayImage.from_array(np.zeros((32, 48))), 16)
        assert grid.rect(2, 1) == (32, 16, 48, 32)
        assert grid.center(0, 0) == (7.5, 7.5)
        with pytest.raises(IndexError):
            grid.rect(3, 0)

    def test_row_major_iteration(self):
        grid = block_partition(GrayImage.from_array(np.zeros((32, 48))), 16)
        assert list(grid) == [(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1)]

    def test_block_means_and_expand(self):
        array = np.zeros((33, 33))
        array[:16, 16:32] = 4.0
        grid = block_partition(GrayImage.from_array(array), 16)
        means = grid.block_means(array)
        assert means.tolist() == [[0.0, 4.0], [0.0, 0.0]]
        expanded = grid.expand(means, fill=-1.0)
        assert expanded.shape == (33, 33)
        assert expanded[0, 20] == 4.0
        assert expanded[32, 32] == -1.0
