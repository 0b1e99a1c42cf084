"""Tests for the field file format, site lists, and downsampling."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hotfield.errors import FieldFormatError
from hotfield.fieldio import (
    downsample_by_two,
    read_field,
    read_sites,
    read_uncertainty,
    write_field,
    write_sites,
    write_uncertainty,
)
from hotfield.tensors import TensorField, unique_count


def random_grid_field(order, nx, ny, rng):
    coeffs = rng.standard_normal((nx * ny, unique_count(order)))
    return TensorField.from_grid(order, nx, ny, coeffs)


class TestFieldFormat:
    @pytest.mark.parametrize("order", (2, 4, 6))
    def test_round_trip(self, tmp_path, order):
        rng = np.random.default_rng(order)
        field = random_grid_field(order, 4, 3, rng)
        path = tmp_path / "f.field"
        write_field(path, field)
        back = read_field(path)
        assert back.order == order
        assert back.grid_shape == (4, 3)
        assert_allclose(back.coords, field.coords, rtol=1e-12, atol=1e-15)
        assert_allclose(back.coeffs, field.coeffs, rtol=1e-12, atol=1e-15)

    def test_rewrite_is_byte_identical(self, tmp_path):
        rng = np.random.default_rng(1)
        field = random_grid_field(2, 3, 3, rng)
        p1, p2 = tmp_path / "a.field", tmp_path / "b.field"
        write_field(p1, field)
        write_field(p2, read_field(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_header_shape(self, tmp_path):
        field = random_grid_field(4, 16, 16, np.random.default_rng(2))
        path = tmp_path / "f.field"
        write_field(path, field)
        lines = path.read_text().splitlines()
        assert lines[0] == "HOTFIELD v1 order=4 nx=16 ny=16"
        assert len(lines) == 1 + 256
        # 2 coords + 15 coefficients per line for order 4
        assert all(len(ln.split()) == 17 for ln in lines[1:])

    def test_scattered_field_flattens(self, tmp_path):
        coords = np.array([[0.1, 0.2], [0.7, 0.9], [0.4, 0.4]])
        field = TensorField(2, coords, np.zeros((3, 6)))
        path = tmp_path / "scatter.field"
        write_field(path, field)
        back = read_field(path)
        assert back.grid_shape is None
        assert back.n_sites == 3

    def test_missing_lines_rejected(self, tmp_path):
        field = random_grid_field(2, 3, 3, np.random.default_rng(3))
        path = tmp_path / "f.field"
        write_field(path, field)
        txt = path.read_text().splitlines()
        path.write_text("\n".join(txt[:-1]) + "\n")
        with pytest.raises(FieldFormatError, match="promises"):
            read_field(path)

    def test_bad_coefficient_count(self, tmp_path):
        path = tmp_path / "f.field"
        path.write_text("HOTFIELD v1 order=2 nx=1 ny=1\n0.0 0.0 1.0 2.0\n")
        with pytest.raises(FieldFormatError, match="expected 8 fields"):
            read_field(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "f.field"
        path.write_text("FIELD v2 order=2\n")
        with pytest.raises(FieldFormatError, match="header"):
            read_field(path)


class TestDownsample:
    def test_16_to_8(self):
        field = random_grid_field(2, 16, 16, np.random.default_rng(4))
        down = downsample_by_two(field)
        assert down.grid_shape == (8, 8)
        assert down.n_sites == 64

    def test_5_to_3_keeps_even_indices(self):
        field = random_grid_field(2, 5, 5, np.random.default_rng(5))
        down = downsample_by_two(field)
        assert down.grid_shape == (3, 3)
        xs, _ = down.grid_axes()
        assert_allclose(xs, [0.0, 0.5, 1.0])

    def test_kept_lines_byte_identical(self, tmp_path):
        field = random_grid_field(4, 6, 5, np.random.default_rng(6))
        full_path = tmp_path / "full.field"
        down_path = tmp_path / "down.field"
        write_field(full_path, field)
        write_field(down_path, downsample_by_two(read_field(full_path)))
        full_lines = set(full_path.read_text().splitlines()[1:])
        down_lines = down_path.read_text().splitlines()[1:]
        assert all(ln in full_lines for ln in down_lines)

    def test_coordinates_preserved(self):
        field = random_grid_field(2, 16, 16, np.random.default_rng(7))
        down = downsample_by_two(field)
        # node (2, 4) of the source grid is node (1, 2) of the output
        src = field.coords[4 * 16 + 2]
        kept = down.coords[2 * 8 + 1]
        assert np.array_equal(src, kept)

    def test_too_small_rejected(self):
        field = random_grid_field(2, 2, 5, np.random.default_rng(8))
        with pytest.raises(FieldFormatError, match="too small"):
            downsample_by_two(field)

    def test_needs_grid(self):
        coords = np.array([[0.0, 0.0], [1.0, 0.5], [0.3, 0.9]])
        field = TensorField(2, coords, np.zeros((3, 6)))
        with pytest.raises(FieldFormatError, match="grid"):
            downsample_by_two(field)


class TestSitesAndSidecars:
    def test_sites_round_trip(self, tmp_path):
        rng = np.random.default_rng(9)
        coords = rng.uniform(0, 1, size=(7, 2))
        path = tmp_path / "sites.txt"
        write_sites(path, coords)
        assert_allclose(read_sites(path), coords, rtol=1e-12)

    def test_sites_from_field_file(self, tmp_path):
        field = random_grid_field(2, 3, 3, np.random.default_rng(10))
        path = tmp_path / "f.field"
        write_field(path, field)
        assert_allclose(read_sites(path), field.coords, rtol=1e-12, atol=1e-15)

    def test_uncertainty_round_trip(self, tmp_path):
        rng = np.random.default_rng(11)
        coords = rng.uniform(0, 1, size=(5, 2))
        spread = rng.uniform(0, 1, size=5)
        path = tmp_path / "pred.unc"
        write_uncertainty(path, coords, spread)
        coords2, spread2 = read_uncertainty(path)
        assert_allclose(coords2, coords, rtol=1e-12)
        assert_allclose(spread2, spread, rtol=1e-12)

    def test_malformed_sites(self, tmp_path):
        path = tmp_path / "sites.txt"
        path.write_text("0.0 0.0 0.0\n")
        with pytest.raises(FieldFormatError):
            read_sites(path)
