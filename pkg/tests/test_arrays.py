import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hetdoa import (AngularGrid, ArrayGeometry, SteeringDictionary,
                    build_angular_grid, build_dictionary, build_ula_geometry,
                    steering_vector)


class TestUlaGeometry:
    def test_half_wavelength_phase_factor(self):
        geom = build_ula_geometry(20, 0.5)
        assert geom.n_sensors == 20
        factors = geom.wavenumber * np.asarray(geom.positions)
        assert np.allclose(factors, np.pi * np.arange(20), rtol=1e-12)

    def test_two_element_positions(self):
        geom = build_ula_geometry(2, 0.5)
        wavelength = 2 * math.pi * geom.sound_speed / geom.frequency
        assert geom.positions[0] == 0.0
        assert geom.positions[1] == pytest.approx(wavelength / 2, rel=1e-12)

    def test_grating_lobe_spacing_accepted(self):
        geom = build_ula_geometry(20, 1.0)
        factors = geom.wavenumber * np.asarray(geom.positions)
        assert np.allclose(factors, 2 * np.pi * np.arange(20), rtol=1e-12)

    @pytest.mark.parametrize("n, spacing", [(1, 0.5), (0, 0.5), (20, 0.0), (20, -0.5)])
    def test_invalid_arguments(self, n, spacing):
        with pytest.raises(ValueError):
            build_ula_geometry(n, spacing)

    def test_geometry_validation(self):
        with pytest.raises(ValueError):
            ArrayGeometry(positions=(0.0,), frequency=1.0, sound_speed=343.0)
        with pytest.raises(ValueError):
            ArrayGeometry(positions=(0.0, math.inf), frequency=1.0, sound_speed=343.0)
        with pytest.raises(ValueError):
            ArrayGeometry(positions=(0.0, 1.0), frequency=-1.0, sound_speed=343.0)


class TestAngularGrid:
    def test_full_span_has_361_points(self):
        assert build_angular_grid(-90, 90, 0.5).size == 361

    def test_default_benchmark_grid_has_360_points(self):
        grid = build_angular_grid(-90, 89.5, 0.5)
        assert grid.size == 360
        assert grid.angles_deg[0] == -90.0
        assert grid.angles_deg[-1] == 89.5

    def test_coarse_grid(self):
        assert build_angular_grid(0, 10, 5).angles_deg == (0.0, 5.0, 10.0)

    def test_inverted_bounds_rejected(self):
        with pytest.raises(ValueError):
            build_angular_grid(10, 0, 5)

    def test_non_dividing_step_rejected(self):
        with pytest.raises(ValueError):
            build_angular_grid(0, 10, 3)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            AngularGrid(angles_deg=(-91.0, 0.0))

    def test_index_of(self):
        grid = build_angular_grid(-90, 89.5, 0.5)
        assert grid.angles_deg[grid.index_of(-3.0)] == -3.0
        with pytest.raises(ValueError):
            grid.index_of(-3.25)


class TestSteeringVector:
    def test_broadside_is_all_ones(self, geom20):
        assert np.allclose(steering_vector(geom20, 0.0), np.ones(20), atol=1e-14)

    def test_thirty_degrees_quarter_turns(self, geom20):
        a = steering_vector(geom20, 30.0)
        expected = np.exp(-1j * np.pi * np.arange(20) / 2)
        assert np.allclose(a, expected, atol=1e-12)

    @pytest.mark.parametrize("theta", [-90.0, -37.3, 0.0, 12.25, 90.0])
    def test_unit_norm_squared(self, geom20, theta):
        a = steering_vector(geom20, theta)
        assert np.sum(np.abs(a) ** 2) == pytest.approx(20.0, abs=1e-9)

    def test_out_of_range_rejected(self, geom20):
        with pytest.raises(ValueError):
            steering_vector(geom20, 90.5)

    @given(theta=st.floats(min_value=-90.0, max_value=90.0))
    def test_conjugate_symmetry(self, theta):
        geom = build_ula_geometry(8, 0.5)
        fwd = steering_vector(geom, theta)
        rev = steering_vector(geom, -theta)
        assert np.max(np.abs(rev - fwd.conj())) <= 1e-12


class TestDictionary:
    def test_broadside_column_is_ones(self, dict20, grid_half_deg):
        col = dict20.matrix[:, grid_half_deg.index_of(0.0)]
        assert np.allclose(col, np.ones(20), atol=1e-14)

    def test_shape_and_unit_modulus(self, geom20):
        grid = build_angular_grid(-90, 90, 0.5)
        dic = build_dictionary(geom20, grid)
        assert dic.matrix.shape == (20, 361)
        assert np.max(np.abs(np.abs(dic.matrix) - 1.0)) <= 1e-12

    def test_column_norms(self, dict20):
        norms = np.sum(np.abs(dict20.matrix) ** 2, axis=0)
        assert np.max(np.abs(norms - 20.0)) <= 1e-9 * 20.0

    def test_columns_match_steering_vector(self, geom20, dict20, grid_half_deg):
        for m in (0, 57, 359):
            expected = steering_vector(geom20, grid_half_deg.angles_deg[m])
            assert np.array_equal(dict20.matrix[:, m], expected)

    def test_rebuild_is_bit_identical(self, geom20, grid_half_deg):
        a = build_dictionary(geom20, grid_half_deg)
        b = build_dictionary(geom20, grid_half_deg)
        assert np.array_equal(a.matrix, b.matrix)

    def test_matrix_is_readonly(self, dict20):
        with pytest.raises(ValueError):
            dict20.matrix[0, 0] = 0.0

    def test_validation_rejects_bad_matrix(self, geom20, grid_half_deg):
        bad = np.ones((20, 360), dtype=complex)
        bad[0, 0] = 2.0
        with pytest.raises(ValueError):
            SteeringDictionary(matrix=bad, geometry=geom20, grid=grid_half_deg)
