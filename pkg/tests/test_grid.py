import numpy as np
import pytest

from dynbc.errors import DomainError
from dynbc.grid import (
    BoundaryField,
    Field,
    HalfSpaceGrid,
    InitialData,
    boundary_normal_derivative,
    field_from_csv,
    field_to_csv,
    strip_sup_norm,
    sup_norm,
)


class TestHalfSpaceGrid:
    def test_origin_is_a_node(self, grid):
        assert 0.0 in grid.x_prime
        assert grid.x_depth[0] == 0.0

    def test_invalid_parameters_rejected(self):
        with pytest.raises(DomainError):
            HalfSpaceGrid(12.0, 6.0, 128, 65)  # even lateral count
        with pytest.raises(DomainError):
            HalfSpaceGrid(-1.0, 6.0, 129, 65)
        with pytest.raises(DomainError):
            HalfSpaceGrid(12.0, 6.0, 129, 1)

    def test_node_round_trip(self, grid, rng):
        for _ in range(50):
            i = int(rng.integers(0, grid.n_depth))
            j = int(rng.integers(0, grid.n_prime))
            xp, xd = grid.node_coords(i, j)
            assert grid.nearest_node(xp, xd) == (i, j)

    def test_widened_keeps_spacing(self, grid):
        wide = grid.widened(8.0)
        assert wide.h_prime == pytest.approx(grid.h_prime, abs=1e-15)
        assert wide.n_prime > grid.n_prime
        assert wide.n_depth == grid.n_depth


class TestNorms:
    def test_zero_field(self, small_grid):
        f = Field(small_grid, np.zeros((small_grid.n_depth, small_grid.n_prime)))
        assert sup_norm(f) == 0.0
        assert strip_sup_norm(f, 1.0) == 0.0

    def test_sup_norm_takes_absolute_values(self, small_grid):
        v = np.zeros((small_grid.n_depth, small_grid.n_prime))
        v[3, 4] = -3.0
        v[1, 2] = 2.0
        assert sup_norm(Field(small_grid, v)) == 3.0

    def test_boundary_gaussian_peaks_at_origin(self, grid):
        psi = BoundaryField(grid, np.exp(-grid.x_prime**2))
        assert sup_norm(psi) == 1.0

    def test_strip_is_strictly_below_the_cut(self):
        g = HalfSpaceGrid(1.0, 1.0, 5, 5)  # depth spacing 0.25
        f = Field(g, np.broadcast_to(g.x_depth[:, None], (5, 5)).copy())
        assert strip_sup_norm(f, 0.5) == 0.25

    def test_strip_never_exceeds_full_norm(self, small_grid, rng):
        for _ in range(10):
            f = Field(small_grid, rng.standard_normal((small_grid.n_depth, small_grid.n_prime)))
            assert strip_sup_norm(f, 2.0) <= sup_norm(f)

    def test_strip_beyond_grid_rejected(self, small_grid):
        f = Field(small_grid, np.zeros((small_grid.n_depth, small_grid.n_prime)))
        with pytest.raises(DomainError):
            strip_sup_norm(f, small_grid.L + 1.0)

    def test_subadditive_and_homogeneous(self, small_grid, rng):
        shape = (small_grid.n_depth, small_grid.n_prime)
        for _ in range(20):
            a = rng.standard_normal(shape)
            b = rng.standard_normal(shape)
            c = float(rng.standard_normal())
            fa, fb = Field(small_grid, a), Field(small_grid, b)
            assert sup_norm(Field(small_grid, a + b)) <= sup_norm(fa) + sup_norm(fb) + 1e-15
            assert sup_norm(Field(small_grid, c * a)) == pytest.approx(
                abs(c) * sup_norm(fa), rel=1e-14
            )

    def test_nonfinite_values_rejected(self, small_grid):
        v = np.zeros((small_grid.n_depth, small_grid.n_prime))
        v[0, 0] = np.nan
        with pytest.raises(DomainError):
            Field(small_grid, v)


class TestBoundaryNormalDerivative:
    def test_linear_field_is_exact(self, grid):
        f = Field(grid, np.broadcast_to(grid.x_depth[:, None], (grid.n_depth, grid.n_prime)).copy())
        d = boundary_normal_derivative(f)
        assert np.allclose(d.values, 1.0, atol=1e-12)

    def test_quadratic_field_is_exact(self, grid):
        f = Field(grid, np.broadcast_to(grid.x_depth[:, None] ** 2, (grid.n_depth, grid.n_prime)).copy())
        d = boundary_normal_derivative(f)
        assert np.allclose(d.values, 0.0, atol=1e-12)

    def test_second_order_on_smooth_fields(self):
        errs = []
        for n in (33, 65):
            g = HalfSpaceGrid(1.0, 2.0, 5, n)
            f = Field(g, np.broadcast_to(np.sin(g.x_depth)[:, None], (n, 5)).copy())
            errs.append(abs(boundary_normal_derivative(f).values[0] - 1.0))
        assert errs[0] / errs[1] > 3.0

    def test_too_few_depth_nodes_rejected(self):
        g = HalfSpaceGrid(1.0, 1.0, 5, 3)
        f = Field(g, np.zeros((3, 5)))
        with pytest.raises(DomainError):
            boundary_normal_derivative(f)


class TestCsvRoundTrip:
    def test_bit_exact_round_trip(self, small_grid, rng, tmp_path):
        vals = rng.standard_normal((small_grid.n_depth, small_grid.n_prime))
        vals[0, 0] = 1.0 / 3.0
        f = Field(small_grid, vals, far_const=0.125)
        path = tmp_path / "field.csv"
        field_to_csv(f, path)
        g = field_from_csv(path)
        assert g.grid == small_grid
        assert g.far_const == f.far_const
        assert np.array_equal(g.values, f.values)


class TestInitialData:
    def test_sampling_shapes(self, small_grid, gaussian_data):
        phi, phi_b = gaussian_data.sample(small_grid)
        assert phi.values.shape == (small_grid.n_depth, small_grid.n_prime)
        assert phi_b.values.shape == (small_grid.n_prime,)
        assert phi.values[0, small_grid.n_prime // 2] == pytest.approx(1.0)
