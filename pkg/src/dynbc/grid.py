"""Truncated half-space lattice, sampled fields, and sup-norm functionals.

The computational domain is the box [-R', R'] x [0, L] sampled uniformly,
with the boundary hyperplane at depth index 0.  Fields carry a declared
far-field constant used by quadrature tail corrections: values outside the
box are modeled as ramping to that constant within one cell and staying
constant beyond.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class HalfSpaceGrid:
    """Uniform lattice on [-R', R']^{N-1} x [0, L] with N = 2.

    ``n_prime`` must be odd so x' = 0 is a node; depth node 0 sits exactly
    on the boundary x_N = 0.
    """

    R_prime: float
    L: float
    n_prime: int
    n_depth: int
    N: int = 2

    def __post_init__(self):
        if self.N != 2:
            raise DomainError("field machinery is implemented for N = 2")
        if self.R_prime <= 0 or self.L <= 0:
            raise DomainError("R_prime and L must be positive")
        if self.n_prime < 3 or self.n_prime % 2 == 0:
            raise DomainError("n_prime must be odd and >= 3")
        if self.n_depth < 2:
            raise DomainError("n_depth must be >= 2")

    @property
    def x_prime(self) -> np.ndarray:
        return np.linspace(-self.R_prime, self.R_prime, self.n_prime)

    @property
    def x_depth(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.n_depth)

    @property
    def h_prime(self) -> float:
        return 2.0 * self.R_prime / (self.n_prime - 1)

    @property
    def h_depth(self) -> float:
        return self.L / (self.n_depth - 1)

    def node_coords(self, i_depth: int, j_prime: int) -> tuple[float, float]:
        return (self.x_prime[j_prime], self.x_depth[i_depth])

    def nearest_node(self, x_prime: float, x_depth: float) -> tuple[int, int]:
        j = int(round((x_prime + self.R_prime) / self.h_prime))
        i = int(round(x_depth / self.h_depth))
        if not (0 <= j < self.n_prime and 0 <= i < self.n_depth):
            raise DomainError("point outside the truncated domain")
        return (i, j)

    def widened(self, guard: float) -> "HalfSpaceGrid":
        """Laterally wider grid with identical spacing (guard band per side).

        Boundary-data convolutions run on the widened lattice and crop back,
        so window-edge cells are not polluted by the unknown data tail.
        """
        extra = int(np.ceil(guard / self.h_prime))
        return HalfSpaceGrid(
            self.R_prime + extra * self.h_prime,
            self.L,
            self.n_prime + 2 * extra,
            self.n_depth,
            N=self.N,
        )


def crop_lateral(values: np.ndarray, wide: HalfSpaceGrid, grid: HalfSpaceGrid) -> np.ndarray:
    """Center-crop samples on a widened lattice back to the base window."""
    extra = (wide.n_prime - grid.n_prime) // 2
    if wide.n_prime != grid.n_prime + 2 * extra or abs(wide.h_prime - grid.h_prime) > 1e-13:
        raise DomainError("grids are not compatible widenings")
    return values[..., extra : extra + grid.n_prime]


def _check_values(values, shape):
    arr = np.asarray(values, dtype=float)
    if arr.shape != shape:
        raise DomainError(f"values have shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("field values must be finite")
    return arr


@dataclass
class Field:
    """Scalar samples on the half-space lattice; row i is depth node i."""

    grid: HalfSpaceGrid
    values: np.ndarray
    far_const: float = 0.0

    def __post_init__(self):
        object.__setattr__(
            self, "values", _check_values(self.values, (self.grid.n_depth, self.grid.n_prime))
        )

    @property
    def boundary(self) -> "BoundaryField":
        return BoundaryField(self.grid, self.values[0].copy(), self.far_const)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.far_const)


@dataclass
class BoundaryField:
    """Scalar samples on the boundary lattice x' in [-R', R']."""

    grid: HalfSpaceGrid
    values: np.ndarray
    far_const: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", _check_values(self.values, (self.grid.n_prime,)))

    def copy(self) -> "BoundaryField":
        return BoundaryField(self.grid, self.values.copy(), self.far_const)


@dataclass(frozen=True)
class InitialData:
    """Bounded initial data (phi on the half-space, phi_b on the boundary).

    Callables must decay to the declared far-field constants beyond the
    truncation box; the declared sup-norm bounds are used to size the
    fixed-point ball.
    """

    phi: object  # callable (x', x_N) -> value
    phi_b: object  # callable (x',) -> value
    phi_far: float = 0.0
    phi_b_far: float = 0.0
    phi_sup: float = 1.0
    phi_b_sup: float = 1.0

    def sample(self, grid: HalfSpaceGrid) -> tuple[Field, BoundaryField]:
        xp = grid.x_prime
        xd = grid.x_depth
        vals = np.empty((grid.n_depth, grid.n_prime))
        for i, d in enumerate(xd):
            vals[i] = self.phi(xp, d)
        return (
            Field(grid, vals, self.phi_far),
            BoundaryField(grid, np.asarray(self.phi_b(xp), dtype=float), self.phi_b_far),
        )


def sup_norm(f) -> float:
    """Maximum of |values| over all nodes."""
    if f.values.size == 0:
        raise DomainError("empty field")
    return float(np.max(np.abs(f.values)))


def strip_sup_norm(f: Field, L_strip: float) -> float:
    """Maximum of |values| over nodes with x_N strictly below L_strip."""
    if L_strip <= 0:
        raise DomainError("strip depth must be positive")
    if L_strip > f.grid.L:
        raise DomainError("strip depth exceeds the grid depth")
    mask = f.grid.x_depth < L_strip
    return float(np.max(np.abs(f.values[mask])))


def boundary_normal_derivative(f: Field) -> BoundaryField:
    """One-sided second-order estimate of d(f)/d(x_N) at the boundary."""
    if f.grid.n_depth < 4:
        raise DomainError("need at least 4 depth nodes for the boundary stencil")
    h = f.grid.h_depth
    v = f.values
    d = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    return BoundaryField(f.grid, d, 0.0)


def field_to_csv(f: Field, path) -> None:
    """Flat CSV layout: grid header, then one (x', x_N, value) row per node."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f.grid.N, repr(f.grid.R_prime), repr(f.grid.L), f.grid.n_prime, f.grid.n_depth])
        w.writerow(["far_const", repr(float(f.far_const))])
        xp = f.grid.x_prime
        xd = f.grid.x_depth
        for i in range(f.grid.n_depth):
            for j in range(f.grid.n_prime):
                w.writerow([repr(float(xp[j])), repr(float(xd[i])), repr(float(f.values[i, j]))])


def field_from_csv(path) -> Field:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        n, rp, depth_l, n_prime, n_depth = (
            int(header[0]),
            float(header[1]),
            float(header[2]),
            int(header[3]),
            int(header[4]),
        )
        far_row = next(r)
        far = float(far_row[1])
        grid = HalfSpaceGrid(rp, depth_l, n_prime, n_depth, N=n)
        vals = np.empty((n_depth, n_prime))
        for i in range(n_depth):
            for j in range(n_prime):
                row = next(r)
                vals[i, j] = float(row[2])
    return Field(grid, vals, far)
