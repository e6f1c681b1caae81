"""The two solution operators of the coupled system.

``S1Op`` is the Dirichlet heat semigroup on the half-space: a lateral
Gaussian convolution composed with a reflected one-dimensional depth
transform (the kernel factorizes).  Its x_N-derivative uses the same
lateral pass with a different depth transform.

``S2Op`` is the dynamical-boundary Poisson evolution: because the kernel
depends on x_N and t only through x_N + t, each depth row is a single
boundary convolution at parameter x_N + t.  At t = 0 the boundary row is
the identity and the interior rows are the harmonic extension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quadrature as quad
from .errors import DomainError
from .grid import BoundaryField, Field, HalfSpaceGrid, crop_lateral


@dataclass(frozen=True)
class S1Op:
    """Dirichlet heat propagator at diffusion time tau (callers pass eps^-1 t)."""

    grid: HalfSpaceGrid
    tau: float

    def __post_init__(self):
        if self.tau <= 0.0:
            raise DomainError(f"diffusion time must be > 0, got {self.tau}")

    def _lateral(self, phi: Field):
        st = quad.cached_gaussian_lateral(self.grid, self.tau)
        return quad.apply_lateral(st, phi.values, phi.far_const)

    def apply(self, phi: Field) -> Field:
        if phi.grid != self.grid:
            raise DomainError("field grid does not match the operator grid")
        lat = self._lateral(phi)
        m_val, r_val, _, _ = quad.cached_depth_matrices(self.grid, self.tau)
        out = quad.apply_depth(m_val, r_val, lat, phi.far_const)
        return Field(self.grid, out, phi.far_const)

    def apply_dxn(self, phi: Field) -> Field:
        if phi.grid != self.grid:
            raise DomainError("field grid does not match the operator grid")
        lat = self._lateral(phi)
        _, _, m_dxn, r_dxn = quad.cached_depth_matrices(self.grid, self.tau)
        out = quad.apply_depth(m_dxn, r_dxn, lat, phi.far_const)
        return Field(self.grid, out, 0.0)

    def apply_both(self, phi: Field) -> tuple[Field, Field]:
        """Value and x_N-derivative from one shared lateral pass."""
        if phi.grid != self.grid:
            raise DomainError("field grid does not match the operator grid")
        lat = self._lateral(phi)
        m_val, r_val, m_dxn, r_dxn = quad.cached_depth_matrices(self.grid, self.tau)
        val = quad.apply_depth(m_val, r_val, lat, phi.far_const)
        dxn = quad.apply_depth(m_dxn, r_dxn, lat, phi.far_const)
        return Field(self.grid, val, phi.far_const), Field(self.grid, dxn, 0.0)


@dataclass(frozen=True)
class S2Op:
    """Dynamical-boundary Poisson evolution at time t >= 0."""

    grid: HalfSpaceGrid
    t: float

    def __post_init__(self):
        if self.t < 0.0:
            raise DomainError(f"evolution time must be >= 0, got {self.t}")

    def apply(self, psi: BoundaryField) -> Field:
        if psi.grid != self.grid:
            raise DomainError("boundary field grid does not match the operator grid")
        taps, resp = quad.poisson_extension_bank(self.grid, self.t)
        rows = np.broadcast_to(psi.values, (self.grid.n_depth, self.grid.n_prime))
        out = quad.apply_lateral_bank(taps, resp, rows, psi.far_const)
        return Field(self.grid, out, psi.far_const)

    def apply_trace(self, psi: BoundaryField) -> BoundaryField:
        """Boundary row only (identity at t = 0)."""
        if psi.grid != self.grid:
            raise DomainError("boundary field grid does not match the operator grid")
        if self.t == 0.0:
            return psi.copy()
        st = quad.poisson_lateral_stencil(self.grid, self.t)
        out = quad.apply_lateral(st, psi.values, psi.far_const)
        return BoundaryField(self.grid, out, psi.far_const)


def s2_apply_cropped(psi: BoundaryField, t: float, out_grid: HalfSpaceGrid) -> Field:
    """Poisson evolution of boundary data on a widened lattice, cropped back.

    Used for analytic data sampled with a guard band, so window-edge columns
    are not polluted by the unknown tail beyond the truncation box.
    """
    wide = psi.grid
    taps, resp = quad.poisson_extension_bank(wide, t)
    rows = np.broadcast_to(psi.values, (wide.n_depth, wide.n_prime))
    out = quad.apply_lateral_bank(taps, resp, rows, psi.far_const)
    if wide == out_grid:
        return Field(out_grid, out, psi.far_const)
    return Field(out_grid, crop_lateral(out, wide, out_grid), psi.far_const)


def s1_apply(op: S1Op, phi: Field) -> Field:
    return op.apply(phi)


def s1_apply_dxn(op: S1Op, phi: Field) -> Field:
    return op.apply_dxn(phi)


def s2_apply(op: S2Op, psi: BoundaryField) -> Field:
    return op.apply(psi)
