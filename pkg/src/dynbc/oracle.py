"""Independent ground-truth solvers.

``fd_solve`` integrates the coupled problem directly: backward-Euler in
time with the five-point Laplacian in the interior and the boundary time
law folded into the same implicit system (one sparse solve per step, so
the step size is independent of the diffusion parameter).  Artificial far
boundaries carry homogeneous Neumann conditions via mirrored stencils.

``limit_solution`` is the boundary-driven evolution alone, i.e. the
expected limit of the mild solutions for small eps.

The finite-difference method shares nothing with the kernel-quadrature
pipeline, so agreement between the two is evidence rather than tautology.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix, lil_matrix
from scipy.sparse.linalg import splu

from .errors import DomainError, NumericalError
from .grid import BoundaryField, Field, HalfSpaceGrid
from .semigroups import S2Op, s2_apply_cropped


@dataclass(frozen=True)
class FDConfig:
    """Implicit finite-difference configuration.

    The scheme is unconditionally stable; ``diffusion_number`` documents
    eps^-1 dt / dx^2 for the run log.
    """

    grid: HalfSpaceGrid
    dt: float
    scheme: str = "implicit"
    far_boundary: str = "neumann"

    def __post_init__(self):
        if self.dt <= 0.0:
            raise DomainError(f"dt must be > 0, got {self.dt}")
        if self.scheme != "implicit":
            raise DomainError("only the implicit scheme is implemented")
        if self.far_boundary != "neumann":
            raise DomainError("only homogeneous Neumann far boundaries are implemented")

    def diffusion_number(self, eps: float) -> float:
        h = min(self.grid.h_prime, self.grid.h_depth)
        return self.dt / (eps * h * h)


def _step_matrix(grid: HalfSpaceGrid, eps: float, dt: float, frozen_boundary: bool = False):
    """Implicit step matrix: interior rows eps*I - dt*Laplacian, boundary row
    the one-sided time law (identity when frozen_boundary)."""
    n = grid.n_prime
    nd = grid.n_depth
    hx2 = grid.h_prime ** 2
    hz2 = grid.h_depth ** 2
    hz = grid.h_depth
    a = lil_matrix((nd * n, nd * n))

    def idx(i, j):
        return i * n + j

    for j in range(n):
        r = idx(0, j)
        if frozen_boundary:
            a[r, r] = 1.0
        else:
            a[r, r] = 1.0 + 3.0 * dt / (2.0 * hz)
            a[r, idx(1, j)] = -4.0 * dt / (2.0 * hz)
            a[r, idx(2, j)] = dt / (2.0 * hz)
    for i in range(1, nd):
        for j in range(n):
            r = idx(i, j)
            a[r, r] = eps + 2.0 * dt / hx2 + 2.0 * dt / hz2
            # lateral neighbors (mirrored at the edges)
            jl = j - 1 if j > 0 else 1
            jr = j + 1 if j < n - 1 else n - 2
            a[r, idx(i, jl)] += -dt / hx2
            a[r, idx(i, jr)] += -dt / hx2
            # depth neighbors (mirrored at the deep edge)
            iu = i - 1
            idn = i + 1 if i < nd - 1 else nd - 2
            a[r, idx(iu, j)] += -dt / hz2
            a[r, idx(idn, j)] += -dt / hz2
    return csr_matrix(a)


def fd_solve(data, eps: float, cfg: FDConfig, save_times) -> tuple[np.ndarray, list]:
    """March the implicit scheme and return fields at the requested times.

    ``data`` is an InitialData instance; the interior starts from phi and
    the boundary row from phi_b.  Save times are rounded down to whole
    steps; the returned time array holds the realized times.
    """
    grid = cfg.grid
    save_times = np.sort(np.asarray(save_times, dtype=float))
    if save_times[0] <= 0.0:
        raise DomainError("save times must be positive")
    phi, phi_b = data.sample(grid)
    u = phi.values.copy()
    u[0] = phi_b.values
    try:
        lu = splu(_step_matrix(grid, eps, cfg.dt).tocsc())
    except RuntimeError as exc:  # pragma: no cover - singular assembly
        raise NumericalError(f"factorization of the implicit step failed: {exc}")
    n = grid.n_prime
    rhs_scale = np.full((grid.n_depth, 1), eps)
    rhs_scale[0, 0] = 1.0
    steps = int(np.ceil(save_times[-1] / cfg.dt - 1e-12))
    out_idx = 0
    times, fields = [], []
    t = 0.0
    for k in range(steps):
        rhs = (rhs_scale * u).ravel()
        sol = lu.solve(rhs)
        if not np.all(np.isfinite(sol)):
            raise NumericalError(f"implicit solve produced non-finite values at step {k}")
        u = sol.reshape(grid.n_depth, n)
        t = (k + 1) * cfg.dt
        while out_idx < save_times.size and save_times[out_idx] <= t + 1e-12:
            times.append(t)
            fields.append(Field(grid, u.copy(), phi_b.far_const))
            out_idx += 1
    return np.asarray(times), fields


def limit_solution(phi_b: BoundaryField, t: float, out_grid: HalfSpaceGrid | None = None) -> Field:
    """Solution of the boundary-driven limit problem at time t >= 0."""
    if t < 0.0:
        raise DomainError(f"t must be >= 0, got {t}")
    if out_grid is not None and out_grid != phi_b.grid:
        return s2_apply_cropped(phi_b, t, out_grid)
    return S2Op(phi_b.grid, t).apply(phi_b)
