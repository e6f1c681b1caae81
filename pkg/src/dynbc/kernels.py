"""Closed-form integral kernels on the half-space.

The half-space is R^{N-1} x (0, inf) with coordinates x = (x', x_N).
Three kernel families drive everything else:

* the Gauss kernel ``Gamma_d`` in dimension d,
* the Dirichlet heat kernel ``Gamma_D`` built from ``Gamma_d`` by odd
  reflection across x_N = 0, together with its x_N-derivative K,
* the dynamical-boundary Poisson kernel P, which depends on x_N and t
  only through s = x_N + t, together with its t-derivative.

All functions are pure and accept scalars or NumPy arrays (broadcasting
over points).  The normalization constant of P is computed numerically
once and cached; closed forms for N = 2, 3 are cross-checked in tests.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError

_cn_cache: dict[int, float] = {}
_cn_lock = threading.Lock()


@dataclass(frozen=True)
class Dim:
    """Spatial dimension N >= 2 of the half-space."""

    N: int

    def __post_init__(self):
        if self.N < 2:
            raise DomainError(f"dimension must be >= 2, got {self.N}")


@dataclass(frozen=True)
class KernelPoint:
    """Evaluation point (x, y, t) with x in the closed, y in the open half-space."""

    x: tuple
    y: tuple
    t: float

    def __post_init__(self):
        if len(self.x) != len(self.y) or len(self.x) < 2:
            raise DomainError("x and y must share a dimension N >= 2")
        if self.x[-1] < 0.0:
            raise DomainError(f"x_N must be >= 0, got {self.x[-1]}")
        if self.y[-1] <= 0.0:
            raise DomainError(f"y_N must be > 0, got {self.y[-1]}")
        if self.t <= 0.0:
            raise DomainError(f"t must be > 0, got {self.t}")

    @property
    def dim(self) -> int:
        return len(self.x)

    @property
    def y_reflected(self) -> tuple:
        return self.y[:-1] + (-self.y[-1],)


def gauss_kernel(d: int, z, t):
    """Gauss kernel (4*pi*t)^(-d/2) * exp(-|z|^2 / (4t)) in R^d.

    ``z`` may be a scalar (d = 1), a length-d vector, or an array whose
    last axis has length d.
    """
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0):
        raise DomainError("time must be > 0")
    z = np.asarray(z, dtype=float)
    if z.ndim == 0 or d == 1:
        zsq = z * z
    elif z.shape[-1] == d:
        zsq = np.sum(z * z, axis=-1)
    else:
        raise DomainError(f"z has incompatible shape {z.shape} for d={d}")
    return (4.0 * np.pi * t) ** (-0.5 * d) * np.exp(-zsq / (4.0 * t))


def dirichlet_heat_kernel(p: KernelPoint):
    """Heat kernel on the half-space vanishing on the boundary (odd reflection)."""
    x = np.asarray(p.x, dtype=float)
    y = np.asarray(p.y, dtype=float)
    ystar = np.asarray(p.y_reflected, dtype=float)
    n = p.dim
    direct = float(np.sum((x - y) ** 2))
    mirror = float(np.sum((x - ystar) ** 2))
    pref = (4.0 * math.pi * p.t) ** (-0.5 * n)
    return pref * (math.exp(-direct / (4.0 * p.t)) - math.exp(-mirror / (4.0 * p.t)))


def dirichlet_kernel_dxn(p: KernelPoint):
    """x_N-derivative of the Dirichlet heat kernel.

    Factorizes as Gamma_{N-1}(x'-y', t) times a one-dimensional part
    built from (u / 2t) * Gamma_1(u, t) at u = x_N -+ y_N.
    """
    xp = np.asarray(p.x[:-1], dtype=float)
    yp = np.asarray(p.y[:-1], dtype=float)
    lateral = float(np.squeeze(gauss_kernel(p.dim - 1, xp - yp, p.t)))
    um = p.x[-1] - p.y[-1]
    up = p.x[-1] + p.y[-1]
    g1m = gauss_kernel(1, um, p.t)
    g1p = gauss_kernel(1, up, p.t)
    return lateral * (-um / (2.0 * p.t) * g1m + up / (2.0 * p.t) * g1p)


def _poisson_dim(x_prime) -> int:
    z = np.asarray(x_prime, dtype=float)
    if z.ndim == 0:
        return 2
    return z.shape[-1] + 1


def poisson_dyn_kernel(x_prime, x_N, t):
    """Poisson kernel of the dynamical boundary problem.

    Depends on x_N and t only through s = x_N + t:
    ``c_N * s^(1-N) * (1 + |x'/s|^2)^(-N/2)``, normalized to unit boundary
    integral for every s > 0.
    """
    n = _poisson_dim(x_prime)
    s = np.asarray(x_N, dtype=float) + np.asarray(t, dtype=float)
    if np.any(s <= 0.0):
        raise DomainError("x_N + t must be > 0 (the s = 0 kernel is the delta limit)")
    z = np.asarray(x_prime, dtype=float)
    rsq = z * z if z.ndim == 0 or n == 2 else np.sum(z * z, axis=-1)
    cn = normalization_constant(n)
    return cn * s ** (1 - n) * (1.0 + rsq / (s * s)) ** (-0.5 * n)


def poisson_dyn_kernel_dt(x_prime, x_N, t):
    """t-derivative of the Poisson kernel.

    Equals ``(1/s) * (|x'|^2 - (N-1) s^2) / (|x'|^2 + s^2) * P`` with
    s = x_N + t, so it is bounded by max(1, N-1) * P / s in absolute value.
    """
    n = _poisson_dim(x_prime)
    s = np.asarray(x_N, dtype=float) + np.asarray(t, dtype=float)
    if np.any(s <= 0.0):
        raise DomainError("x_N + t must be > 0")
    z = np.asarray(x_prime, dtype=float)
    rsq = z * z if z.ndim == 0 or n == 2 else np.sum(z * z, axis=-1)
    base = poisson_dyn_kernel(x_prime, x_N, t)
    return (rsq - (n - 1) * s * s) / (rsq + s * s) / s * base


def normalization_constant(N: int) -> float:
    """Constant c_N making the Poisson kernel integrate to 1 on R^{N-1}.

    Computed by radial quadrature of ``(1 + |z|^2)^(-N/2)`` over R^{N-1};
    memoized, and safe under concurrent first calls.
    """
    if N < 2:
        raise DomainError(f"dimension must be >= 2, got {N}")
    c = _cn_cache.get(N)
    if c is not None:
        return c
    with _cn_lock:
        c = _cn_cache.get(N)
        if c is None:
            if N == 2:
                mass, _ = integrate.quad(lambda z: (1.0 + z * z) ** (-1.0), -np.inf, np.inf)
            else:
                d = N - 1
                # surface area of the unit sphere S^{d-1}
                omega = 2.0 * math.pi ** (0.5 * d) / math.gamma(0.5 * d)
                mass, _ = integrate.quad(
                    lambda r: omega * r ** (d - 1) * (1.0 + r * r) ** (-0.5 * N),
                    0.0,
                    np.inf,
                )
            c = 1.0 / mass
            _cn_cache[N] = c
    return c
