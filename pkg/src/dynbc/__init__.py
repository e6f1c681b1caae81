"""Half-space heat flow with a dynamical boundary condition.

Constructs the mild solution pair (v, w) of

    eps * du/dt = Laplace(u)        in the half-space,
    du/dt + d(u)/d(nu) = 0          on the boundary,

by kernel quadrature and Picard iteration, provides the limit evolution
driven purely by the boundary dynamics, and verifies the large-diffusion
limit with fitted convergence rates.
"""

from .backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
