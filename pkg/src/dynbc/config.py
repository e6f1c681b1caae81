"""Run configuration: defaults, file loading, flag overrides, validation.

The config is a single JSON document; unknown keys are rejected so typos
cannot silently fall back to defaults.  Command-line flags override file
keys, and the DYNBC_OUT environment variable overrides the output
directory (flags still win over the environment).
"""

from __future__ import annotations

import copy
import json
import logging

import numpy as np

from .errors import DomainError
from .grid import HalfSpaceGrid, InitialData
from .solver import SolverConfig

log = logging.getLogger("dynbc")

DEFAULTS = {
    "problem": {
        "N": 2,
        "phi": "constant",
        "phi_b": "cauchy_boundary",
        "eps": 0.01,
        "horizon": 0.5,
    },
    "grid": {
        "R_prime": 12.0,
        "L": 6.0,
        "n_prime": 129,
        "n_depth": 65,
        "guard": 8.0,
    },
    "quadrature": {
        "tol": 1e-6,
        "duhamel_nodes": 64,
    },
    "solver": {
        "duhamel_nodes": 24,
        "picard_tol": 1e-7,
        "max_iter": 50,
        "t_min": 1e-6,
    },
    "sweep": {
        "eps_values": [0.1, 0.03, 0.01, 0.003, 0.001],
        "functionals": ["thm_b_strip", "thm_c_wgap", "cor_u_gap", "lem24_dxn", "d_eps_norm"],
        "window": [0.1, 0.5],
        "k_lateral": 1.0,
        "k_depth": 1.0,
        "strip_depth": 1.0,
        "t_small": 0.01,
        "floor": 1e-6,
        "bands": {"thm_c_wgap": [0.35, 0.65]},
        "max_fit_residual": 0.1,
    },
    "oracle": {
        "dt": 0.002,
        "gap_tol": 0.05,
    },
    "outputs": {
        "dir": "out",
        "persist_fields": True,
    },
    "seed": 1234,
    "threads": 1,
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise DomainError(f"unknown config key: {where}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise DomainError(f"config key {where} must be a table")
            out[key] = _merge(base[key], val, where)
        else:
            out[key] = val
    return out


def load_config(path: str | None = None) -> dict:
    """Effective config: defaults overridden by the (optional) JSON file."""
    if path is None:
        return copy.deepcopy(DEFAULTS)
    try:
        with open(path) as fh:
            user = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DomainError(f"cannot read config {path}: {exc}")
    if not isinstance(user, dict):
        raise DomainError("config root must be a JSON object")
    return _merge(DEFAULTS, user)


def config_text(cfg: dict) -> str:
    """Canonical rendering of the effective config (reproducibility record)."""
    return json.dumps(cfg, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# built-in data library

def _gaussian_phi(xp, xn):
    return np.exp(-(np.asarray(xp, dtype=float) ** 2 + xn * xn))


def _gaussian_b(xp):
    return np.exp(-np.asarray(xp, dtype=float) ** 2)


def _cauchy_b(xp):
    return 1.0 / (1.0 + np.asarray(xp, dtype=float) ** 2)


_INTERIOR = {
    "gaussian_bump": (_gaussian_phi, 0.0, 1.0),
    "constant": (lambda xp, xn: np.ones_like(np.asarray(xp, dtype=float)), 1.0, 1.0),
    "zero": (lambda xp, xn: np.zeros_like(np.asarray(xp, dtype=float)), 0.0, 0.0),
}

_BOUNDARY = {
    "gaussian_bump": (_gaussian_b, 0.0, 1.0),
    "cauchy_boundary": (_cauchy_b, 0.0, 1.0),
    "constant": (lambda xp: np.ones_like(np.asarray(xp, dtype=float)), 1.0, 1.0),
    "zero": (lambda xp: np.zeros_like(np.asarray(xp, dtype=float)), 0.0, 0.0),
}


def data_from_names(phi_name: str, phi_b_name: str) -> InitialData:
    if phi_name not in _INTERIOR:
        raise DomainError(f"unknown interior data {phi_name!r}; choose from {sorted(_INTERIOR)}")
    if phi_b_name not in _BOUNDARY:
        raise DomainError(f"unknown boundary data {phi_b_name!r}; choose from {sorted(_BOUNDARY)}")
    phi, phi_far, phi_sup = _INTERIOR[phi_name]
    phib, phib_far, phib_sup = _BOUNDARY[phi_b_name]
    return InitialData(phi, phib, phi_far, phib_far, phi_sup, phib_sup)


def grid_from_config(cfg: dict) -> HalfSpaceGrid:
    g = cfg["grid"]
    grid = HalfSpaceGrid(g["R_prime"], g["L"], g["n_prime"], g["n_depth"], N=cfg["problem"]["N"])
    eps_min = min(cfg["sweep"]["eps_values"] + [cfg["problem"]["eps"]])
    diffusive = 6.0 * np.sqrt(cfg["problem"]["horizon"] / eps_min)
    if grid.L < diffusive:
        log.warning(
            "depth truncation L=%.3g caps the diffusive scale %.3g "
            "(eps=%.3g, horizon=%.3g); deep tails rely on the kernel decay",
            grid.L,
            diffusive,
            eps_min,
            cfg["problem"]["horizon"],
        )
    return grid


def solver_config_from(cfg: dict) -> SolverConfig:
    s = cfg["solver"]
    return SolverConfig(
        duhamel_nodes=s["duhamel_nodes"],
        picard_tol=s["picard_tol"],
        max_iter=s["max_iter"],
        t_min=s["t_min"],
        guard=cfg["grid"]["guard"],
    )
