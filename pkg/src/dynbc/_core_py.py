"""Pure-NumPy implementation of the hot lattice-convolution kernels.

Mirrors the compiled extension ``dynbc._core``.  ``dynbc.backend`` selects
between the two at import time.  Both operate on pre-padded row arrays:
``fpad`` has shape (rows, n_out + taps - 1) and the output entry (r, i) is
the dot product of the taps with ``fpad[r, i : i + taps]``.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def apply_shared(taps, fpad):
    """Correlate every row with one shared tap vector."""
    win = sliding_window_view(fpad, taps.shape[0], axis=1)
    return win @ taps


def apply_banked(taps, fpad):
    """Correlate row r with its own tap vector taps[r]."""
    win = sliding_window_view(fpad, taps.shape[1], axis=1)
    return np.einsum("rik,rk->ri", win, taps)


def apply_bank_outer(taps, fpad):
    """Correlate every input row with every bank row: (rows_in, rows_bank, n_out)."""
    win = sliding_window_view(fpad, taps.shape[1], axis=1)
    return np.einsum("mik,rk->mri", win, taps)
