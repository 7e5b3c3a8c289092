"""Centred differences on periodic rings of grid values.

The coarse models are built from three operators acting on a periodic
sequence of element amplitudes: the second difference ``delta2``, the fused
mean-difference ``mudelta`` (half the gap between the two neighbours), and
the fourth difference ``delta4`` (``delta2`` applied twice).  All three wrap
around, so a length-m sequence is treated as a ring.

On smooth samples s[j] = f(jH) the operators are consistent with
derivatives: delta2/H^2 -> f'' + O(H^2), mudelta/H -> f' + O(H^2), and the
combination delta2/H^2 - delta4/(12 H^2) -> f'' + O(H^4).
"""

from __future__ import annotations

import numpy as np

__all__ = ["delta2", "mudelta", "delta4"]


def delta2(s: np.ndarray) -> np.ndarray:
    """Second centred difference s[j+1] - 2 s[j] + s[j-1], periodic."""
    s = np.asarray(s, dtype=float)
    return np.roll(s, -1) - 2.0 * s + np.roll(s, 1)


def mudelta(s: np.ndarray) -> np.ndarray:
    """Fused mean-difference (s[j+1] - s[j-1]) / 2, periodic."""
    s = np.asarray(s, dtype=float)
    return 0.5 * (np.roll(s, -1) - np.roll(s, 1))


def delta4(s: np.ndarray) -> np.ndarray:
    """Fourth difference with stencil (1, -4, 6, -4, 1), periodic."""
    return delta2(delta2(s))
