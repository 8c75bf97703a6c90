"""Spectral windows: partition values over the generalized spectral values,
non-overlapping indicator windows, and overlapping raised-cosine windows.

All generators return a `WindowSet` whose P weight vectors form a partition
of unity over every spectral index.  Indices with lam == 0 (infinite
generalized value) always belong to window 1; indices with delta == 0
(zero generalized value) always belong to window P.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyWindowError
from .spectral import SpectralSystem

__all__ = [
    "WindowSet",
    "make_partitions",
    "indicator_windows",
    "cosine_windows",
    "trivial_window",
]

# Relative nudge applied below the smallest positive gamma so that the
# strict lower comparison still captures it.
_EDGE_NUDGE = 1e-12


@dataclass(frozen=True)
class WindowSet:
    """P weight vectors over n spectral indices forming a partition of unity."""

    P: int
    weights: np.ndarray  # shape (P, n), entries in [0, 1]
    kind: str
    partitions: np.ndarray  # P + 1 nonincreasing values

    @property
    def nonoverlapping(self) -> bool:
        w = self.weights
        return bool(np.all((w == 0.0) | (w == 1.0)))

    def member_indices(self, p: int) -> np.ndarray:
        """Indices with nonzero weight in window p (0-based)."""
        return np.flatnonzero(self.weights[p] > 0.0)

    def save_csv(self, path) -> None:
        """One row per window, one column per spectral index."""
        np.savetxt(path, self.weights, delimiter=",")


def _positive_finite_gamma(sys: SpectralSystem) -> np.ndarray:
    g = sys.gamma[~sys.lambda_zero]
    return g[g > 0.0]


def make_partitions(sys: SpectralSystem, P: int, spacing: str = "linear") -> np.ndarray:
    """P + 1 nonincreasing partition values spanning the finite gamma range.

    The first value equals the largest finite gamma; the last sits just below
    the smallest positive gamma so that upper-inclusive/lower-exclusive
    windowing captures every index.  Spacing is linear or logarithmic.
    """
    if P < 1:
        raise ValueError(f"window count must be at least 1, got {P}")
    if spacing not in ("linear", "log"):
        raise ValueError(f"spacing must be 'linear' or 'log', got {spacing!r}")
    g = _positive_finite_gamma(sys)
    if g.size == 0:
        raise EmptyWindowError("no positive finite spectral values to partition")
    gmax = float(g.max())
    gmin = float(g.min())
    if P >= np.unique(g).size:
        raise EmptyWindowError(
            f"empty window: {P} windows over {np.unique(g).size} distinct values")
    if spacing == "linear":
        parts = np.linspace(gmax, gmin, P + 1)
    else:
        parts = np.geomspace(gmax, gmin, P + 1)
    parts[-1] = gmin * (1.0 - _EDGE_NUDGE)
    return parts


def _validate_partitions(partitions: np.ndarray) -> np.ndarray:
    parts = np.asarray(partitions, dtype=float)
    if parts.ndim != 1 or parts.size < 2:
        raise ValueError("partitions must be a 1D array of at least two values")
    if np.any(np.diff(parts) > 0.0):
        raise ValueError("partitions must be nonincreasing")
    return parts


def _check_nonempty(weights: np.ndarray) -> None:
    empty = np.flatnonzero(weights.max(axis=1) == 0.0)
    if empty.size:
        raise EmptyWindowError(f"empty window: window {empty[0] + 1} has no weight")


def indicator_windows(partitions: np.ndarray, sys: SpectralSystem,
                      spacing: str = "linear") -> WindowSet:
    """Non-overlapping 0/1 windows: index j lands in window p when
    partitions[p-1] >= gamma[j] > partitions[p]."""
    parts = _validate_partitions(partitions)
    P = parts.size - 1
    n = sys.n
    weights = np.zeros((P, n))
    inf_mask = sys.lambda_zero
    zero_mask = (~inf_mask) & (sys.gamma == 0.0)
    mid = ~(inf_mask | zero_mask)
    g = sys.gamma[mid]
    # np.searchsorted over the ascending reversed partitions: count of interior
    # partition values >= gamma gives the 0-based window index.
    asc = parts[::-1]
    pos = np.searchsorted(asc, g, side="left")  # values strictly below asc[pos]
    widx = np.clip(P - pos, 0, P - 1)
    cols = np.flatnonzero(mid)
    weights[widx, cols] = 1.0
    weights[0, inf_mask] = 1.0
    weights[P - 1, zero_mask] = 1.0
    _check_nonempty(weights)
    return WindowSet(P=P, weights=weights, kind=f"nonoverlap_{spacing}",
                     partitions=parts)


def cosine_windows(partitions: np.ndarray, sys: SpectralSystem,
                   spacing: str = "linear") -> WindowSet:
    """Overlapping raised-cosine windows with exact pairwise complementarity.

    Transitions between windows p and p+1 span the band between the
    midpoints of the two adjacent partition cells (computed in log coordinates
    for log spacing); inside the band window p carries cos(theta)**2 and
    window p+1 carries 1 - cos(theta)**2, so the partition of unity is exact.
    """
    parts = _validate_partitions(partitions)
    P = parts.size - 1
    n = sys.n
    if P == 1:
        weights = np.ones((1, n))
        return WindowSet(P=1, weights=weights, kind=f"cosine_{spacing}",
                         partitions=parts)
    if spacing == "log":
        if np.any(parts <= 0.0):
            raise ValueError("log spacing needs positive partition values")
        coord_parts = np.log(parts)
    else:
        coord_parts = parts
    mids = 0.5 * (coord_parts[:-1] + coord_parts[1:])  # cell midpoints, decreasing

    weights = np.zeros((P, n))
    inf_mask = sys.lambda_zero
    zero_mask = (~inf_mask) & (sys.gamma == 0.0)
    mid = ~(inf_mask | zero_mask)
    g = sys.gamma[mid]
    t = np.log(g) if spacing == "log" else g
    cols = np.flatnonzero(mid)

    hi = t >= mids[0]
    lo = t <= mids[-1]
    band = ~(hi | lo)
    weights[0, cols[hi]] = 1.0
    weights[P - 1, cols[lo]] = 1.0
    if np.any(band):
        tb = t[band]
        cb = cols[band]
        # mids[p] >= t > mids[p+1]: transition between windows p and p+1
        p = np.searchsorted(-mids, -tb, side="right") - 1
        theta = 0.5 * np.pi * (mids[p] - tb) / (mids[p] - mids[p + 1])
        c2 = np.cos(theta) ** 2
        weights[p, cb] = c2
        weights[p + 1, cb] = 1.0 - c2
    weights[0, inf_mask] = 1.0
    weights[P - 1, zero_mask] = 1.0
    _check_nonempty(weights)
    return WindowSet(P=P, weights=weights, kind=f"cosine_{spacing}",
                     partitions=parts)


def trivial_window(sys: SpectralSystem) -> WindowSet:
    """The single all-ones window (scalar regularization as a window set)."""
    g = _positive_finite_gamma(sys)
    if g.size:
        parts = np.array([float(g.max()), float(g.min()) * (1.0 - _EDGE_NUDGE)])
    else:
        parts = np.array([1.0, 0.0])
    return WindowSet(P=1, weights=np.ones((1, sys.n)), kind="nonoverlap_linear",
                     partitions=parts)
