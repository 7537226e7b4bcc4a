"""Axis-aligned rectangular observation windows and their set geometry.

The composite likelihood normalizer needs the set covariance
gamma_D(u) = |D ∩ (D - u)|, which for a rectangle is the product of the
clipped side overlaps.  Containment is half-open (lower-inclusive,
upper-exclusive) so that tilings never double-count points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyErosion


@dataclass(frozen=True)
class RectWindow:
    """Rectangle prod_i [lower_i, upper_i) in R^d."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi):
            raise ValueError("lower and upper must have the same dimension")
        if not all(h > l for l, h in zip(lo, hi)):
            raise ValueError(f"degenerate window: lower={lo}, upper={hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def sides(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    @classmethod
    def square(cls, n: float, dim: int = 2) -> "RectWindow":
        """[0, n]^dim, the corner-anchored window used in the experiments."""
        return cls((0.0,) * dim, (float(n),) * dim)


def area(w: RectWindow) -> float:
    """Lebesgue measure of the window."""
    return float(np.prod(w.sides))


def set_covariance(w: RectWindow, u) -> float:
    """gamma_D(u) = |D ∩ (D - u)| = prod_i (side_i - |u_i|)_+ ."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    overlap = np.clip(w.sides - np.abs(u), 0.0, None)
    return float(np.prod(overlap))


def set_covariance_grid(w: RectWindow, u: np.ndarray) -> np.ndarray:
    """Vectorized set covariance for an (n, d) array of lags."""
    u = np.asarray(u, dtype=float)
    overlap = np.clip(w.sides[None, :] - np.abs(u), 0.0, None)
    return np.prod(overlap, axis=1)


def erode(w: RectWindow, r: float) -> RectWindow:
    """Shrink the window by r on every side.

    Raises EmptyErosion when r reaches half the shortest side.
    """
    if r < 0:
        raise ValueError("erosion radius must be nonnegative")
    if r == 0:
        return w
    if 2.0 * r >= float(np.min(w.sides)):
        raise EmptyErosion(f"erosion by {r} empties a window with sides {tuple(w.sides)}")
    lo = tuple(l + r for l in w.lower)
    hi = tuple(h - r for h in w.upper)
    return RectWindow(lo, hi)


def contains(w: RectWindow, x) -> bool:
    """Half-open membership test: lower-inclusive, upper-exclusive."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return bool(np.all(x >= np.asarray(w.lower)) and np.all(x < np.asarray(w.upper)))


def contains_points(w: RectWindow, x: np.ndarray) -> np.ndarray:
    """Vectorized half-open membership for an (n, d) array."""
    x = np.asarray(x, dtype=float)
    lo = np.asarray(w.lower)
    hi = np.asarray(w.upper)
    return np.all((x >= lo) & (x < hi), axis=1)
