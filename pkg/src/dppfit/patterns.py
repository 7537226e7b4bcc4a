"""Point-pattern container, close-pair and close-tuple enumeration, CSV I/O.

Pair and tuple enumeration are ordered throughout: both (i, j) and (j, i)
are reported, matching a sum over ordered configurations of distinct
points.  The support of the order-p weight constrains only the distances
from the anchor x_1 to the other members, not all pairwise distances.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from itertools import permutations
from pathlib import Path

import numpy as np

from . import geometry
from .errors import PatternFormatError
from .geometry import RectWindow

TUPLE_ORDER_CAP = 4


@dataclass(frozen=True)
class PointPattern:
    """A finite point configuration observed in a rectangular window."""

    points: np.ndarray
    window: RectWindow

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, self.window.dim)
        if pts.ndim != 2 or pts.shape[1] != self.window.dim:
            raise ValueError(
                f"points must be (n, {self.window.dim}), got shape {pts.shape}"
            )
        inside = geometry.contains_points(self.window, pts)
        if not np.all(inside):
            bad = pts[~inside][0]
            raise ValueError(f"point {tuple(bad)} outside window")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


def count(pattern: PointPattern) -> int:
    return len(pattern)


class _Grid:
    """Uniform bucketing with cell size equal to the query radius."""

    def __init__(self, points: np.ndarray, window: RectWindow, r: float):
        self.points = points
        self.r = r
        self.lower = np.asarray(window.lower)
        self.cells = defaultdict(list)
        keys = np.floor((points - self.lower) / r).astype(np.int64)
        for idx, key in enumerate(map(tuple, keys)):
            self.cells[key].append(idx)
        self.keys = keys
        d = points.shape[1]
        self.offsets = list(np.ndindex(*(3,) * d))

    def neighbors(self, i: int) -> np.ndarray:
        """Indices j != i with |x_i - x_j| <= r."""
        key = self.keys[i]
        cand = []
        for off in self.offsets:
            cand.extend(self.cells.get(tuple(key + np.asarray(off) - 1), ()))
        cand = np.asarray(cand, dtype=np.int64)
        cand = cand[cand != i]
        if cand.size == 0:
            return cand
        d = np.linalg.norm(self.points[cand] - self.points[i], axis=1)
        return cand[d <= self.r]


def close_pairs(pattern: PointPattern, r: float) -> np.ndarray:
    """All ordered index pairs (i, j), i != j, with |x_i - x_j| <= r.

    Returns an (m, 2) integer array; m is even by the ordered symmetry.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    pts = pattern.points
    n = len(pattern)
    if n < 2:
        return np.empty((0, 2), dtype=np.int64)
    grid = _Grid(pts, pattern.window, r)
    out = []
    for i in range(n):
        for j in grid.neighbors(i):
            out.append((i, j))
    if not out:
        return np.empty((0, 2), dtype=np.int64)
    return np.asarray(out, dtype=np.int64)


def pair_distances(pattern: PointPattern, r: float):
    """Ordered close pairs together with their distances: ((m,2) idx, (m,) d)."""
    pairs = close_pairs(pattern, r)
    if len(pairs) == 0:
        return pairs, np.empty(0)
    d = np.linalg.norm(pattern.points[pairs[:, 0]] - pattern.points[pairs[:, 1]], axis=1)
    return pairs, d


def close_tuples(pattern: PointPattern, r: float, order: int, allow_large: bool = False) -> np.ndarray:
    """Ordered p-tuples of distinct indices with |x_1 - x_j| <= r for j >= 2.

    Only the anchor distances are constrained.  Orders above
    TUPLE_ORDER_CAP are refused unless allow_large is set.
    """
    if order < 2:
        raise ValueError("tuple order must be >= 2")
    if order > TUPLE_ORDER_CAP and not allow_large:
        raise ValueError(
            f"order {order} above cap {TUPLE_ORDER_CAP}; pass allow_large=True to override"
        )
    if order == 2:
        return close_pairs(pattern, r)
    pts = pattern.points
    n = len(pattern)
    if n < order:
        return np.empty((0, order), dtype=np.int64)
    grid = _Grid(pts, pattern.window, r)
    out = []
    for anchor in range(n):
        nbrs = grid.neighbors(anchor)
        if len(nbrs) < order - 1:
            continue
        for tail in permutations(nbrs.tolist(), order - 1):
            out.append((anchor,) + tail)
    if not out:
        return np.empty((0, order), dtype=np.int64)
    return np.asarray(out, dtype=np.int64)


def write_csv(pattern: PointPattern, path) -> None:
    """Write points as 'x,y' rows plus a window sidecar '<path>.json'."""
    path = Path(path)
    header = ",".join("xyzw"[i] if i < 4 else f"c{i}" for i in range(pattern.window.dim))
    lines = [header]
    for row in pattern.points:
        lines.append(",".join(format(v, ".17g") for v in row))
    path.write_text("\n".join(lines) + "\n")
    sidecar = {"window": {"lower": list(pattern.window.lower), "upper": list(pattern.window.upper)}}
    _sidecar_path(path).write_text(json.dumps(sidecar, indent=2) + "\n")


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(path.suffix + ".json") if path.suffix != ".json" else path


def read_csv(path, window: RectWindow | None = None) -> PointPattern:
    """Read a pattern written by write_csv.

    The window comes from the sidecar JSON unless given explicitly.
    Malformed rows raise PatternFormatError with the line number; points
    outside the declared window raise PatternFormatError as well.
    """
    path = Path(path)
    if window is None:
        sidecar = _sidecar_path(path)
        if not sidecar.exists():
            raise PatternFormatError(f"no window given and no sidecar {sidecar}")
        spec = json.loads(sidecar.read_text())
        window = RectWindow(tuple(spec["window"]["lower"]), tuple(spec["window"]["upper"]))
    rows = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if lineno == 1:
                continue  # header
            parts = line.split(",")
            if len(parts) != window.dim:
                raise PatternFormatError(
                    f"expected {window.dim} fields, got {len(parts)}", line=lineno
                )
            try:
                rows.append([float(v) for v in parts])
            except ValueError:
                raise PatternFormatError(f"non-numeric field in {parts}", line=lineno)
            if not geometry.contains(window, rows[-1]):
                raise PatternFormatError(
                    f"point {tuple(rows[-1])} outside declared window", line=lineno
                )
    pts = np.asarray(rows, dtype=float) if rows else np.empty((0, window.dim))
    return PointPattern(pts, window)


def empirical_pcf(pattern: PointPattern, bins) -> dict:
    """Binned translation-corrected pair correlation estimate.

    g_hat(bin) = sum over ordered close pairs with distance in the bin of
    1 / gamma_D(x_i - x_j), divided by lambda_hat^2 times the annulus
    measure of the bin.  Empty bins are reported as None.
    """
    bins = np.asarray(bins, dtype=float)
    if bins.ndim != 1 or len(bins) < 2:
        raise ValueError("bins must be a 1-d array of at least two edges")
    n = len(pattern)
    if n < 2:
        raise ValueError("need at least 2 points for a pair correlation")
    lam_hat = n / geometry.area(pattern.window)
    rmax = float(bins[-1])
    pairs, d = pair_distances(pattern, rmax)
    centers = 0.5 * (bins[:-1] + bins[1:])
    if pattern.window.dim != 2:
        raise NotImplementedError("empirical_pcf is implemented for d = 2")
    annulus = np.pi * (bins[1:] ** 2 - bins[:-1] ** 2)
    values = []
    for lo, hi, meas in zip(bins[:-1], bins[1:], annulus):
        mask = (d >= lo) & (d < hi)
        if not np.any(mask):
            values.append(None)
            continue
        lags = pattern.points[pairs[mask, 0]] - pattern.points[pairs[mask, 1]]
        gamma = geometry.set_covariance_grid(pattern.window, lags)
        values.append(float(np.sum(1.0 / gamma) / (lam_hat**2 * meas)))
    return {"centers": centers, "edges": bins, "g": values}
