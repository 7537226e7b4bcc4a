"""Shared numerical integration helpers: Gauss-Legendre grids on disks and
Sobol low-discrepancy sampling of disk/window regions.

The composite likelihood normalizer and the asymptotic variance blocks all
reduce to radial integrals of smooth functions of the correlation, so the
work space here is polar Gauss-Legendre with the angular factor folded into
per-radius weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.stats import qmc

from .geometry import RectWindow

GL_NODES = 64  # default Gauss-Legendre nodes per axis


@lru_cache(maxsize=32)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def gauss_legendre(a: float, b: float, n: int = GL_NODES):
    """Nodes and weights on [a, b]."""
    x, w = _leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


@dataclass(frozen=True)
class DiskRule:
    """Polar Gauss-Legendre rule for integrals over the disk |u| <= r.

    For radial f:       int f(|u|) du            =  sum(plain * f(radii))
    With set covariance: int gamma_D(u) f(|u|) du = sum(weighted * f(radii))

    The angular integral of gamma_D over each circle is folded into
    `weighted` (exact for rectangles: gamma is analytic per quadrant).
    """

    radii: np.ndarray      # (n,)
    plain: np.ndarray      # (n,) weights for the window-free integral
    weighted: np.ndarray   # (n,) weights carrying gamma_D

    @property
    def ball_volume(self) -> float:
        return float(self.plain.sum())


def disk_rule(r: float, window: RectWindow | None = None, n: int = GL_NODES) -> DiskRule:
    """Build the polar rule of radius r, optionally folding gamma_D of window."""
    if r <= 0:
        raise ValueError("radius must be positive")
    rho, w_rho = gauss_legendre(0.0, r, n)
    plain = 2.0 * np.pi * w_rho * rho
    if window is None:
        return DiskRule(rho, plain, plain.copy())
    if window.dim != 2:
        raise NotImplementedError("disk rules are implemented for d = 2")
    phi, w_phi = gauss_legendre(0.0, np.pi / 2.0, n)
    # gamma_D is even in each coordinate: integrate one quadrant, times 4
    u1 = rho[:, None] * np.cos(phi)[None, :]
    u2 = rho[:, None] * np.sin(phi)[None, :]
    sides = window.sides
    gamma = np.clip(sides[0] - u1, 0.0, None) * np.clip(sides[1] - u2, 0.0, None)
    angular = 4.0 * (gamma * w_phi[None, :]).sum(axis=1)
    weighted = w_rho * rho * angular
    return DiskRule(rho, plain, weighted)


def sobol_points(dim: int, n: int, seed: int) -> np.ndarray:
    """n scrambled Sobol points in [0,1)^dim (n rounded up to a power of two)."""
    m = int(np.ceil(np.log2(max(n, 2))))
    eng = qmc.Sobol(d=dim, scramble=True, seed=seed)
    return eng.random_base2(m)[:n]


def unit_to_disk(u01: np.ndarray, r: float) -> np.ndarray:
    """Map (n, 2) unit-square points to the disk of radius r (area-preserving)."""
    rho = r * np.sqrt(u01[:, 0])
    phi = 2.0 * np.pi * u01[:, 1]
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi)])


def unit_to_window(u01: np.ndarray, window: RectWindow) -> np.ndarray:
    lo = np.asarray(window.lower)
    return lo + u01 * window.sides


@dataclass
class QmcEstimate:
    """Mean of a QMC integral with a replicate-based standard error."""

    value: np.ndarray
    std_error: np.ndarray
    n_points: int

    @property
    def rel_error(self) -> float:
        scale = np.max(np.abs(self.value))
        if scale == 0:
            return float(np.max(self.std_error))
        return float(np.max(self.std_error) / scale)


def qmc_mean(integrand, dim: int, n_total: int, seed: int, n_rep: int = 8) -> QmcEstimate:
    """Average `integrand` over [0,1)^dim using n_rep independently scrambled
    Sobol replicates; the spread of replicate means gives the error estimate.

    integrand maps an (n, dim) array to an (n,) or (n, k) array.
    """
    n_each = max(int(n_total // n_rep), 2)
    means = []
    for i in range(n_rep):
        pts = sobol_points(dim, n_each, seed + 7919 * i)
        vals = np.asarray(integrand(pts), dtype=float)
        means.append(vals.mean(axis=0))
    means = np.asarray(means)
    value = means.mean(axis=0)
    se = means.std(axis=0, ddof=1) / np.sqrt(n_rep)
    return QmcEstimate(value, se, n_each * n_rep)
