"""Simulation of stationary DPPs on rectangles via Fourier spectral
approximation, plus a Poisson baseline.

The kernel lambda C_alpha(x - y) is approximated on the window by the
periodic expansion with eigenfunctions exp(2 pi i k.x / L) / sqrt(|D|),
k in Z^d, and eigenvalue equal to the spectral density at k / L.  Sampling
is the classical two-stage scheme: an independent Bernoulli draw per mode
selects a finite projection kernel, and the projection DPP is sampled
sequentially, each point by rejection from the uniform proposal with the
exact bound (#modes)/|D| on the residual density.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import SamplerStall, TruncationFailure
from .geometry import RectWindow
from .kernels import KernelModel, Theta, check_existence, spectral_density_radial
from .patterns import PointPattern

DEFAULT_TAIL_TOL = 1e-3
DEFAULT_MODE_CAP = 256
STALL_CAP = int(1e7)


@dataclass(frozen=True)
class RngStream:
    """Counter-based stream: (seed, stream_id) fixes the output bit-exactly."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence((int(self.seed), int(self.stream_id)))
        return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SpectralApprox:
    """Truncated Fourier eigendecomposition of a stationary kernel."""

    window: RectWindow
    modes: np.ndarray        # (m, d) integer index vectors
    eigenvalues: np.ndarray  # (m,) in [0, 1]
    truncation_order: int    # max |k_i| over kept modes
    tail_mass: float         # expected points lost to truncation

    @property
    def expected_points(self) -> float:
        return float(self.eigenvalues.sum())


def _mode_box(half_width: int, dim: int) -> np.ndarray:
    axes = [np.arange(-half_width, half_width + 1, dtype=np.int32)] * dim
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1)


def build_spectral_approx(
    model: KernelModel,
    theta: Theta,
    window: RectWindow,
    tail_tol: float = DEFAULT_TAIL_TOL,
    max_modes: int = DEFAULT_MODE_CAP,
) -> SpectralApprox:
    """Smallest radially trimmed mode set whose eigenvalue mass is within
    tail_tol of lambda |D|.

    Raises ExistenceViolated for an invalid kernel and TruncationFailure
    when max_modes (the cap on max |k_i|) is insufficient.
    """
    if not (0.0 < tail_tol <= 0.1):
        raise ValueError(f"tail_tol must lie in (0, 0.1], got {tail_tol}")
    check_existence(model, theta)
    sides = window.sides
    target = theta.lam * geometry.area(window)
    half = 16
    while True:
        half = min(half, max_modes)
        ks = _mode_box(half, window.dim)
        rho = np.linalg.norm(ks / sides, axis=1)
        eig = spectral_density_radial(model, theta, rho)
        deficit = target - float(eig.sum())
        if deficit <= tail_tol * target:
            break
        if half >= max_modes:
            raise TruncationFailure(
                f"mode cap {max_modes} leaves tail fraction "
                f"{deficit / target:.3g} > {tail_tol:.3g}"
            )
        half *= 2
    # trim to the smallest frequency radius that still meets the tolerance
    order = np.argsort(rho, kind="stable")
    csum = np.cumsum(eig[order])
    cut = int(np.searchsorted(csum, (1.0 - tail_tol) * target))
    cut = min(cut, len(order) - 1)
    rho_cut = rho[order[cut]]
    keep = rho <= rho_cut
    modes = ks[keep]
    eigenvalues = np.clip(eig[keep], 0.0, 1.0)
    tail_mass = max(target - float(eigenvalues.sum()), 0.0)
    return SpectralApprox(
        window=window,
        modes=modes,
        eigenvalues=eigenvalues,
        truncation_order=int(np.max(np.abs(modes))) if len(modes) else 0,
        tail_mass=tail_mass,
    )


def sample_dpp(approx: SpectralApprox, rng: RngStream) -> PointPattern:
    """Draw one realization of the truncated-kernel DPP.

    Bernoulli thinning of the eigenvalues selects the active modes; the
    resulting projection DPP is sampled by sequential conditioning with
    rejection from the uniform proposal.  Output is a pure function of
    (approx, rng).

    Proposals are drawn in pools: each proposal is consumed at most once,
    its squared projection onto the accepted basis is maintained
    incrementally, and the accept/reject scan is vectorized.  This changes
    nothing about the sampled law, only the evaluation order.
    """
    gen = rng.generator()
    window = approx.window
    sides = window.sides
    lower = np.asarray(window.lower)
    vol = geometry.area(window)
    active = gen.random(len(approx.eigenvalues)) < approx.eigenvalues
    freq = approx.modes[active].astype(float) / sides
    m = freq.shape[0]
    d = window.dim
    if m == 0:
        return PointPattern(np.empty((0, d)), window)
    inv_sqrt_vol = 1.0 / np.sqrt(vol)
    unit_mass = m / vol  # sup of the residual density, fixed over steps
    # column j holds conj(e_j); Fortran order so basis[:, :i] is a BLAS view
    basis = np.empty((m, m), dtype=np.complex128, order="F")
    pts = np.empty((m, d))
    freq_t = np.ascontiguousarray(freq.T)

    def fresh_rows(size: int, n_basis: int):
        """Draw proposals with features and exact projection mass."""
        x_new = lower + gen.random((size, d)) * sides
        phase = (2.0 * np.pi) * (x_new @ freq_t)
        f_new = (np.cos(phase) + 1j * np.sin(phase)) * inv_sqrt_vol
        u_new = gen.random(size)
        if n_basis:
            coeff = f_new @ basis[:, :n_basis]
            s_new = np.einsum("bi,bi->b", coeff, coeff.conj()).real
        else:
            s_new = np.zeros(size)
        return x_new, f_new, u_new, s_new

    # rolling proposal buffer: rows are consumed in order, tested exactly
    # once against the residual density current at their turn; survivors
    # carry a rank-one projection update per accepted point
    xs = np.empty((0, d))
    feats = np.empty((0, m), dtype=np.complex128)
    us = np.empty(0)
    smass = np.empty(0)
    pos = 0
    grow = 1
    total_proposals = 0
    for i in range(m):
        while True:
            if pos == len(us):
                block = grow * max(32, int(1.2 * m / (m - i)) + 1)
                x_new, f_new, u_new, s_new = fresh_rows(block, i)
                xs, feats, us, smass = x_new, f_new, u_new, s_new
                pos = 0
            accept = us[pos:] < (unit_mass - smass[pos:]) * vol / m
            hit = int(np.argmax(accept)) if accept.any() else -1
            if hit < 0:
                total_proposals += len(accept)
                if total_proposals > STALL_CAP:
                    raise SamplerStall(
                        f"no acceptance after {total_proposals} proposals at point {i}"
                    )
                pos = len(us)
                grow = min(2 * grow, 256)
                continue
            grow = 1
            t = pos + hit
            total_proposals += hit + 1
            vec = feats[t].copy()
            if i:
                # twice-is-enough Gram-Schmidt against the accepted basis;
                # with columns storing conj(e_j): w = v - conj(B c*) for c = v.B
                head = basis[:, :i]
                vec -= np.conj(head @ np.conj(vec @ head))
                vec -= np.conj(head @ np.conj(vec @ head))
            np.conj(vec / np.linalg.norm(vec), out=basis[:, i])
            pts[i] = xs[t]
            pos = t + 1
            if pos < len(us) and i + 1 < m:
                smass[pos:] += np.abs(feats[pos:] @ basis[:, i]) ** 2
            break
    return PointPattern(pts, window)


def sample_poisson(lam: float, window: RectWindow, rng: RngStream) -> PointPattern:
    """Homogeneous Poisson baseline (the C = 0 limit of the DPP)."""
    if lam < 0:
        raise ValueError("intensity must be nonnegative")
    gen = rng.generator()
    n = gen.poisson(lam * geometry.area(window))
    pts = np.asarray(window.lower) + gen.random((n, window.dim)) * window.sides
    return PointPattern(pts, window)
