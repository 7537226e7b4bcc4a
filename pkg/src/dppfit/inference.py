"""Plug-in asymptotic covariance of the two-step estimator and the
composite-likelihood information criterion.

All blocks use the limiting (window-free) form of the score integrand

    U2(u; alpha) = d/d alpha log(1 - C_alpha(|u|)^2) - A'(alpha) / A(alpha),
    A(alpha)     = int_{|u| <= r} (1 - C_alpha(u)^2) du,

supported on the ball |u| <= r.  The variance of the normalized score is
assembled from the factorial-moment expansion of an ordered double sum of
a symmetric pair statistic,

    Sigma22 = 2 * int U2^2 rho2 + 4 * int U2 U2 rho3 + int U2 (x) U2 rho4_c,

where rho4_c subtracts the disconnected product rho2 (x) rho2, making the
four-point term absolutely integrable; its free argument is truncated at
2r plus the radius where the correlation decays below 1e-3, extended by
annuli until the neglected shell is negligible.  Rotation invariance
reduces every three-point integral to three dimensions, evaluated by a
tensor rule (Gauss-Legendre radii x uniform periodic angle), so only the
four-point term needs QMC; it is small in the weakly repulsive regime and
is averaged over independently scrambled Sobol blocks large enough for an
honest error estimate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import geometry, kernels
from .errors import DppfitError, ICUnreliable, InfoNotPD, Sigma22Imprecise
from .estimator import FitResult
from .geometry import RectWindow
from .kernels import KernelModel, Theta
from .quadrature import disk_rule, unit_to_disk

SIGMA_QMC_POINTS = 1 << 17
SIGMA_QMC_SEED = 0xC0FFEE
SIGMA_REL_TARGET = 0.05
ANGLE_NODES = 256
Z_95 = 1.959963984540054


class U2Radial:
    """Radial score integrand U2 and its alpha-derivative on |u| <= r."""

    def __init__(self, model: KernelModel, alpha: float, r: float):
        self.model = model
        self.alpha = float(alpha)
        self.r = float(r)
        self.rule = disk_rule(r)
        c = kernels.corr_radial(model, alpha, self.rule.radii)
        dc = kernels.corr_radial_deriv(model, alpha, self.rule.radii)
        d2c = kernels.corr_radial_deriv2(model, alpha, self.rule.radii)
        dets = 1.0 - c * c
        self.A = float(self.rule.plain @ dets)
        self.dA = float(self.rule.plain @ (-2.0 * c * dc))
        self.d2A = float(self.rule.plain @ (-2.0 * (dc * dc + c * d2c)))

    def u2(self, s) -> np.ndarray:
        """U2 at distances s (zero outside the ball radius)."""
        s = np.asarray(s, dtype=float)
        c = kernels.corr_radial(self.model, self.alpha, s)
        dc = kernels.corr_radial_deriv(self.model, self.alpha, s)
        dets = 1.0 - c * c
        with np.errstate(divide="ignore", invalid="ignore"):
            grad = np.where(dets > 0, -2.0 * c * dc / dets, 0.0)
        return (grad - self.dA / self.A) * (s <= self.r)

    def du2(self, s) -> np.ndarray:
        """d/d alpha of U2 at distances s."""
        s = np.asarray(s, dtype=float)
        c = kernels.corr_radial(self.model, self.alpha, s)
        dc = kernels.corr_radial_deriv(self.model, self.alpha, s)
        d2c = kernels.corr_radial_deriv2(self.model, self.alpha, s)
        dets = 1.0 - c * c
        ddet = -2.0 * c * dc
        d2det = -2.0 * (dc * dc + c * d2c)
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(dets > 0, d2det / dets - (ddet / dets) ** 2, 0.0)
        ratio = self.dA / self.A
        return (term - (self.d2A / self.A - ratio * ratio)) * (s <= self.r)


def sigma11(model: KernelModel, theta: Theta) -> float:
    """1/lambda - int C_alpha(u)^2 du (closed forms in d = 2)."""
    return 1.0 / theta.lam - kernels.corr_l2_norm_sq(model, theta.alpha)


def info22(model: KernelModel, theta: Theta, window: RectWindow, r: float, p: int = 2) -> np.ndarray:
    """Limiting Hessian block -int dU2 * rho2 over the ball; (1, 1)."""
    if p != 2:
        raise NotImplementedError("only the order-2 Hessian block is supported")
    prof = U2Radial(model, theta.alpha, r)
    c = kernels.corr_radial(model, theta.alpha, prof.rule.radii)
    val = -theta.lam**2 * float(prof.rule.plain @ (prof.du2(prof.rule.radii) * (1.0 - c * c)))
    if val <= 0:
        raise InfoNotPD(f"I22 = {val:.3g} at theta = {theta}")
    return np.array([[val]])


def _corr_decay_radius(model: KernelModel, alpha: float, level: float = 1e-3) -> float:
    """Distance beyond which |C_alpha| < level (families are monotone)."""
    hi = alpha
    while kernels.corr_radial(model, alpha, hi) > level:
        hi *= 2.0
        if hi > 1e6 * alpha:
            raise DppfitError("correlation does not decay; check parameters")
    return float(brentq(lambda s: float(kernels.corr_radial(model, alpha, s)) - level, 0.0, hi))


def _pair_term(prof: U2Radial, lam: float) -> float:
    """lambda^2 int U2^2 (1 - C^2) over the ball (quadrature)."""
    rule = prof.rule
    c = kernels.corr_radial(prof.model, prof.alpha, rule.radii)
    u2 = prof.u2(rule.radii)
    return lam**2 * float(rule.plain @ (u2 * u2 * (1.0 - c * c)))


def _reduced_three_point(model, alpha, f_outer, f_inner, r_outer, r_inner, n_rad=64):
    """Tensor rule for int f_outer(|a|) f_inner(|b|) g(|a|,|b|,|a-b|) da db
    with a in ball(r_outer), b in ball(r_inner), by rotation invariance:
    radii are Gauss-Legendre, the relative angle a uniform periodic grid.

    Returns the (n, n, ANGLE_NODES) distance grid and the radial weight
    vectors so callers assemble their own integrand g.
    """
    from .quadrature import gauss_legendre

    rho_a, w_a = gauss_legendre(0.0, r_outer, n_rad)
    rho_b, w_b = gauss_legendre(0.0, r_inner, n_rad)
    psi = 2.0 * np.pi * np.arange(ANGLE_NODES) / ANGLE_NODES
    d_ab = np.sqrt(
        rho_a[:, None, None] ** 2
        + rho_b[None, :, None] ** 2
        - 2.0 * rho_a[:, None, None] * rho_b[None, :, None] * np.cos(psi)[None, None, :]
    )
    wa = 2.0 * np.pi * w_a * rho_a * f_outer(rho_a)
    wb = (2.0 * np.pi / ANGLE_NODES) * w_b * rho_b * f_inner(rho_b)
    return rho_a, rho_b, d_ab, wa, wb


def _triple_term(prof: U2Radial, lam: float, r: float):
    """lambda^3 int U2(u2) U2(u3) det[C](0,u2,u3) over ball x ball."""
    model, alpha = prof.model, prof.alpha
    rho_a, rho_b, d_ab, wa, wb = _reduced_three_point(model, alpha, prof.u2, prof.u2, r, r)
    ca = kernels.corr_radial(model, alpha, rho_a)
    cb = kernels.corr_radial(model, alpha, rho_b)
    c_ab = kernels.corr_radial(model, alpha, d_ab)
    det3 = (
        1.0
        + 2.0 * ca[:, None, None] * cb[None, :, None] * c_ab
        - (ca * ca)[:, None, None]
        - (cb * cb)[None, :, None]
        - c_ab * c_ab
    )
    return lam**3 * float(np.einsum("i,j,ijk->", wa, wb, det3))


def _quad_term_annulus(
    prof: U2Radial,
    lam: float,
    r: float,
    lo: float,
    hi: float,
    n_points: int,
    seed: int,
    n_rep: int = 4,
):
    """Centered four-point term with the free argument in an annulus:
    lambda^4 times the integral over u2 in ball(r), u3 with lo <= |u3| < hi,
    v in ball(r) of U2(u2) U2(v) [det[C](0,u2,u3,u3+v) - (1-C^2(u2))(1-C^2(v))].

    Averaged over n_rep independently scrambled Sobol blocks; blocks must
    be large because the integrand has a tiny mean relative to its spread.
    """
    from .quadrature import sobol_points

    model, alpha = prof.model, prof.alpha

    def integrand(u01):
        u2 = unit_to_disk(u01[:, 0:2], r)
        rho3 = np.sqrt(lo * lo + u01[:, 2] * (hi * hi - lo * lo))
        phi3 = 2.0 * np.pi * u01[:, 3]
        u3 = np.column_stack([rho3 * np.cos(phi3), rho3 * np.sin(phi3)])
        v = unit_to_disk(u01[:, 4:6], r)
        u4 = u3 + v
        d = [
            np.linalg.norm(u2, axis=1),       # (0, u2)
            rho3,                              # (0, u3)
            np.linalg.norm(u4, axis=1),       # (0, u4)
            np.linalg.norm(u3 - u2, axis=1),  # (u2, u3)
            np.linalg.norm(u4 - u2, axis=1),  # (u2, u4)
            np.linalg.norm(v, axis=1),        # (u3, u4)
        ]
        cs = [kernels.corr_radial(model, alpha, dd) for dd in d]
        n = len(u01)
        mats = np.ones((n, 4, 4))
        idx = 0
        for a in range(4):
            for b in range(a + 1, 4):
                mats[:, a, b] = cs[idx]
                mats[:, b, a] = cs[idx]
                idx += 1
        det4 = np.linalg.det(mats)
        disconnected = (1.0 - cs[0] ** 2) * (1.0 - cs[5] ** 2)
        return prof.u2(d[0]) * prof.u2(d[5]) * (det4 - disconnected)

    n_each = max(n_points // n_rep, 1 << 14)
    means = np.array(
        [integrand(sobol_points(6, n_each, seed + 7919 * i)).mean() for i in range(n_rep)]
    )
    vol = (np.pi * r * r) ** 2 * (np.pi * (hi * hi - lo * lo))
    value = lam**4 * means.mean() * vol
    se = lam**4 * means.std(ddof=1) / np.sqrt(n_rep) * vol
    return float(value), float(se)


def sigma22(
    model: KernelModel,
    theta: Theta,
    window: RectWindow,
    r: float,
    p: int = 2,
    budget: int = SIGMA_QMC_POINTS,
    seed: int = SIGMA_QMC_SEED,
) -> np.ndarray:
    """Limit of Var(score / sqrt(|D|)) at theta; (1, 1) matrix.

    The window argument fixes the convention (the limit is window-free);
    it is accepted for interface symmetry with the finite-window score.
    """
    val, errs = _sigma22_with_errors(model, theta, r, p, budget, seed)
    rel = errs["total_se"] / max(abs(val), 1e-300)
    if rel > SIGMA_REL_TARGET:
        warnings.warn(
            f"sigma22 QMC relative error {rel:.2e} above {SIGMA_REL_TARGET:.0e}",
            Sigma22Imprecise,
        )
    if val < 0:
        raise DppfitError(f"sigma22 = {val:.3g} < 0: integration failure")
    return np.array([[val]])


def _sigma22_with_errors(model, theta, r, p, budget, seed):
    if p != 2:
        raise NotImplementedError("only the order-2 variance block is supported")
    lam = theta.lam
    prof = U2Radial(model, theta.alpha, r)
    t_pair = _pair_term(prof, lam)
    t_triple = _triple_term(prof, lam, r)
    big_r = 2.0 * r + _corr_decay_radius(model, theta.alpha)
    t_quad, se_quad = _quad_term_annulus(prof, lam, r, 0.0, big_r, budget, seed)
    scale = abs(t_pair) + abs(4.0 * t_triple)
    # extend by annuli until the neglected shell is negligible
    for round_ in range(3):
        shell, se_shell = _quad_term_annulus(
            prof, lam, r, big_r, 2.0 * big_r, budget // 4, seed + 101 + round_
        )
        if abs(shell) + se_shell < 0.005 * scale:
            break
        t_quad += shell
        se_quad = float(np.hypot(se_quad, se_shell))
        big_r *= 2.0
    value = 2.0 * t_pair + 4.0 * t_triple + t_quad
    errs = {
        "quad_se": se_quad,
        "total_se": se_quad,
        "trunc_radius": big_r,
    }
    return value, errs


def sigma12(
    model: KernelModel,
    theta: Theta,
    window: RectWindow,
    r: float,
    p: int = 2,
    budget: int = SIGMA_QMC_POINTS,
    seed: int = SIGMA_QMC_SEED,
) -> np.ndarray:
    """Limit of Cov(intensity score, alpha score) / |D|; shape (1,).

    The disconnected three-point part is subtracted so the integral over
    the free argument converges; the remainder is QMC over ball x ball(R).
    """
    if p != 2:
        raise NotImplementedError("only the order-2 cross block is supported")
    lam = theta.lam
    alpha = theta.alpha
    prof = U2Radial(model, alpha, r)
    rule = prof.rule
    c = kernels.corr_radial(model, alpha, rule.radii)
    # int U2 rho2-bar over the ball; identically ~0 in the limiting form
    m_tilde = float(rule.plain @ (prof.u2(rule.radii) * (1.0 - c * c)))
    big_r = 2.0 * r + _corr_decay_radius(model, alpha)
    rho_a, rho_b, d_ab, wa, wb = _reduced_three_point(
        model, alpha, prof.u2, lambda s: np.ones_like(s), r, big_r
    )
    ca = kernels.corr_radial(model, alpha, rho_a)
    cb = kernels.corr_radial(model, alpha, rho_b)
    c_ab = kernels.corr_radial(model, alpha, d_ab)
    # det[C](0, u2, w) minus its w -> infinity limit (1 - C^2(u2))
    centered = (
        2.0 * ca[:, None, None] * cb[None, :, None] * c_ab
        - (cb * cb)[None, :, None]
        - c_ab * c_ab
    )
    value = 2.0 * lam * m_tilde + lam**2 * float(np.einsum("i,j,ijk->", wa, wb, centered))
    return np.array([value])


@dataclass
class AsymptoticBlocks:
    """Plug-in limit blocks of the normalized score variance and Hessian."""

    lam: float
    alpha: float
    sigma11: float
    sigma12: np.ndarray  # (q,)
    sigma22: np.ndarray  # (q, q)
    info22: np.ndarray   # (q, q)
    errors: dict = field(default_factory=dict)


def asymptotic_blocks(
    model: KernelModel,
    theta: Theta,
    window: RectWindow,
    r: float,
    p: int = 2,
    budget: int = SIGMA_QMC_POINTS,
    seed: int = SIGMA_QMC_SEED,
) -> AsymptoticBlocks:
    """Assemble every block at the evaluation point theta."""
    s22, errs = _sigma22_with_errors(model, theta, r, p, budget, seed)
    if s22 < 0:
        raise DppfitError(f"sigma22 = {s22:.3g} < 0: integration failure")
    return AsymptoticBlocks(
        lam=theta.lam,
        alpha=theta.alpha,
        sigma11=sigma11(model, theta),
        sigma12=sigma12(model, theta, window, r, p, budget, seed),
        sigma22=np.array([[s22]]),
        info22=info22(model, theta, window, r, p),
        errors=errs,
    )


@dataclass
class SandwichResult:
    """Asymptotic covariance of (lambda_hat, alpha_hat) and Wald intervals."""

    cov: np.ndarray        # (q+1, q+1), already divided by |D|
    se_lambda: float
    se_alpha: np.ndarray   # (q,)
    ci_lambda: tuple
    ci_alpha: tuple


def sandwich(blocks: AsymptoticBlocks, window: RectWindow) -> SandwichResult:
    """I^-1 Sigma I^-1 / |D| with I = diag(1/lambda, I22)."""
    q = blocks.info22.shape[0]
    info = np.zeros((q + 1, q + 1))
    info[0, 0] = 1.0 / blocks.lam
    info[1:, 1:] = blocks.info22
    sig = np.zeros((q + 1, q + 1))
    sig[0, 0] = blocks.sigma11
    sig[0, 1:] = blocks.sigma12
    sig[1:, 0] = blocks.sigma12
    sig[1:, 1:] = 0.5 * (blocks.sigma22 + blocks.sigma22.T)
    inv_info = np.linalg.inv(info)
    cov = inv_info @ sig @ inv_info / geometry.area(window)
    cov = 0.5 * (cov + cov.T)
    diag = np.diag(cov).copy()
    if np.any(diag < 0):
        raise DppfitError(f"negative variance in sandwich: diag = {diag}")
    se = np.sqrt(diag)
    lam, alpha = blocks.lam, blocks.alpha
    return SandwichResult(
        cov=cov,
        se_lambda=float(se[0]),
        se_alpha=se[1:],
        ci_lambda=(lam - Z_95 * se[0], lam + Z_95 * se[0]),
        ci_alpha=(alpha - Z_95 * se[1], alpha + Z_95 * se[1]),
    )


@dataclass
class ICReport:
    """Composite-likelihood information criterion for one fitted model."""

    model_id: str
    cl_at_optimum: float
    penalty: float
    ic_value: float
    reliable: bool = True


def ic2(
    model: KernelModel,
    fit: FitResult,
    window: RectWindow,
    r: float,
    budget: int = SIGMA_QMC_POINTS,
    seed: int = SIGMA_QMC_SEED,
) -> ICReport:
    """-2 CL(alpha_hat) + 2 tr(Sigma22 I22^-1) at the fitted parameters."""
    theta_hat = Theta(fit.lambda_hat, fit.alpha_hat)
    s22 = sigma22(model, theta_hat, window, r, 2, budget, seed)
    i22 = info22(model, theta_hat, window, r, 2)
    penalty = 2.0 * float(np.trace(s22 @ np.linalg.inv(i22)))
    reliable = not fit.diagnostics.get("boundary_hit", False)
    if not reliable:
        warnings.warn(
            f"IC computed from a boundary fit of {model.label}", ICUnreliable
        )
    return ICReport(
        model_id=model.label,
        cl_at_optimum=fit.cl_value,
        penalty=penalty,
        ic_value=-2.0 * fit.cl_value + penalty,
        reliable=reliable,
    )


def compare_models(reports: list[ICReport]) -> list[ICReport]:
    """Ascending by IC; ties broken by the larger composite likelihood."""
    return sorted(reports, key=lambda rep: (rep.ic_value, -rep.cl_at_optimum))
