"""Shared fixtures: replicated point-pattern banks reused across modules.

Sampling is the dominant cost, so pattern banks are session-scoped and
drawn in parallel worker processes (fork; each replicate owns its
counter-based stream, so results are order- and worker-independent).
"""

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

from dppfit import kernels, sampler
from dppfit.geometry import RectWindow
from dppfit.kernels import Theta

TEST_THREADS = int(os.environ.get("DPPFIT_TEST_THREADS", min(2, os.cpu_count() or 1)))

_BANK_CTX = {}


def _draw_one(idx):
    approx = _BANK_CTX["approx"]
    seed = _BANK_CTX["seed"]
    return sampler.sample_dpp(approx, sampler.RngStream(seed, idx)).points


def sample_bank(model, n, reps, seed, tail_tol=1e-3, max_modes=256, lam=10.0, alpha=0.1):
    """Draw `reps` patterns of DPP(lam C_alpha) on [0, n]^2, in parallel."""
    window = RectWindow.square(n)
    theta = Theta(lam, alpha)
    approx = sampler.build_spectral_approx(model, theta, window, tail_tol, max_modes)
    _BANK_CTX["approx"] = approx
    _BANK_CTX["seed"] = seed
    idxs = range(reps)
    if TEST_THREADS <= 1:
        pts = [_draw_one(i) for i in idxs]
    else:
        with ProcessPoolExecutor(max_workers=TEST_THREADS) as pool:
            pts = list(pool.map(_draw_one, idxs, chunksize=max(1, reps // (8 * TEST_THREADS))))
    from dppfit.patterns import PointPattern

    return [PointPattern(p, window) for p in pts]


@pytest.fixture(scope="session")
def gaussian_bank_n5():
    """500 Gaussian-kernel DPP patterns at theta0 = (10, 0.1) on [0,5]^2."""
    return sample_bank(kernels.gaussian(), 5.0, 500, 1001)


@pytest.fixture(scope="session")
def laplace_bank_n5():
    return sample_bank(kernels.laplace(), 5.0, 500, 1002, tail_tol=5e-3, max_modes=2048)


@pytest.fixture(scope="session")
def cauchy_bank_n5():
    return sample_bank(kernels.cauchy(0.5), 5.0, 500, 1003)


@pytest.fixture(scope="session")
def cauchy1_bank_n5():
    return sample_bank(kernels.cauchy(1.0), 5.0, 500, 1004)
