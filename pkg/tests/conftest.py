"""Shared helpers: certified conic instances and fast SCA control profiles."""

import numpy as np
import pytest

from irsurllc import beamform, channel, conic


def random_certified_instance(rng, max_psd_side=4, with_free=False):
    """Random mixed-cone program with a constructed, strictly complementary
    optimal pair, so the optimal value is known exactly."""
    blocks, xs, zs = [], [], []
    if with_free:
        d = int(rng.integers(1, 4))
        blocks.append(conic.free(d))
        xs.append(rng.standard_normal(d))
        zs.append(np.zeros(d))
    d = int(rng.integers(2, 6))
    mask = rng.random(d) < 0.5
    xs.append(np.where(mask, rng.uniform(0.5, 2, d), 0.0))
    zs.append(np.where(mask, 0.0, rng.uniform(0.5, 2, d)))
    blocks.append(conic.nonneg(d))
    d = int(rng.integers(3, 6))
    u = rng.standard_normal(d)
    u[0] = np.linalg.norm(u[1:]) + rng.uniform(0.5, 1)
    xs.append(u)
    zs.append(np.zeros(d))
    blocks.append(conic.soc(d))
    side = int(rng.integers(2, max_psd_side + 1))
    Q, _ = np.linalg.qr(rng.standard_normal((side, side)))
    r = int(rng.integers(1, side))
    ex = np.concatenate([rng.uniform(0.5, 2, r), np.zeros(side - r)])
    ez = np.concatenate([np.zeros(r), rng.uniform(0.5, 2, side - r)])
    xs.append(conic.svec(Q @ np.diag(ex) @ Q.T))
    zs.append(conic.svec(Q @ np.diag(ez) @ Q.T))
    blocks.append(conic.psd(side))

    xstar = np.concatenate(xs)
    zstar = np.concatenate(zs)
    n = xstar.size
    p = int(rng.integers(2, max(3, n // 2)))
    A = rng.standard_normal((p, n))
    ystar = rng.standard_normal(p)
    c = A.T @ ystar + zstar
    prob = conic.ConicProblem(c, A, A @ xstar, tuple(blocks))
    return prob, xstar, ystar, zstar, float(c @ xstar)


def fast_controls(seed=0, **overrides):
    """Speed-oriented SCA profile for tests; spec defaults stay in the code."""
    base = dict(
        radius_restore="adaptive",
        consecutive_reject_limit=5,
        conic_tol=1e-6,
        randomization_trials=200,
        rng=np.random.default_rng(seed),
    )
    base.update(overrides)
    return beamform.ScaControls(**base)


FAST_OVERRIDES = dict(
    radius_restore="adaptive",
    consecutive_reject_limit=5,
    conic_tol=1e-6,
    randomization_trials=200,
)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_scenario(K, N, seed=0, eps=1e-7, **kw):
    return channel.Scenario(num_users=K, num_elements=N, seed=seed, eps_max=eps, **kw)
