"""Quick self-contained oracle checks, callable from the CLI.

Each suite re-derives expected values through an independent route
(quadrature, bisection, constructed optima, naive enumeration) and checks
the production path against it.  Prints one PASS/FAIL line per suite;
returns a nonzero exit code if anything fails.  This is a smoke-level
subset of the full pytest suite, cheap enough to run after installation.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from . import beamform, channel, conic, fbl, grouping as grp


def _check_q_function() -> str | None:
    for x in np.linspace(-6.0, 6.0, 25):
        oracle, _ = integrate.quad(
            lambda t: math.exp(-0.5 * t * t) / math.sqrt(2 * math.pi),
            x, np.inf, epsabs=1e-16, epsrel=1e-13,
        )
        got = fbl.q_function(float(x))
        if abs(got - oracle) > 1e-10 * oracle:
            return f"Q({x:.2f}) = {got}, quadrature {oracle}"
    return None


def _check_roundtrip() -> str | None:
    for eps in (1e-9, 1e-6, 1e-3, 0.1, 0.4):
        for snr in (0.1, 1.0, 10.0, 100.0):
            for bits in (64, 256, 2048):
                m = fbl.blocklength(eps, snr, bits)
                back = fbl.pep(m, snr, bits)
                if abs(back - eps) > 1e-8 * eps:
                    return f"pep(blocklength({eps},{snr},{bits})) = {back}"
    return None


def _check_conic() -> str | None:
    rng = np.random.default_rng(20240817)
    for i in range(20):
        prob, value = _random_certified_instance(rng)
        sol = conic.solve(prob, tol=1e-8)
        worst = max(sol.primal_residual, sol.dual_residual, sol.duality_gap)
        if worst > 1e-7 or abs(sol.objective - value) > 1e-6 * (1 + abs(value)):
            return f"instance {i}: status={sol.status} residual={worst:.2e}"
    return None


def _random_certified_instance(rng):
    """Strictly complementary optimal pair -> known optimal value."""
    blocks, xs, zs = [], [], []
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
    s = int(rng.integers(2, 5))
    Q, _ = np.linalg.qr(rng.standard_normal((s, s)))
    r = int(rng.integers(1, s))
    ex = np.concatenate([rng.uniform(0.5, 2, r), np.zeros(s - r)])
    ez = np.concatenate([np.zeros(r), rng.uniform(0.5, 2, s - r)])
    xs.append(conic.svec(Q @ np.diag(ex) @ Q.T))
    zs.append(conic.svec(Q @ np.diag(ez) @ Q.T))
    blocks.append(conic.psd(s))
    xstar = np.concatenate(xs)
    zstar = np.concatenate(zs)
    n = xstar.size
    p = int(rng.integers(2, max(3, n // 2)))
    A = rng.standard_normal((p, n))
    ystar = rng.standard_normal(p)
    c = A.T @ ystar + zstar
    return conic.ConicProblem(c, A, A @ xstar, tuple(blocks)), float(c @ xstar)


def _check_single_user_alignment() -> str | None:
    for trial in range(3):
        sc = channel.Scenario(num_users=1, num_elements=8, seed=99)
        real = channel.generate_realization(sc, trial)
        controls = beamform.ScaControls(
            rng=channel.trial_rng(sc.seed, trial, channel.STREAM_OPTIMIZER),
            randomization_trials=200,
        )
        res = beamform.solve_p2(real, grp.singletons(sc.payload_bits), controls=controls)
        amp = math.sqrt(sc.tx_power / sc.noise_power)
        opt = (abs(amp * real.h[0]) + np.abs(amp * real.phi[0]).sum()) ** 2
        if res.snrs[0] < 0.999 * opt:
            return f"trial {trial}: snr {res.snrs[0]:.4g} < 0.999 * {opt:.4g}"
    return None


def _naive_best_partition(snrs, payloads, eps):
    """Independent recursive enumerator (no restricted-growth strings)."""
    K = len(snrs)

    def rec(k, blocks):
        if k == K:
            total = 0.0
            for blk in blocks:
                gmin = min(snrs[i] for i in blk)
                bits = sum(payloads[i] for i in blk)
                total += fbl.blocklength(eps, gmin, bits)
            return total
        best = math.inf
        for blk in blocks:
            blk.append(k)
            best = min(best, rec(k + 1, blocks))
            blk.pop()
        blocks.append([k])
        best = min(best, rec(k + 1, blocks))
        blocks.pop()
        return best

    return rec(0, [])


def _check_grouping() -> str | None:
    rng = np.random.default_rng(7)
    for i in range(10):
        snrs = rng.uniform(0.5, 50.0, 4)
        payloads = [256] * 4
        eps = 1e-6
        best = grp.exhaustive_grouping(snrs, payloads, eps)
        got = fbl.group_total_latency(best, snrs, eps)[1]
        want = _naive_best_partition(snrs, payloads, eps)
        if abs(got - want) > 1e-9:
            return f"instance {i}: exhaustive {got} vs naive {want}"
        greedy = grp.greedy_grouping(snrs, payloads, eps)
        if fbl.group_total_latency(greedy, snrs, eps)[1] < want - 1e-9:
            return f"instance {i}: greedy beat the exhaustive optimum"
    return None


SUITES = (
    ("q-function vs quadrature", _check_q_function),
    ("blocklength/pep round trip", _check_roundtrip),
    ("conic solver vs constructed optima", _check_conic),
    ("single-user phase alignment", _check_single_user_alignment),
    ("exhaustive grouping vs naive enumerator", _check_grouping),
)


def run_all(verbose: bool = False) -> int:
    failed = 0
    for name, fn in SUITES:
        problem = fn()
        if problem is None:
            print(f"PASS  {name}")
        else:
            failed += 1
            print(f"FAIL  {name}: {problem}")
    if failed:
        print(f"{failed}/{len(SUITES)} suites failed")
        return 2
    print(f"all {len(SUITES)} suites passed")
    return 0
