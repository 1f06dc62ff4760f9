"""Finite-blocklength arithmetic against independent oracles.

Frozen constants were computed before implementation with mpmath at 40
significant digits (quadrature-grade erfc).
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from irsurllc import fbl
from irsurllc.grouping import Grouping

# mpmath, 40 digits: erfc(1.2816/sqrt(2))/2
Q_AT_1_2816 = 0.099991500097675166
# mpmath, 40 digits: Eq-style PEP at m=200, snr=10, D=256
PEP_200_10_256 = 2.1458070781277554e-102


def quad_q(x):
    val, _ = integrate.quad(
        lambda t: math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi),
        x, np.inf, epsabs=1e-18, epsrel=1e-13, limit=200,
    )
    return val


class TestQFunction:
    def test_symmetry_at_zero(self):
        assert fbl.q_function(0.0) == 0.5

    def test_reflection_identity(self):
        y = 1.7
        assert fbl.q_function(-y) == pytest.approx(1.0 - fbl.q_function(y), abs=1e-15)

    def test_frozen_quadrature_value(self):
        assert fbl.q_function(1.2816) == pytest.approx(Q_AT_1_2816, rel=1e-12)

    def test_quadrature_sweep(self):
        for x in np.linspace(-8.0, 8.0, 33):
            oracle = quad_q(float(x))
            assert fbl.q_function(float(x)) == pytest.approx(oracle, rel=1e-12)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            fbl.q_function(float("nan"))
        with pytest.raises(ValueError):
            fbl.q_function(float("inf"))

    def test_strictly_decreasing(self):
        xs = np.linspace(-8, 8, 100)
        qs = [fbl.q_function(float(x)) for x in xs]
        assert all(a > b for a, b in zip(qs, qs[1:]))


class TestQInverse:
    def test_half_maps_to_zero(self):
        assert fbl.q_inverse(0.5) == 0.0

    def test_roundtrip_integer_grid(self):
        for x in range(-3, 4):
            assert fbl.q_inverse(fbl.q_function(x)) == pytest.approx(x, abs=1e-9)

    def test_deep_tail_vs_bisection(self):
        p = 1e-9
        lo, hi = 0.0, 40.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if fbl.q_function(mid) > p:
                lo = mid
            else:
                hi = mid
        assert fbl.q_inverse(p) == pytest.approx(0.5 * (lo + hi), abs=1e-10)

    def test_residual_relative_to_p(self):
        for p in (1e-12, 1e-9, 1e-6, 1e-3, 0.1, 0.5, 0.9, 1 - 1e-6, 1 - 1e-12):
            x = fbl.q_inverse(p)
            assert abs(fbl.q_function(x) - p) <= 1e-12 * p

    def test_domain_errors(self):
        for p in (0.0, 1.0, -0.1, 1.1):
            with pytest.raises(ValueError):
                fbl.q_inverse(p)

    @given(st.floats(min_value=1e-10, max_value=1 - 1e-10))
    @settings(max_examples=200, deadline=None)
    def test_inverse_property(self, p):
        x = fbl.q_inverse(p)
        assert abs(fbl.q_function(x) - p) <= 1e-11 * max(p, 1e-12)


class TestPep:
    def test_half_at_capacity_blocklength(self):
        snr, bits = 3.0, 512
        m = math.log(2.0) * bits / math.log1p(snr)
        assert fbl.pep(m, snr, bits) == pytest.approx(0.5, rel=1e-12)

    def test_frozen_high_precision_point(self):
        assert fbl.pep(200.0, 10.0, 256) == pytest.approx(PEP_200_10_256, rel=1e-11)

    def test_monotone_in_blocklength_full_grid(self):
        # double precision saturates pep at exactly 1.0 far below capacity
        # and at 0.0 deep in the tail, so the full 50..2000 grid is checked
        # non-strictly and the Q-argument (the mathematical content) strictly
        vals = [fbl.pep(float(m), 0.8, 256) for m in range(50, 2001, 50)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

        def q_argument(m, snr=0.8, bits=256):
            import math
            num = m * math.log1p(snr) - math.log(2.0) * bits
            den = math.sqrt(m) * math.sqrt(1 - (1 + snr) ** -2)
            return num / den

        args = [q_argument(float(m)) for m in range(50, 2001, 50)]
        assert all(a < b for a, b in zip(args, args[1:]))

    def test_strictly_decreasing_in_blocklength_representable_band(self):
        # gamma=2, D=512 keeps pep within (1e-260, 1 - 1e-8) on this window
        vals = [fbl.pep(float(m), 2.0, 512) for m in range(250, 1401, 50)]
        assert 0.0 < vals[-1] < vals[0] < 1.0
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_strictly_decreasing_in_snr(self):
        vals = [fbl.pep(400.0, g, 256) for g in np.linspace(0.5, 8.0, 60)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            fbl.pep(0.0, 1.0, 64)
        with pytest.raises(ValueError):
            fbl.pep(100.0, 0.0, 64)
        with pytest.raises(ValueError):
            fbl.pep(100.0, 1.0, 0)


EPS_GRID = (1e-9, 1e-6, 1e-3, 0.1, 0.4)
SNR_GRID = (0.1, 1.0, 10.0, 100.0)
BITS_GRID = (64, 256, 2048)


class TestBlocklength:
    def test_eps_half_collapses_to_capacity_term(self):
        for snr in SNR_GRID:
            for bits in BITS_GRID:
                expect = bits * math.log(2.0) / math.log1p(snr)
                assert fbl.blocklength(0.5, snr, bits) == pytest.approx(expect, rel=1e-14)

    def test_roundtrip_grid(self):
        for eps in EPS_GRID:
            for snr in SNR_GRID:
                for bits in BITS_GRID:
                    m = fbl.blocklength(eps, snr, bits)
                    assert fbl.pep(m, snr, bits) == pytest.approx(eps, rel=1e-8)

    def test_merge_gain(self):
        for eps in EPS_GRID:
            for snr in SNR_GRID:
                for bits in BITS_GRID:
                    assert fbl.blocklength(eps, snr, 2 * bits) < 2 * fbl.blocklength(
                        eps, snr, bits
                    )

    def test_monotone_in_snr_and_payload(self):
        ms = [fbl.blocklength(1e-6, g, 256) for g in np.linspace(0.5, 50, 40)]
        assert all(a > b for a, b in zip(ms, ms[1:]))
        md = [fbl.blocklength(1e-6, 5.0, d) for d in range(64, 2049, 64)]
        assert all(a < b for a, b in zip(md, md[1:]))

    def test_rejects_large_eps(self):
        with pytest.raises(ValueError):
            fbl.blocklength(0.6, 1.0, 64)
        with pytest.raises(ValueError):
            fbl.blocklength(0.0, 1.0, 64)

    @given(
        st.floats(min_value=1e-9, max_value=0.5),
        st.floats(min_value=1e-3, max_value=1e3),
        st.integers(min_value=1, max_value=10000),
    )
    @settings(max_examples=300, deadline=None)
    def test_inverse_pair_property(self, eps, snr, bits):
        m = fbl.blocklength(eps, snr, bits)
        assert m > 0
        assert fbl.pep(m, snr, bits) == pytest.approx(eps, rel=1e-7)


class TestAchievableRate:
    def test_eps_half_is_shannon(self):
        for snr in SNR_GRID:
            assert fbl.achievable_rate(500.0, snr, 0.5) == pytest.approx(
                math.log2(1 + snr), rel=1e-14
            )

    def test_long_block_limit(self):
        cap = math.log2(1 + 10.0)
        assert abs(fbl.achievable_rate(1e8, 10.0, 1e-6) - cap) <= 1e-3

    def test_rate_times_blocklength_recovers_payload(self):
        for snr in SNR_GRID:
            for bits in BITS_GRID:
                m = 4.0 * bits  # comfortably above capacity-limited length
                eps = fbl.pep(m, snr, bits)
                if not 0 < eps < 1:
                    continue
                rate = fbl.achievable_rate(m, snr, eps)
                assert rate * m == pytest.approx(bits, rel=1e-6)


class TestGroupTotalLatency:
    def test_singletons_match_scalar_blocklengths(self):
        snrs = [2.0, 8.0, 0.7]
        g = Grouping.from_groups([[0], [1], [2]], [256, 256, 256])
        per, total = fbl.group_total_latency(g, snrs, 1e-6)
        for m, snr in zip(per, snrs):
            assert m == pytest.approx(fbl.blocklength(1e-6, snr, 256), rel=1e-14)
        assert total == pytest.approx(sum(per))

    def test_equal_snr_merge_beats_singletons(self):
        snrs = [4.0, 4.0]
        merged = Grouping.from_groups([[0, 1]], [256, 256])
        split = Grouping.from_groups([[0], [1]], [256, 256])
        _, tot_m = fbl.group_total_latency(merged, snrs, 1e-6)
        _, tot_s = fbl.group_total_latency(split, snrs, 1e-6)
        assert tot_m < tot_s

    def test_extreme_snr_spread_prefers_split(self):
        snrs = [0.01, 100.0]
        merged = Grouping.from_groups([[0, 1]], [256, 256])
        split = Grouping.from_groups([[0], [1]], [256, 256])
        _, tot_m = fbl.group_total_latency(merged, snrs, 1e-6)
        _, tot_s = fbl.group_total_latency(split, snrs, 1e-6)
        assert tot_s < tot_m

    def test_fblpoint_validation(self):
        with pytest.raises(ValueError):
            fbl.FblPoint(payload_bits=0, snr=1.0, blocklength=10.0, pep=0.1)
        with pytest.raises(ValueError):
            fbl.FblPoint(payload_bits=8, snr=1.0, blocklength=10.0, pep=0.7)
        pt = fbl.FblPoint(payload_bits=8, snr=1.0, blocklength=10.0, pep=0.5)
        assert pt.snr == 1.0
