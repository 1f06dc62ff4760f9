"""Channel generation, SNR evaluation, and SDR lifting."""

import numpy as np
import pytest

from irsurllc import channel
from irsurllc.channel import Scenario, build_lifted_matrix, effective_snr, generate_realization


def test_determinism_same_seed_and_trial():
    sc = Scenario(num_users=4, num_elements=12, seed=42)
    a = generate_realization(sc, 3)
    b = generate_realization(sc, 3)
    assert np.array_equal(a.h, b.h)
    assert np.array_equal(a.g, b.g)
    assert np.array_equal(a.f, b.f)
    assert np.array_equal(a.user_positions, b.user_positions)
    assert a.content_hash() == b.content_hash()


def test_different_trials_differ():
    sc = Scenario(num_users=4, num_elements=12, seed=42)
    a = generate_realization(sc, 0)
    b = generate_realization(sc, 1)
    assert not np.array_equal(a.h, b.h)
    assert a.content_hash() != b.content_hash()


def test_no_irs_degenerate_case():
    sc = Scenario(num_users=3, num_elements=0, seed=7)
    real = generate_realization(sc, 0)
    assert real.phi.shape == (3, 0)
    R = real.lifted(0)
    assert R.shape == (1, 1)
    assert R[0, 0] == 0
    v = np.zeros(0, dtype=complex)
    snr = effective_snr(real, v, 0, sc.tx_power, sc.noise_power)
    assert snr == pytest.approx(
        sc.tx_power * abs(real.h[0]) ** 2 / sc.noise_power, rel=1e-14
    )


def test_direct_gain_variance_matches_pathloss():
    # pin the user position by collapsing the disc to its center
    sc = Scenario(
        num_users=1, num_elements=0, seed=5, user_area_radius=0.0,
    )
    draws = np.array(
        [generate_realization(sc, t).h[0] for t in range(100_000)]
    )
    dist = np.hypot(100.0, 0.0)
    expected = sc.pathloss_ref * dist ** (-sc.pathloss_exp_bs_user)
    measured = np.mean(np.abs(draws) ** 2)
    assert measured == pytest.approx(expected, rel=0.03)


def test_cascade_definition_and_trace_identity():
    sc = Scenario(num_users=2, num_elements=9, seed=1)
    real = generate_realization(sc, 0)
    phi = real.phi
    assert phi[0] == pytest.approx(np.conj(real.f[0]) * real.g, rel=1e-14)
    R = real.lifted(1)
    assert np.abs(R - R.conj().T).max() < 1e-15
    assert R[-1, -1] == 0
    assert np.trace(R).real == pytest.approx(np.linalg.norm(phi[1]) ** 2, rel=1e-12)


def test_effective_snr_matches_lifted_quadratic_form(rng):
    sc = Scenario(num_users=3, num_elements=8, seed=3)
    real = generate_realization(sc, 0)
    for _ in range(100):
        v = np.exp(1j * rng.uniform(0, 2 * np.pi, 8))
        vbar = np.concatenate([v, [1.0]])
        for k in range(3):
            R = real.lifted(k)
            quad = np.real(vbar.conj() @ R @ vbar) + abs(real.h[k]) ** 2
            direct = abs(real.h[k] + np.vdot(v, real.phi[k])) ** 2
            assert quad == pytest.approx(direct, rel=1e-10)
            snr = effective_snr(real, v, k, sc.tx_power, sc.noise_power)
            assert snr == pytest.approx(
                sc.tx_power * direct / sc.noise_power, rel=1e-12
            )


def test_phase_alignment_attains_coherent_sum():
    sc = Scenario(num_users=1, num_elements=6, seed=9)
    real = generate_realization(sc, 0)
    h, phi = real.h[0], real.phi[0]
    v = np.exp(1j * (np.angle(phi) - np.angle(h)))
    snr = effective_snr(real, v, 0, sc.tx_power, sc.noise_power)
    bound = sc.tx_power * (abs(h) + np.abs(phi).sum()) ** 2 / sc.noise_power
    assert snr == pytest.approx(bound, rel=1e-12)


def test_effective_snr_rejects_non_unit_modulus():
    sc = Scenario(num_users=1, num_elements=4, seed=2)
    real = generate_realization(sc, 0)
    bad = np.full(4, 0.9 + 0j)
    with pytest.raises(ValueError):
        effective_snr(real, bad, 0, sc.tx_power, sc.noise_power)
    with pytest.raises(ValueError):
        effective_snr(real, np.ones(3, dtype=complex), 0, sc.tx_power, sc.noise_power)


class TestBuildLiftedMatrix:
    def test_zero_direct_channel(self):
        phi = np.array([1 + 2j, -0.5j])
        R = build_lifted_matrix(0.0, phi)
        assert np.abs(R[:-1, -1]).max() == 0
        assert np.linalg.matrix_rank(R) <= 1

    def test_zero_cascade(self):
        R = build_lifted_matrix(1 + 1j, np.zeros(3, dtype=complex))
        assert np.abs(R).max() == 0

    def test_quadratic_form_nonnegative(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 6))
            h = complex(rng.standard_normal(), rng.standard_normal())
            phi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            R = build_lifted_matrix(h, phi)
            vbar = np.concatenate(
                [rng.standard_normal(n) + 1j * rng.standard_normal(n), [1.0]]
            )
            val = np.real(vbar.conj() @ R @ vbar) + abs(h) ** 2
            assert val >= -1e-12 * max(1.0, abs(h) ** 2)

    def test_global_phase_invariance_of_lifted_form(self, rng):
        sc = Scenario(num_users=1, num_elements=5, seed=4)
        real = generate_realization(sc, 0)
        R = real.lifted(0)
        v = np.exp(1j * rng.uniform(0, 2 * np.pi, 5))
        vbar = np.concatenate([v, [1.0]])
        base = np.real(vbar.conj() @ R @ vbar)
        for theta in (0.3, 1.7, -2.2):
            rotated = np.exp(1j * theta) * vbar
            assert np.real(rotated.conj() @ R @ rotated) == pytest.approx(base, rel=1e-12)


def test_without_irs_preserves_direct_channels():
    sc = Scenario(num_users=3, num_elements=10, seed=8)
    real = generate_realization(sc, 2)
    stripped = real.without_irs()
    assert stripped.num_elements == 0
    assert np.array_equal(stripped.h, real.h)
    assert stripped.scenario.num_elements == 0


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario(num_users=0, num_elements=4)
    with pytest.raises(ValueError):
        Scenario(num_users=2, num_elements=-1)
    with pytest.raises(ValueError):
        Scenario(num_users=2, num_elements=4, eps_max=0.7)
    with pytest.raises(ValueError):
        Scenario(num_users=3, num_elements=4, payload_bits=(64, 64))
    sc = Scenario(num_users=3, num_elements=4, payload_bits=(64,))
    assert sc.payload_bits == (64, 64, 64)
