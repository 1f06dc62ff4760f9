"""Scenario geometry, random channel generation, and SDR lifting.

One BS at a fixed point serves K single-antenna users scattered uniformly in
a disc, optionally helped by an N-element reflecting surface.  Direct and
surface-user links are Rayleigh; the BS-surface link is a deterministic LOS
steering vector on a half-wavelength uniform linear array whose angle follows
from the geometry.  The lifted matrices R_k expose the end-to-end gain
|h_k + v^H phi_k|^2 as a quadratic form over the augmented phase vector
[v; 1], which is what the semidefinite relaxation consumes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

__all__ = [
    "Scenario",
    "ChannelRealization",
    "generate_realization",
    "effective_snr",
    "build_lifted_matrix",
]

# Sub-stream ids hashed together with (seed, trial) so channel draws and
# randomization draws never share a stream.
STREAM_CHANNEL = 0
STREAM_OPTIMIZER = 1


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class Scenario:
    """Static experiment description; every field is config-overridable.

    Defaults: BS at the origin, IRS at (100, 20) m, users in a 10 m disc
    around (100, 0) m, 32-byte payloads, -80 dBm noise, 30 dBm transmit
    power, -30 dB path-loss reference at 1 m, exponents 3.5 / 2.5 / 2.0 for
    the BS-user / IRS-user / BS-IRS links.
    """

    num_users: int
    num_elements: int
    bs_position: tuple[float, float] = (0.0, 0.0)
    irs_position: tuple[float, float] = (100.0, 20.0)
    user_area_center: tuple[float, float] = (100.0, 0.0)
    user_area_radius: float = 10.0
    tx_power: float = dbm_to_watts(30.0)
    noise_power: float = dbm_to_watts(-80.0)
    payload_bits: tuple[int, ...] = ()
    eps_max: float = 1e-7
    pathloss_exp_bs_user: float = 3.5
    pathloss_exp_irs_user: float = 2.5
    pathloss_exp_bs_irs: float = 2.0
    pathloss_ref: float = db_to_linear(-30.0)
    seed: int = 0

    def __post_init__(self):
        if self.num_users < 1:
            raise ValueError(f"num_users must be >= 1, got {self.num_users}")
        if self.num_elements < 0:
            raise ValueError(f"num_elements must be >= 0, got {self.num_elements}")
        if not self.tx_power > 0:
            raise ValueError("tx_power must be positive")
        if not self.noise_power > 0:
            raise ValueError("noise_power must be positive")
        if not 0.0 < self.eps_max <= 0.5:
            raise ValueError(f"eps_max must be in (0, 0.5], got {self.eps_max}")
        if not self.payload_bits:
            object.__setattr__(self, "payload_bits", (256,) * self.num_users)
        elif len(self.payload_bits) == 1 and self.num_users > 1:
            object.__setattr__(self, "payload_bits", tuple(self.payload_bits) * self.num_users)
        elif len(self.payload_bits) != self.num_users:
            raise ValueError("payload_bits must have one entry or one per user")
        if any(d < 1 for d in self.payload_bits):
            raise ValueError("payloads must be >= 1 bit")

    def with_elements(self, n: int) -> "Scenario":
        return replace(self, num_elements=n)

    def with_users(self, k: int) -> "Scenario":
        payload = self.payload_bits[0] if len(set(self.payload_bits)) == 1 else None
        if payload is None:
            raise ValueError("cannot resize a scenario with heterogeneous payloads")
        return replace(self, num_users=k, payload_bits=(payload,) * k)

    def with_eps_max(self, eps: float) -> "Scenario":
        return replace(self, eps_max=eps)


def trial_rng(seed: int, trial_index: int, stream: int) -> np.random.Generator:
    """Deterministic per-(seed, trial, stream) generator, order-independent."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, trial_index, stream))))


@dataclass(frozen=True)
class ChannelRealization:
    """One fading draw, immutable after construction.

    h[k]: direct BS->user gains; g[n]: LOS BS->IRS; f[k, n]: IRS->user;
    phi[k, n] = conj(f[k, n]) * g[n] is the cascaded vector, and lifted[k]
    the (N+1)x(N+1) Hermitian matrix pairing phi_k with h_k.
    """

    scenario: Scenario
    trial_index: int
    user_positions: np.ndarray  # (K, 2)
    h: np.ndarray               # (K,) complex
    g: np.ndarray               # (N,) complex
    f: np.ndarray               # (K, N) complex

    @property
    def num_users(self) -> int:
        return self.h.shape[0]

    @property
    def num_elements(self) -> int:
        return self.g.shape[0]

    @property
    def phi(self) -> np.ndarray:
        """Cascaded BS->IRS->user vectors, shape (K, N)."""
        return np.conj(self.f) * self.g[None, :]

    def lifted(self, k: int) -> np.ndarray:
        return build_lifted_matrix(self.h[k], self.phi[k])

    def without_irs(self) -> "ChannelRealization":
        """Same direct channels with the surface removed (N = 0 view)."""
        K = self.num_users
        return ChannelRealization(
            scenario=self.scenario.with_elements(0),
            trial_index=self.trial_index,
            user_positions=self.user_positions,
            h=self.h,
            g=np.zeros(0, dtype=complex),
            f=np.zeros((K, 0), dtype=complex),
        )

    def content_hash(self) -> str:
        """Stable digest of the fading draw (used to pair trials in reports)."""
        digest = hashlib.sha256()
        for arr in (self.user_positions, self.h, self.g, self.f):
            digest.update(np.ascontiguousarray(arr).tobytes())
        return digest.hexdigest()[:16]


def generate_realization(scenario: Scenario, trial_index: int) -> ChannelRealization:
    """Draw one channel realization, deterministic in (scenario.seed, trial).

    Draw order is fixed: user positions (radius then angle), then direct
    gains h, then per-user surface links f.  The BS-IRS link is a
    deterministic steering vector, so it consumes no randomness.
    """
    rng = trial_rng(scenario.seed, trial_index, STREAM_CHANNEL)
    K, N = scenario.num_users, scenario.num_elements
    beta0 = scenario.pathloss_ref

    center = np.asarray(scenario.user_area_center, dtype=float)
    radii = scenario.user_area_radius * np.sqrt(rng.random(K))
    angles = 2.0 * np.pi * rng.random(K)
    positions = center[None, :] + np.stack(
        [radii * np.cos(angles), radii * np.sin(angles)], axis=1
    )

    bs = np.asarray(scenario.bs_position, dtype=float)
    irs = np.asarray(scenario.irs_position, dtype=float)
    d_bs_user = np.linalg.norm(positions - bs[None, :], axis=1)
    d_irs_user = np.linalg.norm(positions - irs[None, :], axis=1)
    d_bs_irs = float(np.linalg.norm(irs - bs))

    var_h = beta0 * d_bs_user ** (-scenario.pathloss_exp_bs_user)
    h_std = rng.standard_normal((K, 2))
    h = np.sqrt(var_h / 2.0) * (h_std[:, 0] + 1j * h_std[:, 1])

    var_f = beta0 * d_irs_user ** (-scenario.pathloss_exp_irs_user)
    f_std = rng.standard_normal((K, N, 2))
    f = np.sqrt(var_f / 2.0)[:, None] * (f_std[..., 0] + 1j * f_std[..., 1])

    # Half-wavelength ULA along x; steering angle fixed by the BS direction.
    sin_theta = (bs[0] - irs[0]) / d_bs_irs if d_bs_irs > 0 else 0.0
    amp_g = np.sqrt(beta0 * d_bs_irs ** (-scenario.pathloss_exp_bs_irs))
    g = amp_g * np.exp(1j * np.pi * np.arange(N) * sin_theta)

    return ChannelRealization(
        scenario=scenario,
        trial_index=trial_index,
        user_positions=positions,
        h=h,
        g=g,
        f=f,
    )


def effective_snr(
    realization: ChannelRealization,
    v: np.ndarray,
    k: int,
    tx_power: float,
    noise_power: float,
) -> float:
    """Received SNR of user k under phase vector v: P |h_k + v^H phi_k|^2 / sigma^2."""
    v = np.asarray(v, dtype=complex)
    if v.shape != (realization.num_elements,):
        raise ValueError(
            f"v must have shape ({realization.num_elements},), got {v.shape}"
        )
    if v.size and np.max(np.abs(np.abs(v) - 1.0)) > 1e-9:
        raise ValueError("v must be unit-modulus per element")
    gain = realization.h[k]
    if v.size:
        gain = gain + np.vdot(v, realization.phi[k])
    return float(tx_power * np.abs(gain) ** 2 / noise_power)


def all_effective_snrs(
    realization: ChannelRealization, v: np.ndarray
) -> np.ndarray:
    """Vector of per-user SNRs under the scenario's power and noise."""
    sc = realization.scenario
    return np.array(
        [
            effective_snr(realization, v, k, sc.tx_power, sc.noise_power)
            for k in range(realization.num_users)
        ]
    )


def build_lifted_matrix(h_k: complex, phi_k: np.ndarray) -> np.ndarray:
    """Hermitian (N+1)x(N+1) block matrix [[phi phi^H, phi h^H], [h phi^H, 0]].

    Satisfies vbar^H R vbar + |h|^2 = |h + v^H phi|^2 for vbar = [v; 1].
    """
    phi_k = np.asarray(phi_k, dtype=complex).reshape(-1)
    n = phi_k.size
    R = np.zeros((n + 1, n + 1), dtype=complex)
    if n:
        R[:n, :n] = np.outer(phi_k, np.conj(phi_k))
        R[:n, n] = phi_k * np.conj(h_k)
        R[n, :n] = np.conj(R[:n, n])
    return R
