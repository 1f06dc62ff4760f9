"""Finite-blocklength (normal approximation) arithmetic.

Short-packet links do not reach Shannon capacity: the achievable rate of an
m-symbol codeword carries a dispersion penalty that scales as 1/sqrt(m) and
grows with the reliability target.  This module provides the exact
closed-form relations between payload size D (bits), received SNR gamma
(linear), blocklength m (symbols) and packet error probability eps, plus the
Gaussian Q-function / inverse used by all of them.

All SNRs are linear; dB conversion happens at I/O boundaries only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

__all__ = [
    "FblPoint",
    "q_function",
    "q_inverse",
    "pep",
    "blocklength",
    "achievable_rate",
    "group_total_latency",
]

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class FblPoint:
    """One operating point of a short-packet link.

    payload_bits >= 1, snr > 0, blocklength > 0 and, whenever the closed-form
    blocklength inversion is used, 0 < pep <= 0.5.
    """

    payload_bits: int
    snr: float
    blocklength: float
    pep: float

    def __post_init__(self):
        if self.payload_bits < 1:
            raise ValueError(f"payload_bits must be >= 1, got {self.payload_bits}")
        if not self.snr > 0:
            raise ValueError(f"snr must be positive, got {self.snr}")
        if not self.blocklength > 0:
            raise ValueError(f"blocklength must be positive, got {self.blocklength}")
        if not 0.0 < self.pep <= 0.5:
            raise ValueError(f"pep must be in (0, 0.5], got {self.pep}")


def q_function(x: float) -> float:
    """Upper-tail probability of the standard normal, Q(x).

    Computed through the complementary error function, which keeps full
    relative precision deep into the tail (Q(8) ~ 6e-16).
    """
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"q_function requires finite x, got {x}")
    return 0.5 * float(special.erfc(x / _SQRT2))


def q_inverse(p: float) -> float:
    """Inverse of the Gaussian Q-function: the x with Q(x) = p.

    One Newton step on top of erfcinv pins the residual |Q(x) - p| to a small
    multiple of machine epsilon relative to p.
    """
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"q_inverse requires p in (0, 1), got {p}")
    if p > 0.5:
        # 1 - p is exact for p in [0.5, 1), and the reflection keeps the
        # computation in the well-conditioned tail.
        return -q_inverse(1.0 - p)
    x = _SQRT2 * float(special.erfcinv(2.0 * p))
    # Newton refinement: Q'(x) = -phi(x)
    phi = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    if phi > 0.0:
        x += (q_function(x) - p) / phi
    return x


def _dispersion_factor(snr: float) -> float:
    """sqrt(1 - (1+snr)^-2), written to stay accurate for small snr."""
    g1 = 1.0 + snr
    return math.sqrt(snr * (snr + 2.0)) / g1


def pep(m: float, snr_min: float, payload_bits: float) -> float:
    """Worst-case packet error probability of a D-bit codeword of m symbols.

    Evaluates Q((m ln(1+g) - D ln2) / (sqrt(m) sqrt(1 - (1+g)^-2))) at the
    group's minimum SNR g.
    """
    if not m > 0:
        raise ValueError(f"blocklength must be positive, got {m}")
    if not snr_min > 0:
        raise ValueError(f"snr must be positive, got {snr_min}")
    if payload_bits < 1:
        raise ValueError(f"payload_bits must be >= 1, got {payload_bits}")
    num = m * math.log1p(snr_min) - math.log(2.0) * payload_bits
    den = math.sqrt(m) * _dispersion_factor(snr_min)
    return q_function(num / den)


def blocklength(eps: float, snr_min: float, payload_bits: float) -> float:
    """Real-valued blocklength delivering D bits at PEP eps and SNR snr_min.

    Closed-form inverse of :func:`pep` in m, valid for eps <= 0.5 (the
    positive root of the underlying quadratic in sqrt(m)).
    """
    if not 0.0 < eps <= 0.5:
        raise ValueError(f"pep must be in (0, 0.5] for inversion, got {eps}")
    if not snr_min > 0:
        raise ValueError(f"snr must be positive, got {snr_min}")
    if payload_bits < 1:
        raise ValueError(f"payload_bits must be >= 1, got {payload_bits}")
    log_g = math.log1p(snr_min)
    base = payload_bits * math.log(2.0) / log_g
    lam = _dispersion_factor(snr_min) * q_inverse(eps) / log_g
    return base + 0.5 * lam * lam + lam * math.sqrt(0.25 * lam * lam + base)


def achievable_rate(m: float, snr: float, eps: float) -> float:
    """Normal-approximation rate in bits per symbol: capacity minus dispersion."""
    if not m > 0:
        raise ValueError(f"blocklength must be positive, got {m}")
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr}")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"pep must be in (0, 1), got {eps}")
    capacity = math.log2(1.0 + snr)
    disp = _dispersion_factor(snr) / math.sqrt(m)
    return capacity - disp * q_inverse(eps) / math.log(2.0)


def group_total_latency(
    grouping,
    snrs: Sequence[float],
    eps_max: float,
) -> tuple[list[float], float]:
    """Real-valued per-group blocklengths and their sum for a fixed partition.

    Each group is served at its minimum member SNR; the group payload is the
    sum of member payloads.  Returns (per-group m_i, total).
    """
    snrs = np.asarray(snrs, dtype=float)
    per_group = []
    for members, payload in zip(grouping.groups, grouping.group_payloads):
        if len(members) == 0:
            raise ValueError("grouping contains an empty group")
        gmin = float(snrs[list(members)].min())
        per_group.append(blocklength(eps_max, gmin, payload))
    return per_group, float(sum(per_group))
