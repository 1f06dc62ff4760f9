"""User partitioning strategies for joint short-packet encoding.

Merging users into one codeword shrinks the dispersion penalty but drags the
group rate down to its minimum-SNR member, so partition quality decides the
total latency.  This module provides the partition container plus four ways
to build one: 1-D K-means on SNR values (with best-G selection), greedy
incremental assignment, exhaustive search over all set partitions, and the
fixed baselines G=1 / G=K.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from . import fbl

__all__ = [
    "Grouping",
    "singletons",
    "single_group",
    "kmeans_grouping",
    "kmeans_best",
    "greedy_grouping",
    "exhaustive_grouping",
    "iter_partitions",
    "K_MAX_EXHAUSTIVE",
]

K_MAX_EXHAUSTIVE = 8  # Bell(8) = 4140 partitions


@dataclass(frozen=True)
class Grouping:
    """A partition of users 0..K-1 with per-group payload totals.

    Groups are stored canonically: members sorted ascending, groups ordered
    by smallest member.  ``group_payloads[i]`` is the summed payload (bits)
    of group i.
    """

    groups: tuple[tuple[int, ...], ...]
    group_payloads: tuple[int, ...]
    num_users: int = field(default=0)

    @staticmethod
    def from_groups(groups: Sequence[Sequence[int]], payloads: Sequence[int]) -> "Grouping":
        payloads = [int(p) for p in payloads]
        num_users = len(payloads)
        canon = sorted((tuple(sorted(g)) for g in groups), key=lambda g: g[0] if g else -1)
        seen: set[int] = set()
        for g in canon:
            if len(g) == 0:
                raise ValueError("grouping contains an empty group")
            for k in g:
                if k in seen:
                    raise ValueError(f"user {k} appears in more than one group")
                seen.add(k)
        if seen != set(range(num_users)):
            raise ValueError("groups do not cover users 0..K-1 exactly")
        totals = tuple(sum(payloads[k] for k in g) for g in canon)
        return Grouping(tuple(canon), totals, num_users)

    @property
    def num_groups(self) -> int:
        return len(self.groups)

    def group_of(self, user: int) -> int:
        for i, g in enumerate(self.groups):
            if user in g:
                return i
        raise KeyError(user)

    def to_json(self) -> str:
        return json.dumps(
            {"groups": [list(g) for g in self.groups], "payloads": list(self.group_payloads)},
            separators=(",", ":"),
        )

    @staticmethod
    def from_json(text: str, payloads: Sequence[int]) -> "Grouping":
        data = json.loads(text)
        return Grouping.from_groups(data["groups"], payloads)


def singletons(payloads: Sequence[int]) -> Grouping:
    """G = K baseline: every user encoded individually."""
    return Grouping.from_groups([[k] for k in range(len(payloads))], payloads)


def single_group(payloads: Sequence[int]) -> Grouping:
    """G = 1 baseline: all users jointly encoded into one codeword."""
    return Grouping.from_groups([list(range(len(payloads)))], payloads)


# ---------------------------------------------------------------------------
# K-means on 1-D SNR values
# ---------------------------------------------------------------------------

def kmeans_grouping(
    snrs: Sequence[float],
    num_groups: int,
    payloads: Sequence[int] | None = None,
    scale: str = "linear",
) -> Grouping:
    """Partition users by 1-D K-means over their SNR values.

    Initial centers sit at evenly spaced quantiles of the sorted SNRs
    (always including min and max); iteration alternates nearest-center
    assignment (ties to the lower-indexed center) and center means until the
    assignment is stationary.  Clusters that empty out are dropped, so the
    returned partition can have fewer than ``num_groups`` groups when SNRs
    are heavily tied.  ``scale='db'`` clusters on 10*log10(snr) instead.
    """
    snrs = np.asarray(snrs, dtype=float)
    K = snrs.size
    if not 1 <= num_groups <= K:
        raise ValueError(f"need 1 <= G <= K, got G={num_groups}, K={K}")
    if payloads is None:
        payloads = [1] * K
    if scale == "db":
        values = 10.0 * np.log10(snrs)
    elif scale == "linear":
        values = snrs
    else:
        raise ValueError(f"unknown scale {scale!r}")

    order = np.argsort(values, kind="stable")
    quantile_idx = np.round(np.linspace(0, K - 1, num_groups)).astype(int)
    centers = values[order][quantile_idx].astype(float)

    assign = None
    for _ in range(1000):
        dist = np.abs(values[:, None] - centers[None, :])
        new_assign = np.argmin(dist, axis=1)  # argmin ties -> lower index
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        keep = []
        for j in range(centers.size):
            members = np.nonzero(assign == j)[0]
            if members.size:
                keep.append(values[members].mean())
        if len(keep) < centers.size:
            centers = np.array(keep)
            assign = None  # re-assign against the reduced center set
        else:
            centers = np.array(keep)

    groups = [np.nonzero(assign == j)[0].tolist() for j in range(centers.size)]
    groups = [g for g in groups if g]
    return Grouping.from_groups(groups, payloads)


def kmeans_best(
    snrs: Sequence[float],
    latency_eval: Callable[[Grouping], float],
    payloads: Sequence[int] | None = None,
    scale: str = "linear",
) -> Grouping:
    """K-means partition with the group count chosen by evaluated latency.

    Runs :func:`kmeans_grouping` for every G in 1..K and keeps the partition
    with the smallest evaluated total latency; ties go to the smaller G.
    """
    K = len(snrs)
    if payloads is None:
        payloads = [1] * K
    best: tuple[float, int, Grouping] | None = None
    seen: set[tuple] = set()
    for g in range(1, K + 1):
        grouping = kmeans_grouping(snrs, g, payloads, scale=scale)
        if grouping.groups in seen:
            continue
        seen.add(grouping.groups)
        latency = latency_eval(grouping)
        if best is None or latency < best[0] - 1e-12:
            best = (latency, g, grouping)
    assert best is not None
    return best[2]


# ---------------------------------------------------------------------------
# Greedy incremental assignment
# ---------------------------------------------------------------------------

def _partial_latency(groups: list[list[int]], snrs, payloads, eps_max: float) -> float:
    total = 0.0
    for g in groups:
        gmin = min(snrs[k] for k in g)
        payload = sum(payloads[k] for k in g)
        total += fbl.blocklength(eps_max, gmin, payload)
    return total


def greedy_grouping(
    snrs: Sequence[float],
    payloads: Sequence[int],
    eps_max: float,
    rule: str = "min",
) -> Grouping:
    """Build a partition by placing one user per round into the best slot.

    Each round tentatively puts every un-grouped user into every existing
    group and into a fresh singleton, evaluates the total real-valued latency
    of the users grouped so far plus the newcomer, and commits the placement
    selected by ``rule``: ``'min'`` picks the smallest resulting latency,
    ``'max'`` the largest.  Ties break toward the lowest user index, then the
    lowest group index (new-group candidates last).  K rounds, O(K^3) worst
    case.
    """
    if rule not in ("min", "max"):
        raise ValueError(f"rule must be 'min' or 'max', got {rule!r}")
    snrs = np.asarray(snrs, dtype=float)
    K = snrs.size
    if K < 1:
        raise ValueError("need at least one user")
    ungrouped = list(range(K))
    groups: list[list[int]] = []
    better = (lambda a, b: a < b - 1e-15) if rule == "min" else (lambda a, b: a > b + 1e-15)

    for _ in range(K):
        best: tuple[float, int, int] | None = None  # (latency, user, slot)
        for k in ungrouped:
            for slot in range(len(groups) + 1):
                if slot < len(groups):
                    groups[slot].append(k)
                    latency = _partial_latency(groups, snrs, payloads, eps_max)
                    groups[slot].pop()
                else:
                    groups.append([k])
                    latency = _partial_latency(groups, snrs, payloads, eps_max)
                    groups.pop()
                if best is None or better(latency, best[0]):
                    best = (latency, k, slot)
        assert best is not None
        _, k, slot = best
        if slot < len(groups):
            groups[slot].append(k)
        else:
            groups.append([k])
        ungrouped.remove(k)

    return Grouping.from_groups(groups, payloads)


# ---------------------------------------------------------------------------
# Exhaustive enumeration (restricted growth strings)
# ---------------------------------------------------------------------------

def iter_partitions(n: int):
    """Yield every set partition of range(n) in restricted-growth order.

    A restricted growth string a[0..n-1] has a[0]=0 and
    a[i] <= max(a[0..i-1]) + 1; each string maps to one partition.
    """
    if n == 0:
        yield []
        return
    a = [0] * n
    while True:
        blocks: list[list[int]] = [[] for _ in range(max(a) + 1)]
        for idx, lbl in enumerate(a):
            blocks[lbl].append(idx)
        yield blocks
        # advance to the next restricted growth string
        i = n - 1
        while i > 0:
            prefix_max = max(a[:i])
            if a[i] <= prefix_max:
                a[i] += 1
                for j in range(i + 1, n):
                    a[j] = 0
                break
            i -= 1
        else:
            return


def exhaustive_grouping(
    snrs: Sequence[float],
    payloads: Sequence[int],
    eps_max: float,
    latency_eval: Callable[[Grouping], float] | None = None,
    k_max: int = K_MAX_EXHAUSTIVE,
) -> Grouping:
    """Globally latency-minimal partition under the supplied evaluator.

    Enumerates all Bell(K) partitions; refuses K > ``k_max``.  The default
    evaluator is the real-valued closed-form latency at the given SNRs.
    Ties keep the first partition in enumeration order (lexicographic in the
    restricted-growth encoding).
    """
    K = len(snrs)
    if K > k_max:
        raise ValueError(
            f"exhaustive grouping is capped at K <= {k_max} "
            f"(Bell numbers explode); got K = {K}"
        )
    if latency_eval is None:
        snrs_arr = np.asarray(snrs, dtype=float)

        def latency_eval(grouping: Grouping) -> float:
            return fbl.group_total_latency(grouping, snrs_arr, eps_max)[1]

    best: tuple[float, Grouping] | None = None
    for blocks in iter_partitions(K):
        grouping = Grouping.from_groups(blocks, payloads)
        latency = latency_eval(grouping)
        if best is None or latency < best[0] - 1e-15:
            best = (latency, grouping)
    assert best is not None
    return best[1]
