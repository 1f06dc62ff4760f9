"""Scheme execution: grouping/beamforming alternation and Monte-Carlo runs.

A scheme pairs a grouping method (the two proposed heuristics, exhaustive
search, or the fixed G=1 / G=K baselines) with an IRS on/off flag.  For one
channel realization the driver alternates between regrouping under the
current phases and re-optimizing phases for the new grouping, keeping the
best integer latency seen.  Monte-Carlo batches share the exact same
realizations across schemes (paired comparisons) and are reproducible from
(seed, trial_index) regardless of execution order or worker count.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import beamform, channel, fbl, grouping as grp
from .channel import ChannelRealization, Scenario, STREAM_OPTIMIZER
from .grouping import Grouping

__all__ = [
    "Scheme",
    "SolveResult",
    "TrialRecord",
    "SchemeStats",
    "alternating_optimize",
    "monte_carlo",
    "METHODS",
    "EXHAUSTIVE_SOLVE_CAP",
]

METHODS = (
    "proposed_kmeans",
    "proposed_greedy",
    "exhaustive",
    "individual_encoding",
    "single_codeword",
)

# Above this user count the exhaustive scheme stops re-solving the phase
# problem per partition and falls back to fixed-phase grouping search.
EXHAUSTIVE_SOLVE_CAP = 5
OUTER_CAP_DEFAULT = 10


@dataclass(frozen=True)
class Scheme:
    """Grouping method plus IRS flag; canonical label 'method:irs'."""

    method: str
    with_irs: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown scheme method {self.method!r}")

    @property
    def label(self) -> str:
        return f"{self.method}:{'irs' if self.with_irs else 'no_irs'}"

    @staticmethod
    def parse(text: str) -> "Scheme":
        parts = text.strip().split(":")
        if len(parts) == 1:
            return Scheme(parts[0], True)
        if len(parts) == 2 and parts[1] in ("irs", "no_irs"):
            return Scheme(parts[0], parts[1] == "irs")
        raise ValueError(f"bad scheme spec {text!r} (want 'method[:irs|:no_irs]')")


@dataclass
class SolveResult:
    scheme: Scheme
    grouping: Grouping
    v: np.ndarray
    m: np.ndarray
    snrs: np.ndarray
    peps: np.ndarray
    total_latency: int
    sca_iterations: int
    outer_iterations: int
    relaxed_objective: float
    realization_hash: str


@dataclass
class SchemeStats:
    scheme: str
    trials_ok: int
    trials_failed: int
    mean: float
    std: float
    min: int
    max: int


@dataclass
class TrialRecord:
    trial_index: int
    scheme: str
    total_latency: int
    num_groups: int
    group_blocklengths: tuple[int, ...]
    sca_iterations: int
    wall_ms: int
    realization_hash: str
    failed: bool = False
    error: str = ""


def _grouping_for(
    scheme: Scheme,
    snrs: np.ndarray,
    payloads,
    eps_max: float,
    greedy_rule: str = "min",
) -> Grouping:
    if scheme.method == "individual_encoding":
        return grp.singletons(payloads)
    if scheme.method == "single_codeword":
        return grp.single_group(payloads)
    if scheme.method == "proposed_greedy":
        return grp.greedy_grouping(snrs, payloads, eps_max, rule=greedy_rule)
    if scheme.method == "proposed_kmeans":
        def latency_eval(g: Grouping) -> float:
            return fbl.group_total_latency(g, snrs, eps_max)[1]
        return grp.kmeans_best(snrs, latency_eval, payloads)
    if scheme.method == "exhaustive":
        return grp.exhaustive_grouping(snrs, payloads, eps_max)
    raise AssertionError(scheme.method)


def alternating_optimize(
    realization: ChannelRealization,
    scheme: Scheme,
    eps_max: float | None = None,
    controls: beamform.ScaControls | None = None,
    outer_cap: int = OUTER_CAP_DEFAULT,
    greedy_rule: str = "min",
) -> SolveResult:
    """Best-seen alternation between grouping and phase/blocklength solves.

    Fixed-grouping schemes degenerate to a single solve.  The exhaustive
    scheme solves the phase problem per candidate partition (K <= 5) or,
    above that, searches partitions under the fixed initial phases and
    solves once for the winner.  Terminates when the grouping repeats, the
    integer latency stops improving, or the outer cap is reached; the best
    result seen is returned, never a later worse one.
    """
    controls = controls or beamform.ScaControls()
    if not scheme.with_irs:
        realization = realization.without_irs()
    sc = realization.scenario
    if eps_max is None:
        eps_max = sc.eps_max
    payloads = sc.payload_bits
    rhash = realization.content_hash()

    if scheme.method == "exhaustive":
        return _exhaustive_optimize(realization, scheme, eps_max, controls, rhash)

    v = beamform.initial_phase_vector(realization)
    seen: set[tuple] = set()
    best: SolveResult | None = None
    sca_total = 0
    outer = 0
    for outer in range(1, outer_cap + 1):
        snrs = channel.all_effective_snrs(realization, v)
        grouping = _grouping_for(scheme, snrs, payloads, eps_max, greedy_rule)
        if grouping.groups in seen:
            break
        seen.add(grouping.groups)
        res = beamform.solve_p2(realization, grouping, eps_max, controls)
        sca_total += res.sca_iterations
        if best is None or res.total_latency < best.total_latency:
            best = SolveResult(
                scheme=scheme, grouping=grouping, v=res.v, m=res.m,
                snrs=res.snrs, peps=res.peps, total_latency=res.total_latency,
                sca_iterations=sca_total, outer_iterations=outer,
                relaxed_objective=res.relaxed_objective, realization_hash=rhash,
            )
        else:
            break
        v = res.v
    assert best is not None
    best.sca_iterations = sca_total
    best.outer_iterations = outer
    return best


def _exhaustive_optimize(realization, scheme, eps_max, controls, rhash) -> SolveResult:
    sc = realization.scenario
    K = sc.num_users
    payloads = sc.payload_bits
    if K > grp.K_MAX_EXHAUSTIVE:
        raise ValueError(
            f"exhaustive scheme supports K <= {grp.K_MAX_EXHAUSTIVE}, got {K}"
        )
    if K <= EXHAUSTIVE_SOLVE_CAP:
        best = None
        sca_total = 0
        for blocks in grp.iter_partitions(K):
            grouping = Grouping.from_groups(blocks, payloads)
            res = beamform.solve_p2(realization, grouping, eps_max, controls)
            sca_total += res.sca_iterations
            if best is None or res.total_latency < best[0].total_latency:
                best = (res, grouping)
        res, grouping = best
        return SolveResult(
            scheme=scheme, grouping=grouping, v=res.v, m=res.m, snrs=res.snrs,
            peps=res.peps, total_latency=res.total_latency,
            sca_iterations=sca_total, outer_iterations=1,
            relaxed_objective=res.relaxed_objective, realization_hash=rhash,
        )
    # cost-controlled fallback: search partitions under fixed initial phases
    v0 = beamform.initial_phase_vector(realization)
    snrs = channel.all_effective_snrs(realization, v0)
    grouping = grp.exhaustive_grouping(snrs, payloads, eps_max)
    res = beamform.solve_p2(realization, grouping, eps_max, controls)
    return SolveResult(
        scheme=scheme, grouping=grouping, v=res.v, m=res.m, snrs=res.snrs,
        peps=res.peps, total_latency=res.total_latency,
        sca_iterations=res.sca_iterations, outer_iterations=1,
        relaxed_objective=res.relaxed_objective, realization_hash=rhash,
    )


# ---------------------------------------------------------------------------
# Monte-Carlo batches
# ---------------------------------------------------------------------------

def _controls_for_trial(scenario: Scenario, trial_index: int, overrides: dict) -> beamform.ScaControls:
    rng = channel.trial_rng(scenario.seed, trial_index, STREAM_OPTIMIZER)
    return beamform.ScaControls(rng=rng, **overrides)


def run_trial(
    scenario: Scenario,
    trial_index: int,
    schemes: tuple[Scheme, ...],
    control_overrides: dict | None = None,
    outer_cap: int = OUTER_CAP_DEFAULT,
    greedy_rule: str = "min",
) -> list[TrialRecord]:
    """All schemes on one shared realization; failures never abort the trial."""
    overrides = dict(control_overrides or {})
    realization = channel.generate_realization(scenario, trial_index)
    records = []
    for scheme in schemes:
        controls = _controls_for_trial(scenario, trial_index, overrides)
        start = time.perf_counter()
        try:
            res = alternating_optimize(
                realization, scheme, controls=controls,
                outer_cap=outer_cap, greedy_rule=greedy_rule,
            )
            wall_ms = int(round(1000 * (time.perf_counter() - start)))
            records.append(
                TrialRecord(
                    trial_index=trial_index,
                    scheme=scheme.label,
                    total_latency=res.total_latency,
                    num_groups=res.grouping.num_groups,
                    group_blocklengths=tuple(int(v) for v in res.m),
                    sca_iterations=res.sca_iterations,
                    wall_ms=wall_ms,
                    realization_hash=res.realization_hash,
                )
            )
        except Exception as exc:  # noqa: BLE001 - per-trial isolation
            wall_ms = int(round(1000 * (time.perf_counter() - start)))
            records.append(
                TrialRecord(
                    trial_index=trial_index,
                    scheme=scheme.label,
                    total_latency=0,
                    num_groups=0,
                    group_blocklengths=(),
                    sca_iterations=0,
                    wall_ms=wall_ms,
                    realization_hash=realization.content_hash(),
                    failed=True,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
    return records


def _trial_worker(args) -> list[TrialRecord]:
    return run_trial(*args)


def monte_carlo(
    scenario: Scenario,
    schemes,
    trials: int,
    control_overrides: dict | None = None,
    threads: int = 1,
    outer_cap: int = OUTER_CAP_DEFAULT,
    greedy_rule: str = "min",
) -> tuple[dict[str, SchemeStats], list[TrialRecord]]:
    """Paired Monte-Carlo over ``trials`` realizations of the scenario.

    Every scheme sees the identical realization per trial; failed trials are
    excluded from the statistics and counted separately.  Deterministic
    given the scenario seed, independent of ``threads``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    schemes = tuple(Scheme.parse(s) if isinstance(s, str) else s for s in schemes)
    jobs = [
        (scenario, t, schemes, control_overrides, outer_cap, greedy_rule)
        for t in range(trials)
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            per_trial = list(pool.map(_trial_worker, jobs, chunksize=1))
    else:
        per_trial = [run_trial(*job) for job in jobs]

    records = [rec for batch in per_trial for rec in batch]
    records.sort(key=lambda r: (r.trial_index, r.scheme))

    stats: dict[str, SchemeStats] = {}
    for scheme in schemes:
        ok = [r for r in records if r.scheme == scheme.label and not r.failed]
        bad = [r for r in records if r.scheme == scheme.label and r.failed]
        lat = np.array([r.total_latency for r in ok], dtype=float)
        stats[scheme.label] = SchemeStats(
            scheme=scheme.label,
            trials_ok=len(ok),
            trials_failed=len(bad),
            mean=float(lat.mean()) if lat.size else float("nan"),
            std=float(lat.std(ddof=1)) if lat.size > 1 else 0.0,
            min=int(lat.min()) if lat.size else 0,
            max=int(lat.max()) if lat.size else 0,
        )
    return stats, records
