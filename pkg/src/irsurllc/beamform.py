"""Joint blocklength and reflective-phase optimization for a fixed grouping.

The continuous relaxation is attacked in lifted form: the unit-modulus phase
vector v becomes a PSD matrix V with unit diagonal (rank relaxed), the
per-user SNR bounds mu_k couple to V through the lifted channel matrices,
and the nonconvex reliability constraint R(m_i, mu_k) >= 0 is replaced by
its first-order expansion around the current iterate, trusted only inside a
shrinking 2-norm ball on [m, mu].  Accepted steps re-derive blocklengths
from the exact closed form at the new SNR bounds, so the outer objective
decreases monotonically by construction.  A Gaussian randomization pass
recovers a unit-modulus v from the final V, and blocklengths are rounded up
to integers that provably meet the PEP target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import conic, fbl
from .channel import ChannelRealization
from .grouping import Grouping

__all__ = [
    "ScaControls",
    "ScaState",
    "BeamformResult",
    "initial_phase_vector",
    "initialize",
    "taylor_lower_bound",
    "assemble_p23",
    "sca_step",
    "gaussian_randomization",
    "solve_p2",
]


@dataclass
class ScaControls:
    """Tunable knobs of the SCA outer loop; defaults follow the artifact's
    documented choices and every field can be overridden from config."""

    initial_radius_scale: float = 0.5
    shrink: float = 0.5
    radius_min_factor: float = 1e-4
    tol_improve: float = 1e-3            # symbols
    max_iters: int = 100
    improvement_window: int = 3
    improvement_rtol: float = 1e-4
    randomization_trials: int = 1000
    conic_tol: float = 1e-7
    conic_max_iters: int = 100
    mu_floor: float = 1e-6
    per_iteration_randomization: bool = False
    per_iteration_trials: int = 50
    radius_restore: str = "initial"      # "initial" | "adaptive"
    consecutive_reject_limit: int | None = None
    trace: Callable[[dict], None] | None = None
    rng: np.random.Generator | None = None

    def make_rng(self) -> np.random.Generator:
        return self.rng if self.rng is not None else np.random.default_rng(0)


@dataclass
class ScaState:
    """Expansion point of one SCA iteration."""

    m: np.ndarray                 # (G,) real blocklengths
    mu: np.ndarray                # (K,) SNR lower bounds, all > 0
    V: np.ndarray                 # (N+1, N+1) complex Hermitian, unit diagonal
    radius: float                 # current trust-region radius
    initial_radius: float
    iteration: int = 0
    relaxed_objective: float = math.nan   # optimum of the last conic solve
    candidate_total: float = math.nan     # refined objective of the last solve


@dataclass
class BeamformResult:
    v: np.ndarray                 # (N,) unit modulus
    m: np.ndarray                 # (G,) integer blocklengths
    snrs: np.ndarray              # (K,) exact SNRs under v
    peps: np.ndarray              # (K,) achieved per-user PEP
    total_latency: int
    sca_iterations: int
    accepted_steps: int
    relaxed_objective: float
    init_latency: int


def _normalized_channels(realization: ChannelRealization):
    """Channels scaled by sqrt(P/sigma^2) so that gains square to SNRs."""
    sc = realization.scenario
    amp = math.sqrt(sc.tx_power / sc.noise_power)
    return amp * realization.h, amp * realization.phi


def _snrs_under(h_t: np.ndarray, phi_t: np.ndarray, v: np.ndarray) -> np.ndarray:
    gains = h_t + (phi_t @ np.conj(v) if v.size else 0.0)
    return np.abs(gains) ** 2


def _align_phases(h_k: complex, phi_k: np.ndarray) -> np.ndarray:
    """Element phases that add the cascade coherently to the direct path."""
    v = np.exp(1j * (np.angle(phi_k) - np.angle(h_k)))
    v[np.abs(phi_k) == 0] = 1.0
    return v


def _initial_phases(h_t: np.ndarray, phi_t: np.ndarray) -> np.ndarray:
    """Alignment toward the user with the strongest achievable cascade."""
    if phi_t.shape[1] == 0:
        return np.zeros(0, dtype=complex)
    best_k = int(np.argmax((np.abs(h_t) + np.abs(phi_t).sum(axis=1)) ** 2))
    return _align_phases(h_t[best_k], phi_t[best_k])


def initial_phase_vector(realization: ChannelRealization) -> np.ndarray:
    """Grouping-free starting phases used by initialization and alternation."""
    h_t, phi_t = _normalized_channels(realization)
    return _initial_phases(h_t, phi_t)


def initialize(
    realization: ChannelRealization,
    grouping: Grouping,
    controls: ScaControls | None = None,
) -> ScaState:
    """Feasible starting point: phases aligned to the strongest user's cascade.

    mu starts at the exact SNRs under the aligned phases (floored away from
    the Taylor singularity at zero), and each group blocklength inverts the
    PEP constraint at its minimum member SNR, so the reliability constraint
    holds with equality for the binding users.
    """
    controls = controls or ScaControls()
    eps_max = realization.scenario.eps_max
    h_t, phi_t = _normalized_channels(realization)

    v0 = _initial_phases(h_t, phi_t)
    vbar = np.concatenate([v0, [1.0]])
    V0 = np.outer(vbar, vbar.conj())

    mu0 = np.maximum(_snrs_under(h_t, phi_t, v0), controls.mu_floor)
    m0 = np.array(
        [
            fbl.blocklength(eps_max, float(mu0[list(g)].min()), D)
            for g, D in zip(grouping.groups, grouping.group_payloads)
        ]
    )
    radius = controls.initial_radius_scale * float(
        np.linalg.norm(np.concatenate([m0, mu0]))
    )
    return ScaState(m=m0, mu=mu0, V=V0, radius=radius, initial_radius=radius)


def taylor_lower_bound(
    state: ScaState,
    grouping: Grouping,
    group_index: int,
    user: int,
    eps_max: float,
) -> tuple[float, float, float]:
    """Affine surrogate of R(m_i, mu_k) at the expansion point.

    Returns (constant, d/dm_i, d/dmu_k).  The constant is the exact
    constraint value; the partials are the analytic gradient of
    R(m, mu) = m ln(1+mu) - D ln2 - Qinv(eps) sqrt(m (1 - (1+mu)^-2)).
    """
    m = float(state.m[group_index])
    mu = float(state.mu[user])
    if not (m > 0 and mu > 0):
        raise ValueError("expansion point must be strictly interior")
    D = grouping.group_payloads[group_index]
    qi = fbl.q_inverse(eps_max)
    log_g = math.log1p(mu)
    g1 = 1.0 + mu
    s = mu * (mu + 2.0) / (g1 * g1)          # 1 - (1+mu)^-2
    sqrt_s = math.sqrt(s)
    sqrt_m = math.sqrt(m)
    const = m * log_g - math.log(2.0) * D - qi * sqrt_m * sqrt_s
    d_m = log_g - qi * sqrt_s / (2.0 * sqrt_m)
    d_mu = m / g1 - qi * sqrt_m / (math.sqrt(g1 * g1 - 1.0) * g1 * g1)
    return const, d_m, d_mu


def assemble_p23(
    state: ScaState,
    realization: ChannelRealization,
    grouping: Grouping,
    eps_max: float,
    mu_floor: float = 1e-6,
) -> conic.ConicProblem:
    """Standard-form cone program of one trust-region subproblem.

    Variables (in cone order): m and mu as nonnegative excesses over their
    floors (m_i >= 1, mu_k >= mu_floor), one slack per linearized
    reliability row, one per SNR-coupling row, the trust-region second-order
    cone on [m, mu] deviations, and the real embedding of the lifted PSD
    matrix.  All embedded trace coefficients carry the factor 1/2.
    """
    G = grouping.num_groups
    K = grouping.num_users
    h_t, phi_t = _normalized_channels(realization)
    side = 2 * (realization.num_elements + 1)

    b = conic.ConicProblemBuilder()
    b.add_var("m_excess", conic.nonneg(G))       # m_i = 1 + m_excess_i
    b.add_var("mu_excess", conic.nonneg(K))      # mu_k = mu_floor + mu_excess_k
    b.add_var("pep_slack", conic.nonneg(K))
    b.add_var("snr_slack", conic.nonneg(K))
    b.add_var("trust", conic.soc(1 + G + K))
    b.add_var("V", conic.psd(side))
    b.set_objective({"m_excess": np.ones(G)})

    # linearized reliability rows, one per user
    for i, members in enumerate(grouping.groups):
        for k in members:
            const, d_m, d_mu = taylor_lower_bound(state, grouping, i, k, eps_max)
            row_m = np.zeros(G)
            row_m[i] = d_m
            row_mu = np.zeros(K)
            row_mu[k] = d_mu
            slack = np.zeros(K)
            slack[k] = -1.0
            rhs = -const + d_m * (state.m[i] - 1.0) + d_mu * (state.mu[k] - mu_floor)
            b.add_equality(
                {"m_excess": row_m, "mu_excess": row_mu, "pep_slack": slack}, rhs
            )

    # SNR coupling rows: (1/2) <embed(R_k), V> + |h_k|^2 - mu_k - slack = 0
    for k in range(K):
        lifted = np.zeros((realization.num_elements + 1,) * 2, dtype=complex)
        phi_k = phi_t[k]
        lifted[:-1, :-1] = np.outer(phi_k, phi_k.conj())
        lifted[:-1, -1] = phi_k * np.conj(h_t[k])
        lifted[-1, :-1] = np.conj(lifted[:-1, -1])
        coeff = conic.svec(0.5 * conic.hermitian_embed(lifted))
        row_mu = np.zeros(K)
        row_mu[k] = -1.0
        slack = np.zeros(K)
        slack[k] = -1.0
        b.add_equality(
            {"V": coeff, "mu_excess": row_mu, "snr_slack": slack},
            mu_floor - float(np.abs(h_t[k]) ** 2),
        )

    # unit diagonal of the embedded matrix
    diag_pos = conic.problem.svec_diag_positions(side)
    for d in range(side):
        coeff = np.zeros(conic.svec_dim(side))
        coeff[diag_pos[d]] = 1.0
        b.add_equality({"V": coeff}, 1.0)

    # trust region: head pinned to the radius, tail = [m, mu] deviations
    head = np.zeros(1 + G + K)
    head[0] = 1.0
    b.add_equality({"trust": head}, state.radius)
    for i in range(G):
        t_row = np.zeros(1 + G + K)
        t_row[1 + i] = 1.0
        m_row = np.zeros(G)
        m_row[i] = -1.0
        b.add_equality({"trust": t_row, "m_excess": m_row}, -(state.m[i] - 1.0))
    for k in range(K):
        t_row = np.zeros(1 + G + K)
        t_row[1 + G + k] = 1.0
        mu_row = np.zeros(K)
        mu_row[k] = -1.0
        b.add_equality({"trust": t_row, "mu_excess": mu_row}, -(state.mu[k] - mu_floor))

    return b.build()


def _extract_solution(problem: conic.ConicProblem, x: np.ndarray, G: int, K: int,
                      mu_floor: float, side: int):
    m = 1.0 + problem.extract(x, "m_excess")
    mu = mu_floor + problem.extract(x, "mu_excess")
    V_embedded = conic.smat(problem.extract(x, "V"), side)
    V = conic.complex_from_embedded(V_embedded)
    return m, mu, V


def sca_step(
    state: ScaState,
    realization: ChannelRealization,
    grouping: Grouping,
    eps_max: float,
    controls: ScaControls | None = None,
) -> tuple[ScaState, bool]:
    """One trust-region iteration: solve the surrogate, refine, accept/reject.

    The candidate blocklengths re-invert the exact PEP constraint at the
    surrogate's SNR bounds; the step is accepted only if their sum improves
    the incumbent by more than ``tol_improve``, in which case the radius is
    restored, otherwise the radius halves and the expansion point stays.
    """
    controls = controls or ScaControls()
    G, K = grouping.num_groups, grouping.num_users
    side = 2 * (realization.num_elements + 1)

    problem = assemble_p23(state, realization, grouping, eps_max, controls.mu_floor)
    sol = conic.solve(problem, tol=controls.conic_tol, max_iters=controls.conic_max_iters)
    usable = sol.status == "optimal" or (
        sol.status == "max_iters"
        and max(sol.primal_residual, sol.dual_residual, sol.duality_gap) <= 1e-4
    )
    if not usable:
        new_state = replace(
            state,
            radius=state.radius * controls.shrink,
            iteration=state.iteration + 1,
            relaxed_objective=math.nan,
            candidate_total=math.nan,
        )
        return new_state, False

    m_star, mu_star, V_star = _extract_solution(
        problem, sol.x, G, K, controls.mu_floor, side
    )
    relaxed = float(sol.objective) + G  # objective was sum of (m_i - 1)

    cand_m = np.array(
        [
            fbl.blocklength(eps_max, float(mu_star[list(g)].min()), D)
            for g, D in zip(grouping.groups, grouping.group_payloads)
        ]
    )
    cand_total = float(cand_m.sum())

    if cand_total < float(state.m.sum()) - controls.tol_improve:
        if controls.radius_restore == "adaptive":
            restored = min(state.initial_radius, 4.0 * state.radius)
        else:
            restored = state.initial_radius
        new_state = ScaState(
            m=cand_m,
            mu=np.maximum(mu_star, controls.mu_floor),
            V=V_star,
            radius=restored,
            initial_radius=state.initial_radius,
            iteration=state.iteration + 1,
            relaxed_objective=relaxed,
            candidate_total=cand_total,
        )
        return new_state, True

    new_state = replace(
        state,
        radius=state.radius * controls.shrink,
        iteration=state.iteration + 1,
        relaxed_objective=relaxed,
        candidate_total=cand_total,
    )
    return new_state, False


def _real_latency_under(v: np.ndarray, h_t, phi_t, grouping, eps_max,
                        mu_floor: float) -> tuple[float, np.ndarray]:
    snrs = np.maximum(_snrs_under(h_t, phi_t, v), mu_floor)
    total = 0.0
    for g, D in zip(grouping.groups, grouping.group_payloads):
        total += fbl.blocklength(eps_max, float(snrs[list(g)].min()), D)
    return total, snrs


def gaussian_randomization(
    V: np.ndarray,
    realization: ChannelRealization,
    grouping: Grouping,
    eps_max: float,
    trials: int,
    rng: np.random.Generator,
    extra_candidates: Sequence[np.ndarray] = (),
) -> tuple[np.ndarray, float]:
    """Recover a unit-modulus phase vector from the relaxed PSD matrix.

    Draws ``trials`` vectors with covariance V, normalizes each against its
    auxiliary last coordinate, and keeps the candidate with the smallest
    exact total latency.  The principal eigenvector (and any supplied extra
    candidates) compete on equal footing, so the result can only improve on
    them.  Deterministic given the generator state.
    """
    N = realization.num_elements
    h_t, phi_t = _normalized_channels(realization)
    mu_floor = 1e-30  # evaluation guard only: SNR exactly 0 breaks the closed form

    V = 0.5 * (V + V.conj().T)
    evals, evecs = np.linalg.eigh(V)
    evals = np.clip(evals, 0.0, None)
    B = evecs * np.sqrt(evals)[None, :]

    candidates = []
    principal = evecs[:, -1]
    candidates.append(_phases_from(principal, N))
    for extra in extra_candidates:
        candidates.append(np.asarray(extra, dtype=complex))
    if N and trials > 0:
        w = rng.standard_normal((trials, N + 1, 2))
        draws = (w[..., 0] + 1j * w[..., 1]) / math.sqrt(2.0)
        samples = draws @ B.T  # rows ~ CN(0, V)
        for t in range(trials):
            candidates.append(_phases_from(samples[t], N))

    best_v, best_latency = None, math.inf
    for v in candidates:
        latency, _ = _real_latency_under(v, h_t, phi_t, grouping, eps_max, mu_floor)
        if latency < best_latency:
            best_latency, best_v = latency, v
    assert best_v is not None
    return best_v, best_latency


def _phases_from(vbar: np.ndarray, N: int) -> np.ndarray:
    """Unit-modulus v from an augmented vector, normalizing the last entry."""
    if N == 0:
        return np.zeros(0, dtype=complex)
    ref = vbar[N]
    angles = np.angle(vbar[:N])
    if abs(ref) > 0:
        angles = angles - np.angle(ref)
    return np.exp(1j * angles)


def solve_p2(
    realization: ChannelRealization,
    grouping: Grouping,
    eps_max: float | None = None,
    controls: ScaControls | None = None,
) -> BeamformResult:
    """Full pipeline for a fixed grouping: SCA, randomization, integer rounding.

    The returned blocklengths are integers and every user's PEP is verified
    against the target; the initialization phases compete in the final
    candidate pool, so the result never does worse than the starting point.
    """
    controls = controls or ScaControls()
    sc = realization.scenario
    if eps_max is None:
        eps_max = sc.eps_max
    h_t, phi_t = _normalized_channels(realization)
    N = realization.num_elements

    if N == 0:
        snrs = _snrs_under(h_t, phi_t, np.zeros(0, dtype=complex))
        m_int, peps = _integerize(snrs, grouping, eps_max)
        total = int(m_int.sum())
        return BeamformResult(
            v=np.zeros(0, dtype=complex), m=m_int, snrs=snrs, peps=peps,
            total_latency=total, sca_iterations=0, accepted_steps=0,
            relaxed_objective=float(
                sum(fbl.group_total_latency(grouping, snrs, eps_max)[0])
            ),
            init_latency=total,
        )

    state = initialize(realization, grouping, controls)
    v_init = _initial_phases(h_t, phi_t)
    rng = controls.make_rng()
    radius_min = controls.radius_min_factor * state.initial_radius

    accepted_totals = [float(state.m.sum())]
    accepted_steps = 0
    consecutive_rejects = 0
    extra_candidates = [v_init]
    last_relaxed = math.nan

    it = 0
    while it < controls.max_iters and state.radius >= radius_min:
        if (
            controls.consecutive_reject_limit is not None
            and consecutive_rejects >= controls.consecutive_reject_limit
        ):
            break
        state, accepted = sca_step(state, realization, grouping, eps_max, controls)
        it += 1
        consecutive_rejects = 0 if accepted else consecutive_rejects + 1
        if not math.isnan(state.relaxed_objective):
            last_relaxed = state.relaxed_objective
        if controls.trace is not None:
            controls.trace(
                {
                    "iteration": it,
                    "radius": state.radius,
                    "accepted": accepted,
                    "relaxed_objective": state.relaxed_objective,
                    "refined_objective": state.candidate_total,
                }
            )
        if accepted:
            accepted_steps += 1
            accepted_totals.append(float(state.m.sum()))
            if controls.per_iteration_randomization:
                v_it, _ = gaussian_randomization(
                    state.V, realization, grouping, eps_max,
                    controls.per_iteration_trials, rng,
                )
                extra_candidates.append(v_it)
            w = controls.improvement_window
            if len(accepted_totals) > w:
                prev = accepted_totals[-1 - w]
                if (prev - accepted_totals[-1]) < controls.improvement_rtol * prev:
                    break

    v_best, _ = gaussian_randomization(
        state.V, realization, grouping, eps_max,
        controls.randomization_trials, rng, extra_candidates,
    )

    # Integerize; keep the initialization if rounding flips the comparison.
    snrs_best = _snrs_under(h_t, phi_t, v_best)
    m_best, peps_best = _integerize(snrs_best, grouping, eps_max)
    snrs_init = _snrs_under(h_t, phi_t, v_init)
    m_init, peps_init = _integerize(snrs_init, grouping, eps_max)
    init_total = int(m_init.sum())
    if int(m_best.sum()) <= init_total:
        v, m_int, snrs, peps = v_best, m_best, snrs_best, peps_best
    else:
        v, m_int, snrs, peps = v_init, m_init, snrs_init, peps_init

    return BeamformResult(
        v=v, m=m_int, snrs=snrs, peps=peps,
        total_latency=int(m_int.sum()),
        sca_iterations=it,
        accepted_steps=accepted_steps,
        relaxed_objective=last_relaxed,
        init_latency=init_total,
    )


def _integerize(snrs: np.ndarray, grouping: Grouping, eps_max: float):
    """Ceil the closed-form blocklengths and bump until every PEP passes."""
    m_int = np.zeros(grouping.num_groups, dtype=int)
    peps = np.zeros(len(snrs))
    for i, (g, D) in enumerate(zip(grouping.groups, grouping.group_payloads)):
        members = list(g)
        gmin = float(snrs[members].min())
        m = max(1, math.ceil(fbl.blocklength(eps_max, gmin, D) - 1e-12))
        while fbl.pep(m, gmin, D) > eps_max:
            m += 1
        m_int[i] = m
        for k in members:
            peps[k] = fbl.pep(m, float(snrs[k]), D)
    return m_int, peps
