"""Homogeneous self-dual interior-point solver for dense cone programs.

A primal-dual path-following method with Nesterov-Todd scaling and Mehrotra
predictor-corrector steps, over the product of free, nonnegative, second-
order, and PSD blocks.  The homogeneous embedding

    A x - b tau = 0,   A'y + z - c tau = 0,   kappa + c'x - b'y = 0,
    x in K, z in K*, tau >= 0, kappa >= 0,

yields either a scaled optimal pair (tau > 0) or an infeasibility
certificate (kappa > 0).  Everything is dense: intended problem sizes are
tens to a few thousand coordinates with at most a few hundred equalities,
where robustness matters far more than asymptotics.

The per-iteration Newton system is reduced to a (p + n_free) symmetric
quasi-definite solve; PSD blocks contribute to the Schur complement through
Tr(A_i T A_j T) terms with T the NT scaling matrix, with a fast path for
rows that touch the PSD block only on a single diagonal entry (the
``diag(V) = 1`` pattern of lifted phase-optimization problems).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover
    from contextlib import nullcontext

    def threadpool_limits(limits):
        return nullcontext()

from .problem import ConeBlock, ConicProblem, ConicSolution, smat, svec, svec_diag_positions

__all__ = ["solve"]

_STEP_DAMP = 0.99
_TINY = 1e-14


class _ScalingBreakdown(RuntimeError):
    """NT scaling factorization failed (iterate effectively on the boundary)."""


def _flush(a: np.ndarray) -> np.ndarray:
    """Zero out near-denormal magnitudes in place.

    Products of NT-scaled quantities drift into the subnormal range near
    convergence, where every downstream BLAS/LAPACK call slows by two
    orders of magnitude.  1e-250 is far below anything that affects the
    solution at supported tolerances.
    """
    np.copyto(a, 0.0, where=np.abs(a) < 1e-250)
    return a


# ---------------------------------------------------------------------------
# per-block cone machinery
# ---------------------------------------------------------------------------

class _Block:
    """One cone block with views into the compacted cone-coordinate vector."""

    def __init__(self, kind: str, start: int, dim: int, side: int):
        self.kind = kind
        self.sl = slice(start, start + dim)
        self.dim = dim
        self.side = side
        if kind == "psd":
            self.diag_pos = svec_diag_positions(side)

    # -- canonical interior point and barrier degree ----------------------

    def identity(self) -> np.ndarray:
        if self.kind == "nonneg":
            return np.ones(self.dim)
        if self.kind == "soc":
            e = np.zeros(self.dim)
            e[0] = 1.0
            return e
        e = np.zeros(self.dim)
        e[self.diag_pos] = 1.0
        return e

    def degree(self) -> int:
        if self.kind == "nonneg":
            return self.dim
        if self.kind == "soc":
            return 1
        return self.side

    # -- membership -------------------------------------------------------

    def interior_margin(self, u: np.ndarray) -> float:
        """Positive iff u is strictly inside the cone."""
        if self.kind == "nonneg":
            return float(u.min())
        if self.kind == "soc":
            return float(u[0] - np.linalg.norm(u[1:]))
        return float(np.linalg.eigvalsh(smat(u, self.side)).min())

    def strictly_interior(self, u: np.ndarray) -> bool:
        """Cheap interiority test (Cholesky for psd blocks)."""
        if self.kind == "nonneg":
            return bool(u.min() > 0)
        if self.kind == "soc":
            return bool(u[0] > 0 and u[0] ** 2 - u[1:] @ u[1:] > 0)
        try:
            np.linalg.cholesky(smat(u, self.side))
            return True
        except np.linalg.LinAlgError:
            return False

    # -- NT scaling --------------------------------------------------------

    def compute_scaling(self, x: np.ndarray, z: np.ndarray) -> None:
        if self.kind == "nonneg":
            if x.min() <= 0 or z.min() <= 0:
                raise _ScalingBreakdown("nonneg iterate left the interior")
            self.w = np.sqrt(x / z)
            self.w2 = _flush(self.w * self.w)
            self.lam = np.sqrt(x * z)
            return
        if self.kind == "soc":
            rx = x[0] ** 2 - x[1:] @ x[1:]
            rz = z[0] ** 2 - z[1:] @ z[1:]
            if rx <= 0 or rz <= 0:
                raise _ScalingBreakdown("soc iterate left the interior")
            nx, nz = math.sqrt(rx), math.sqrt(rz)
            xh, zh = x / nx, z / nz
            gamma = math.sqrt((1.0 + xh @ zh) / 2.0)
            wb = (xh + _soc_reflect(zh)) / (2.0 * gamma)
            eta2 = math.sqrt(nx / nz)
            u = _soc_sqrt(eta2 * wb)
            s = u[0] ** 2 - u[1:] @ u[1:]
            J = np.diag(np.r_[1.0, -np.ones(self.dim - 1)])
            self.W = _flush(2.0 * np.outer(u, u) - s * J)
            ju = _soc_reflect(u)
            self.Winv = _flush((2.0 * np.outer(ju, ju) - s * J) / (s * s))
            self.H = _flush(self.W @ self.W)
            self.lam = self.W @ z
            return
        # psd
        X = smat(x, self.side)
        Z = smat(z, self.side)
        try:
            Lx = np.linalg.cholesky(X)
            Lz = np.linalg.cholesky(Z)
        except np.linalg.LinAlgError as exc:
            raise _ScalingBreakdown("psd iterate left the interior") from exc
        U, sv, Vt = np.linalg.svd(Lz.T @ Lx)
        if sv.min() <= 0:
            raise _ScalingBreakdown("degenerate psd scaling")
        root = np.sqrt(sv)
        self.R = _flush(Lx @ (Vt.T / root[None, :]))
        self.Rinv = _flush((U / root[None, :]).T @ Lz.T)
        self.T = _flush(self.R @ self.R.T)
        self.sv = sv
        lam = np.zeros(self.dim)
        lam[self.diag_pos] = sv
        self.lam = lam

    # -- scaled-space operators --------------------------------------------

    # Convention: lam = W z = W^{-T} x.  For nonneg/soc blocks W is
    # self-adjoint; for psd blocks W v = svec(R' smat(v) R) is not, so the
    # adjoint and inverse-adjoint are spelled out separately.

    def apply_W(self, v: np.ndarray) -> np.ndarray:
        if self.kind == "nonneg":
            return self.w * v
        if self.kind == "soc":
            return self.W @ v
        return svec(self.R.T @ smat(v, self.side) @ self.R)

    def apply_WT(self, v: np.ndarray) -> np.ndarray:
        if self.kind == "psd":
            return svec(self.R @ smat(v, self.side) @ self.R.T)
        return self.apply_W(v)

    def apply_WinvT(self, v: np.ndarray) -> np.ndarray:
        if self.kind == "nonneg":
            return v / self.w
        if self.kind == "soc":
            return self.Winv @ v
        return svec(self.Rinv @ smat(v, self.side) @ self.Rinv.T)

    def apply_H(self, v: np.ndarray) -> np.ndarray:
        if self.kind == "nonneg":
            return self.w2 * v
        if self.kind == "soc":
            return self.H @ v
        return svec(self.T @ smat(v, self.side) @ self.T)

    # -- Jordan algebra -----------------------------------------------------

    def jordan_product(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        if self.kind == "nonneg":
            return u * v
        if self.kind == "soc":
            out = np.empty(self.dim)
            out[0] = u @ v
            out[1:] = u[0] * v[1:] + v[0] * u[1:]
            return out
        Um = smat(u, self.side)
        Vm = smat(v, self.side)
        return svec(0.5 * (Um @ Vm + Vm @ Um))

    def jordan_div_scaled(self, d: np.ndarray) -> np.ndarray:
        """Solve lam o g = d where lam is this block's scaled point."""
        if self.kind == "nonneg":
            return d / self.lam
        if self.kind == "soc":
            lam = self.lam
            a = lam[0] ** 2 - lam[1:] @ lam[1:]
            g0 = (lam[0] * d[0] - lam[1:] @ d[1:]) / a
            gv = (d[1:] - g0 * lam[1:]) / lam[0]
            return np.r_[g0, gv]
        D = smat(d, self.side)
        denom = 0.5 * (self.sv[:, None] + self.sv[None, :])
        return svec(D / denom)

    # -- boundary step ------------------------------------------------------

    def max_step_scaled(self, d: np.ndarray) -> float:
        """Largest alpha with lam + alpha d in the cone, in scaled space.

        ``d`` is the NT-scaled direction (W^{-T} dx or W dz); the scaled
        iterate is this block's lam, diagonal for psd blocks, which avoids
        any triangular solves.
        """
        if self.kind == "nonneg":
            neg = d < 0
            if not neg.any():
                return np.inf
            return float((-self.lam[neg] / d[neg]).min())
        if self.kind == "soc":
            lam = self.lam
            a = d[0] ** 2 - d[1:] @ d[1:]
            bq = 2.0 * (lam[0] * d[0] - lam[1:] @ d[1:])
            cq = lam[0] ** 2 - lam[1:] @ lam[1:]
            return _smallest_positive_root(a, bq, cq)
        root = np.sqrt(self.sv)
        B = _flush(smat(d, self.side) / np.outer(root, root))
        lam_min = float(
            sla.eigh(B, eigvals_only=True, driver="evr",
                     subset_by_index=[0, 0], check_finite=False)[0]
        )
        return np.inf if lam_min >= 0 else -1.0 / lam_min


def _soc_reflect(u: np.ndarray) -> np.ndarray:
    out = -u.copy()
    out[0] = u[0]
    return out


def _soc_sqrt(w: np.ndarray) -> np.ndarray:
    """Jordan square root of a second-order-cone interior element."""
    nv = np.linalg.norm(w[1:])
    lp, lm = w[0] + nv, w[0] - nv
    if lm <= 0:
        raise _ScalingBreakdown("soc sqrt of a boundary element")
    sp, sm = math.sqrt(lp), math.sqrt(lm)
    out = np.empty_like(w)
    out[0] = 0.5 * (sp + sm)
    out[1:] = w[1:] * ((sp - sm) / (2.0 * nv)) if nv > 0 else 0.0
    return out


def _smallest_positive_root(a: float, b: float, c: float) -> float:
    """Smallest alpha > 0 with a alpha^2 + b alpha + c = 0 (inf if none).

    Caller guarantees c > 0 (current point strictly feasible).
    """
    if abs(a) < _TINY * max(1.0, abs(b), abs(c)):
        if b >= 0:
            return np.inf
        return -c / b
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return np.inf
    sq = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(sq, b))
    roots = []
    if abs(a) > 0:
        roots.append(q / a)
    if abs(q) > 0:
        roots.append(c / q)
    pos = [r for r in roots if r > 0]
    return min(pos) if pos else np.inf


# ---------------------------------------------------------------------------
# problem-level machinery
# ---------------------------------------------------------------------------

@dataclass
class _PsdRows:
    """Row classification of the equality matrix against one PSD block."""

    dense_rows: np.ndarray        # row indices with general support
    dense_mats: np.ndarray        # (len(dense_rows), side, side)
    diag_rows: np.ndarray         # rows supported on a single diagonal entry
    diag_mat_idx: np.ndarray      # the matrix diagonal index of each such row
    diag_coef: np.ndarray         # its coefficient


class _Workspace:
    def __init__(self, A: np.ndarray, b: np.ndarray, c: np.ndarray,
                 cones: tuple[ConeBlock, ...]):
        n = c.size
        kinds = np.empty(n, dtype=object)
        pos = 0
        free_mask = np.zeros(n, dtype=bool)
        raw_blocks: list[tuple[ConeBlock, int]] = []
        for blk in cones:
            if blk.kind == "free":
                free_mask[pos:pos + blk.dim] = True
            raw_blocks.append((blk, pos))
            pos += blk.dim

        self.free_idx = np.nonzero(free_mask)[0]
        self.cone_idx = np.nonzero(~free_mask)[0]
        self.A = A
        self.b = b
        self.c = c
        self.A_f = np.ascontiguousarray(A[:, self.free_idx])
        self.A_c = np.ascontiguousarray(A[:, self.cone_idx])
        self.c_f = c[self.free_idx]
        self.c_c = c[self.cone_idx]

        self.blocks: list[_Block] = []
        cpos = 0
        for blk, _ in raw_blocks:
            if blk.kind == "free":
                continue
            self.blocks.append(_Block(blk.kind, cpos, blk.dim, blk.side))
            cpos += blk.dim
        self.nc = cpos
        self.nf = self.free_idx.size
        self.p = b.size
        self.degree = sum(bl.degree() for bl in self.blocks)
        self.e = np.zeros(self.nc)
        for bl in self.blocks:
            self.e[bl.sl] = bl.identity()

        # PSD row classification for the Schur fast path.
        self.psd_rows: dict[int, _PsdRows] = {}
        for bi, bl in enumerate(self.blocks):
            if bl.kind != "psd":
                continue
            sub = self.A_c[:, bl.sl]
            nz_count = np.count_nonzero(sub, axis=1)
            dense_rows, diag_rows, diag_idx, diag_coef = [], [], [], []
            diag_pos = bl.diag_pos
            for r in range(self.p):
                if nz_count[r] == 0:
                    continue
                if nz_count[r] == 1:
                    q = int(np.nonzero(sub[r])[0][0])
                    j = int(np.searchsorted(diag_pos, q))
                    if j < diag_pos.size and diag_pos[j] == q:
                        diag_rows.append(r)
                        diag_idx.append(j)
                        diag_coef.append(sub[r, q])
                        continue
                dense_rows.append(r)
            mats = np.stack([smat(sub[r], bl.side) for r in dense_rows]) \
                if dense_rows else np.zeros((0, bl.side, bl.side))
            self.psd_rows[bi] = _PsdRows(
                np.asarray(dense_rows, dtype=int), mats,
                np.asarray(diag_rows, dtype=int),
                np.asarray(diag_idx, dtype=int),
                np.asarray(diag_coef, dtype=float),
            )

    # -- blockwise vector ops ------------------------------------------------

    def apply(self, op: str, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        for bl in self.blocks:
            out[bl.sl] = getattr(bl, op)(v[bl.sl])
        return _flush(out)

    def jordan_product(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(u)
        for bl in self.blocks:
            out[bl.sl] = bl.jordan_product(u[bl.sl], v[bl.sl])
        return out

    def jordan_div_scaled(self, d: np.ndarray) -> np.ndarray:
        out = np.empty_like(d)
        for bl in self.blocks:
            out[bl.sl] = bl.jordan_div_scaled(d[bl.sl])
        return out

    def max_step_scaled(self, d: np.ndarray) -> float:
        alpha = np.inf
        for bl in self.blocks:
            alpha = min(alpha, bl.max_step_scaled(d[bl.sl]))
        return alpha

    def strictly_interior(self, v: np.ndarray) -> bool:
        return all(bl.strictly_interior(v[bl.sl]) for bl in self.blocks)

    def compute_scalings(self, x_c: np.ndarray, z_c: np.ndarray) -> None:
        for bl in self.blocks:
            bl.compute_scaling(x_c[bl.sl], z_c[bl.sl])

    def lam(self) -> np.ndarray:
        out = np.empty(self.nc)
        for bl in self.blocks:
            out[bl.sl] = bl.lam
        return out

    # -- Schur complement ------------------------------------------------------

    def schur(self) -> np.ndarray:
        """A_C W^2 A_C' over all cone blocks, exploiting PSD row structure."""
        S = np.zeros((self.p, self.p))
        for bi, bl in enumerate(self.blocks):
            Ab = self.A_c[:, bl.sl]
            if bl.kind == "nonneg":
                S += (Ab * bl.w2[None, :]) @ Ab.T
            elif bl.kind == "soc":
                S += Ab @ bl.H @ Ab.T
            else:
                info = self.psd_rows[bi]
                T = bl.T
                nd = info.dense_rows.size
                if nd:
                    U = np.matmul(np.matmul(T, info.dense_mats), T)
                    S[np.ix_(info.dense_rows, info.dense_rows)] += np.einsum(
                        "nij,mij->nm", info.dense_mats, U
                    )
                    if info.diag_rows.size:
                        vals = U[:, info.diag_mat_idx, info.diag_mat_idx] * info.diag_coef[None, :]
                        S[np.ix_(info.dense_rows, info.diag_rows)] += vals
                        S[np.ix_(info.diag_rows, info.dense_rows)] += vals.T
                if info.diag_rows.size:
                    Tdd = T[np.ix_(info.diag_mat_idx, info.diag_mat_idx)] ** 2
                    S[np.ix_(info.diag_rows, info.diag_rows)] += (
                        Tdd * np.outer(info.diag_coef, info.diag_coef)
                    )
        return _flush(S)


# ---------------------------------------------------------------------------
# the solver
# ---------------------------------------------------------------------------

def solve(
    problem: ConicProblem,
    tol: float = 1e-7,
    max_iters: int = 100,
    initial_hint: np.ndarray | None = None,
) -> ConicSolution:
    """Solve a standard-form cone program to the requested tolerance.

    Returns status 'optimal' when primal/dual residuals and relative gap all
    fall below ``tol``; 'infeasible' with a Farkas certificate when primal or
    dual infeasibility is detected; 'max_iters' with the best iterate
    otherwise.  Deterministic given the problem data.
    """
    # All matrices here are small; threaded BLAS only adds sync overhead
    # (and wild run-to-run variance on oversubscribed machines).
    with threadpool_limits(limits=1):
        return _solve_impl(problem, tol, max_iters, initial_hint)


def _solve_impl(
    problem: ConicProblem,
    tol: float,
    max_iters: int,
    initial_hint: np.ndarray | None,
) -> ConicSolution:
    if not 1e-12 <= tol <= 1e-2:
        raise ValueError(f"tol out of supported range: {tol}")

    # --- scale a working copy: row equilibration + b/c normalization -------
    A0, b0, c0 = problem.eq_matrix, problem.eq_rhs, problem.objective
    row_norm = np.maximum(np.abs(A0).max(axis=1, initial=0.0), np.abs(b0))
    row_scale = 1.0 / np.where(row_norm > 0, row_norm, 1.0)
    A = A0 * row_scale[:, None]
    b = b0 * row_scale
    sc = float(np.abs(c0).max()) or 1.0
    sb = float(np.abs(b).max()) or 1.0
    c = c0 / sc
    b = b / sb

    ws = _Workspace(A, b, c, problem.cones)
    n, p, nc, nf = c.size, b.size, ws.nc, ws.nf

    def unscale(x, y, z):
        return x * sb, y * (sc * row_scale), z * sc

    def true_metrics(x, y, z):
        xo, yo, zo = unscale(x, y, z)
        pres = np.linalg.norm(A0 @ xo - b0) / (1.0 + np.linalg.norm(b0))
        dres = np.linalg.norm(A0.T @ yo + zo - c0) / (1.0 + np.linalg.norm(c0))
        pcost = float(c0 @ xo)
        dcost = float(b0 @ yo)
        gap = abs(pcost - dcost) / (1.0 + max(abs(pcost), abs(dcost)))
        return pres, dres, gap, pcost, xo, yo, zo

    # --- initial iterate ----------------------------------------------------
    x = np.zeros(n)
    x[ws.cone_idx] = ws.e
    if initial_hint is not None and initial_hint.shape == (n,):
        hint_c = initial_hint[ws.cone_idx] / sb
        if all(bl.interior_margin(hint_c[bl.sl]) > 1e-8 for bl in ws.blocks):
            x = initial_hint / sb
    y = np.zeros(p)
    z = np.zeros(n)
    z[ws.cone_idx] = ws.e
    tau, kappa = 1.0, 1.0

    best: tuple | None = None
    status = "max_iters"
    detail = ""
    certificate = None
    it = 0
    stalls = 0

    def finish(status, x, y, z, it, certificate=None, detail=""):
        pres, dres, gap, pcost, xo, yo, zo = true_metrics(x, y, z)
        return ConicSolution(
            status=status, x=xo, y=yo, z=zo, objective=pcost,
            primal_residual=pres, dual_residual=dres, duality_gap=gap,
            iterations=it, certificate=certificate, detail=detail,
        )

    for it in range(1, max_iters + 1):
        x_c = x[ws.cone_idx]
        z_c = z[ws.cone_idx]
        mu = (x_c @ z_c + tau * kappa) / (ws.degree + 1)

        # ---- convergence on the de-homogenized, unscaled point -----------
        pres, dres, gap, _, _, _, _ = true_metrics(x / tau, y / tau, z / tau)
        score = max(pres, dres, gap)
        if best is None or score < best[0]:
            best = (score, x / tau, y / tau, z / tau, it)
        if score <= tol:
            return finish("optimal", x / tau, y / tau, z / tau, it)
        if it - best[4] >= 10:
            detail = "no progress over 10 iterations"
            break

        # ---- infeasibility certificates -----------------------------------
        if tau < 1e-3 * max(kappa, _TINY):
            by = float(b @ y)
            cx = float(c @ x)
            if by > 0 and np.linalg.norm(A.T @ y + z) <= tol * by:
                _, yo, zo = unscale(x, y / by, z / by)
                return ConicSolution(
                    status="infeasible", x=np.full(n, np.nan), y=yo, z=zo,
                    objective=np.nan, primal_residual=np.nan,
                    dual_residual=np.nan, duality_gap=np.nan, iterations=it,
                    certificate=yo, detail="primal infeasible (Farkas dual ray)",
                )
            if cx < 0 and np.linalg.norm(A @ x) <= tol * (-cx):
                xo, _, _ = unscale(x / (-cx), y, z)
                return ConicSolution(
                    status="infeasible", x=xo, y=np.full(p, np.nan),
                    z=np.full(n, np.nan), objective=np.nan,
                    primal_residual=np.nan, dual_residual=np.nan,
                    duality_gap=np.nan, iterations=it, certificate=xo,
                    detail="dual infeasible (primal unbounded ray)",
                )

        # ---- NT scaling and reduced KKT factorization ---------------------
        try:
            ws.compute_scalings(x_c, z_c)
        except _ScalingBreakdown as exc:
            detail = str(exc)
            break
        lam = ws.lam()

        S = ws.schur()
        M = np.zeros((p + nf, p + nf))
        M[:p, :p] = S
        if nf:
            M[:p, p:] = ws.A_f
            M[p:, :p] = ws.A_f.T
        reg = 0.0
        while True:
            try:
                lu = sla.lu_factor(M + reg * np.eye(p + nf), check_finite=False)
                break
            except (np.linalg.LinAlgError, ValueError):
                reg = max(10.0 * reg, 1e-12 * (1.0 + abs(S).max()))
                if reg > 1e-4:
                    detail = "singular KKT system"
                    lu = None
                    break
        if lu is None:
            break

        def msolve(rhs):
            sol = sla.lu_solve(lu, rhs, check_finite=False)
            # refinement against the unregularized matrix
            for _ in range(2):
                sol += sla.lu_solve(lu, rhs - M @ sol, check_finite=False)
            return sol

        Hc = ws.apply("apply_H", ws.c_c)
        AHc = ws.A_c @ Hc
        q1 = np.concatenate([b + AHc, ws.c_f])
        q2 = np.concatenate([b - AHc, -ws.c_f])
        v1 = msolve(q1)
        # The tau denominator equals ||W dz_q||^2 + kappa/tau with dz_q the
        # dual direction of the constant solve; the sum-of-squares form is
        # immune to the cancellation that plagues q2'v1 + c'Hc near optimum.
        dz_q = ws.c_c - ws.A_c.T @ v1[:p]
        w_q = ws.apply("apply_W", dz_q)
        denom_const = float(w_q @ w_q) + kappa / tau
        if not denom_const > 0:
            detail = "indefinite tau system"
            break

        # residuals of the homogeneous model (scaled data)
        res_p = A @ x - b * tau
        res_d_full = A.T @ y + z - c * tau
        res_dC = res_d_full[ws.cone_idx]
        res_dF = res_d_full[ws.free_idx]
        res_g = kappa + float(c @ x) - float(b @ y)

        def newton(d1, d2C, d2F, d3, d4, d5):
            g = ws.jordan_div_scaled(d4)
            Wg = ws.apply("apply_WT", g)
            t_vec = Wg - ws.apply("apply_H", d2C)
            rhs = np.concatenate([d1 - ws.A_c @ t_vec, d2F])
            v0 = msolve(rhs)
            r3 = -d3 + d5 / tau + float(ws.c_c @ t_vec)
            dtau = (r3 - float(q2 @ v0)) / denom_const
            yv = v0 + dtau * v1
            dy = yv[:p]
            du = yv[p:]
            dzC = d2C - ws.A_c.T @ dy + ws.c_c * dtau
            dxC = ws.apply("apply_WT", g - ws.apply("apply_W", dzC))
            dx = np.zeros(n)
            dx[ws.cone_idx] = dxC
            dx[ws.free_idx] = du
            dz = np.zeros(n)
            dz[ws.cone_idx] = dzC
            dkappa = (d5 - kappa * dtau) / tau
            return _flush(dx), dy, _flush(dz), dtau, dkappa

        def step_bound(dx_scaled, dz_scaled, dtau, dkappa):
            alpha = ws.max_step_scaled(dx_scaled)
            alpha = min(alpha, ws.max_step_scaled(dz_scaled))
            if dtau < 0:
                alpha = min(alpha, -tau / dtau)
            if dkappa < 0:
                alpha = min(alpha, -kappa / dkappa)
            return alpha

        # ---- predictor -----------------------------------------------------
        d4_aff = -ws.jordan_product(lam, lam)
        dxa, dya, dza, dta, dka = newton(
            -res_p, -res_dC, -res_dF, -res_g, d4_aff, -tau * kappa
        )
        dxa_s = ws.apply("apply_WinvT", dxa[ws.cone_idx])
        dza_s = ws.apply("apply_W", dza[ws.cone_idx])
        alpha_aff = min(1.0, step_bound(dxa_s, dza_s, dta, dka))
        xa_c = x_c + alpha_aff * dxa[ws.cone_idx]
        za_c = z_c + alpha_aff * dza[ws.cone_idx]
        mu_aff = (
            xa_c @ za_c + (tau + alpha_aff * dta) * (kappa + alpha_aff * dka)
        ) / (ws.degree + 1)
        sigma = min(1.0, max(0.0, (mu_aff / mu)) ** 3)

        # ---- corrector -----------------------------------------------------
        corr = ws.jordan_product(dxa_s, dza_s)
        d4 = d4_aff + sigma * mu * ws.e - corr
        d5 = -tau * kappa + sigma * mu - dta * dka
        scale_r = 1.0 - sigma
        dx, dy, dz, dtau, dkappa = newton(
            -scale_r * res_p, -scale_r * res_dC, -scale_r * res_dF,
            -scale_r * res_g, d4, d5,
        )

        dx_s = ws.apply("apply_WinvT", dx[ws.cone_idx])
        dz_s = ws.apply("apply_W", dz[ws.cone_idx])
        alpha = min(1.0, _STEP_DAMP * step_bound(dx_s, dz_s, dtau, dkappa))
        # guard against boundary overshoot from rounding in the step bound
        for _ in range(40):
            if alpha <= 0:
                break
            if (
                tau + alpha * dtau > 0
                and kappa + alpha * dkappa > 0
                and ws.strictly_interior(x[ws.cone_idx] + alpha * dx[ws.cone_idx])
                and ws.strictly_interior(z[ws.cone_idx] + alpha * dz[ws.cone_idx])
            ):
                break
            alpha *= 0.8
        if alpha <= 1e-9:
            stalls += 1
            if stalls >= 2:
                detail = "step length collapsed"
                break
        else:
            stalls = 0
        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa
        if tau <= _TINY:
            detail = "tau collapsed without a certificate"
            break

    assert best is not None
    _, bx, by_, bz, bit = best
    sol = finish("max_iters", bx, by_, bz, it, detail=detail or "iteration limit")
    if max(sol.primal_residual, sol.dual_residual, sol.duality_gap) <= tol:
        sol.status = "optimal"
    return sol
