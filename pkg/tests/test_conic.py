"""Cone-program container, Hermitian embedding, and interior-point solver."""

import io

import numpy as np
import pytest

from irsurllc import conic
from irsurllc.conic import (
    ConicProblem,
    ConicProblemBuilder,
    complex_from_embedded,
    hermitian_embed,
    smat,
    svec,
)

from conftest import random_certified_instance


class TestSvec:
    def test_inner_product_matches_trace(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 7))
            A = rng.standard_normal((n, n))
            A = A + A.T
            B = rng.standard_normal((n, n))
            B = B + B.T
            assert svec(A) @ svec(B) == pytest.approx(np.trace(A @ B), rel=1e-12)

    def test_roundtrip(self, rng):
        A = rng.standard_normal((5, 5))
        A = A + A.T
        assert np.allclose(smat(svec(A), 5), A)


class TestHermitianEmbed:
    def test_identity(self):
        assert np.array_equal(hermitian_embed(np.eye(3)), np.eye(6))

    def test_pauli_like_eigenvalues(self):
        H = np.array([[0, 1j], [-1j, 0]])
        M = hermitian_embed(H)
        assert np.linalg.eigvalsh(M) == pytest.approx([-1, -1, 1, 1])

    def test_real_symmetric_is_block_diagonal(self, rng):
        H = rng.standard_normal((4, 4))
        H = H + H.T
        M = hermitian_embed(H)
        assert np.allclose(M[:4, :4], H)
        assert np.allclose(M[4:, 4:], H)
        assert np.abs(M[:4, 4:]).max() == 0

    def test_trace_doubling(self, rng):
        n = 3
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        H = A + A.conj().T
        B = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        V = B @ B.conj().T
        lhs = np.trace(hermitian_embed(H) @ hermitian_embed(V))
        rhs = 2.0 * np.real(np.trace(H @ V))
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_psd_iff(self, rng):
        B = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        P = B @ B.conj().T
        assert np.linalg.eigvalsh(hermitian_embed(P)).min() >= -1e-12
        H = P - 10.0 * np.eye(3)
        assert np.linalg.eigvalsh(hermitian_embed(H)).min() < 0

    def test_rejects_non_hermitian(self, rng):
        M = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        with pytest.raises(ValueError):
            hermitian_embed(M)

    def test_complex_roundtrip(self, rng):
        A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        H = A + A.conj().T
        assert np.allclose(complex_from_embedded(hermitian_embed(H)), H)


class TestSolveSmall:
    def test_lp_with_free_variable(self):
        b = ConicProblemBuilder()
        b.add_var("x", conic.free(1))
        b.add_var("s", conic.nonneg(1))
        b.add_equality({"x": [1.0], "s": [-1.0]}, 1.0)
        b.set_objective({"x": [1.0]})
        sol = conic.solve(b.build(), tol=1e-8)
        assert sol.status == "optimal"
        assert sol.x[0] == pytest.approx(1.0, abs=1e-7)

    def test_two_by_two_sdp_value(self):
        # brute force over the single off-diagonal: min over rho in [-1, 1]
        # of -2 rho is -2 at rho = 1
        rhos = np.linspace(-1, 1, 2001)
        assert min(-2.0 * rhos) == pytest.approx(-2.0)
        C = np.array([[0.0, -1.0], [-1.0, 0.0]])
        b = ConicProblemBuilder()
        b.add_var("V", conic.psd(2))
        e0 = np.zeros(3)
        e0[0] = 1.0
        e2 = np.zeros(3)
        e2[2] = 1.0
        b.add_equality({"V": e0}, 1.0)
        b.add_equality({"V": e2}, 1.0)
        b.set_objective({"V": svec(C)})
        sol = conic.solve(b.build(), tol=1e-8)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(-2.0, abs=1e-7)
        V = smat(sol.x, 2)
        assert V == pytest.approx(np.ones((2, 2)), abs=1e-6)

    def test_soc_projection(self):
        a = np.array([1.0, -2.0, 0.5])
        b = ConicProblemBuilder()
        b.add_var("cone", conic.soc(4))
        b.add_var("x", conic.free(3))
        for i in range(3):
            trow = np.zeros(4)
            trow[1 + i] = 1.0
            xrow = np.zeros(3)
            xrow[i] = -1.0
            b.add_equality({"cone": trow, "x": xrow}, -a[i])
        b.set_objective({"cone": [1.0, 0.0, 0.0, 0.0]})
        sol = conic.solve(b.build(), tol=1e-8)
        assert sol.status == "optimal"
        assert sol.x[0] == pytest.approx(0.0, abs=1e-6)
        assert sol.x[4:] == pytest.approx(a, abs=1e-6)

    def test_primal_infeasible_lp(self):
        b = ConicProblemBuilder()
        b.add_var("x", conic.nonneg(1))
        b.add_equality({"x": [1.0]}, -1.0)
        b.set_objective({"x": [1.0]})
        sol = conic.solve(b.build(), tol=1e-8)
        assert sol.status == "infeasible"
        assert "primal" in sol.detail
        assert sol.certificate is not None

    def test_dual_infeasible_lp(self):
        # min -x, x >= 0, no equalities binding it: unbounded below
        b = ConicProblemBuilder()
        b.add_var("x", conic.nonneg(2))
        b.add_equality({"x": [1.0, -1.0]}, 0.0)
        b.set_objective({"x": [-1.0, 0.0]})
        sol = conic.solve(b.build(), tol=1e-8)
        assert sol.status == "infeasible"
        assert "unbounded" in sol.detail

    def test_max_iters_status(self):
        rng = np.random.default_rng(0)
        prob, *_ = random_certified_instance(rng)
        sol = conic.solve(prob, tol=1e-10, max_iters=2)
        assert sol.status in ("max_iters", "optimal")
        assert sol.iterations <= 2


class TestSolveRandomized:
    def test_certified_instances(self, rng):
        for i in range(60):
            prob, xstar, ystar, zstar, value = random_certified_instance(rng)
            sol = conic.solve(prob, tol=1e-8)
            assert sol.status == "optimal", f"instance {i}: {sol.detail}"
            assert max(sol.primal_residual, sol.dual_residual, sol.duality_gap) <= 1e-7
            assert sol.objective == pytest.approx(value, abs=1e-6 * (1 + abs(value)))

    def test_weak_duality_and_complementary_slackness(self, rng):
        for _ in range(20):
            prob, *_ , value = random_certified_instance(rng, with_free=True)
            sol = conic.solve(prob, tol=1e-8)
            assert sol.status == "optimal"
            # primal objective >= dual objective up to tolerance
            dual_obj = float(prob.eq_rhs @ sol.y)
            assert sol.objective >= dual_obj - 1e-6 * (1 + abs(value))
            # complementary slackness: <x, z> -> 0
            assert abs(sol.x @ sol.z) <= 1e-5 * (1 + abs(value))

    def test_cone_membership_of_solutions(self, rng):
        prob, *_ = random_certified_instance(rng)
        sol = conic.solve(prob, tol=1e-8)
        pos = 0
        for blk in prob.cones:
            piece = sol.x[pos:pos + blk.dim]
            if blk.kind == "nonneg":
                assert piece.min() >= -1e-9
            elif blk.kind == "soc":
                assert piece[0] >= np.linalg.norm(piece[1:]) - 1e-9
            elif blk.kind == "psd":
                M = smat(piece, blk.side)
                floor = -1e-7 * max(1.0, np.abs(M).max())
                assert np.linalg.eigvalsh(M).min() >= floor
            pos += blk.dim

    def test_objective_scaling_invariance(self, rng):
        prob, *_ = random_certified_instance(rng)
        sol1 = conic.solve(prob, tol=1e-8)
        scaled = ConicProblem(
            37.5 * prob.objective, prob.eq_matrix, prob.eq_rhs, prob.cones
        )
        sol2 = conic.solve(scaled, tol=1e-8)
        assert sol2.x == pytest.approx(sol1.x, abs=1e-6 * (1 + np.abs(sol1.x).max()))

    def test_determinism(self, rng):
        prob, *_ = random_certified_instance(rng)
        a = conic.solve(prob, tol=1e-8)
        b = conic.solve(prob, tol=1e-8)
        assert np.array_equal(a.x, b.x)
        assert np.array_equal(a.y, b.y)
        assert a.objective == b.objective

    def test_initial_hint_accepted(self, rng):
        prob, *_ = random_certified_instance(rng)
        ws_e = np.zeros(prob.num_vars)
        pos = 0
        for blk in prob.cones:
            if blk.kind == "nonneg":
                ws_e[pos:pos + blk.dim] = 2.0
            elif blk.kind == "soc":
                ws_e[pos] = 3.0
            elif blk.kind == "psd":
                ws_e[pos:pos + blk.dim] = svec(2.0 * np.eye(blk.side))
            pos += blk.dim
        sol = conic.solve(prob, tol=1e-8, initial_hint=ws_e)
        assert sol.status == "optimal"


class TestDump:
    def test_roundtrip(self, rng):
        prob, *_ = random_certified_instance(rng, with_free=True)
        prob.var_slices["first"] = slice(0, 2)
        buf = io.StringIO()
        prob.dump(buf)
        buf.seek(0)
        loaded = ConicProblem.load(buf)
        assert np.array_equal(loaded.objective, prob.objective)
        assert np.array_equal(loaded.eq_matrix, prob.eq_matrix)
        assert np.array_equal(loaded.eq_rhs, prob.eq_rhs)
        assert loaded.cones == prob.cones
        assert loaded.var_slices == prob.var_slices
        s1 = conic.solve(prob, tol=1e-8)
        s2 = conic.solve(loaded, tol=1e-8)
        assert np.array_equal(s1.x, s2.x)


def test_problem_validation():
    with pytest.raises(ValueError):
        ConicProblem(np.ones(3), np.ones((1, 2)), np.ones(1), (conic.nonneg(3),))
    with pytest.raises(ValueError):
        ConicProblem(np.ones(3), np.ones((1, 3)), np.ones(1), (conic.nonneg(2),))
    with pytest.raises(ValueError):
        conic.psd(0)
    with pytest.raises(ValueError):
        conic.ConeBlock("psd", 5, 2)
    with pytest.raises(ValueError):
        conic.solve(
            ConicProblem(np.ones(1), np.ones((1, 1)), np.ones(1), (conic.nonneg(1),)),
            tol=1.0,
        )
