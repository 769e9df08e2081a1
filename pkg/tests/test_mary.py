import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from miprivacy.binary import Case, solve_binary
from miprivacy.design import design
from miprivacy.exceptions import NumericalFailure, ValidationError
from miprivacy.mary import (
    build_sdp, design_mary, minimal_difference_index, orthonormal_completion, perturbation_factor,
    reconstruct, solve_binary_source_mary, solve_sdp,
)
from miprivacy.mechanism import EitProblem, decompose, uniform_reference
from miprivacy.sdp import solve_sdp_standard

from conftest import PAIRS, TRIPLES, random_interior


def cvx_lifted(problem):
    """Reference value (nats) of the lifted max-min problem."""
    P = problem.hypotheses
    eps = problem.budgets_nats
    s = eps.max()
    M = P.shape[1]
    B = cp.Variable((M, M), PSD=True)
    t = cp.Variable()
    cons = [0.5 * cp.trace(np.outer(d, d) @ B) >= t for d in P[1:] - P[0]]
    cons += [0.5 * cp.trace(np.diag(p) @ B) <= e / s for p, e in zip(P, eps)]
    cp.Problem(cp.Maximize(t), cons).solve(solver=cp.CLARABEL)
    return s * t.value, s * B.value


class TestStandardForm:
    def test_lp_on_diagonal(self):
        # min x1 + 2 x2 s.t. x1 + x2 = 1, x >= 0, as a diagonal SDP
        C = np.diag([1.0, 2.0])
        A = np.array([np.eye(2)])
        res = solve_sdp_standard(C, A, np.array([1.0]))
        assert res.primal_objective == pytest.approx(1.0, abs=1e-9)
        np.testing.assert_allclose(res.X, np.diag([1.0, 0.0]), atol=1e-8)
        assert res.y[0] == pytest.approx(1.0, abs=1e-8)

    def test_max_eigenvalue(self, rng):
        # min Tr(C X) s.t. Tr X = 1 is the smallest eigenvalue of C
        G = rng.normal(size=(4, 4))
        C = G + G.T
        res = solve_sdp_standard(C, np.array([np.eye(4)]), np.array([1.0]))
        assert res.primal_objective == pytest.approx(np.linalg.eigvalsh(C)[0], abs=1e-8)
        assert res.gap < 1e-8

    def test_infeasible_raises(self):
        # Tr X = -1 has no psd solution
        with pytest.raises(NumericalFailure):
            solve_sdp_standard(np.eye(2), np.array([np.eye(2)]), np.array([-1.0]))


@pytest.mark.parametrize("name", sorted(PAIRS))
def test_sdp_matches_closed_form(name):
    pr = EitProblem.from_fraction(PAIRS[name], 1e-3)
    sol = solve_sdp(build_sdp(pr))
    ref = solve_binary(pr)
    assert sol.rank == 1
    assert sol.utility_bits == pytest.approx(ref.predicted_utility, rel=1e-8)


@pytest.mark.parametrize("name", sorted(TRIPLES))
def test_sdp_matches_collinear(name):
    pr = EitProblem.from_fraction(TRIPLES[name], 1e-3)
    sol = solve_sdp(build_sdp(pr))
    ref = solve_binary_source_mary(pr)
    assert sol.rank == 1
    assert sol.utility_bits == pytest.approx(ref.predicted_utility, rel=1e-8)


def test_collinear_triple2_third_binds():
    sol = solve_binary_source_mary(EitProblem.from_fraction(TRIPLES["triple2"], 1e-3))
    assert sol.active_set == (2,)
    assert sol.case is Case.SECOND_ACTIVE
    assert sol.minimizing_index == 1


def test_collinear_triple1_tie():
    # both differences have the same length; the smallest index wins
    assert minimal_difference_index(TRIPLES["triple1"]) == 1
    assert minimal_difference_index([[0.5, 0.5], [0.3, 0.7], [0.45, 0.55]]) == 2


def test_collinear_needs_binary_source():
    with pytest.raises(ValidationError):
        solve_binary_source_mary(EitProblem([[0.2, 0.3, 0.5], [0.3, 0.3, 0.4], [0.1, 0.5, 0.4]], 0.01))


def test_collinear_degenerate():
    sol = solve_binary_source_mary(EitProblem([[0.5, 0.5], [0.5, 0.5], [0.4, 0.6]], 0.01))
    assert sol.case is Case.DEGENERATE and sol.predicted_utility == 0.0


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 5), st.integers(3, 4))
def test_random_against_cvx(seed, M, m):
    rng = np.random.default_rng(seed)
    P = np.array([random_interior(rng, M, conc=3.0) for _ in range(m)])
    budgets = 1e-3 * rng.uniform(0.5, 2.0, size=m)
    pr = EitProblem(P, budgets)
    sol = solve_sdp(build_sdp(pr))
    t_ref, _ = cvx_lifted(pr)
    assert sol.t == pytest.approx(t_ref, rel=1e-5)
    # psd and feasible
    assert np.linalg.eigvalsh(sol.B)[0] >= -1e-12 * np.abs(sol.B).max()
    f = 0.5 * np.einsum("kj,jj->k", P, sol.B)
    assert np.all(f <= pr.budgets_nats * (1 + 1e-7))


@pytest.mark.parametrize("name", sorted(TRIPLES))
def test_reconstruction_attains_lifted_value(name):
    pr = EitProblem.from_fraction(TRIPLES[name], 1e-3)
    sol, W = design_mary(pr)
    assert W.shape == (2, sol.rank + 1)
    np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-14)
    A = decompose(W, uniform_reference(sol.rank + 1))
    np.testing.assert_allclose(A @ A.T, sol.B, atol=1e-12)


def test_reconstruct_rank_two():
    U = np.linalg.qr(np.random.default_rng(1).normal(size=(3, 2)))[0]
    lam = np.array([2e-3, 1e-3])
    sol = type("S", (), {"rank": 2, "eigvals": lam, "U": U})()
    W = reconstruct(sol)
    assert W.shape == (3, 3)
    A = decompose(W, uniform_reference(3))
    np.testing.assert_allclose(A @ A.T, U @ np.diag(lam) @ U.T, atol=1e-14)


def test_perturbation_factor_rows_orthogonal():
    w0 = np.array([0.2, 0.3, 0.5])
    A = perturbation_factor(np.array([1e-3, 4e-4]), np.eye(3)[:, :2], w0)
    np.testing.assert_allclose(A @ np.sqrt(w0), 0.0, atol=1e-15)
    with pytest.raises(ValidationError):
        perturbation_factor(np.array([1e-3]), np.eye(3)[:, :1], w0)


@settings(max_examples=30)
@given(st.lists(st.floats(0.05, 1.0), min_size=2, max_size=6))
def test_orthonormal_completion(w):
    w0 = np.asarray(w) / np.sum(w)
    V = orthonormal_completion(w0)
    np.testing.assert_allclose(V.T @ V, np.eye(w0.size), atol=1e-12)
    np.testing.assert_allclose(V[:, -1], np.sqrt(w0), atol=1e-12)


def test_zero_budget_gives_zero():
    pr = EitProblem([[0.2, 0.3, 0.5], [0.3, 0.3, 0.4], [0.1, 0.5, 0.4]], [0.0, 1e-3, 1e-3])
    sol = solve_sdp(build_sdp(pr))
    assert sol.t == 0.0 and sol.rank == 0
    assert np.all(sol.B == 0)


def test_duals_are_marginal_values():
    P = np.array([[0.2, 0.3, 0.5], [0.3, 0.3, 0.4], [0.1, 0.5, 0.4]])
    base = np.array([1e-3, 1.2e-3, 0.8e-3])
    sol = solve_sdp(build_sdp(EitProblem(P, base)))
    h = 1e-6
    for k in range(3):
        up = base.copy()
        up[k] += h
        dn = base.copy()
        dn[k] -= h
        tu = solve_sdp(build_sdp(EitProblem(P, up))).t
        td = solve_sdp(build_sdp(EitProblem(P, dn))).t
        # budgets are in bits, duals in nats per nat
        slope = (tu - td) / (2 * h * np.log(2))
        assert sol.duals[k] == pytest.approx(slope, rel=1e-3, abs=1e-6)


class TestDesignDispatch:
    def test_pair(self):
        assert design(EitProblem.from_fraction(PAIRS["pair1"], 1e-3))[2] == "closed-form"

    def test_binary_source(self):
        assert design(EitProblem.from_fraction(TRIPLES["triple1"], 1e-3))[2] == "collinear"

    def test_general(self):
        P = [[0.2, 0.3, 0.5], [0.3, 0.3, 0.4], [0.1, 0.5, 0.4]]
        sol, W, method = design(EitProblem.from_fraction(P, 1e-3))
        assert method == "sdp"
        assert W.shape == (3, sol.rank + 1)
