"""m-ary hypothesis testing: semidefinite relaxation and reconstruction.

Lifting ``B = A A^T`` turns the max-min surrogate problem into a linear SDP

    max t  s.t.  0.5 Tr(P_k B) >= t   (k = 2..m),  P_k = (p_k - p_1)^T (p_k - p_1)
                 0.5 Tr([p_k] B) <= eps_k  (k = 1..m),   B psd

whose optimum ``B*`` of rank ``l`` factors back into a perturbation with
``l + 1`` output symbols. For Bernoulli hypotheses all differences are
collinear and the problem collapses to the binary closed form with ``m``
leakage constraints.
"""

from dataclasses import dataclass, field

import numpy as np

from .binary import (
    BinarySolution, Case, canonical_sign, choose_direction, kkt_residuals, solve_qcqp_active_set,
)
from .exceptions import ValidationError
from .mechanism import EitProblem, assemble, uniform_reference
from .measures import LOG2E
from .sdp import solve_sdp_standard

RANK_TOL = 1e-9
PARALLEL_TOL = 1e-8


@dataclass
class SdpProblem:
    """Data of the lifted problem; budgets in nats."""

    utility_matrices: np.ndarray   # (m-1, M, M), P_k for k = 2..m
    budget_matrices: np.ndarray    # (m, M, M), diag(p_k)
    budgets: np.ndarray            # (m,)
    hypotheses: np.ndarray

    @property
    def M(self):
        return self.hypotheses.shape[1]

    @property
    def m(self):
        return self.hypotheses.shape[0]

    @property
    def n_utility_constraints(self):
        return self.utility_matrices.shape[0]

    @property
    def n_budget_constraints(self):
        return self.budget_matrices.shape[0]


@dataclass
class SdpSolution:
    B: np.ndarray
    t: float                 # optimal min surrogate exponent, nats
    rank: int
    eigvals: np.ndarray
    U: np.ndarray
    A_star: np.ndarray       # factor for a uniform reference over rank+1 outputs
    duals: np.ndarray        # budget multipliers, one per hypothesis
    gap: float
    utility_duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0

    @property
    def utility_bits(self):
        return self.t * LOG2E


def build_sdp(problem):
    """Assemble the lifted SDP data from an :class:`EitProblem`."""
    P = problem.hypotheses
    d = P[1:] - P[0]
    util = np.einsum("ki,kj->kij", d, d)
    budget = np.array([np.diag(p) for p in P])
    return SdpProblem(util, budget, problem.budgets_nats.copy(), P)


def _standard_form(sdp, eps):
    M, m = sdp.M, sdp.m
    n = M + 2 * m
    it = M
    C = np.zeros((n, n))
    C[it, it] = -1.0
    rows, rhs = [], []
    for k in range(m - 1):
        Ak = np.zeros((n, n))
        Ak[:M, :M] = 0.5 * sdp.utility_matrices[k]
        Ak[it, it] = -1.0
        Ak[M + 1 + k, M + 1 + k] = -1.0
        rows.append(Ak)
        rhs.append(0.0)
    for k in range(m):
        Ak = np.zeros((n, n))
        Ak[:M, :M] = 0.5 * sdp.budget_matrices[k]
        Ak[M + m + k, M + m + k] = 1.0
        rows.append(Ak)
        rhs.append(eps[k])
    return C, np.array(rows), np.array(rhs)


def _eig_factor(B):
    lam, U = np.linalg.eigh(0.5 * (B + B.T))
    order = np.argsort(lam)[::-1]
    lam, U = lam[order], U[:, order]
    top = lam[0] if lam.size else 0.0
    keep = lam > RANK_TOL * top if top > 0 else np.zeros(lam.size, dtype=bool)
    lam, U = lam[keep], U[:, keep]
    U = np.column_stack([canonical_sign(U[:, j]) for j in range(U.shape[1])]) if U.size else U
    return lam, U


def orthonormal_completion(w0):
    """Orthonormal ``V`` whose last column is ``sqrt(w0)`` (unit by construction).

    The other columns come from Gram-Schmidt over the standard basis, skipping
    candidates nearly parallel to the span built so far.
    """
    w0 = np.asarray(w0, dtype=float)
    n = w0.size
    last = np.sqrt(w0)
    last = last / np.linalg.norm(last)
    basis = [last]
    for j in range(n):
        if len(basis) == n:
            break
        e = np.zeros(n)
        e[j] = 1.0
        if abs(e @ last) > 1.0 - PARALLEL_TOL:
            continue
        r = e.copy()
        for q in basis:
            r -= (q @ r) * q
        nr = np.linalg.norm(r)
        if nr > PARALLEL_TOL:
            basis.append(r / nr)
    if len(basis) != n:  # pragma: no cover - basis vectors always suffice
        raise ValidationError("failed to complete an orthonormal basis")
    return np.column_stack(basis[1:] + basis[:1])


def perturbation_factor(eigvals, U, w0):
    """``A* = U Sigma V^T`` with ``N = l + 1`` columns orthogonal to ``sqrt(w0)``.

    A zero matrix is treated as rank one with a zero eigenvalue.
    """
    lam = np.asarray(eigvals, dtype=float)
    M = U.shape[0]
    if lam.size == 0:
        lam = np.zeros(1)
        U = np.eye(M)[:, :1]
    l = lam.size
    w0 = np.asarray(w0, dtype=float)
    if w0.size != l + 1:
        raise ValidationError(f"reference output must have {l + 1} symbols for rank {l}, got {w0.size}")
    V = orthonormal_completion(w0)
    Sigma = np.zeros((l, l + 1))
    Sigma[:, :l] = np.diag(np.sqrt(lam))
    return U @ Sigma @ V.T


def solve_sdp(sdp, tol=1e-12):
    """Solve the lifted problem.

    Budgets are rescaled so the largest is one before the interior-point
    solve, then the solution is scaled back (the program is homogeneous).
    Any zero budget or zero difference vector pins the optimum to ``B = 0``.

    Raises
    ------
    NumericalFailure
        When the interior-point iterations stall.
    """
    M, m = sdp.M, sdp.m
    eps = np.asarray(sdp.budgets, dtype=float)
    zero_util = any(not np.any(P) for P in sdp.utility_matrices)
    if np.any(eps <= 0) or zero_util or m < 2:
        B = np.zeros((M, M))
        lam, U = _eig_factor(B)
        return SdpSolution(B, 0.0, 0, lam, U, perturbation_factor(lam, U, uniform_reference(2)),
                           np.zeros(m), 0.0, np.zeros(m - 1), 0)
    scale = eps.max()
    C, A, b = _standard_form(sdp, eps / scale)
    res = solve_sdp_standard(C, A, b, tol=tol)
    B = 0.5 * (res.X[:M, :M] + res.X[:M, :M].T) * scale
    t = min(0.5 * np.sum(Pk * B) for Pk in sdp.utility_matrices)
    lam, U = _eig_factor(B)
    y = res.y
    util_duals = np.maximum(y[: m - 1], 0.0)
    duals = np.maximum(-y[m - 1:], 0.0)
    rank = int(lam.size)
    A_star = perturbation_factor(lam, U, uniform_reference(max(rank, 1) + 1))
    return SdpSolution(B, float(t), rank, lam, U, A_star, duals, float(res.gap), util_duals, res.iterations)


def reconstruct(solution, w0=None):
    """Mechanism ``W' = W0 + A* [sqrt(w0)]`` with ``N = l + 1`` outputs.

    ``w0`` defaults to uniform over ``l + 1`` symbols (``l >= 1``).

    Raises
    ------
    NegativeEntry
        From :func:`assemble` when the perturbation leaves the simplex.
    """
    l = max(solution.rank, 1)
    w0 = uniform_reference(l + 1) if w0 is None else np.asarray(w0, dtype=float)
    A = perturbation_factor(solution.eigvals, solution.U, w0)
    return assemble(w0, A)


def minimal_difference_index(hypotheses):
    """Index ``k >= 1`` minimizing ``||p_k - p_1||``; ties go to the smallest ``k``."""
    P = np.asarray(hypotheses, dtype=float)
    norms = np.linalg.norm(P[1:] - P[0], axis=1)
    # rounding in the differences should not break exact ties
    tied = np.flatnonzero(norms <= norms.min() * (1.0 + 1e-12))
    return int(tied[0]) + 1


def solve_binary_source_mary(problem):
    """Closed-form mechanism for Bernoulli hypotheses, any number ``m``.

    The difference vectors are collinear, so the smallest one governs the
    max-min objective. The resulting ``m``-constraint problem is solved by
    active-set enumeration, ``a* = 0.5 (p_j - p_1) [sum_k eta_k p_k]^(-1)``,
    and returned as a :class:`BinarySolution` whose ``minimizing_index`` is
    that ``j`` (0-based row of ``problem.hypotheses``).
    """
    if not isinstance(problem, EitProblem):
        raise ValidationError("solve_binary_source_mary expects an EitProblem")
    if problem.M != 2:
        raise ValidationError(f"binary-source shortcut needs M = 2, got M = {problem.M}")
    P = problem.hypotheses
    j = minimal_difference_index(P)
    d = P[j] - P[0]
    lam = float(d @ d)
    v = choose_direction(problem.reference)
    eps = problem.budgets_nats
    m = problem.m
    if lam == 0.0 or np.any(eps == 0):
        W = assemble(problem.reference, np.zeros((2, v.size)))
        return BinarySolution(
            a_star=np.zeros(2), v=v, lambda_p=lam, v_p=d / np.sqrt(lam) if lam > 0 else np.zeros(2),
            eta=tuple(np.zeros(m)), case=Case.DEGENERATE, predicted_utility=0.0, mechanism=W,
            reference=problem.reference,
            kkt_residuals={"stationarity": 0.0, "primal_feasibility": 0.0,
                           "dual_feasibility": 0.0, "complementary_slackness": 0.0},
            minimizing_index=j,
        )
    c = 0.5 * d
    a, eta, active = solve_qcqp_active_set(c, P, eps)
    resid = kkt_residuals(c, P, eps, eta, a)
    v_p = d / np.sqrt(lam)
    a = canonical_sign(a)
    utility = 0.5 * lam * float(a @ v_p) ** 2 * LOG2E
    if len(active) > 1:
        case = Case.BOTH_ACTIVE
    elif active == (0,):
        case = Case.FIRST_ACTIVE
    else:
        case = Case.SECOND_ACTIVE
    W = assemble(problem.reference, np.outer(a, v))
    sol = BinarySolution(
        a_star=a, v=v, lambda_p=lam, v_p=v_p, eta=tuple(float(e) for e in eta), case=case,
        predicted_utility=float(utility), mechanism=W, reference=problem.reference,
        kkt_residuals=resid, minimizing_index=j, active_set=active,
    )
    return sol


def design_mary(problem, w0=None):
    """Solve the lifted SDP and reconstruct a mechanism; returns ``(solution, W)``."""
    sol = solve_sdp(build_sdp(problem))
    return sol, reconstruct(sol, w0)
