"""Closed-form optimal mechanisms for binary hypothesis testing.

The quadratic surrogate problem

    max_a  0.5 * lambda_p * (a . v_p)^2
    s.t.   0.5 * a [p_k] a^T <= eps_k,   k = 1, 2

has a rank-one optimum ``A* = a*^T v`` with ``v`` a unit vector orthogonal to
``sqrt(w0)``. Which leakage constraints are active decides between three
closed forms for ``a*``; when both are active the dual pair ``(eta1, eta2)``
solves two rational equations, handled here by a damped Newton iteration on
``log eta`` with a bisection fallback.

Budgets enter in bits and are converted to nats for the algebra; dual
variables are reported in the natural-unit scaling.
"""

from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations

import numpy as np

from ._validation import check_reference
from .exceptions import NoConvergence, ValidationError
from .mechanism import LN2, EitProblem, assemble
from .measures import LOG2E, RenyiOrder, relative_entropy, renyi_divergence, renyi_kl_ratio

CASE_TOL = 1e-12
ETA_RESIDUAL_TOL = 1e-10
NEWTON_MAX_ITER = 100


class Case(str, Enum):
    FIRST_ACTIVE = "FirstActive"
    SECOND_ACTIVE = "SecondActive"
    BOTH_ACTIVE = "BothActive"
    DEGENERATE = "Degenerate"


@dataclass
class BinarySolution:
    """Optimal surrogate mechanism and its certificates.

    ``a_star`` carries the canonical sign (first nonzero entry positive);
    ``-a_star`` is equally optimal. ``predicted_utility`` is the surrogate
    objective in bits.
    """

    a_star: np.ndarray
    v: np.ndarray
    lambda_p: float
    v_p: np.ndarray
    eta: tuple
    case: Case
    predicted_utility: float
    mechanism: np.ndarray
    reference: np.ndarray
    kkt_residuals: dict = field(default_factory=dict)
    renyi_utility: float | None = None
    renyi_ratio: float | None = None
    order: RenyiOrder | None = None
    minimizing_index: int = 1
    active_set: tuple = ()

    @property
    def A(self):
        return np.outer(self.a_star, self.v)

    @property
    def max_kkt_residual(self):
        return max(self.kkt_residuals.values(), default=0.0)


def canonical_sign(x, tol=0.0):
    """Flip ``x`` so its first entry with ``|x_i| > tol`` is positive."""
    x = np.asarray(x, dtype=float)
    nz = np.flatnonzero(np.abs(x) > tol)
    if nz.size and x[nz[0]] < 0:
        return -x
    return x


def choose_direction(w0):
    """Unit vector orthogonal to ``sqrt(w0)`` with positive first entry.

    For a binary output this is ``(sqrt(w0_2), -sqrt(w0_1))``. Larger output
    alphabets use Gram-Schmidt on the first standard basis vector that is not
    parallel to ``sqrt(w0)``.
    """
    w0 = check_reference(w0)
    s = np.sqrt(w0)
    if w0.size < 2:
        raise ValidationError("a perturbation direction needs at least two output symbols")
    if w0.size == 2:
        v = np.array([s[1], -s[0]])
        return v / np.linalg.norm(v)
    u = s / np.linalg.norm(s)
    for j in range(w0.size):
        e = np.zeros(w0.size)
        e[j] = 1.0
        r = e - u * u[j]
        n = np.linalg.norm(r)
        if n > 1e-8:
            return canonical_sign(r / n)
    raise ValidationError("could not build a direction orthogonal to sqrt(w0)")  # pragma: no cover


def _constraint_values(a, P):
    """``0.5 * a [p_k] a^T`` for every row of ``P`` (nats)."""
    return 0.5 * (P @ (a * a))


def single_active_eta(c, p, eps):
    """Dual value when only the constraint with distribution ``p`` binds."""
    return float(np.sqrt(np.sum(c * c / p) / (2.0 * eps)))


def _dual_value(c, P, eps, eta):
    s = eta @ P
    return 0.5 * np.sum(c * c / s) + eta @ eps


def newton_dual(c, P, eps, eta0, max_iter=NEWTON_MAX_ITER, tol=ETA_RESIDUAL_TOL):
    """Minimize the dual ``0.5 sum c_i^2 / s_i + eta . eps`` over ``eta > 0``.

    ``s = eta @ P``. Stationarity is equivalent to every constraint in ``P``
    being tight at ``a = c / s``. Iterates on ``u = log eta`` with Armijo
    backtracking; falls back to a gradient step when the Newton direction is
    not a descent direction.

    Raises
    ------
    NoConvergence
        If the relative residual ``max_k |f_k / eps_k - 1|`` stays above
        ``tol`` after ``max_iter`` iterations.
    """
    u = np.log(np.asarray(eta0, dtype=float))
    c2 = c * c
    resid = np.inf
    for _ in range(max_iter):
        eta = np.exp(u)
        s = eta @ P
        f = 0.5 * (P @ (c2 / s**2))
        resid = np.max(np.abs(f / eps - 1.0))
        if resid <= tol:
            return eta, float(resid)
        g_eta = eps - f
        grad = eta * g_eta
        H = (P * (c2 / s**3)) @ P.T
        hess = eta[:, None] * H * eta[None, :] + np.diag(grad)
        try:
            L = np.linalg.cholesky(hess)
            step = -np.linalg.solve(L.T, np.linalg.solve(L, grad))
        except np.linalg.LinAlgError:
            step = -grad / max(np.linalg.norm(grad), 1e-300)
        if step @ grad >= 0:
            step = -grad / max(np.linalg.norm(grad), 1e-300)
        big = np.max(np.abs(step))
        if big > 2.0:
            step = step * (2.0 / big)
        g0 = _dual_value(c, P, eps, eta)
        t = 1.0
        while t > 1e-12:
            trial = u + t * step
            if _dual_value(c, P, eps, np.exp(trial)) <= g0 + 1e-4 * t * (grad @ step):
                break
            t *= 0.5
        u = u + t * step
        if not np.all(np.isfinite(u)) or np.any(u < -700):
            break
    raise NoConvergence(f"dual Newton solve stalled with residual {resid:.3g}")


def _bisect_pair(c, p1, p2, eps1, eps2, tol=ETA_RESIDUAL_TOL):
    """Bisection on the mixing weight ``t = eta2 / (eta1 + eta2)``."""
    c2 = c * c
    target = eps1 / eps2

    def ratio(t):
        s = (1.0 - t) * p1 + t * p2
        return np.sum(p1 * c2 / s**2) / np.sum(p2 * c2 / s**2)

    lo, hi = 0.0, 1.0
    rlo, rhi = ratio(lo) - target, ratio(hi) - target
    if rlo * rhi > 0:
        raise NoConvergence("both-active system has no root with positive duals")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        rm = ratio(mid) - target
        if rm == 0 or hi - lo < 1e-16:
            break
        if (rm > 0) == (rlo > 0):
            lo, rlo = mid, rm
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    s = (1.0 - t) * p1 + t * p2
    scale = np.sqrt(np.sum(p1 * c2 / s**2) / (2.0 * eps1))
    eta = np.array([(1.0 - t) * scale, t * scale])
    f = 0.5 * (np.vstack([p1, p2]) @ (c2 / (eta @ np.vstack([p1, p2])) ** 2))
    resid = float(np.max(np.abs(f / np.array([eps1, eps2]) - 1.0)))
    if resid > tol or np.any(eta <= 0):
        raise NoConvergence(f"bisection fallback left residual {resid:.3g}")
    return eta, resid


def solve_dual_eta(p1, p2, eps1, eps2, lambda_p, v_p):
    """Positive dual pair for the case where both leakage constraints bind.

    Budgets are in bits. Returns ``(eta1, eta2)`` in natural-unit scaling,
    satisfying both tightness equations to relative residual ``<= 1e-10``.

    Raises
    ------
    NoConvergence
        When no positive pair exists, which means the both-active case was
        mis-detected; callers should retry the single-active branches.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    eps = np.array([eps1, eps2], dtype=float) * LN2
    c = 0.5 * lambda_p * np.asarray(v_p, dtype=float)
    P = np.vstack([p1, p2])
    eta0 = np.array([single_active_eta(c, p1, eps[0]), single_active_eta(c, p2, eps[1])]) * 0.5
    try:
        eta, _ = newton_dual(c, P, eps, eta0)
    except NoConvergence:
        eta, _ = _bisect_pair(c, p1, p2, eps[0], eps[1])
    return float(eta[0]), float(eta[1])


def kkt_residuals(c, P, eps, eta, a):
    """Scaled residuals of the KKT system of ``max c.a s.t. 0.5 a[p_k]a <= eps_k``.

    ``a`` must carry the sign with ``c . a >= 0``.
    """
    eta = np.asarray(eta, dtype=float)
    f = _constraint_values(a, P)
    s = eta @ P
    cn = max(np.linalg.norm(c), 1e-300)
    active = eta > 0
    comp = np.where(active, np.abs(eps - f) / eps, 0.0)
    return {
        "stationarity": float(np.linalg.norm(c - s * a) / cn),
        "primal_feasibility": float(np.max(np.maximum(0.0, (f - eps) / eps))),
        "dual_feasibility": float(np.max(np.maximum(0.0, -eta))),
        "complementary_slackness": float(np.max(comp)),
    }


def solve_qcqp_active_set(c, P, eps, tol=1e-9):
    """Solve ``max c.a s.t. 0.5 a [p_k] a^T <= eps_k`` by active-set enumeration.

    Subsets of constraints are tried in order of size (then lexicographic).
    Each subset's duals come from :func:`newton_dual` (with the bisection
    fallback for pairs); the first subset whose point is primal feasible
    with positive duals is returned. ``eps`` is in nats.

    Returns
    -------
    a : ndarray
    eta : ndarray
        Full dual vector with zeros outside the active subset.
    active : tuple of int
    """
    c = np.asarray(c, dtype=float)
    P = np.atleast_2d(np.asarray(P, dtype=float))
    eps = np.asarray(eps, dtype=float)
    m = P.shape[0]
    for size in range(1, m + 1):
        for subset in combinations(range(m), size):
            idx = list(subset)
            Ps, es = P[idx], eps[idx]
            try:
                if size == 1:
                    e = np.array([single_active_eta(c, Ps[0], es[0])])
                else:
                    eta0 = np.array([single_active_eta(c, Ps[j], es[j]) for j in range(size)]) / size
                    try:
                        e, _ = newton_dual(c, Ps, es, eta0)
                    except NoConvergence:
                        if size != 2:
                            raise
                        e, _ = _bisect_pair(c, Ps[0], Ps[1], es[0], es[1])
            except NoConvergence:
                continue
            eta = np.zeros(m)
            eta[idx] = e
            a = c / (eta @ P)
            f = _constraint_values(a, P)
            if np.all(f <= eps * (1.0 + tol)) and np.all(e > 0):
                return a, eta, subset
    raise NoConvergence("no active set satisfied the KKT conditions")


def _ratio_first(v_p, p1, p2):
    return np.sum(v_p**2 * p2 / p1**2) / np.sum(v_p**2 / p1)


def _ratio_second(v_p, p1, p2):
    return np.sum(v_p**2 * p1 / p2**2) / np.sum(v_p**2 / p2)


def _degenerate(problem, v, p1, p2):
    M = problem.M
    a = np.zeros(M)
    d = p2 - p1
    nd = np.linalg.norm(d)
    v_p = d / nd if nd > 0 else np.zeros(M)
    W = assemble(problem.reference, np.outer(a, v))
    return BinarySolution(
        a_star=a, v=v, lambda_p=float(nd**2), v_p=v_p, eta=(0.0, 0.0), case=Case.DEGENERATE,
        predicted_utility=0.0, mechanism=W, reference=problem.reference,
        kkt_residuals={k: 0.0 for k in ("stationarity", "primal_feasibility",
                                        "dual_feasibility", "complementary_slackness")},
    )


def solve_binary(problem):
    """Optimal surrogate mechanism for two hypotheses.

    The active-constraint case is chosen by testing the first-only condition,
    then the second-only condition, each a strict inequality with tolerance
    ``1e-12``; a tie routes to ``BothActive`` (both constraints are tight and
    the dual of the non-binding one is zero). The mechanism is assembled on
    ``problem.reference``, two outputs being enough.

    Raises
    ------
    NotInterior, BudgetExceedsEntropy
        From problem validation.
    NegativeEntry
        When the optimal perturbation leaves the simplex for this reference.
    """
    if not isinstance(problem, EitProblem):
        raise ValidationError("solve_binary expects an EitProblem")
    if problem.m != 2:
        raise ValidationError(f"solve_binary needs exactly two hypotheses, got {problem.m}")
    p1, p2 = problem.hypotheses
    v = choose_direction(problem.reference)
    d = p2 - p1
    lam = float(d @ d)
    if lam == 0.0 or np.any(problem.budgets == 0):
        return _degenerate(problem, v, p1, p2)

    eps1, eps2 = problem.budgets_nats
    v_p = d / np.sqrt(lam)
    c = 0.5 * lam * v_p
    P = np.vstack([p1, p2])
    r1 = _ratio_first(v_p, p1, p2)
    r2 = _ratio_second(v_p, p1, p2)
    t1, t2 = eps2 / eps1, eps1 / eps2

    def first_only():
        q = np.sum(v_p**2 / p1)
        a = np.sqrt(2.0 * eps1 / q) * v_p / p1
        return a, (single_active_eta(c, p1, eps1), 0.0)

    def second_only():
        q = np.sum(v_p**2 / p2)
        a = np.sqrt(2.0 * eps2 / q) * v_p / p2
        return a, (0.0, single_active_eta(c, p2, eps2))

    if r1 < t1 * (1.0 - CASE_TOL):
        case = Case.FIRST_ACTIVE
        a, eta = first_only()
    elif r2 < t2 * (1.0 - CASE_TOL):
        case = Case.SECOND_ACTIVE
        a, eta = second_only()
    else:
        case = Case.BOTH_ACTIVE
        if abs(r1 - t1) <= CASE_TOL * t1:
            a, eta = first_only()
        elif abs(r2 - t2) <= CASE_TOL * t2:
            a, eta = second_only()
        else:
            try:
                eta = solve_dual_eta(p1, p2, problem.budgets[0], problem.budgets[1], lam, v_p)
                a = c / (eta[0] * p1 + eta[1] * p2)
            except NoConvergence:
                a, eta_arr, active = solve_qcqp_active_set(c, P, np.array([eps1, eps2]))
                eta = (float(eta_arr[0]), float(eta_arr[1]))
                case = {(0,): Case.FIRST_ACTIVE, (1,): Case.SECOND_ACTIVE}.get(active, Case.BOTH_ACTIVE)

    resid = kkt_residuals(c, P, np.array([eps1, eps2]), np.array(eta), a)
    a = canonical_sign(a)
    utility = 0.5 * lam * float(a @ v_p) ** 2 * LOG2E
    W = assemble(problem.reference, np.outer(a, v))
    return BinarySolution(
        a_star=a, v=v, lambda_p=lam, v_p=v_p, eta=(float(eta[0]), float(eta[1])), case=case,
        predicted_utility=float(utility), mechanism=W, reference=problem.reference,
        kkt_residuals=resid,
    )


def solve_binary_renyi(problem, order):
    """Surrogate-optimal mechanism scored by the Rényi divergence.

    Near perfect privacy the Rényi objective is a monotone function of the
    relative entropy, so the mechanism is exactly that of
    :func:`solve_binary`. Adds the exact ``D_alpha(p2 W' || p1 W')`` and the
    convergence diagnostic ``(1-a) D / (2^((1-a) D_a) - 1)``, which tends to
    ``log2(e)/alpha``.
    """
    order = order if isinstance(order, RenyiOrder) else RenyiOrder(float(order))
    sol = solve_binary(problem)
    p1, p2 = problem.hypotheses
    q1, q2 = p1 @ sol.mechanism, p2 @ sol.mechanism
    sol.order = order
    sol.renyi_utility = renyi_divergence(q2, q1, order)
    sol.renyi_ratio = renyi_kl_ratio(q2, q1, order) if relative_entropy(q2, q1) > 0 else float("nan")
    return sol
