"""Brute-force reference solvers used to check the closed forms.

``exact_put_2x2`` searches the exact (non-approximated) problem over binary
mechanisms. A 2x2 mechanism is written through

    q = (W_12 + W_22) / 2,     s = W_22 - W_12,

so that every output distribution ``p W`` has second entry
``q + s (p_2 - 1/2)``, affine in ``s``. For fixed ``q`` both the utility
(KL or Rényi of order < 1) and every mutual information are jointly convex
functions of affine images of ``s`` vanishing at ``s = 0``, hence monotone in
``|s|``. The best mechanism on each ray is then the largest feasible ``|s|``,
found by bisection, and only ``q`` needs a grid.

``grid_qcqp`` solves the vector QCQP by gridding directions on the unit
sphere; along a direction the largest feasible scale is explicit.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionTooLarge, ValidationError
from .design import design
from .mechanism import EitProblem, effective_leakage
from .measures import LOG2E, RenyiOrder, _kl_nats, relative_entropy, renyi_divergence

BISECT_ITER = 200
MAX_QCQP_DIM = 4
MAX_BASE_POINTS = 200_000


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid step plus rounds of local refinement (step / 10 per round)."""

    resolution: float = 1e-3
    refine_rounds: int = 3

    def __post_init__(self):
        if not 0.0 < float(self.resolution) < 1.0:
            raise ValidationError(f"grid resolution must lie in (0, 1), got {self.resolution}")
        if int(self.refine_rounds) < 0:
            raise ValidationError("refine_rounds must be nonnegative")

    @property
    def final_step(self):
        return self.resolution / 10.0 ** self.refine_rounds


def parse_utility(utility):
    """Normalize ``"kl"``, ``"renyi:<alpha>"`` or a :class:`RenyiOrder`."""
    if utility is None or (isinstance(utility, str) and utility.lower() == "kl"):
        return "kl"
    if isinstance(utility, RenyiOrder):
        return utility
    if isinstance(utility, str) and utility.lower().startswith("renyi:"):
        try:
            return RenyiOrder(float(utility.split(":", 1)[1]))
        except ValueError as exc:
            raise ValidationError(f"bad Renyi order in {utility!r}") from exc
    raise ValidationError(f"unknown utility {utility!r}; use 'kl' or 'renyi:<alpha>'")


def utility_label(utility):
    u = parse_utility(utility)
    return "kl" if u == "kl" else f"renyi:{u.alpha:g}"


# -- vectorized Bernoulli measures on the second output probability, in nats

def _bern(x):
    x = np.asarray(x, dtype=float)
    return np.stack([1.0 - x, x], axis=-1)


def _kl_bern(a, b):
    return _kl_nats(_bern(a), _bern(b))


def _renyi_bern(a, b, alpha):
    A, B = _bern(a), _bern(b)
    u = np.where(B > 0, (A - B) / np.where(B > 0, B, 1.0), 0.0)
    with np.errstate(divide="ignore"):
        logr = np.log1p(u)
    # same linear-term removal as the scalar Hellinger divergence
    terms = np.where(B > 0, B * (np.expm1(alpha * logr) - alpha * u), 0.0)
    h = terms.sum(axis=-1)
    return np.log1p(h) / (alpha - 1.0)


def _outputs(P, q, s):
    """Second-entry output probabilities, shape ``(m,) + q.shape``."""
    return q[None] + s[None] * (P[:, 1] - 0.5)[(slice(None),) + (None,) * q.ndim]


def _rows(q, s):
    """Second-column entries ``(W_12, W_22)`` of the mechanism."""
    return q - 0.5 * s, q + 0.5 * s


def _leakages_nats(P, q, s):
    """Exact ``I(p_k, W)`` for every hypothesis, shape ``(m,) + q.shape``."""
    x, z = _rows(q, s)
    out = _outputs(P, q, s)
    return P[:, 0][:, None] * _kl_bern(x[None], out) + P[:, 1][:, None] * _kl_bern(z[None], out)


def _utility_nats(P, q, s, utility):
    """``min_{k>=2} U(p_k W || p_1 W)``."""
    out = _outputs(P, q, s)
    if utility == "kl":
        vals = _kl_bern(out[1:], out[:1])
    else:
        vals = _renyi_bern(out[1:], out[:1], utility.alpha)
    return vals.min(axis=0)


def _max_feasible_s(P, eps_nats, q, sign):
    """Largest ``|s|`` along ``sign`` with every exact leakage within budget."""
    cap = 2.0 * np.minimum(q, 1.0 - q)
    lo = np.zeros_like(q)
    hi = cap.copy()
    ok_cap = np.all(_leakages_nats(P, q, sign * hi) <= eps_nats[:, None], axis=0)
    lo = np.where(ok_cap, hi, lo)
    todo = ~ok_cap
    for _ in range(BISECT_ITER):
        if not np.any(todo):
            break
        mid = 0.5 * (lo + hi)
        feas = np.all(_leakages_nats(P, q, sign * mid) <= eps_nats[:, None], axis=0)
        lo = np.where(todo & feas, mid, lo)
        hi = np.where(todo & ~feas, mid, hi)
        todo = todo & (hi - lo > 1e-17)
    return lo


def _best_on_grid(P, eps_nats, q, utility):
    """Evaluate both rays at every ``q``; return ``(value, q, s)`` of the best.

    Ties resolve to the lexicographically smallest ``(W_12, W_21)``.
    """
    cands = []
    for sign in (1.0, -1.0):
        s = sign * _max_feasible_s(P, eps_nats, q, sign)
        cands.append((_utility_nats(P, q, s, utility), s))
    vals = np.concatenate([c[0] for c in cands])
    ss = np.concatenate([c[1] for c in cands])
    qq = np.concatenate([q, q])
    x, z = _rows(qq, ss)
    top = np.max(vals)
    tied = np.flatnonzero(vals >= top)
    # W = [[1 - x, x], [y, 1 - y]] with y = 1 - z
    order = np.lexsort((1.0 - z[tied], x[tied]))
    k = tied[order[0]]
    return float(vals[k]), float(qq[k]), float(ss[k])


def exact_put_2x2(problem, grid=None, utility="kl"):
    """Optimal 2x2 mechanism for the exact leakage-constrained problem.

    Maximizes ``min_{k>=2} U(p_k W || p_1 W)`` subject to
    ``I(p_k, W) <= eps_k`` for every hypothesis, where ``U`` is relative
    entropy or a Rényi divergence of order in (0, 1).

    Parameters
    ----------
    problem : EitProblem
        Must have ``M = 2``; any number of hypotheses.
    grid : GridSpec, optional
        Step of the grid over ``q`` and refinement rounds.
    utility : {"kl", "renyi:<alpha>"} or RenyiOrder

    Returns
    -------
    W : (2, 2) ndarray
    value : float
        Utility in bits.
    """
    if problem.M != 2:
        raise ValidationError(f"the exact oracle handles M = 2 only, got M = {problem.M}")
    grid = grid or GridSpec()
    u = parse_utility(utility)
    P = problem.hypotheses
    eps = problem.budgets_nats
    if np.all(eps == 0) or not np.any(P[1:] - P[0]):
        return np.full((2, 2), 0.5), 0.0

    n = int(round(1.0 / grid.resolution))
    q = (np.arange(n) + 0.5) / n
    best = _best_on_grid(P, eps, q, u)
    step = 1.0 / n
    for _ in range(int(grid.refine_rounds)):
        centre = best[1]
        q = centre + step * np.linspace(-1.0, 1.0, 21)
        q = q[(q > 0.0) & (q < 1.0)]
        cand = _best_on_grid(P, eps, q, u)
        if cand[0] > best[0]:
            best = cand
        step /= 10.0
    value, q0, s0 = best
    x, z = _rows(q0, s0)
    W = np.array([[1.0 - x, x], [1.0 - z, z]])
    return W, float(value * LOG2E)


# -- vector QCQP over directions

def _sphere_points(angles):
    """Map hyperspherical angles ``(..., d-1)`` to unit vectors ``(..., d)``."""
    d = angles.shape[-1] + 1
    out = np.ones(angles.shape[:-1] + (d,))
    sin_acc = np.ones(angles.shape[:-1])
    for i in range(d - 1):
        out[..., i] = sin_acc * np.cos(angles[..., i])
        sin_acc = sin_acc * np.sin(angles[..., i])
    out[..., d - 1] = sin_acc
    return out


def _qcqp_values(U, D, P, eps):
    """Objective at the largest feasible scale along each unit row of ``U``."""
    proj = (U @ D.T) ** 2                       # (n, m-1)
    quad = (U * U) @ P.T                        # (n, m), u [p_k] u
    t2 = np.min(2.0 * eps[None, :] / quad, axis=1)
    return 0.5 * t2 * proj.min(axis=1), t2


def _angle_grid(axes):
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def grid_qcqp(problem, grid=None):
    """Grid search for ``max min_k 0.5 (a . (p_k - p_1))^2`` s.t. ``0.5 a [p_k] a^T <= eps_k``.

    Directions are gridded in hyperspherical angles (step ``resolution * pi``,
    coarsened if the base grid would exceed ``2e5`` points) and refined
    locally; along each direction the scale is the largest feasible one.

    Returns
    -------
    a : (M,) ndarray
        Canonically signed maximizer (first nonzero entry positive).
    value : float
        Objective in bits.

    Raises
    ------
    DimensionTooLarge
        For ``M > 4``.
    """
    M = problem.M
    if M > MAX_QCQP_DIM:
        raise DimensionTooLarge(f"grid_qcqp supports M <= {MAX_QCQP_DIM}, got M = {M}")
    grid = grid or GridSpec()
    P = problem.hypotheses
    D = P[1:] - P[0]
    eps = problem.budgets_nats
    if np.all(eps == 0) or not np.any(D):
        return np.zeros(M), 0.0
    if M == 1:  # pragma: no cover - hypotheses have at least two symbols
        raise ValidationError("grid_qcqp needs M >= 2")
    d = M - 1
    step = grid.resolution * np.pi
    per_axis = max(int(np.ceil(np.pi / step)), 2)
    per_axis = min(per_axis, max(int(MAX_BASE_POINTS ** (1.0 / d)), 8))
    step = np.pi / per_axis
    # last angle spans [0, pi) only: a and -a are equivalent
    axes = [np.linspace(0.0, np.pi, per_axis + 1) for _ in range(d - 1)]
    axes.append(np.arange(per_axis) * step)
    ang = _angle_grid(axes)
    vals, _ = _qcqp_values(_sphere_points(ang), D, P, eps)
    k = int(np.argmax(vals))
    best_val, best_ang = float(vals[k]), ang[k]
    local = np.linspace(-1.0, 1.0, 21)
    for _ in range(int(grid.refine_rounds) + 1):
        ang = best_ang[None, :] + step * _angle_grid([local] * d)
        vals, _ = _qcqp_values(_sphere_points(ang), D, P, eps)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best_ang = float(vals[k]), ang[k]
        step /= 10.0
    u = _sphere_points(best_ang[None, :])
    _, t2 = _qcqp_values(u, D, P, eps)
    a = u[0] * np.sqrt(t2[0])
    nz = np.flatnonzero(np.abs(a) > 0)
    if nz.size and a[nz[0]] < 0:
        a = -a
    return a, best_val * LOG2E


# -- comparison protocol

COLUMNS = ("eps_tilde", "eps_effective", "eps_norm", "util_eit", "util_oracle", "ratio", "utility_kind")


def _utility_bits(P, W, utility):
    out = P @ W
    if utility == "kl":
        vals = [relative_entropy(o, out[0]) for o in out[1:]]
    else:
        vals = [renyi_divergence(o, out[0], utility) for o in out[1:]]
    return float(min(vals))


def _compare_row(hypotheses, f, u, grid, reference):
    kw = {} if reference is None else {"reference": reference}
    prob = EitProblem.from_fraction(hypotheses, float(f), **kw)
    if prob.M != 2:
        raise ValidationError("the comparison protocol needs binary hypotheses (M = 2)")
    _, W, _ = design(prob)
    eps_eff = effective_leakage(prob, W)
    util_eit = _utility_bits(prob.hypotheses, W, u)
    matched = EitProblem(prob.hypotheses, np.full(prob.m, min(eps_eff, prob.min_entropy)), prob.reference)
    _, util_oracle = exact_put_2x2(matched, grid, u)
    ratio = util_eit / util_oracle if util_oracle > 0 else float("nan")
    return dict(
        eps_tilde=float(prob.budgets[0]), eps_effective=eps_eff,
        eps_norm=eps_eff / prob.min_entropy, util_eit=util_eit,
        util_oracle=util_oracle, ratio=ratio, utility_kind=utility_label(u),
    )


def compare_protocol(hypotheses, eps_tilde_fractions, utility="kl", grid=None, reference=None, workers=1):
    """Utility of the approximate design against the exact optimum at equal leakage.

    For every normalized budget ``f``, the mechanism ``W'`` is designed with
    equal budgets ``f * min_k H(p_k)``; its effective leakage
    ``max_k I(p_k, W')`` is then handed to :func:`exact_put_2x2` as the
    budget of every hypothesis.

    Parameters
    ----------
    workers : int
        Sweep points are independent; more than one worker evaluates them
        in a thread pool. Rows are always sorted by budget.

    Returns
    -------
    list of dict
        One row per budget in increasing order, keys as in ``COLUMNS``; budgets and utilities
        in bits, ``eps_norm`` relative to ``min_k H(p_k)``.
    """
    u = parse_utility(utility)
    grid = grid or GridSpec()
    fractions = sorted(float(f) for f in eps_tilde_fractions)

    def row(f):
        return _compare_row(hypotheses, f, u, grid, reference)

    if workers > 1 and len(fractions) > 1:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            return list(pool.map(row, fractions))
    return [row(f) for f in fractions]
