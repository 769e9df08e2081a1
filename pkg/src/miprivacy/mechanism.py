"""Perturbation model around a perfect-privacy mechanism.

A mechanism near perfect privacy is written ``W = W0 + A [sqrt(w0)]`` where
every row of ``W0`` equals the reference output ``w0`` and the normalized
perturbation ``A`` satisfies ``A sqrt(w0)^T = 0``. The quadratic forms below
are computed in nats and converted to bits once on the way out.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_distribution, check_hypotheses, check_mechanism, check_reference
from .exceptions import BudgetExceedsEntropy, NegativeEntry, ValidationError
from .measures import LOG2E, entropy, mutual_information

LN2 = float(np.log(2.0))
ORTHOGONALITY_TOL = 1e-10
NEGATIVE_TOL = 1e-12


def uniform_reference(n_outputs):
    """Uniform reference output over ``n_outputs`` symbols."""
    if n_outputs < 1:
        raise ValidationError("reference output needs at least one symbol")
    return np.full(n_outputs, 1.0 / n_outputs)


@dataclass(frozen=True)
class Perturbation:
    """Normalized perturbation ``A`` of ``W0`` along reference output ``w0``.

    ``theta`` is the unnormalized perturbation ``A [sqrt(w0)]`` and ``rho``
    the smallest radius with ``|theta_ij| <= rho * w0_j``.
    """

    A: np.ndarray
    w0: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        w0 = check_reference(self.w0)
        if A.shape[1] != w0.size:
            raise ValidationError(f"A has {A.shape[1]} columns but w0 has {w0.size} entries")
        resid = np.max(np.abs(A @ np.sqrt(w0))) if A.size else 0.0
        if resid > ORTHOGONALITY_TOL * max(1.0, np.max(np.abs(A))):
            raise ValidationError(f"A sqrt(w0)^T must vanish, residual {resid:.3g}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "w0", w0)

    @property
    def theta(self):
        return self.A * np.sqrt(self.w0)

    @property
    def rho(self):
        return float(np.max(np.abs(self.theta) / self.w0))


@dataclass
class EitProblem:
    """Hypotheses, per-hypothesis leakage budgets (bits) and reference output.

    The first hypothesis is the distinguished one whose missed detection is
    minimized.
    """

    hypotheses: np.ndarray
    budgets: np.ndarray
    reference: np.ndarray = field(default_factory=lambda: uniform_reference(2))

    def __post_init__(self):
        P = check_hypotheses(self.hypotheses, interior=True)
        eps = np.asarray(self.budgets, dtype=float).ravel()
        if eps.size == 1:
            eps = np.full(P.shape[0], float(eps[0]))
        if eps.size != P.shape[0]:
            raise ValidationError(f"{eps.size} budgets for {P.shape[0]} hypotheses")
        if np.any(~np.isfinite(eps)) or np.any(eps < 0):
            raise ValidationError("budgets must be finite and nonnegative")
        H = np.array([entropy(p) for p in P])
        over = np.flatnonzero(eps > H + 1e-12)
        if over.size:
            k = over[0]
            raise BudgetExceedsEntropy(
                f"budget {eps[k]:.6g} bits exceeds H(p_{k + 1}) = {H[k]:.6g} bits"
            )
        self.hypotheses = P
        self.budgets = eps
        self.reference = check_reference(self.reference)

    @classmethod
    def from_fraction(cls, hypotheses, fraction, reference=None):
        """Equal budgets ``fraction * min_k H(p_k)`` for every hypothesis."""
        P = check_hypotheses(hypotheses, interior=True)
        eps = float(fraction) * min(entropy(p) for p in P)
        kwargs = {} if reference is None else {"reference": reference}
        return cls(P, np.full(P.shape[0], eps), **kwargs)

    @property
    def m(self):
        return self.hypotheses.shape[0]

    @property
    def M(self):
        return self.hypotheses.shape[1]

    @property
    def budgets_nats(self):
        return self.budgets * LN2

    @property
    def min_entropy(self):
        return min(entropy(p) for p in self.hypotheses)


def perfect_mechanism(w0, M):
    """Rank-one mechanism with ``M`` rows all equal to ``w0``; leaks nothing."""
    w0 = check_distribution(w0, "w0")
    if int(M) < 1:
        raise ValidationError("M must be positive")
    return np.tile(w0, (int(M), 1))


def assemble(w0, A):
    """Mechanism ``W'_ij = w0_j + A_ij sqrt(w0_j)``.

    Raises
    ------
    NegativeEntry
        If an entry falls below ``-1e-12``: the perturbation is too large
        for this reference output. No clipping is done beyond rounding noise.
    """
    pert = A if isinstance(A, Perturbation) else Perturbation(A, w0)
    w0 = pert.w0
    W = w0[None, :] + pert.theta
    worst = W.min()
    if worst < -NEGATIVE_TOL:
        i, j = np.unravel_index(np.argmin(W), W.shape)
        raise NegativeEntry(
            f"assembled W[{i},{j}] = {worst:.6g} < 0; shrink the budget or rescale A"
        )
    W = np.where(W < 0, 0.0, W)
    return W


def decompose(W, w0):
    """Inverse of :func:`assemble`: ``A = (W - W0) [w0^(-1/2)]``."""
    W = check_mechanism(W)
    w0 = check_reference(w0)
    if W.shape[1] != w0.size:
        raise ValidationError("W and w0 disagree on the output alphabet size")
    return (W - w0[None, :]) / np.sqrt(w0)[None, :]


def perturbation_radius(W, w0):
    """Smallest ``rho`` with ``|W_ij - w0_j| <= rho w0_j``."""
    W = np.asarray(W, dtype=float)
    w0 = check_reference(w0)
    return float(np.max(np.abs(W - w0[None, :]) / w0[None, :]))


def _A(A):
    return A.A if isinstance(A, Perturbation) else np.atleast_2d(np.asarray(A, dtype=float))


def approx_relative_entropy(pk, p1, A):
    """Quadratic surrogate ``0.5 ||(p_k - p_1) A||^2`` for ``D(p_k W || p_1 W)``, in bits."""
    d = np.asarray(pk, dtype=float) - np.asarray(p1, dtype=float)
    A = _A(A)
    if d.size != A.shape[0]:
        raise ValidationError("hypothesis length must match the rows of A")
    return float(0.5 * np.sum((d @ A) ** 2) * LOG2E)


def approx_mutual_information(pk, A):
    """Quadratic surrogate ``0.5 sum_i p_ki ||A_i||^2`` for ``I(p_k, W)``, in bits."""
    pk = np.asarray(pk, dtype=float)
    A = _A(A)
    if pk.size != A.shape[0]:
        raise ValidationError("hypothesis length must match the rows of A")
    return float(0.5 * np.dot(pk, np.sum(A * A, axis=1)) * LOG2E)


def leakages(hypotheses, W):
    """Exact ``I(p_k, W)`` for every hypothesis, in bits."""
    P = np.atleast_2d(np.asarray(hypotheses, dtype=float))
    return np.array([mutual_information(p, W) for p in P])


def effective_leakage(problem, W):
    """``max_k I(p_k, W)``: the leakage at which utilities are compared."""
    P = problem.hypotheses if isinstance(problem, EitProblem) else problem
    return float(np.max(leakages(P, W)))
