"""scikit-learn style wrapper around the mechanism designers.

``fit`` takes the hypothesis matrix (one distribution per row, the
distinguished hypothesis first) and designs a mechanism; ``transform`` pushes
source symbols through it.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted

from ._validation import check_hypotheses
from .design import design
from .exceptions import ValidationError
from .mechanism import EitProblem, effective_leakage, leakages
from .measures import relative_entropy


class EITMechanism(BaseEstimator):
    """Leakage-constrained randomizer for hypothesis testing.

    Parameters
    ----------
    budget_fraction : float, default=1e-3
        Equal budgets ``budget_fraction * min_k H(p_k)`` (bits). Ignored
        when ``budgets`` is given.
    budgets : array_like of shape (m,), optional
        Explicit per-hypothesis budgets in bits.
    reference : array_like, optional
        Reference output distribution; uniform over two symbols by default.
        Only used by the closed-form designers.
    random_state : int, RandomState or None
        Seed for :meth:`transform`.

    Attributes
    ----------
    mechanism_ : ndarray of shape (M, N)
    method_ : str
        ``"closed-form"``, ``"collinear"`` or ``"sdp"``.
    solution_ : BinarySolution or SdpSolution
    leakages_ : ndarray of shape (m,)
        Exact ``I(p_k, W)`` in bits.
    effective_leakage_ : float
    utility_ : float
        Exact ``min_k D(p_k W || p_1 W)`` in bits.
    """

    def __init__(self, budget_fraction=1e-3, budgets=None, reference=None, random_state=None):
        self.budget_fraction = budget_fraction
        self.budgets = budgets
        self.reference = reference
        self.random_state = random_state

    def _problem(self, P):
        kw = {} if self.reference is None else {"reference": np.asarray(self.reference, dtype=float)}
        if self.budgets is not None:
            return EitProblem(P, np.asarray(self.budgets, dtype=float), **kw)
        f = float(self.budget_fraction)
        if not 0.0 <= f <= 1.0:
            raise ValidationError(f"budget_fraction must lie in [0, 1], got {f}")
        return EitProblem.from_fraction(P, f, **kw)

    def fit(self, X, y=None):
        """Design the mechanism for hypotheses ``X`` of shape (m, M)."""
        P = check_hypotheses(X, interior=True)
        problem = self._problem(P)
        sol, W, method = design(problem)
        self.problem_ = problem
        self.solution_ = sol
        self.mechanism_ = W
        self.method_ = method
        self.leakages_ = leakages(P, W)
        self.effective_leakage_ = effective_leakage(P, W)
        out = P @ W
        self.utility_ = float(min(relative_entropy(o, out[0]) for o in out[1:]))
        self.n_inputs_, self.n_outputs_ = W.shape
        return self

    def transform(self, X):
        """Randomize integer symbols ``X`` in ``[0, M)`` through the mechanism.

        Returns an integer array of the same shape with output symbols.
        """
        check_is_fitted(self, "mechanism_")
        X = np.asarray(X)
        if X.size and (not np.issubdtype(X.dtype, np.integer) or X.min() < 0 or X.max() >= self.n_inputs_):
            raise ValidationError(f"symbols must be integers in [0, {self.n_inputs_})")
        rng = check_random_state(self.random_state)
        flat = X.ravel()
        cdf = np.cumsum(self.mechanism_, axis=1)
        u = rng.random_sample(flat.size)
        out = (u[:, None] >= cdf[flat]).sum(axis=1)
        out = np.minimum(out, self.n_outputs_ - 1)
        return out.reshape(X.shape)

    def output_distributions(self):
        """``p_k W`` for every fitted hypothesis."""
        check_is_fitted(self, "mechanism_")
        return self.problem_.hypotheses @ self.mechanism_
