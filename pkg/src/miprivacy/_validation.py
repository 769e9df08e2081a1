"""Input validation helpers.

These mirror ``sklearn.utils.validation`` in spirit: every public entry point
funnels array-likes through one of them so the numerical code can assume
float64 arrays of the right shape.
"""

import numpy as np

from .exceptions import NotInterior, ValidationError

SIMPLEX_TOL = 1e-12


def check_distribution(p, name="p", interior=False, tol=SIMPLEX_TOL):
    """Return ``p`` as a 1-D float array on the probability simplex.

    Parameters
    ----------
    p : array-like
        Candidate probability vector.
    name : str
        Used in error messages.
    interior : bool
        Additionally require every entry to be strictly positive.
    tol : float
        Allowed deviation of ``sum(p)`` from one.
    """
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"{name} must be a non-empty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    if np.any(arr < 0):
        raise ValidationError(f"{name} has negative entries")
    if abs(arr.sum() - 1.0) > tol:
        raise ValidationError(f"{name} sums to {arr.sum():.15g}, not 1")
    if interior and np.any(arr <= 0):
        raise NotInterior(f"{name} must lie in the simplex interior")
    return arr


def is_interior(p):
    return bool(np.all(np.asarray(p) > 0))


def check_mechanism(W, name="W", tol=SIMPLEX_TOL):
    """Return ``W`` as a 2-D row-stochastic float array."""
    arr = np.asarray(W, dtype=float)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValidationError(f"{name} must be a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    if np.any(arr < 0):
        raise ValidationError(f"{name} has negative entries")
    sums = arr.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if bad.size:
        raise ValidationError(
            f"{name} row {bad[0]} sums to {sums[bad[0]]:.15g}; rows must sum to 1"
        )
    return arr


def check_reference(w0, name="w0"):
    """Return an interior reference output distribution."""
    return check_distribution(w0, name=name, interior=True)


def check_hypotheses(hypotheses, interior=True):
    """Return an ``(m, M)`` array of hypotheses, ``m >= 2``."""
    try:
        arr = np.asarray(hypotheses, dtype=float)
    except ValueError as exc:
        raise ValidationError("hypotheses must share one alphabet size") from exc
    if arr.ndim != 2:
        raise ValidationError("hypotheses must be a list of equal-length probability vectors")
    if arr.shape[0] < 2:
        raise ValidationError(f"need at least two hypotheses, got {arr.shape[0]}")
    for k, row in enumerate(arr):
        check_distribution(row, name=f"hypothesis {k + 1}", interior=interior)
    return arr
