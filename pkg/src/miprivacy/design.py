"""Dispatch a problem to the right designer."""

from .binary import solve_binary
from .mary import design_mary, solve_binary_source_mary


def design(problem):
    """Return ``(solution, mechanism, method)`` for an :class:`EitProblem`.

    Two hypotheses use the closed form, Bernoulli hypotheses the collinear
    shortcut, anything else the lifted SDP with reconstruction.
    """
    if problem.m == 2:
        sol = solve_binary(problem)
        return sol, sol.mechanism, "closed-form"
    if problem.M == 2:
        sol = solve_binary_source_mary(problem)
        return sol, sol.mechanism, "collinear"
    sol, W = design_mary(problem)
    return sol, W, "sdp"
