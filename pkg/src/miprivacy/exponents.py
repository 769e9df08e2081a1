"""Finite-sample Neyman-Pearson errors for i.i.d. observations.

Convention: ``beta1 = P_{q2}(decide H1)`` is held at ``delta`` and
``beta2 = P_{q1}(decide H2)`` is minimized, so that
``-log2(beta2) / n -> D(q2 || q1)``.

For binary outputs the sufficient statistic is the count of the second
symbol, binomial under both hypotheses, and the log-likelihood ratio is
affine in it. The optimal test is a randomized threshold on the count,
randomized at a single boundary count so that ``beta1 = delta`` exactly.
Tail probabilities are accumulated in the log domain.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from scipy.stats import binom

from ._validation import check_distribution, check_mechanism
from .exceptions import ValidationError
from .measures import LOG2E

MAX_EXACT_N = 100_000
DEFAULT_TRIALS = 4000


@dataclass
class TestResult:
    """Outcome of one Neyman-Pearson computation.

    ``exponent`` is ``-log2(beta2) / n`` in bits per sample. Monte Carlo
    results carry a Wilson interval ``ci`` for ``beta2``; exact ones do not.
    """

    __test__ = False  # not a pytest class

    n: int
    delta: float
    beta2: float
    exponent: float
    beta1: float
    log2_beta2: float
    method: str = "exact"
    ci: tuple | None = None
    trials: int = 0


def _check_delta(delta):
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise ValidationError(f"delta must lie in (0, 1), got {delta}")
    return delta


def exact_np_binary(q1, q2, n, delta):
    """Exact optimal missed-detection probability for binary observations.

    Parameters
    ----------
    q1, q2 : array_like, shape (2,)
        Interior output distributions under H1 and H2.
    n : int
        Number of i.i.d. samples, at most ``1e5``.
    delta : float
        Bound on ``beta1 = P_{q2}(decide H1)``.

    Returns
    -------
    TestResult
    """
    q1 = check_distribution(q1, "q1", interior=True)
    q2 = check_distribution(q2, "q2", interior=True)
    if q1.size != 2 or q2.size != 2:
        raise ValidationError("exact_np_binary needs binary distributions")
    n = int(n)
    if not 1 <= n <= MAX_EXACT_N:
        raise ValidationError(f"n must lie in [1, {MAX_EXACT_N}], got {n}")
    delta = _check_delta(delta)

    c = np.arange(n + 1)
    slope = np.log(q2[1]) - np.log(q1[1]) - np.log(q2[0]) + np.log(q1[0])
    if slope == 0.0:
        # identical hypotheses: any test has beta1 + beta2 = 1
        log_b2 = np.log1p(-delta)
        return TestResult(n, delta, float(np.exp(log_b2)), float(-log_b2 * LOG2E / n), delta,
                          float(log_b2 * LOG2E))
    # counts sorted by increasing likelihood ratio q2/q1
    order = c if slope > 0 else c[::-1]
    lp1 = binom.logpmf(order, n, q1[1])
    lp2 = binom.logpmf(order, n, q2[1])
    log_cum2 = np.logaddexp.accumulate(lp2)
    log_delta = np.log(delta)
    # H1 region: the longest prefix with q2-mass <= delta, plus part of the next count
    k = int(np.searchsorted(log_cum2, log_delta, side="right"))
    mass_before = np.exp(log_cum2[k - 1]) if k > 0 else 0.0
    gamma = (delta - mass_before) / np.exp(lp2[k]) if k <= n else 0.0
    gamma = float(min(max(gamma, 0.0), 1.0))
    parts = []
    if k + 1 <= n:
        parts.append(logsumexp(lp1[k + 1:]))
    if k <= n and gamma < 1.0:
        parts.append(lp1[k] + np.log1p(-gamma))
    log_b2 = float(logsumexp(parts)) if parts else -np.inf
    beta1 = mass_before + (gamma * np.exp(lp2[k]) if k <= n else 0.0)
    log2_b2 = log_b2 * LOG2E
    return TestResult(n, delta, float(np.exp(log_b2)), float(-log2_b2 / n), float(beta1), float(log2_b2))


def wilson_interval(successes, trials, z=1.959963984540054):
    """Wilson score interval for a binomial proportion (95% by default)."""
    if trials <= 0:
        raise ValidationError("need at least one trial")
    p = successes / trials
    den = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / den
    half = z * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    return float(max(0.0, centre - half)), float(min(1.0, centre + half))


def monte_carlo_np(q1, q2, n, delta, seed, trials=DEFAULT_TRIALS):
    """Simulated Neyman-Pearson test for any output alphabet.

    The threshold is the empirical ``delta``-quantile of the log-likelihood
    ratio under ``q2`` (with randomization on ties); ``beta2`` is the
    fraction of ``q1`` samples that reach it. Exponentially small ``beta2``
    cannot be resolved this way, so the interval matters more than the
    point value.
    """
    q1 = check_distribution(q1, "q1", interior=True)
    q2 = check_distribution(q2, "q2", interior=True)
    delta = _check_delta(delta)
    rng = np.random.default_rng(seed)
    llr_w = np.log(q2) - np.log(q1)
    s2 = rng.multinomial(n, q2, size=trials) @ llr_w
    s1 = rng.multinomial(n, q1, size=trials) @ llr_w
    s2.sort()
    # decide H1 below tau, randomize at tau so the empirical beta1 is delta
    k = int(np.floor(delta * trials))
    tau = s2[min(k, trials - 1)]
    below = np.sum(s2 < tau)
    at = np.sum(s2 == tau)
    gamma = (delta * trials - below) / at if at else 0.0
    gamma = min(max(gamma, 0.0), 1.0)
    hits = np.sum(s1 > tau) + (1.0 - gamma) * np.sum(s1 == tau)
    beta2 = float(hits / trials)
    lo, hi = wilson_interval(hits, trials)
    log2_b2 = np.log2(beta2) if beta2 > 0 else -np.inf
    exponent = float(-log2_b2 / n) if beta2 > 0 else float("inf")
    return TestResult(int(n), delta, beta2, exponent, delta, float(log2_b2), "monte-carlo", (lo, hi), trials)


def mechanism_exponent_check(p1, p2, W, n, delta, seed=0, trials=DEFAULT_TRIALS):
    """Test ``p2 W`` against ``p1 W``: exact for two outputs, simulated otherwise."""
    W = check_mechanism(W)
    p1 = check_distribution(p1, "p1")
    p2 = check_distribution(p2, "p2")
    q1, q2 = p1 @ W, p2 @ W
    if W.shape[1] == 2:
        return exact_np_binary(q1, q2, n, delta)
    return monte_carlo_np(q1, q2, n, delta, seed, trials)
