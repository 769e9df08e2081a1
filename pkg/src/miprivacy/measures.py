"""Information measures in bits.

All divergences are evaluated term-wise with ``0 log 0 = 0``. Relative entropy
and mutual information use the nonnegative ``q * phi(p/q - 1)`` form, with
``phi(u) = (1+u) log(1+u) - u``, so that values near zero (the high privacy
regime) keep full relative precision instead of cancelling.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_distribution, check_mechanism
from .exceptions import AbsoluteContinuityViolated, ValidationError

LOG2E = 1.0 / np.log(2.0)
KAPPA_ONE_WINDOW = 1e-6


@dataclass(frozen=True)
class RenyiOrder:
    """Order ``alpha`` in (0, 1) of a Rényi or Hellinger divergence.

    ``beta = alpha / (1 - alpha)`` is the weight on the false-alarm exponent
    in the Lagrangian form of the two-exponent trade-off.
    """

    alpha: float

    def __post_init__(self):
        if not 0.0 < float(self.alpha) < 1.0:
            raise ValidationError(f"Renyi order must lie in (0, 1), got {self.alpha}")

    @property
    def beta(self):
        return self.alpha / (1.0 - self.alpha)

    @classmethod
    def from_beta(cls, beta):
        if beta <= 0:
            raise ValidationError(f"beta must be positive, got {beta}")
        return cls(beta / (1.0 + beta))


def _alpha(order):
    if isinstance(order, RenyiOrder):
        return float(order.alpha)
    return RenyiOrder(float(order)).alpha


def _pair(p, q):
    p = check_distribution(p, "p")
    q = check_distribution(q, "q")
    if p.shape != q.shape:
        raise ValidationError(f"dimension mismatch: {p.size} vs {q.size}")
    if np.any((q == 0) & (p > 0)):
        raise AbsoluteContinuityViolated("p puts mass where q has none")
    return p, q


def _phi(u):
    """``(1+u) log(1+u) - u`` for ``u >= -1``, accurate near ``u = 0``."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    small = np.abs(u) < 1e-3
    us = u[small]
    # alternating series sum_{k>=2} (-1)^k u^k / (k (k-1))
    acc = np.zeros_like(us)
    power = us * us
    for k in range(2, 9):
        acc += (-1) ** k * power / (k * (k - 1))
        power = power * us
    out[small] = acc
    ub = u[~small]
    with np.errstate(divide="ignore", invalid="ignore"):
        big = (1.0 + ub) * np.log1p(ub) - ub
    big = np.where(ub == -1.0, 1.0, big)
    out[~small] = big
    return out


def _kl_nats(p, q):
    """Relative entropy in nats for already-validated arrays (last axis)."""
    mask = q > 0
    u = np.where(mask, (p - q) / np.where(mask, q, 1.0), 0.0)
    return np.sum(np.where(mask, q * _phi(u), 0.0), axis=-1)


def entropy(p):
    """Shannon entropy ``H(p)`` in bits."""
    p = check_distribution(p)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)))


def relative_entropy(p, q):
    """Relative entropy ``D(p || q)`` in bits.

    Raises
    ------
    AbsoluteContinuityViolated
        If some ``p_i > 0`` has ``q_i = 0``.
    """
    p, q = _pair(p, q)
    return float(_kl_nats(p, q) * LOG2E)


def mutual_information(p, W):
    """Mutual information ``I(p, W)`` in bits between input ``p`` and channel output."""
    p = check_distribution(p)
    W = check_mechanism(W)
    if W.shape[0] != p.size:
        raise ValidationError(f"W has {W.shape[0]} rows but p has {p.size} entries")
    out = p @ W
    rows = _kl_nats(W, np.broadcast_to(out, W.shape))
    return float(np.dot(p, rows) * LOG2E)


def hellinger_divergence(p, q, order):
    """Order-``alpha`` Hellinger divergence ``(sum p^a q^(1-a) - 1) / (a - 1)``.

    This is the f-divergence with ``f(t) = (t^a - 1)/(a - 1)``; it is
    dimensionless (no logarithm involved).
    """
    a = _alpha(order)
    p, q = _pair(p, q)
    mask = q > 0
    # log r via log1p of the relative difference keeps precision for p close to q
    u = np.where(mask, (p - q) / np.where(mask, q, 1.0), 0.0)
    with np.errstate(divide="ignore"):
        logr = np.log1p(u)
    # q_i (r_i^a - 1 - a u_i): the linear part sums to zero on the simplex and
    # would otherwise inject rounding of order 1e-16 when p is close to q
    terms = np.where(mask, q * (np.expm1(a * logr) - a * u), 0.0)
    return float(np.sum(terms) / (a - 1.0))


def renyi_divergence(p, q, order):
    """Order-``alpha`` Rényi divergence ``D_alpha(p || q)`` in bits, ``alpha`` in (0, 1)."""
    a = _alpha(order)
    h = hellinger_divergence(p, q, a)
    return float(np.log1p((a - 1.0) * h) / (a - 1.0) * LOG2E)


def chi_squared_divergence(p, q):
    """Half-scaled chi-squared divergence ``0.5 * sum (p_i - q_i)^2 / q_i``.

    ``q`` must be interior. The half scaling makes this the second-order
    term of ``D(p || q)`` in nats.
    """
    p = check_distribution(p, "p")
    q = check_distribution(q, "q", interior=True)
    if p.shape != q.shape:
        raise ValidationError(f"dimension mismatch: {p.size} vs {q.size}")
    return float(0.5 * np.sum((p - q) ** 2 / q))


def kappa(alpha, t):
    """Bound function sandwiching ``D / H_alpha`` (result in bits).

    ``kappa(t) = (1-a) (t log t + (1-t) log e) / (1 - t^a + a t - a)`` with
    the continuous extensions ``kappa(0) = log e`` and ``kappa(1) = log e / a``.
    Within ``1e-6`` of ``t = 1`` the limit value is returned.
    """
    a = _alpha(alpha)
    t = float(t)
    if t < 0:
        raise ValidationError(f"kappa needs t >= 0, got {t}")
    if t == 0.0:
        return float(LOG2E)
    if abs(t - 1.0) < KAPPA_ONE_WINDOW:
        return float(LOG2E / a)
    h = t - 1.0
    # both terms vanish to second order at t = 1; expand there
    num = (1.0 - a) * float(_phi(np.array([h]))[0]) * LOG2E
    if abs(h) < 1e-2:
        den, coef, power = 0.0, a * (a - 1.0) / 2.0, h * h
        for k in range(2, 14):
            den -= coef * power
            coef *= (a - k) / (k + 1)
            power *= h
    else:
        den = 1.0 - t**a + a * t - a
    return float(num / den)


def likelihood_ratio_bounds(p, q):
    """Return ``(beta1, beta2)`` with ``beta2 <= p_i/q_i <= 1/beta1``.

    ``beta1 = 1 / max_i p_i/q_i`` and ``beta2 = 1 / max_i q_i/p_i``. Both
    arguments must be interior.
    """
    p = check_distribution(p, "p", interior=True)
    q = check_distribution(q, "q", interior=True)
    return float(1.0 / np.max(p / q)), float(1.0 / np.max(q / p))


def kappa_sandwich(p, q, order):
    """Return ``(lower, ratio, upper)`` for ``ratio = D(p||q) / H_alpha(p||q)``."""
    a = _alpha(order)
    beta1, beta2 = likelihood_ratio_bounds(p, q)
    ratio = relative_entropy(p, q) / hellinger_divergence(p, q, a)
    return kappa(a, beta2), ratio, kappa(a, 1.0 / beta1)


def renyi_kl_ratio(p, q, order):
    """``(1-a) D(p||q) / (2^((1-a) D_a(p||q)) - 1)``; tends to ``log2(e)/a`` as ``p -> q``."""
    a = _alpha(order)
    d = relative_entropy(p, q)
    da = renyi_divergence(p, q, a)
    den = np.expm1((1.0 - a) * da * np.log(2.0))
    if den == 0.0:
        return float("nan")
    return float((1.0 - a) * d / den)
