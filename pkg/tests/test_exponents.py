import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from miprivacy.exceptions import ValidationError
from miprivacy.exponents import (
    MAX_EXACT_N, exact_np_binary, mechanism_exponent_check, monte_carlo_np, wilson_interval,
)
from miprivacy.measures import relative_entropy

mp.mp.dps = 50


def mp_np_test(q1, q2, n, delta):
    """Neyman-Pearson by enumeration in high precision; returns (beta1, beta2)."""
    a, b = mp.mpf(q1[1]), mp.mpf(q2[1])
    pm1 = [mp.binomial(n, c) * a**c * (1 - a) ** (n - c) for c in range(n + 1)]
    pm2 = [mp.binomial(n, c) * b**c * (1 - b) ** (n - c) for c in range(n + 1)]
    # decide H1 on the counts least favourable to H2
    order = sorted(range(n + 1), key=lambda c: pm2[c] / pm1[c])
    delta = mp.mpf(delta)
    acc = mp.mpf(0)
    beta2 = mp.mpf(0)
    filled = False
    for c in order:
        if filled:
            beta2 += pm1[c]
            continue
        if acc + pm2[c] <= delta:
            acc += pm2[c]
            continue
        g = (delta - acc) / pm2[c]
        acc += g * pm2[c]
        beta2 += (1 - g) * pm1[c]
        filled = True
    return float(acc), float(beta2)


def strassen_log2_beta2(q1, q2, n, delta):
    """Normal approximation ``-nD + sqrt(nV) z_{1-delta}`` in bits."""
    q1, q2 = np.asarray(q1), np.asarray(q2)
    L = np.log(q2 / q1)
    D = q2 @ L
    V = q2 @ L**2 - D**2
    return (-n * D + np.sqrt(n * V) * norm.ppf(1 - delta)) / np.log(2)


class TestExact:
    @pytest.mark.parametrize("q1,q2,n,delta", [
        ((0.5, 0.5), (0.45, 0.55), 50, 0.05),
        ((0.5, 0.5), (0.45, 0.55), 200, 0.2),
        ((0.3, 0.7), (0.6, 0.4), 80, 0.1),
        ((0.9, 0.1), (0.8, 0.2), 120, 0.01),
        ((0.2, 0.8), (0.25, 0.75), 1, 0.5),
    ])
    def test_against_enumeration(self, q1, q2, n, delta):
        r = exact_np_binary(q1, q2, n, delta)
        b1, b2 = mp_np_test(q1, q2, n, delta)
        assert r.beta1 == pytest.approx(delta, abs=1e-12)
        assert b1 == pytest.approx(delta, abs=1e-15)
        assert r.beta2 == pytest.approx(b2, rel=1e-10)
        assert r.exponent == pytest.approx(-np.log2(b2) / n, rel=1e-10)

    def test_frozen_value(self):
        # frozen from mp_np_test
        r = exact_np_binary((0.5, 0.5), (0.45, 0.55), 200, 0.2)
        assert r.beta2 == pytest.approx(mp_np_test((0.5, 0.5), (0.45, 0.55), 200, 0.2)[1], rel=1e-12)

    def test_identical(self):
        r = exact_np_binary((0.3, 0.7), (0.3, 0.7), 1000, 0.05)
        assert r.beta2 == pytest.approx(0.95)
        assert r.exponent == pytest.approx(-np.log2(0.95) / 1000)

    def test_large_n_log_domain(self):
        r = exact_np_binary((0.5, 0.5), (0.3, 0.7), 100_000, 0.05)
        assert r.beta2 < 1e-300
        assert np.isfinite(r.log2_beta2)
        resid = r.log2_beta2 - strassen_log2_beta2((0.5, 0.5), (0.3, 0.7), 100_000, 0.05)
        assert abs(resid + 0.5 * np.log2(100_000)) < 3.0

    @pytest.mark.parametrize("delta", [0.05, 0.2])
    def test_stein_limit(self, delta):
        q1, q2 = (0.5, 0.5), (0.4, 0.6)
        D = relative_entropy(q2, q1)
        gaps = [abs(exact_np_binary(q1, q2, n, delta).exponent - D) / D for n in (1000, 10_000, 100_000)]
        assert gaps[2] < gaps[1] < gaps[0]
        # the gap shrinks like n^(-1/2), not faster
        assert 0.5 < gaps[1] / gaps[2] / np.sqrt(10) < 2.0

    @pytest.mark.parametrize("delta", [0.05, 0.2])
    @pytest.mark.parametrize("n", [1000, 10_000, 100_000])
    def test_second_order_expansion(self, n, delta):
        # -ln beta2 = nD - sqrt(nV) z_{1-delta} + 0.5 ln n + O(1)
        q1, q2 = (0.5, 0.5), (0.4, 0.6)
        r = exact_np_binary(q1, q2, n, delta)
        resid = (r.log2_beta2 - strassen_log2_beta2(q1, q2, n, delta)) * np.log(2)
        assert abs(resid + 0.5 * np.log(n)) < 1.5

    @pytest.mark.parametrize("name,frac", [("pair1", 0.2), ("pair2", 0.05), ("pair2", 0.2)])
    def test_designed_mechanisms_first_order_regime(self, name, frac):
        # with n D in the hundreds the relative gap is inside 0.15 at n = 1e4
        from miprivacy.design import design
        from miprivacy.mechanism import EitProblem
        P = {"pair1": [(0.55, 0.45), (0.95, 0.05)], "pair2": [(0.95, 0.05), (0.05, 0.95)]}[name]
        pr = EitProblem.from_fraction(P, frac)
        _, W, _ = design(pr)
        q1, q2 = pr.hypotheses @ W
        D = relative_entropy(q2, q1)
        for delta in (0.05, 0.2):
            assert abs(exact_np_binary(q1, q2, 10_000, delta).exponent - D) / D <= 0.15

    def test_symmetric_in_label(self):
        # swapping the symbol labels of both distributions changes nothing
        a = exact_np_binary((0.3, 0.7), (0.4, 0.6), 300, 0.1)
        b = exact_np_binary((0.7, 0.3), (0.6, 0.4), 300, 0.1)
        assert a.beta2 == pytest.approx(b.beta2, rel=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.integers(1, 400), st.floats(0.01, 0.5))
    def test_invariants(self, x, y, n, delta):
        r = exact_np_binary((1 - x, x), (1 - y, y), n, delta)
        assert r.beta1 == pytest.approx(delta, abs=1e-12)
        assert 0.0 <= r.beta2 <= 1.0 - delta + 1e-12
        assert r.exponent >= -1e-12

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.1, 0.9), st.floats(0.1, 0.9), st.integers(10, 200))
    def test_monotone_in_delta(self, x, y, n):
        lo = exact_np_binary((1 - x, x), (1 - y, y), n, 0.05).beta2
        hi = exact_np_binary((1 - x, x), (1 - y, y), n, 0.2).beta2
        assert hi <= lo + 1e-15

    @pytest.mark.parametrize("kw", [dict(n=0), dict(n=MAX_EXACT_N + 1), dict(delta=0.0), dict(delta=1.0)])
    def test_validation(self, kw):
        args = dict(q1=(0.5, 0.5), q2=(0.4, 0.6), n=10, delta=0.1)
        args.update(kw)
        with pytest.raises(ValidationError):
            exact_np_binary(**args)

    def test_needs_binary(self):
        with pytest.raises(ValidationError):
            exact_np_binary((0.2, 0.3, 0.5), (0.3, 0.3, 0.4), 10, 0.1)


class TestWilson:
    def test_known_value(self):
        # 0/10 successes: upper bound z^2 / (n + z^2)
        z = 1.959963984540054
        lo, hi = wilson_interval(0, 10)
        assert lo == 0.0
        assert hi == pytest.approx(z * z / (10 + z * z))

    def test_contains_estimate(self):
        lo, hi = wilson_interval(37, 100)
        assert lo < 0.37 < hi

    def test_no_trials(self):
        with pytest.raises(ValidationError):
            wilson_interval(0, 0)


class TestMonteCarlo:
    def test_agrees_with_exact(self):
        q1, q2 = np.array([0.5, 0.5]), np.array([0.4, 0.6])
        ex = exact_np_binary(q1, q2, 100, 0.2)
        mc = monte_carlo_np(q1, q2, 100, 0.2, seed=3, trials=20_000)
        lo, hi = mc.ci
        # the threshold itself is estimated, allow a little slack beyond the interval
        assert lo - 0.02 <= ex.beta2 <= hi + 0.02
        assert mc.method == "monte-carlo"

    def test_deterministic(self):
        q1, q2 = [0.3, 0.3, 0.4], [0.35, 0.3, 0.35]
        a = monte_carlo_np(q1, q2, 500, 0.1, seed=7, trials=500)
        b = monte_carlo_np(q1, q2, 500, 0.1, seed=7, trials=500)
        assert a == b

    def test_mechanism_dispatch(self):
        W2 = np.array([[0.6, 0.4], [0.4, 0.6]])
        assert mechanism_exponent_check([0.5, 0.5], [0.4, 0.6], W2, 100, 0.1).method == "exact"
        W3 = np.array([[0.5, 0.3, 0.2], [0.2, 0.3, 0.5]])
        r = mechanism_exponent_check([0.5, 0.5], [0.4, 0.6], W3, 100, 0.1, seed=1, trials=200)
        assert r.method == "monte-carlo" and r.trials == 200
