import numpy as np
import pytest

from gchp.errors import SingularFundamentalMatrix
from gchp.hawkes import HawkesParams
from gchp.limits import compute_limit_params
from gchp.states import (
    StateKind,
    StateSpace,
    StationaryDistribution,
    TransitionMatrix,
    simulate_chain,
    space_from_values,
    stationary_distribution,
)


def tm(P):
    P = np.asarray(P, dtype=float)
    return TransitionMatrix(P=P, counts=np.zeros_like(P))


def expanded_v(a, P, pi):
    """Independent oracle: the three-term variance formula, looped."""
    a_star = float(np.dot(pi, a))
    b = a - a_star
    n = len(a)
    system = P + np.tile(pi, (n, 1)) - np.eye(n)
    g = np.linalg.solve(system, b)
    v = np.zeros(n)
    for i in range(n):
        s1 = sum((g[j] - g[i]) ** 2 * P[i, j] for j in range(n))
        s2 = sum((g[j] - g[i]) * P[i, j] for j in range(n))
        v[i] = b[i] ** 2 + s1 - 2 * b[i] * s2
    return a_star, b, g, v


class TestHandCases:
    def test_symmetric_two_state(self):
        delta = 0.005
        space = space_from_values([delta, -delta], tick=0.01)
        P = tm([[0.5, 0.5], [0.5, 0.5]])
        pi = stationary_distribution(P)
        hk = HawkesParams(1.0, 0.5, 1.0)
        lim = compute_limit_params(space, P, pi, hk)
        assert lim.a_star == pytest.approx(0.0, abs=1e-15)
        np.testing.assert_allclose(lim.b, [delta, -delta], atol=1e-15)
        np.testing.assert_allclose(lim.g, [-delta, delta], atol=1e-15)
        np.testing.assert_allclose(lim.v, [delta**2, delta**2], atol=1e-18)
        assert lim.sigma_sq == pytest.approx(delta**2, abs=1e-18)
        # rate factor lambda/(1-mu) = 2
        assert lim.sigma_star == pytest.approx(delta * np.sqrt(2.0), abs=1e-15)
        assert lim.sigma_bar == pytest.approx(lim.sigma_star, abs=1e-15)

    def test_single_state_collapse(self):
        c = 0.007
        space = StateSpace(kind=StateKind.NSDO, values=np.array([c]), tick=0.01,
                           pos_edges=np.array([]), neg_edges=np.array([]),
                           pos_cell_to_state=np.array([0]),
                           neg_cell_to_state=np.array([0]))
        P = tm([[1.0]])
        pi = StationaryDistribution(pi=np.array([1.0]))
        hk = HawkesParams(2.0, 0.3, 1.0)
        lim = compute_limit_params(space, P, pi, hk)
        assert lim.a_star == pytest.approx(c)
        np.testing.assert_allclose(lim.b, [0.0], atol=1e-18)
        np.testing.assert_allclose(lim.g, [0.0], atol=1e-18)
        np.testing.assert_allclose(lim.v, [0.0], atol=1e-18)
        assert lim.sigma_star == 0.0
        mu = 0.3
        assert lim.sigma_bar == pytest.approx(c * np.sqrt(2.0 / (1 - mu) ** 3), rel=1e-12)


class TestAgainstExpandedForm:
    def test_randomized(self):
        rng = np.random.default_rng(3)
        for _ in range(40):
            n = int(rng.integers(2, 6))
            n_down = n // 2
            vals = np.sort(np.concatenate([
                rng.uniform(0.002, 0.05, size=max(n - n_down, 1)),
                -rng.uniform(0.002, 0.05, size=n_down),
            ]))[::-1]
            vals = np.unique(vals)[::-1]
            space = space_from_values(vals, tick=0.01)
            P = rng.uniform(0.05, 1.0, size=(vals.size, vals.size))
            P /= P.sum(axis=1, keepdims=True)
            P = tm(P)
            pi = stationary_distribution(P)
            hk = HawkesParams(1.0, 0.4, 1.0)
            lim = compute_limit_params(space, P, pi, hk)
            a_star, b, g, v = expanded_v(vals, P.P, pi.pi)
            assert lim.a_star == pytest.approx(a_star, rel=1e-12)
            np.testing.assert_allclose(lim.b, b, atol=1e-15)
            np.testing.assert_allclose(lim.g, g, atol=1e-12)
            np.testing.assert_allclose(lim.v, v, atol=1e-15)
            # b is centered and v nonnegative
            assert abs(np.dot(pi.pi, lim.b)) < 1e-10
            assert np.all(lim.v >= 0)


class TestMonteCarloOracle:
    def test_three_state_long_run_variance(self):
        rng = np.random.default_rng(17)
        hk = HawkesParams(1.0, 0.0, 1.0)
        for case in range(3):
            vals = np.array([0.01, 0.005, -0.005]) * (1 + case * 0.3)
            vals[2] -= 0.001 * case
            space = space_from_values(vals, tick=0.001)
            P = rng.uniform(0.1, 1.0, size=(3, 3))
            P /= P.sum(axis=1, keepdims=True)
            P = tm(P)
            pi = stationary_distribution(P)
            lim = compute_limit_params(space, P, pi, hk)

            steps = 10**7
            block = 1000
            chain = simulate_chain(P, initial=0, k=steps, seed=100 + case)
            increments = lim.b[chain]
            sums = increments.reshape(steps // block, block).sum(axis=1)
            mc_sigma_sq = sums.var(ddof=1) / block
            assert mc_sigma_sq == pytest.approx(lim.sigma_sq, rel=0.03)


class TestIdentities:
    def test_appendix_two_state_drift(self):
        # +1/-1 state chain: drift per event equals 2*pi_up - 1
        rng = np.random.default_rng(23)
        space = space_from_values([1.0, -1.0], tick=2.0)
        hk = HawkesParams(1.0, 0.5, 1.0)
        for _ in range(200):
            p, q = rng.uniform(0.05, 0.95, size=2)
            P = tm([[1 - p, p], [q, 1 - q]])
            pi = stationary_distribution(P)
            lim = compute_limit_params(space, P, pi, hk)
            assert lim.a_star == pytest.approx(2 * pi.pi[0] - 1, abs=1e-12)

    def test_shift_covariance(self):
        space = space_from_values([0.01, 0.005, -0.005, -0.02], tick=0.01)
        P = tm([[0.1, 0.2, 0.3, 0.4],
                [0.25, 0.25, 0.25, 0.25],
                [0.4, 0.3, 0.2, 0.1],
                [0.3, 0.3, 0.2, 0.2]])
        pi = stationary_distribution(P)
        hk = HawkesParams(1.0, 0.2, 0.8)
        base = compute_limit_params(space, P, pi, hk)
        c = 0.003
        shifted = space_from_values(space.values + c, tick=0.01)
        lim = compute_limit_params(shifted, P, pi, hk)
        assert lim.a_star == pytest.approx(base.a_star + c, rel=1e-12)
        np.testing.assert_allclose(lim.b, base.b, atol=1e-14)
        np.testing.assert_allclose(lim.g, base.g, atol=1e-12)
        np.testing.assert_allclose(lim.v, base.v, atol=1e-15)
        assert lim.sigma_sq == pytest.approx(base.sigma_sq, rel=1e-12)

    def test_scale_covariance(self):
        space = space_from_values([0.01, -0.005], tick=0.01)
        P = tm([[0.7, 0.3], [0.4, 0.6]])
        pi = stationary_distribution(P)
        hk = HawkesParams(1.0, 0.2, 0.8)
        base = compute_limit_params(space, P, pi, hk)
        s = 3.0
        scaled = compute_limit_params(space_from_values(space.values * s, tick=0.01),
                                      P, pi, hk)
        assert scaled.a_star == pytest.approx(s * base.a_star, rel=1e-12)
        np.testing.assert_allclose(scaled.b, s * base.b, rtol=1e-12)
        np.testing.assert_allclose(scaled.g, s * base.g, rtol=1e-12)
        assert scaled.sigma_sq == pytest.approx(s**2 * base.sigma_sq, rel=1e-12)

    def test_sigma_star_increases_with_branching(self):
        space = space_from_values([0.005, -0.005], tick=0.01)
        P = tm([[0.5, 0.5], [0.5, 0.5]])
        pi = stationary_distribution(P)
        prev = -1.0
        for mu in np.linspace(0.0, 0.95, 12):
            hk = HawkesParams(1.0, mu * 1.0, 1.0)
            lim = compute_limit_params(space, P, pi, hk)
            assert lim.sigma_star > prev
            prev = lim.sigma_star

    def test_sigma_bar_decomposition(self):
        space = space_from_values([0.01, -0.005], tick=0.01)
        P = tm([[0.7, 0.3], [0.4, 0.6]])
        pi = stationary_distribution(P)
        hk = HawkesParams(1.3, 0.5, 1.0)
        lim = compute_limit_params(space, P, pi, hk)
        mu = 0.5
        expected = lim.a_star**2 * 1.3 / (1 - mu) ** 3
        assert lim.sigma_bar**2 - lim.sigma_star**2 == pytest.approx(expected, rel=1e-12)
        assert lim.sigma_bar >= lim.sigma_star >= 0


class TestErrors:
    def test_singular_chain_reported(self):
        # two disconnected states: pi exists (hand-made) but the system is singular
        space = space_from_values([0.005, -0.005], tick=0.01)
        P = tm(np.eye(2))
        pi = StationaryDistribution(pi=np.array([0.5, 0.5]))
        with pytest.raises(SingularFundamentalMatrix):
            compute_limit_params(space, P, pi, HawkesParams(1.0, 0.0, 1.0))
