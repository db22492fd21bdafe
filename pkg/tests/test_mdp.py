import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmdlab.exceptions import ValidationError
from pmdlab.instances import InstanceSpec, generate
from pmdlab.mdp import (
    Dmdp,
    induced_dynamics,
    mismatch_coefficient,
    performance_difference,
    policy_gradient,
    q_function,
    value_function,
    value_rho,
    visitation,
    visitation_matrix,
)
from pmdlab.solvers import value_iteration_oracle


def one_state(R, gamma):
    R = np.atleast_2d(np.asarray(R, dtype=float))
    return Dmdp(np.ones((1, R.shape[1], 1)), R, gamma)


def random_policy(rng, S, A):
    return rng.dirichlet(np.ones(A), size=S)


mdp_params = st.tuples(
    st.integers(1, 6), st.integers(1, 4), st.sampled_from([0.0, 0.5, 0.9, 0.99]),
    st.integers(0, 2**31 - 1),
)


def build(params):
    S, A, gamma, seed = params
    mdp = generate(InstanceSpec(num_states=S, num_actions=A, gamma=gamma, seed=seed))
    rng = np.random.default_rng(seed)
    return mdp, rng


class TestDmdp:
    def test_arrays_are_read_only(self, small_random):
        with pytest.raises(ValueError):
            small_random.transition[0, 0, 0] = 1.0

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            Dmdp(np.ones((2, 2, 3)), np.ones((2, 2)), 0.5)

    def test_equality(self, small_random):
        twin = Dmdp(small_random.transition.copy(), small_random.reward.copy(), 0.9)
        assert twin == small_random
        assert twin != Dmdp(small_random.transition, small_random.reward, 0.8)


class TestInducedDynamics:
    def test_single_action(self, small_random):
        P, R = small_random.transition[:, :1], small_random.reward[:, :1]
        mdp = Dmdp(P, R, 0.9)
        P_pi, r_pi = induced_dynamics(mdp, np.ones((4, 1)))
        np.testing.assert_array_equal(P_pi, P[:, 0])
        np.testing.assert_array_equal(r_pi, R[:, 0])

    def test_deterministic_policy_selects_rows(self, small_random):
        choice = np.array([2, 0, 1, 1])
        pi = np.eye(3)[choice]
        P_pi, _ = induced_dynamics(small_random, pi)
        for s, a in enumerate(choice):
            np.testing.assert_array_equal(P_pi[s], small_random.transition[s, a])

    def test_uniform_two_by_two_is_mean(self):
        mdp = generate(InstanceSpec(num_states=2, num_actions=2, seed=3))
        P_pi, r_pi = induced_dynamics(mdp, np.full((2, 2), 0.5))
        np.testing.assert_allclose(P_pi, mdp.transition.mean(axis=1), atol=1e-15)
        np.testing.assert_allclose(r_pi, mdp.reward.mean(axis=1), atol=1e-15)


class TestValueFunction:
    def test_geometric_series(self):
        np.testing.assert_allclose(value_function(one_state([[1.0]], 0.9), np.ones((1, 1))), [10.0])

    def test_zero_discount_is_reward(self, small_random):
        mdp = Dmdp(small_random.transition, small_random.reward, 0.0)
        pi = random_policy(np.random.default_rng(0), 4, 3)
        _, r_pi = induced_dynamics(mdp, pi)
        np.testing.assert_array_equal(value_function(mdp, pi), r_pi)

    def test_two_state_cycle(self, cycle_mdp):
        v = value_function(cycle_mdp, np.ones((2, 1)))
        np.testing.assert_allclose(v, [2 / 3, 4 / 3], atol=1e-15)
        np.testing.assert_allclose(value_iteration_oracle(cycle_mdp, 1e-12), v, atol=1e-12)

    def test_rejects_bad_policy(self, small_random):
        with pytest.raises(ValidationError):
            value_function(small_random, np.full((4, 3), 0.5))

    @settings(max_examples=40, deadline=None)
    @given(mdp_params)
    def test_bellman_residual_and_range(self, params):
        mdp, rng = build(params)
        pi = random_policy(rng, mdp.num_states, mdp.num_actions)
        v = value_function(mdp, pi)
        P_pi, r_pi = induced_dynamics(mdp, pi)
        assert np.max(np.abs(v - mdp.gamma * P_pi @ v - r_pi)) <= 1e-10
        assert v.min() >= -1e-9
        assert v.max() <= 1 / (1 - mdp.gamma) + 1e-9


class TestQFunction:
    def test_zero_discount(self, small_random):
        mdp = Dmdp(small_random.transition, small_random.reward, 0.0)
        np.testing.assert_array_equal(q_function(mdp, np.full((4, 3), 1 / 3)), mdp.reward)

    def test_one_state_two_actions(self):
        mdp = one_state([[0.0, 1.0]], 0.5)
        pi = np.array([[0.5, 0.5]])
        np.testing.assert_allclose(value_function(mdp, pi), [1.0])
        np.testing.assert_allclose(q_function(mdp, pi), [[0.5, 1.5]])

    @settings(max_examples=40, deadline=None)
    @given(mdp_params)
    def test_policy_average_of_q_is_v(self, params):
        mdp, rng = build(params)
        pi = random_policy(rng, mdp.num_states, mdp.num_actions)
        v = value_function(mdp, pi)
        Q = q_function(mdp, pi)
        assert np.max(np.abs(np.sum(pi * Q, axis=1) - v)) <= 1e-10


class TestVisitation:
    def test_zero_discount_is_rho(self, small_random):
        mdp = Dmdp(small_random.transition, small_random.reward, 0.0)
        rho = np.array([0.1, 0.2, 0.3, 0.4])
        np.testing.assert_allclose(visitation(mdp, np.full((4, 3), 1 / 3), rho), rho)

    def test_absorbing_state(self):
        P = np.zeros((3, 2, 3))
        P[:, :, 1] = 1.0
        mdp = Dmdp(P, np.zeros((3, 2)), 0.9)
        d = visitation(mdp, np.full((3, 2), 0.5), np.array([0.0, 1.0, 0.0]))
        np.testing.assert_allclose(d, [0, 1, 0], atol=1e-15)

    def test_cycle_against_power_series(self, cycle_mdp):
        d = visitation(cycle_mdp, np.ones((2, 1)), np.array([1.0, 0.0]))
        P = cycle_mdp.transition[:, 0]
        series = np.zeros(2)
        row = np.array([1.0, 0.0])
        for t in range(200):
            series += 0.5 * 0.5**t * row
            row = row @ P
        np.testing.assert_allclose(d, series, atol=1e-15)
        np.testing.assert_allclose(d, [2 / 3, 1 / 3], atol=1e-15)

    def test_matrix_rows_are_point_mass_visitations(self, small_random):
        pi = np.full((4, 3), 1 / 3)
        D = visitation_matrix(small_random, pi)
        for s in range(4):
            np.testing.assert_allclose(D[s], visitation(small_random, pi, np.eye(4)[s]), atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(mdp_params)
    def test_sums_to_one_and_dominates_rho(self, params):
        mdp, rng = build(params)
        S = mdp.num_states
        pi = random_policy(rng, S, mdp.num_actions)
        rho = rng.dirichlet(np.ones(S))
        d = visitation(mdp, pi, rho)
        assert abs(d.sum() - 1) <= 1e-10
        assert np.all(d >= (1 - mdp.gamma) * rho - 1e-12)


class TestGradient:
    def test_zero_discount(self, small_random):
        mdp = Dmdp(small_random.transition, small_random.reward, 0.0)
        mu = np.array([0.1, 0.2, 0.3, 0.4])
        g = policy_gradient(mdp, np.full((4, 3), 1 / 3), mu)
        np.testing.assert_allclose(g, mu[:, None] * mdp.reward, atol=1e-15)

    def test_one_state(self):
        g = policy_gradient(one_state([[0.0, 1.0]], 0.5), np.array([[0.5, 0.5]]), np.array([1.0]))
        np.testing.assert_allclose(g, [[1.0, 3.0]])

    def test_finite_differences_5x4(self):
        mdp = generate(InstanceSpec(num_states=5, num_actions=4, gamma=0.9, seed=11))
        rng = np.random.default_rng(11)
        mu = rng.dirichlet(np.ones(5))
        pi = 0.5 * random_policy(rng, 5, 4) + 0.125
        g = policy_gradient(mdp, pi, mu)
        h = 1e-6
        fd = np.zeros_like(pi)
        for s in range(5):
            for a in range(4):
                e = np.zeros_like(pi)
                e[s, a] = h
                fd[s, a] = (value_rho(mdp, pi + e, mu) - value_rho(mdp, pi - e, mu)) / (2 * h)
        assert np.max(np.abs(fd - g)) / np.max(np.abs(g)) <= 1e-5


class TestMismatch:
    def test_identical(self):
        assert mismatch_coefficient([0.3, 0.7], [0.3, 0.7]) == 1.0

    def test_direct_ratio(self):
        assert mismatch_coefficient([1.0, 0.0], [0.5, 0.5]) == 2.0

    def test_zero_over_zero_and_missing_support(self):
        assert mismatch_coefficient([1.0, 0.0], [1.0, 0.0]) == 1.0
        assert mismatch_coefficient([0.5, 0.5], [1.0, 0.0]) == np.inf

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 8), st.integers(0, 2**31 - 1))
    def test_uniform_denominator_bounded_by_size(self, S, seed):
        num = np.random.default_rng(seed).dirichlet(np.ones(S))
        assert mismatch_coefficient(num, np.full(S, 1 / S)) <= S + 1e-12
        assert mismatch_coefficient(np.eye(S)[0], np.full(S, 1 / S)) == pytest.approx(S)

    @settings(max_examples=30, deadline=None)
    @given(mdp_params)
    def test_visitation_mismatch_relation(self, params):
        mdp, rng = build(params)
        S, A = mdp.num_states, mdp.num_actions
        rho = rng.dirichlet(np.ones(S))
        mu = 0.5 * rng.dirichlet(np.ones(S)) + 0.5 / S
        pi, pi2 = random_policy(rng, S, A), random_policy(rng, S, A)
        d_rho = visitation(mdp, pi, rho)
        lhs = mismatch_coefficient(d_rho, visitation(mdp, pi2, mu))
        assert lhs <= mismatch_coefficient(d_rho, mu) / (1 - mdp.gamma) + 1e-9


class TestPerformanceDifference:
    def test_same_policy(self, small_random):
        pi = np.full((4, 3), 1 / 3)
        lhs, rhs = performance_difference(small_random, pi, pi, np.full(4, 0.25))
        assert lhs == 0.0 and rhs == 0.0

    def test_zero_discount(self, small_random):
        mdp = Dmdp(small_random.transition, small_random.reward, 0.0)
        rng = np.random.default_rng(4)
        pi, pt = random_policy(rng, 4, 3), random_policy(rng, 4, 3)
        rho = rng.dirichlet(np.ones(4))
        want = float(rho @ np.sum(mdp.reward * (pi - pt), axis=1))
        lhs, rhs = performance_difference(mdp, pi, pt, rho)
        assert lhs == pytest.approx(want, abs=1e-14)
        assert rhs == pytest.approx(want, abs=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(mdp_params)
    def test_identity(self, params):
        mdp, rng = build(params)
        S, A = mdp.num_states, mdp.num_actions
        lhs, rhs = performance_difference(
            mdp, random_policy(rng, S, A), random_policy(rng, S, A), rng.dirichlet(np.ones(S))
        )
        assert abs(lhs - rhs) <= 1e-9
