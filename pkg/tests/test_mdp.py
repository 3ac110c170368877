import json

import numpy as np
import pytest

from rewardspace import (
    ConfigurationError,
    Mdp,
    Policy,
    QFunction,
    ValidationError,
    bellman_backup,
    boltzmann_probs,
    greedy_policy,
    q_from_values,
    sample_trajectory,
    value_iteration,
)
from rewardspace.environments import SecretarySpec, build_secretary_mdp

from conftest import random_mdp, two_state_chain


def self_loop_mdp(reward=1.0, discount=0.9):
    return Mdp(1, 1, np.ones((1, 1, 1)), discount, reward=np.array([reward]))


class TestValueIteration:
    def test_geometric_series_self_loop(self):
        vf = value_iteration(self_loop_mdp(), tolerance=1e-7)
        assert vf.converged
        assert vf.values[0] == pytest.approx(10.0, abs=1e-6)

    def test_zero_reward_gives_zero_values(self, rng):
        mdp = random_mdp(rng).with_reward(np.zeros(4))
        vf = value_iteration(mdp, tolerance=1e-8)
        np.testing.assert_allclose(vf.values, 0.0, atol=1e-12)

    def test_two_state_chain_against_linear_solve(self):
        mdp = two_state_chain()
        # single action, so V solves (I - gamma P) V = R exactly
        oracle = np.linalg.solve(np.eye(2) - 0.5 * mdp.transitions[0], mdp.reward)
        np.testing.assert_allclose(oracle, [1.0, 2.0], atol=1e-12)
        vf = value_iteration(mdp, tolerance=1e-9)
        np.testing.assert_allclose(vf.values, [1.0, 2.0], atol=1e-8)

    def test_bellman_residual_within_tolerance_random(self, rng):
        for _ in range(10):
            mdp = random_mdp(rng, num_states=5, num_actions=3, discount=0.9)
            tolerance = 1e-5
            vf = value_iteration(mdp, tolerance=tolerance)
            backed, _ = bellman_backup(mdp, vf.values)
            assert np.abs(backed - vf.values).max() <= tolerance

    def test_monotone_iterates_from_lower_bound(self, rng):
        mdp = random_mdp(rng, num_states=6, num_actions=2, discount=0.8)
        values = np.full(6, mdp.reward.min() / (1.0 - mdp.discount))
        for _ in range(50):
            new_values, _ = bellman_backup(mdp, values)
            assert (new_values >= values - 1e-12).all()
            values = new_values

    def test_missing_reward_is_configuration_error(self, rng):
        mdp = random_mdp(rng).without_reward()
        with pytest.raises(ConfigurationError):
            value_iteration(mdp)

    def test_max_iters_reported(self):
        vf = value_iteration(self_loop_mdp(), tolerance=1e-12, max_iters=3)
        assert not vf.converged
        assert vf.iterations == 3


class TestMdpValidation:
    def test_non_stochastic_rows_rejected(self):
        bad = np.ones((1, 2, 2))
        with pytest.raises(ValidationError):
            Mdp(2, 1, bad, 0.9)

    def test_negative_probability_rejected(self):
        bad = np.array([[[1.5, -0.5], [0.0, 1.0]]])
        with pytest.raises(ValidationError):
            Mdp(2, 1, bad, 0.9)

    def test_discount_out_of_range(self):
        with pytest.raises(ValidationError):
            Mdp(1, 1, np.ones((1, 1, 1)), 1.0)

    def test_initial_distribution_must_sum_to_one(self):
        with pytest.raises(ValidationError):
            Mdp(2, 1, np.array([[[0.5, 0.5], [0.5, 0.5]]]), 0.9,
                initial_distribution=np.array([0.9, 0.2]))


class TestQFromValues:
    def test_zero_discount_returns_reward(self, rng):
        mdp = random_mdp(rng, discount=0.0)
        q = q_from_values(mdp, np.ones(4) * 7.3)
        np.testing.assert_allclose(q.q, np.repeat(mdp.reward[:, None], 3, axis=1))

    def test_zero_values_return_reward(self, rng):
        mdp = random_mdp(rng, discount=0.7)
        q = q_from_values(mdp, np.zeros(4))
        np.testing.assert_allclose(q.q, np.repeat(mdp.reward[:, None], 3, axis=1))

    def test_two_state_chain_hand_value(self):
        mdp = two_state_chain()
        q = q_from_values(mdp, np.array([1.0, 2.0]))
        assert q.q[0, 0] == pytest.approx(1.0)  # 0 + 0.5 * 2.0

    def test_state_action_reward_layout(self):
        transitions = np.zeros((2, 2, 2))
        transitions[:, :, 1] = 1.0
        reward = np.array([1.0, 2.0, 3.0, 4.0])  # blocks per action
        mdp = Mdp(2, 2, transitions, 0.5, reward=reward, reward_layout="state_action")
        q = q_from_values(mdp, np.zeros(2))
        np.testing.assert_allclose(q.q, [[1.0, 3.0], [2.0, 4.0]])

    def test_dimension_mismatch(self, rng):
        mdp = random_mdp(rng)
        with pytest.raises(ValidationError):
            q_from_values(mdp, np.zeros(5))


class TestGreedyPolicy:
    def test_argmax_row(self):
        policy = greedy_policy(QFunction(np.array([[0.2, 0.9]])))
        assert policy.actions[0] == 1

    def test_tie_breaks_to_lowest_index(self):
        policy = greedy_policy(QFunction(np.array([[0.5, 0.5]])))
        assert policy.actions[0] == 0

    def test_matches_brute_force_scan(self, rng):
        q = rng.normal(size=(20, 5))
        policy = greedy_policy(QFunction(q))
        for s in range(20):
            best = max(range(5), key=lambda a: (q[s, a], -a))
            assert policy.actions[s] == best

    def test_invariant_under_positive_affine_transform(self, rng):
        q = rng.normal(size=(10, 4))
        base = greedy_policy(QFunction(q)).actions
        scaled = greedy_policy(QFunction(3.7 * q + 11.0)).actions
        np.testing.assert_array_equal(base, scaled)


class TestBoltzmann:
    def test_equal_values_give_uniform(self):
        probs = boltzmann_probs(QFunction(np.array([[2.0, 2.0, 2.0]])), 0)
        np.testing.assert_allclose(probs, 1.0 / 3.0)

    def test_closed_form_softmax(self):
        probs = boltzmann_probs(QFunction(np.array([[1.0, 0.0]])), 0)
        e = np.e
        np.testing.assert_allclose(probs, [e / (1 + e), 1 / (1 + e)], atol=1e-12)
        assert probs[0] == pytest.approx(0.7311, abs=1e-4)

    def test_large_gap_does_not_overflow(self):
        probs = boltzmann_probs(QFunction(np.array([[1234.0, 2234.0]])), 0)
        assert np.isfinite(probs).all()
        np.testing.assert_allclose(probs, [0.0, 1.0], atol=1e-300)

    def test_sums_to_one_and_positive(self, rng):
        q = QFunction(rng.normal(size=(7, 4)) * 10)
        for s in range(7):
            probs = boltzmann_probs(q, s)
            assert (probs > 0).all()
            assert abs(probs.sum() - 1.0) <= 1e-12

    def test_shift_invariance(self, rng):
        row = rng.normal(size=(1, 5))
        a = boltzmann_probs(QFunction(row), 0)
        b = boltzmann_probs(QFunction(row + 123.0), 0)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_temperature_must_be_positive(self):
        with pytest.raises(ValidationError):
            boltzmann_probs(QFunction(np.zeros((1, 2))), 0, temperature=0.0)


class TestSampleTrajectory:
    def test_deterministic_self_loop(self):
        mdp = self_loop_mdp()
        traj = sample_trajectory(mdp, Policy.deterministic([0]), 0, 3,
                                 np.random.default_rng(0))
        assert traj.to_list() == [[0, 0], [0, 0], [0, 0]]

    def test_secretary_accept_ends_trajectory(self):
        mdp = build_secretary_mdp(SecretarySpec(5))
        accept_all = Policy.deterministic(np.ones(6, dtype=int))
        traj = sample_trajectory(mdp, accept_all, 0, 10, np.random.default_rng(1))
        assert traj.to_list() == [[0, 1]]

    def test_same_seed_bit_identical(self, rng):
        mdp = random_mdp(rng, num_states=6, num_actions=3)
        policy = Policy.stochastic(np.full((6, 3), 1.0 / 3.0))
        a = sample_trajectory(mdp, policy, 0, 50, np.random.default_rng(99))
        b = sample_trajectory(mdp, policy, 0, 50, np.random.default_rng(99))
        np.testing.assert_array_equal(a.steps, b.steps)

    def test_empirical_frequencies_match_transition_rows(self, rng):
        mdp = random_mdp(rng, num_states=3, num_actions=2, discount=0.9)
        policy = Policy.deterministic([0, 1, 0])
        n = 100_000
        traj = sample_trajectory(mdp, policy, 0, n, np.random.default_rng(7))
        counts = np.zeros((3, 3))
        states = traj.states
        for t in range(len(traj) - 1):
            counts[states[t], states[t + 1]] += 1
        for s in range(3):
            total = counts[s].sum()
            if total < 100:
                continue
            a = policy.actions[s]
            for s2 in range(3):
                p = mdp.transitions[a, s, s2]
                sigma = np.sqrt(max(p * (1 - p) * total, 1e-12))
                assert abs(counts[s, s2] - p * total) <= 4 * sigma + 1e-9

    def test_invalid_start_state(self):
        with pytest.raises(ValidationError):
            sample_trajectory(self_loop_mdp(), Policy.deterministic([0]), 3, 1,
                              np.random.default_rng(0))


class TestJsonInterchange:
    def test_round_trip_preserves_fields(self, rng, tmp_path):
        mdp = random_mdp(rng, num_states=4, num_actions=2, reward_layout="state_action")
        path = tmp_path / "mdp.json"
        mdp.to_json(path)
        doc = json.loads(path.read_text())
        assert set(doc) == {
            "num_states", "num_actions", "gamma", "transitions",
            "reward", "initial_distribution", "state_coordinates",
        }
        loaded = Mdp.from_json(path)
        assert loaded.reward_layout == "state_action"
        np.testing.assert_allclose(loaded.transitions, mdp.transitions)
        np.testing.assert_allclose(loaded.reward, mdp.reward)
        np.testing.assert_allclose(loaded.initial_distribution, mdp.initial_distribution)
        assert loaded.discount == mdp.discount

    def test_bellman_fixed_point_after_convergence(self, rng):
        mdp = random_mdp(rng, num_states=8, num_actions=3, discount=0.95)
        tolerance = 1e-6
        vf = value_iteration(mdp, tolerance=tolerance)
        q = q_from_values(mdp, vf)
        assert np.abs(vf.values - q.q.max(axis=1)).max() <= tolerance
