import numpy as np
import pytest

from rewardspace import Mdp, ValidationError
from rewardspace.irl import (
    GpHyper,
    IrlProblem,
    build_preferences,
    empirical_policy,
    infer_rewards,
    se_kernel_matrix,
)
from rewardspace.irl.batch import rewards_from_csv, rewards_to_csv
from rewardspace.types import ObservationSet, Trajectory

from conftest import random_mdp


def obs_of(*pair_lists):
    return ObservationSet(tuple(Trajectory.from_pairs(p) for p in pair_lists))


class TestBuildPreferences:
    def test_single_observed_action(self):
        prefs = build_preferences(obs_of([(0, 0)]), num_states=2, num_actions=3)
        assert sorted(map(tuple, prefs.strict)) == [(0, 0, 1), (0, 0, 2)]
        assert prefs.equivalent.shape[0] == 0

    def test_two_observed_actions(self):
        prefs = build_preferences(obs_of([(0, 0)], [(0, 1)]), num_states=1, num_actions=3)
        assert sorted(map(tuple, prefs.strict)) == [(0, 0, 2), (0, 1, 2)]
        assert [tuple(r) for r in prefs.equivalent] == [(0, 0, 1)]

    def test_unobserved_state_has_no_relations(self):
        prefs = build_preferences(obs_of([(0, 0)]), num_states=5, num_actions=2)
        assert (prefs.strict[:, 0] == 0).all()

    def test_repeated_observations_do_not_duplicate(self):
        prefs = build_preferences(obs_of([(0, 1)] * 10), num_states=1, num_actions=2)
        assert prefs.strict.shape[0] == 1

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            build_preferences(ObservationSet(()), 2, 2)


class TestEmpiricalPolicy:
    def test_frequencies_and_uniform_fallback(self):
        probs = empirical_policy(obs_of([(0, 1), (0, 1), (0, 0)]), 3, 2)
        # state 0 visited 3 times... wait, (0,1) twice and (0,0) once
        np.testing.assert_allclose(probs[0], [1 / 3, 2 / 3])
        np.testing.assert_allclose(probs[1], [0.5, 0.5])
        np.testing.assert_allclose(probs[2], [0.5, 0.5])


class TestSeKernel:
    def test_zero_distance_diagonal(self):
        hyper = GpHyper(np.array([1.0]), np.array([0.3]))
        kernel = se_kernel_matrix(np.array([[0.0], [5.0]]), hyper, 0)
        assert kernel[0, 0] == pytest.approx(1.0 + 0.09)
        assert kernel[1, 1] == pytest.approx(1.0 + 0.09)

    def test_distance_two_squared(self):
        hyper = GpHyper(np.array([1.0]), np.array([0.0]))
        coords = np.array([[0.0, 0.0], [1.0, 1.0]])  # squared distance 2
        kernel = se_kernel_matrix(coords, hyper, 0)
        assert kernel[0, 1] == pytest.approx(np.exp(-1.0))
        assert kernel[0, 1] == pytest.approx(0.3679, abs=1e-4)

    def test_covariance_decays_with_distance(self):
        hyper = GpHyper(np.array([0.7]), np.array([0.0]))
        coords = np.array([[0.0], [1.0], [2.0], [5.0]])
        kernel = se_kernel_matrix(coords, hyper, 0)
        assert kernel[0, 1] > kernel[0, 2] > kernel[0, 3]

    def test_symmetric_and_cholesky_pd(self, rng):
        hyper = GpHyper.constant(1, kappa=0.8, sigma=0.1)
        for _ in range(10):
            coords = rng.normal(size=(12, 2)) * 3
            kernel = se_kernel_matrix(coords, hyper, 0)
            np.testing.assert_allclose(kernel, kernel.T, atol=1e-14)
            np.linalg.cholesky(kernel)  # raises if not PD

    def test_invalid_kappa(self):
        with pytest.raises(ValidationError):
            GpHyper(np.array([0.0]), np.array([0.1]))


class TestInferRewards:
    def _cohort(self, rng, mdp, n_agents=4, identical=False):
        from rewardspace.agents import AgentRecord

        records = []
        base = None
        for i in range(n_agents):
            if identical and base is not None:
                obs = base
            else:
                pairs = [
                    (int(rng.integers(mdp.num_states)), int(rng.integers(mdp.num_actions)))
                    for _ in range(6)
                ]
                obs = obs_of(pairs)
                base = obs
            records.append(AgentRecord(agent_id=i, observations=obs, label=i % 2))
        return records

    def test_cohort_rewards_share_length(self, rng):
        mdp = random_mdp(rng, num_states=4, num_actions=2).without_reward()
        records = self._cohort(rng, mdp)
        result = infer_rewards(records, "GPIRL", mdp)
        assert result.all_succeeded
        assert len(result.rewards) == 4
        lengths = {len(vec) for vec in result.rewards}
        assert lengths == {8}
        assert all(vec.source == "REWARD" for vec in result.rewards)

    def test_empty_cohort(self, rng):
        mdp = random_mdp(rng).without_reward()
        result = infer_rewards([], "GPIRL", mdp)
        assert result.rewards == [] and result.diagnostics == []

    def test_identical_observations_identical_rewards(self, rng):
        mdp = random_mdp(rng, num_states=3, num_actions=2).without_reward()
        records = self._cohort(rng, mdp, identical=True)
        result = infer_rewards(records, "GPIRL", mdp)
        first = result.rewards[0].values
        for vec in result.rewards[1:]:
            np.testing.assert_array_equal(vec.values, first)

    def test_failures_attached_to_agent_id(self, rng):
        from rewardspace.agents import AgentRecord

        mdp = random_mdp(rng, num_states=3, num_actions=2).without_reward()
        good = self._cohort(rng, mdp, n_agents=2)
        bad = AgentRecord(
            agent_id=99,
            observations=obs_of([(7, 0)]),  # state 7 does not exist
            label=0,
        )
        result = infer_rewards(good + [bad], "GPIRL", mdp)
        assert not result.all_succeeded
        assert list(result.failures) == [99]
        assert result.rewards[2] is None
        assert result.rewards[0] is not None

    def test_unknown_engine_rejected(self, rng):
        mdp = random_mdp(rng).without_reward()
        with pytest.raises(ValidationError):
            infer_rewards([], "BIRL", mdp)

    def test_parallel_matches_sequential(self, rng):
        mdp = random_mdp(rng, num_states=3, num_actions=2).without_reward()
        records = self._cohort(rng, mdp, n_agents=6)
        seq = infer_rewards(records, "PROJ", mdp)
        par = infer_rewards(records, "PROJ", mdp, jobs=2)
        for a, b in zip(seq.rewards, par.rewards):
            np.testing.assert_array_equal(a.values, b.values)

    def test_rewards_csv_round_trip(self, rng, tmp_path):
        mdp = random_mdp(rng, num_states=3, num_actions=2).without_reward()
        records = self._cohort(rng, mdp, n_agents=3)
        result = infer_rewards(records, "GPIRL", mdp)
        path = tmp_path / "rewards.csv"
        rewards_to_csv(path, result, records, "state_action")
        matrix, labels, layout = rewards_from_csv(path)
        assert layout == "state_action"
        assert matrix.shape == (3, 6)
        np.testing.assert_allclose(matrix[0], result.rewards[0].values, rtol=1e-10)
        assert labels == [0, 1, 0]
