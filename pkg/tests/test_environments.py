from fractions import Fraction

import numpy as np
import pytest

from rewardspace import ValidationError
from rewardspace.environments import (
    ACCEPT,
    EAST,
    NORTH,
    REJECT,
    SOUTH,
    STAY,
    WEST,
    GridWorldSpec,
    SecretarySpec,
    build_gridworld,
    build_secretary_mdp,
    gridworld_reward,
)


def brute_force_gridworld_row(spec, row, col, action):
    """Independent oracle: enumerate the five outcome events and fold masses."""
    moves = {NORTH: (-1, 0), SOUTH: (1, 0), EAST: (0, 1), WEST: (0, -1), STAY: (0, 0)}

    def land(direction):
        r, c = row + moves[direction][0], col + moves[direction][1]
        if 0 <= r < spec.height and 0 <= c < spec.width:
            return r * spec.width + c
        return row * spec.width + col

    probs = np.zeros(spec.num_states)
    probs[land(action)] += spec.p_intended
    probs[row * spec.width + col] += spec.p_stay
    for direction in (NORTH, SOUTH, EAST, WEST):
        probs[land(direction)] += spec.p_random / 4.0
    return probs


class TestGridWorld:
    def test_interior_cell_action_north(self):
        spec = GridWorldSpec()
        mdp = build_gridworld(spec)
        s = spec.state_index((5, 5))
        row = mdp.transitions[NORTH, s]
        assert row[spec.state_index((4, 5))] == pytest.approx(0.70)
        assert row[s] == pytest.approx(0.15)
        for neighbor in [(6, 5), (5, 6), (5, 4)]:
            assert row[spec.state_index(neighbor)] == pytest.approx(0.05)
        assert row.sum() == pytest.approx(1.0)

    def test_corner_cell_folding(self):
        spec = GridWorldSpec()
        mdp = build_gridworld(spec)
        s = spec.state_index((0, 0))
        # N chosen at the NW corner: intended N and random N/W all fold to stay
        row_n = mdp.transitions[NORTH, s]
        assert row_n[s] == pytest.approx(0.90)
        # stay chosen: same folding applies
        row_stay = mdp.transitions[STAY, s]
        assert row_stay[s] == pytest.approx(0.90)
        assert row_stay[spec.state_index((1, 0))] == pytest.approx(0.05)
        assert row_stay[spec.state_index((0, 1))] == pytest.approx(0.05)

    def test_every_row_matches_brute_force_oracle(self):
        spec = GridWorldSpec(width=4, height=3)
        mdp = build_gridworld(spec)
        for r in range(spec.height):
            for c in range(spec.width):
                s = spec.state_index((r, c))
                for action in range(5):
                    expected = brute_force_gridworld_row(spec, r, c, action)
                    np.testing.assert_allclose(
                        mdp.transitions[action, s], expected, atol=1e-15
                    )

    def test_all_rows_sum_to_one(self):
        mdp = build_gridworld(GridWorldSpec())
        np.testing.assert_allclose(mdp.transitions.sum(axis=2), 1.0, atol=1e-12)

    def test_boundary_mass_conservation(self):
        # mass folded into staying equals exactly the off-grid mass, per cell
        spec = GridWorldSpec(width=5, height=5)
        mdp = build_gridworld(spec)
        moves = {NORTH: (-1, 0), SOUTH: (1, 0), EAST: (0, 1), WEST: (0, -1), STAY: (0, 0)}
        for r in range(5):
            for c in range(5):
                s = spec.state_index((r, c))
                for action in range(5):
                    off_grid = 0.0
                    if action != STAY:
                        rr, cc = r + moves[action][0], c + moves[action][1]
                        if not (0 <= rr < 5 and 0 <= cc < 5):
                            off_grid += spec.p_intended
                    for d in (NORTH, SOUTH, EAST, WEST):
                        rr, cc = r + moves[d][0], c + moves[d][1]
                        if not (0 <= rr < 5 and 0 <= cc < 5):
                            off_grid += spec.p_random / 4.0
                    base_stay = spec.p_stay + (spec.p_intended if action == STAY else 0.0)
                    assert mdp.transitions[action, s, s] == pytest.approx(base_stay + off_grid)

    def test_builders_are_deterministic(self):
        a = build_gridworld(GridWorldSpec())
        b = build_gridworld(GridWorldSpec())
        assert (a.transitions == b.transitions).all()

    def test_invalid_probabilities_rejected(self):
        with pytest.raises(ValidationError):
            GridWorldSpec(p_intended=0.5, p_stay=0.1, p_random=0.2)

    def test_zero_size_grid_rejected(self):
        with pytest.raises(ValidationError):
            GridWorldSpec(width=0)


class TestGridworldReward:
    def test_zero_noise_gives_exact_sparse_vector(self):
        spec = GridWorldSpec(width=3, height=3)
        reward = gridworld_reward(spec, [((2, 2), 1.0), ((0, 1), -0.5)], 0.0)
        expected = np.zeros(9)
        expected[spec.state_index((2, 2))] = 1.0
        expected[spec.state_index((0, 1))] = -0.5
        np.testing.assert_array_equal(reward, expected)

    def test_same_seed_identical(self):
        spec = GridWorldSpec()
        a = gridworld_reward(spec, [((9, 9), 1.0)], 0.1, np.random.default_rng(5))
        b = gridworld_reward(spec, [((9, 9), 1.0)], 0.1, np.random.default_rng(5))
        np.testing.assert_array_equal(a, b)

    def test_noise_mean_is_unbiased(self):
        spec = GridWorldSpec()
        rng = np.random.default_rng(17)
        draws = np.concatenate(
            [gridworld_reward(spec, [], 0.1, rng) for _ in range(100)]
        )
        # 10^4 draws of std 0.1: the sample mean has std 0.1/100
        assert abs(draws.mean()) <= 3 * 0.1 / 100


class TestSecretaryMdp:
    def test_reject_row_x4_frozen_values(self):
        mdp = build_secretary_mdp(SecretarySpec(4))
        row = mdp.transitions[REJECT, 0]
        np.testing.assert_allclose(row[1], 1 / 2)
        np.testing.assert_allclose(row[2], 1 / 6)
        np.testing.assert_allclose(row[3], 1 / 12)
        np.testing.assert_allclose(row[4], 1 / 4)  # terminal

    def test_reject_at_last_position_goes_terminal(self):
        for x in (2, 5, 9):
            mdp = build_secretary_mdp(SecretarySpec(x))
            assert mdp.transitions[REJECT, x - 1, x] == pytest.approx(1.0)

    def test_accept_goes_terminal(self):
        mdp = build_secretary_mdp(SecretarySpec(6))
        for s in range(6):
            assert mdp.transitions[ACCEPT, s, 6] == 1.0

    def test_accept_self_loop_encoding(self):
        mdp = build_secretary_mdp(SecretarySpec(6), accept_to_terminal=False)
        for s in range(6):
            assert mdp.transitions[ACCEPT, s, s] == 1.0

    def test_terminal_absorbs_under_both_actions(self):
        mdp = build_secretary_mdp(SecretarySpec(6))
        assert mdp.absorbing_states()[6]
        assert not mdp.absorbing_states()[:6].any()

    def test_reject_mass_exact_in_rational_arithmetic(self):
        # telescoping identity: sum_{j>i} i/(j(j-1)) + i/X == 1 exactly
        for x in range(2, 13):
            for i in range(1, x + 1):
                mass = sum(
                    Fraction(i, j * (j - 1)) for j in range(i + 1, x + 1)
                ) + Fraction(i, x)
                assert mass == 1

    def test_rows_are_stochastic(self):
        mdp = build_secretary_mdp(SecretarySpec(12))
        np.testing.assert_allclose(mdp.transitions.sum(axis=2), 1.0, atol=1e-12)

    def test_too_few_applicants_rejected(self):
        with pytest.raises(ValidationError):
            SecretarySpec(1)

    def test_deterministic(self):
        a = build_secretary_mdp(SecretarySpec(8))
        b = build_secretary_mdp(SecretarySpec(8))
        assert (a.transitions == b.transitions).all()
