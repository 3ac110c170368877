"""The two benchmark decision problems: stochastic GridWorld and the secretary problem."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError
from .mdp import Mdp
from .seeding import as_generator

# GridWorld actions, in fixed order.
NORTH, SOUTH, EAST, WEST, STAY = range(5)
GRIDWORLD_NUM_ACTIONS = 5
_MOVES = {NORTH: (-1, 0), SOUTH: (1, 0), EAST: (0, 1), WEST: (0, -1), STAY: (0, 0)}
_CARDINALS = (NORTH, SOUTH, EAST, WEST)

# Secretary actions.
REJECT, ACCEPT = 0, 1


@dataclass(frozen=True)
class GridWorldSpec:
    """Movement-noise model for the grid navigation benchmark.

    The agent's chosen move succeeds with ``p_intended``, it stays put with
    ``p_stay``, and with ``p_random`` it moves in a uniformly random cardinal
    direction.  Moves that would leave the grid keep the agent in place.
    """

    width: int = 10
    height: int = 10
    p_intended: float = 0.65
    p_stay: float = 0.15
    p_random: float = 0.2
    discount: float = 0.95

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValidationError("grid dimensions must be positive")
        total = self.p_intended + self.p_stay + self.p_random
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"movement probabilities must sum to 1, got {total}")
        if min(self.p_intended, self.p_stay, self.p_random) < 0:
            raise ValidationError("movement probabilities must be nonnegative")

    @property
    def num_states(self) -> int:
        return self.width * self.height

    def state_index(self, cell: tuple[int, int]) -> int:
        row, col = cell
        if not (0 <= row < self.height and 0 <= col < self.width):
            raise ValidationError(f"cell {cell} outside {self.height}x{self.width} grid")
        return row * self.width + col

    def cell(self, state: int) -> tuple[int, int]:
        return divmod(state, self.width)


@dataclass(frozen=True)
class SecretarySpec:
    """Optimal-stopping benchmark with ``num_applicants`` randomly ordered applicants."""

    num_applicants: int
    discount: float = 0.95

    def __post_init__(self):
        if self.num_applicants < 2:
            raise ValidationError("the secretary problem needs at least 2 applicants")


def build_gridworld(spec: GridWorldSpec) -> Mdp:
    """GridWorld MDP (no reward).  Actions are N, S, E, W, stay in that order.

    Each transition row folds five outcome events: the intended move
    (``p_intended``), staying put (``p_stay``) and four random cardinal moves
    (``p_random / 4`` each), with off-grid moves redirected to staying.
    """
    n = spec.num_states
    transitions = np.zeros((GRIDWORLD_NUM_ACTIONS, n, n))
    p_rand_each = spec.p_random / 4.0

    def destination(row, col, direction):
        drow, dcol = _MOVES[direction]
        nrow, ncol = row + drow, col + dcol
        if 0 <= nrow < spec.height and 0 <= ncol < spec.width:
            return nrow * spec.width + ncol
        return row * spec.width + col

    for row in range(spec.height):
        for col in range(spec.width):
            s = row * spec.width + col
            for action in range(GRIDWORLD_NUM_ACTIONS):
                transitions[action, s, destination(row, col, action)] += spec.p_intended
                transitions[action, s, s] += spec.p_stay
                for direction in _CARDINALS:
                    transitions[action, s, destination(row, col, direction)] += p_rand_each

    initial = np.zeros(n)
    initial[0] = 1.0
    coordinates = np.array([divmod(s, spec.width) for s in range(n)], dtype=np.float64)
    return Mdp(
        num_states=n,
        num_actions=GRIDWORLD_NUM_ACTIONS,
        transitions=transitions,
        discount=spec.discount,
        initial_distribution=initial,
        state_coordinates=coordinates,
    )


def gridworld_reward(
    spec: GridWorldSpec,
    destinations: list[tuple[tuple[int, int], float]],
    noise_std: float = 0.0,
    rng=None,
) -> np.ndarray:
    """Per-state reward: the stated magnitude at each destination cell, zero
    elsewhere, plus i.i.d. Gaussian noise on every state."""
    if noise_std < 0:
        raise ValidationError("noise_std must be nonnegative")
    reward = np.zeros(spec.num_states)
    for cell, magnitude in destinations:
        reward[spec.state_index(cell)] += magnitude
    if noise_std > 0:
        reward += as_generator(rng).normal(0.0, noise_std, size=spec.num_states)
    return reward


def build_secretary_mdp(spec: SecretarySpec, accept_to_terminal: bool = True) -> Mdp:
    """Secretary-problem MDP (no reward).

    States 0..X-1 mean "the applicant at position s+1 is the best seen so
    far"; state X is an absorbing terminal.  Rejecting at position p jumps to
    the next candidate position q with probability p / (q (q - 1)); the
    leftover mass p / X (no later candidate ever appears) goes to the
    terminal.  Accepting moves to the terminal (or self-loops when
    ``accept_to_terminal`` is False, the literal stay-put encoding).
    """
    x = spec.num_applicants
    n = x + 1
    terminal = x
    transitions = np.zeros((2, n, n))

    for i in range(x):
        p = i + 1
        for j in range(i + 1, x):
            q = j + 1
            transitions[REJECT, i, j] = p / (q * (q - 1))
        transitions[REJECT, i, terminal] = p / x
        if accept_to_terminal:
            transitions[ACCEPT, i, terminal] = 1.0
        else:
            transitions[ACCEPT, i, i] = 1.0
    transitions[REJECT, terminal, terminal] = 1.0
    transitions[ACCEPT, terminal, terminal] = 1.0

    initial = np.zeros(n)
    initial[0] = 1.0  # the first applicant is always the best seen so far
    coordinates = np.arange(1, n + 1, dtype=np.float64)[:, None]
    return Mdp(
        num_states=n,
        num_actions=2,
        transitions=transitions,
        discount=spec.discount,
        initial_distribution=initial,
        state_coordinates=coordinates,
    )
