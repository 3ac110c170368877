"""Finite Markov decision processes and forward solvers.

States and actions are integer indices.  Transitions are stored as one
row-stochastic matrix per action, ``transitions[a, s, s']``.  Rewards may be
per-state (length ``|S|``) or per-state-action (length ``|S|*|A|``, laid out
as one contiguous block per action: index ``a * |S| + s``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import ConfigurationError, ValidationError
from .types import LAYOUT_STATE, LAYOUT_STATE_ACTION, Trajectory

ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class Mdp:
    """A finite MDP: state/action spaces, dynamics, discount and optional reward.

    ``state_coordinates`` is an optional ``(|S|, d)`` embedding of states into
    Euclidean space, used by kernel-based reward priors; builders populate it
    with problem geometry (grid cells, applicant positions).
    """

    num_states: int
    num_actions: int
    transitions: np.ndarray
    discount: float
    reward: np.ndarray | None = None
    reward_layout: str = LAYOUT_STATE
    initial_distribution: np.ndarray | None = None
    state_coordinates: np.ndarray | None = None

    def __post_init__(self):
        if self.num_states < 1 or self.num_actions < 1:
            raise ValidationError("num_states and num_actions must be positive")
        transitions = np.asarray(self.transitions, dtype=np.float64)
        if transitions.shape != (self.num_actions, self.num_states, self.num_states):
            raise ValidationError(
                f"transitions must have shape {(self.num_actions, self.num_states, self.num_states)}, "
                f"got {transitions.shape}"
            )
        if (transitions < 0).any():
            raise ValidationError("transition probabilities must be nonnegative")
        row_sums = transitions.sum(axis=2)
        if not np.allclose(row_sums, 1.0, atol=ROW_SUM_TOL, rtol=0.0):
            worst = np.abs(row_sums - 1.0).max()
            raise ValidationError(f"transition rows must sum to 1 (worst deviation {worst:.3e})")
        # The paper's discounting assumes gamma in (0,1); gamma == 0 is accepted
        # as the degenerate no-lookahead case used by closed-form checks.
        if not (0.0 <= self.discount < 1.0):
            raise ValidationError(f"discount must lie in [0, 1), got {self.discount}")
        object.__setattr__(self, "transitions", transitions)

        if self.reward is not None:
            reward = np.asarray(self.reward, dtype=np.float64).ravel()
            expected = {
                LAYOUT_STATE: self.num_states,
                LAYOUT_STATE_ACTION: self.num_states * self.num_actions,
            }
            if self.reward_layout not in expected:
                raise ValidationError(f"unknown reward layout {self.reward_layout!r}")
            if reward.shape[0] != expected[self.reward_layout]:
                raise ValidationError(
                    f"reward length {reward.shape[0]} does not match layout "
                    f"{self.reward_layout!r} (expected {expected[self.reward_layout]})"
                )
            if not np.isfinite(reward).all():
                raise ValidationError("reward entries must be finite")
            object.__setattr__(self, "reward", reward)

        if self.initial_distribution is None:
            initial = np.full(self.num_states, 1.0 / self.num_states)
        else:
            initial = np.asarray(self.initial_distribution, dtype=np.float64).ravel()
            if initial.shape[0] != self.num_states:
                raise ValidationError("initial_distribution length must equal num_states")
            if (initial < 0).any() or abs(initial.sum() - 1.0) > ROW_SUM_TOL:
                raise ValidationError("initial_distribution must be a probability vector")
        object.__setattr__(self, "initial_distribution", initial)

        if self.state_coordinates is not None:
            coords = np.asarray(self.state_coordinates, dtype=np.float64)
            if coords.ndim == 1:
                coords = coords[:, None]
            if coords.shape[0] != self.num_states:
                raise ValidationError("state_coordinates must have one row per state")
            object.__setattr__(self, "state_coordinates", coords)

    @property
    def has_reward(self) -> bool:
        return self.reward is not None

    def require_reward(self) -> np.ndarray:
        if self.reward is None:
            raise ConfigurationError("this operation requires an MDP with a reward")
        return self.reward

    def reward_matrix(self) -> np.ndarray:
        """Reward as an (|S|, |A|) matrix regardless of layout."""
        reward = self.require_reward()
        if self.reward_layout == LAYOUT_STATE:
            return np.repeat(reward[:, None], self.num_actions, axis=1)
        return reward.reshape(self.num_actions, self.num_states).T

    def with_reward(self, reward, layout: str = LAYOUT_STATE) -> "Mdp":
        return replace(self, reward=np.asarray(reward, dtype=np.float64), reward_layout=layout)

    def without_reward(self) -> "Mdp":
        return replace(self, reward=None, reward_layout=LAYOUT_STATE)

    def coordinates_or_indices(self) -> np.ndarray:
        """State embedding for kernels; falls back to the bare index line."""
        if self.state_coordinates is not None:
            return self.state_coordinates
        return np.arange(self.num_states, dtype=np.float64)[:, None]

    def absorbing_states(self) -> np.ndarray:
        """Boolean mask of states that self-loop with probability 1 under every action."""
        self_loops = self.transitions[:, np.arange(self.num_states), np.arange(self.num_states)]
        return (self_loops >= 1.0 - ROW_SUM_TOL).all(axis=0)

    # -- JSON interchange ---------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "gamma": self.discount,
            "transitions": self.transitions.tolist(),
            "reward": None if self.reward is None else self.reward.tolist(),
            "initial_distribution": self.initial_distribution.tolist(),
            "state_coordinates": (
                None if self.state_coordinates is None else self.state_coordinates.tolist()
            ),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Mdp":
        num_states = int(doc["num_states"])
        num_actions = int(doc["num_actions"])
        reward = doc.get("reward")
        layout = LAYOUT_STATE
        if reward is not None and len(reward) == num_states * num_actions and num_actions > 1:
            layout = LAYOUT_STATE_ACTION
        return cls(
            num_states=num_states,
            num_actions=num_actions,
            transitions=np.asarray(doc["transitions"], dtype=np.float64),
            discount=float(doc["gamma"]),
            reward=None if reward is None else np.asarray(reward, dtype=np.float64),
            reward_layout=layout,
            initial_distribution=np.asarray(doc["initial_distribution"], dtype=np.float64),
            state_coordinates=(
                None
                if doc.get("state_coordinates") is None
                else np.asarray(doc["state_coordinates"], dtype=np.float64)
            ),
        )

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def from_json(cls, path) -> "Mdp":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass(frozen=True)
class ValueFunction:
    values: np.ndarray
    iterations: int = 0
    converged: bool = True
    residual: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if not np.isfinite(values).all():
            raise ValidationError("value function entries must be finite")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class QFunction:
    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.float64)
        if q.ndim != 2:
            raise ValidationError("Q must be a (num_states, num_actions) matrix")
        if not np.isfinite(q).all():
            raise ValidationError("Q entries must be finite")
        object.__setattr__(self, "q", q)


class Policy:
    """Deterministic (state -> action) or stochastic (state -> action distribution) policy."""

    def __init__(self, actions: np.ndarray | None = None, probs: np.ndarray | None = None):
        if (actions is None) == (probs is None):
            raise ValidationError("provide exactly one of actions / probs")
        if actions is not None:
            actions = np.asarray(actions, dtype=np.int64)
            if actions.ndim != 1 or (actions < 0).any():
                raise ValidationError("deterministic policy must be a vector of action indices")
        if probs is not None:
            probs = np.asarray(probs, dtype=np.float64)
            if probs.ndim != 2 or (probs < 0).any():
                raise ValidationError("stochastic policy must be a (num_states, num_actions) matrix")
            if not np.allclose(probs.sum(axis=1), 1.0, atol=ROW_SUM_TOL, rtol=0.0):
                raise ValidationError("stochastic policy rows must sum to 1")
        self.actions = actions
        self.probs = probs

    @classmethod
    def deterministic(cls, actions) -> "Policy":
        return cls(actions=np.asarray(actions))

    @classmethod
    def stochastic(cls, probs) -> "Policy":
        return cls(probs=np.asarray(probs))

    @classmethod
    def uniform(cls, num_states: int, num_actions: int) -> "Policy":
        return cls(probs=np.full((num_states, num_actions), 1.0 / num_actions))

    @property
    def is_deterministic(self) -> bool:
        return self.actions is not None

    def action_probabilities(self, num_actions: int) -> np.ndarray:
        """Policy as a dense (num_states, num_actions) matrix."""
        if self.probs is not None:
            return self.probs
        probs = np.zeros((self.actions.shape[0], num_actions))
        probs[np.arange(self.actions.shape[0]), self.actions] = 1.0
        return probs

    def sample_action(self, state: int, rng: np.random.Generator) -> int:
        if self.actions is not None:
            return int(self.actions[state])
        return int(rng.choice(self.probs.shape[1], p=self.probs[state]))

    def validate_for(self, mdp: Mdp) -> None:
        if self.actions is not None:
            if self.actions.shape[0] != mdp.num_states or (self.actions >= mdp.num_actions).any():
                raise ValidationError("policy does not match MDP dimensions")
        else:
            if self.probs.shape != (mdp.num_states, mdp.num_actions):
                raise ValidationError("policy does not match MDP dimensions")


def bellman_backup(mdp: Mdp, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One optimal Bellman backup.  Returns (new values, Q matrix)."""
    reward = mdp.reward_matrix()
    q = reward + mdp.discount * np.einsum("ast,t->sa", mdp.transitions, values)
    return q.max(axis=1), q


def value_iteration(
    mdp: Mdp,
    tolerance: float = 1e-6,
    max_iters: int = 100_000,
    v_init: np.ndarray | None = None,
) -> ValueFunction:
    """Optimal value function by repeated Bellman backups.

    Stops when the sup-norm change between successive iterates falls below
    ``tolerance * (1 - gamma) / gamma``, which bounds the distance of the
    returned iterate to the fixed point by ``tolerance``.
    """
    if tolerance <= 0:
        raise ValidationError("tolerance must be positive")
    if max_iters < 1:
        raise ValidationError("max_iters must be positive")
    mdp.require_reward()
    gamma = mdp.discount
    if gamma == 0.0:
        values, _ = bellman_backup(mdp, np.zeros(mdp.num_states))
        return ValueFunction(values, iterations=1, converged=True, residual=0.0)

    threshold = tolerance * (1.0 - gamma) / gamma
    values = np.zeros(mdp.num_states) if v_init is None else np.asarray(v_init, dtype=np.float64)
    delta = np.inf
    for iteration in range(1, max_iters + 1):
        new_values, _ = bellman_backup(mdp, values)
        delta = np.abs(new_values - values).max()
        values = new_values
        if delta <= threshold:
            return ValueFunction(values, iterations=iteration, converged=True, residual=delta)
    return ValueFunction(values, iterations=max_iters, converged=False, residual=delta)


def q_from_values(mdp: Mdp, v: ValueFunction | np.ndarray) -> QFunction:
    """Q(s, a) = R(s[, a]) + gamma * sum_s' P_a(s, s') V(s')."""
    values = v.values if isinstance(v, ValueFunction) else np.asarray(v, dtype=np.float64)
    if values.shape[0] != mdp.num_states:
        raise ValidationError("value function length must equal num_states")
    reward = mdp.reward_matrix()
    q = reward + mdp.discount * np.einsum("ast,t->sa", mdp.transitions, values)
    return QFunction(q)


def greedy_policy(q: QFunction) -> Policy:
    """Deterministic argmax policy; ties go to the lowest action index."""
    return Policy.deterministic(np.argmax(q.q, axis=1))


def boltzmann_probs(q: QFunction, state: int, temperature: float = 1.0) -> np.ndarray:
    """Softmax action distribution exp(Q(s,a)/T) / sum_a exp(Q(s,a)/T).

    Computed with max subtraction so arbitrarily large Q values cannot
    overflow.
    """
    if temperature <= 0:
        raise ValidationError("temperature must be positive")
    row = q.q[state] / temperature
    shifted = row - row.max()
    weights = np.exp(shifted)
    return weights / weights.sum()


def softmax_rows(matrix: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Row-wise overflow-safe softmax, shared by the Boltzmann-likelihood engines."""
    scaled = matrix / temperature
    shifted = scaled - scaled.max(axis=1, keepdims=True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis=1, keepdims=True)


def sample_trajectory(
    mdp: Mdp,
    policy: Policy,
    start: int,
    length: int,
    rng: np.random.Generator,
) -> Trajectory:
    """Roll out ``length`` (state, action) pairs from ``start``.

    The rollout ends early when it moves into an absorbing state (one that
    self-loops under every action) from somewhere else, so absorbing
    terminals never appear as visited states.  Staying put in place, even in
    an absorbing start state, does not terminate.
    """
    if not (0 <= start < mdp.num_states):
        raise ValidationError(f"start state {start} out of range")
    if length < 1:
        raise ValidationError("length must be >= 1")
    policy.validate_for(mdp)
    absorbing = mdp.absorbing_states()
    pairs = np.empty((length, 2), dtype=np.int64)
    state = start
    taken = 0
    for _ in range(length):
        action = policy.sample_action(state, rng)
        pairs[taken] = (state, action)
        taken += 1
        next_state = int(rng.choice(mdp.num_states, p=mdp.transitions[action, state]))
        if absorbing[next_state] and next_state != state:
            break
        state = next_state
    return Trajectory(pairs[:taken])


def sample_initial_state(mdp: Mdp, rng: np.random.Generator) -> int:
    return int(rng.choice(mdp.num_states, p=mdp.initial_distribution))
