"""Shared IRL problem types: the (MDP minus reward, prior, observations) triplet
and the per-state action preference relations induced by observations."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ValidationError
from ..mdp import Mdp
from ..types import ObservationSet

PRIOR_NONE = "none"
PRIOR_GAUSSIAN = "gaussian"
PRIOR_GP = "gp"


@dataclass(frozen=True)
class RewardPrior:
    """Prior knowledge on the reward: none, iid Gaussian, or a GP (per-action kernels)."""

    kind: str = PRIOR_GAUSSIAN
    mean: float = 0.0
    std: float = 1.0

    def __post_init__(self):
        if self.kind not in (PRIOR_NONE, PRIOR_GAUSSIAN, PRIOR_GP):
            raise ValidationError(f"unknown prior kind {self.kind!r}")
        if self.kind == PRIOR_GAUSSIAN and self.std <= 0:
            raise ValidationError("Gaussian prior std must be positive")


@dataclass(frozen=True)
class IrlProblem:
    """An IRL instance: dynamics without reward, observations, reward prior."""

    mdp: Mdp
    observations: ObservationSet
    prior: RewardPrior = field(default_factory=RewardPrior)

    def __post_init__(self):
        self.observations.validate_indices(self.mdp.num_states, self.mdp.num_actions)

    def counts(self) -> np.ndarray:
        return self.observations.state_action_counts(self.mdp.num_states, self.mdp.num_actions)


@dataclass(frozen=True)
class PreferenceSet:
    """Per-state action orderings induced by observations.

    ``strict`` rows are (state, preferred action, dominated action); the
    preferred action was observed at the state, the dominated one never was.
    ``equivalent`` rows are (state, action, action) for unordered pairs of
    co-observed actions.
    """

    strict: np.ndarray
    equivalent: np.ndarray

    def __post_init__(self):
        strict = np.asarray(self.strict, dtype=np.int64).reshape(-1, 3)
        equivalent = np.asarray(self.equivalent, dtype=np.int64).reshape(-1, 3)
        if strict.size and (strict[:, 1] == strict[:, 2]).any():
            raise ValidationError("strict preferences must involve two distinct actions")
        object.__setattr__(self, "strict", strict)
        object.__setattr__(self, "equivalent", equivalent)

    @property
    def num_relations(self) -> int:
        return self.strict.shape[0] + self.equivalent.shape[0]


def build_preferences(obs: ObservationSet, num_states: int, num_actions: int) -> PreferenceSet:
    """Relations at each observed state: every observed action strictly beats
    every unobserved one, and co-observed actions are pairwise equivalent."""
    obs.require_nonempty("build_preferences")
    counts = obs.state_action_counts(num_states, num_actions)
    strict: list[tuple[int, int, int]] = []
    equivalent: list[tuple[int, int, int]] = []
    for s in np.flatnonzero(counts.sum(axis=1)):
        observed = np.flatnonzero(counts[s])
        unobserved = np.flatnonzero(counts[s] == 0)
        for a_hat in observed:
            for a_check in unobserved:
                strict.append((s, a_hat, a_check))
        for i, a_hat in enumerate(observed):
            for a_prime in observed[i + 1 :]:
                equivalent.append((s, a_hat, a_prime))
    return PreferenceSet(
        np.asarray(strict, dtype=np.int64).reshape(-1, 3),
        np.asarray(equivalent, dtype=np.int64).reshape(-1, 3),
    )


def empirical_policy(obs: ObservationSet, num_states: int, num_actions: int) -> np.ndarray:
    """Observed action frequencies per state; uniform at unobserved states."""
    counts = obs.state_action_counts(num_states, num_actions).astype(np.float64)
    totals = counts.sum(axis=1, keepdims=True)
    probs = np.full((num_states, num_actions), 1.0 / num_actions)
    visited = totals[:, 0] > 0
    probs[visited] = counts[visited] / totals[visited]
    return probs
