"""Shared data types: trajectories, observation sets, feature and reward vectors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ValidationError

# FeatureVector provenance tags
SOURCE_FT = "FT"
SOURCE_FE = "FE"
SOURCE_PCA = "PCA"
SOURCE_REWARD = "REWARD"

# RewardVector layouts
LAYOUT_STATE = "state"
LAYOUT_STATE_ACTION = "state_action"


@dataclass(frozen=True)
class Trajectory:
    """A time-ordered sequence of (state, action) index pairs."""

    steps: np.ndarray

    def __post_init__(self):
        steps = np.asarray(self.steps, dtype=np.int64)
        if steps.ndim != 2 or steps.shape[1] != 2:
            raise ValidationError(f"trajectory steps must be (n, 2), got {steps.shape}")
        if steps.shape[0] == 0:
            raise ValidationError("trajectory must be nonempty")
        if (steps < 0).any():
            raise ValidationError("state/action indices must be nonnegative")
        object.__setattr__(self, "steps", steps)

    @classmethod
    def from_pairs(cls, pairs) -> "Trajectory":
        return cls(np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2))

    @property
    def states(self) -> np.ndarray:
        return self.steps[:, 0]

    @property
    def actions(self) -> np.ndarray:
        return self.steps[:, 1]

    def __len__(self) -> int:
        return self.steps.shape[0]

    def to_list(self) -> list[list[int]]:
        return self.steps.tolist()


@dataclass(frozen=True)
class ObservationSet:
    """All decision trajectories recorded for one agent."""

    trajectories: tuple[Trajectory, ...]

    def __post_init__(self):
        object.__setattr__(self, "trajectories", tuple(self.trajectories))

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)

    def require_nonempty(self, what: str = "operation") -> "ObservationSet":
        if len(self.trajectories) == 0:
            raise ValidationError(f"{what} requires a nonempty observation set")
        return self

    def state_action_counts(self, num_states: int, num_actions: int) -> np.ndarray:
        """(num_states, num_actions) visit counts over all trajectories."""
        counts = np.zeros((num_states, num_actions), dtype=np.int64)
        for traj in self.trajectories:
            np.add.at(counts, (traj.states, traj.actions), 1)
        return counts

    def validate_indices(self, num_states: int, num_actions: int) -> None:
        for traj in self.trajectories:
            if traj.states.max(initial=-1) >= num_states:
                raise ValidationError("trajectory state index out of range for this MDP")
            if traj.actions.max(initial=-1) >= num_actions:
                raise ValidationError("trajectory action index out of range for this MDP")


@dataclass(frozen=True)
class FeatureVector:
    """Real-valued representation of one agent."""

    values: np.ndarray
    source: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValidationError("feature vector must be one-dimensional")
        if not np.isfinite(values).all():
            raise ValidationError("feature vector entries must be finite")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class RewardVector:
    """Learned reward values, indexed per state or per (action, state) block."""

    values: np.ndarray
    layout: str = LAYOUT_STATE

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValidationError("reward vector must be one-dimensional")
        if not np.isfinite(values).all():
            raise ValidationError("reward vector entries must be finite")
        if self.layout not in (LAYOUT_STATE, LAYOUT_STATE_ACTION):
            raise ValidationError(f"unknown reward layout {self.layout!r}")
        object.__setattr__(self, "values", values)

    def as_feature(self) -> FeatureVector:
        return FeatureVector(self.values.copy(), SOURCE_REWARD)

    def per_action_blocks(self, num_states: int) -> np.ndarray:
        """Reshape a state-action layout vector to (num_actions, num_states)."""
        if self.layout != LAYOUT_STATE_ACTION:
            raise ValidationError("per_action_blocks requires state_action layout")
        return self.values.reshape(-1, num_states)
