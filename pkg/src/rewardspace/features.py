"""Action-space agent representations: flat trajectory encodings, discounted
feature expectations and PCA projection."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError
from .types import SOURCE_FE, SOURCE_FT, SOURCE_PCA, FeatureVector, ObservationSet

NORMALIZE_PER_AGENT = "per_agent"
NORMALIZE_RANGE = "range"


@dataclass(frozen=True)
class BasisFunction:
    """State feature map phi: S -> [0, 1]^d, stored densely as an (|S|, d) matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValidationError("basis matrix must be (num_states, d)")
        if matrix.min() < 0.0 or matrix.max() > 1.0:
            raise ValidationError("basis values must lie in [0, 1]")
        object.__setattr__(self, "matrix", matrix)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[1]

    def value(self, state: int) -> np.ndarray:
        return self.matrix[state]


def indicator_basis(num_states: int) -> BasisFunction:
    """One-hot basis; feature expectations become discounted visitation counts."""
    return BasisFunction(np.eye(num_states))


def _pad_or_truncate(traj_steps: np.ndarray, horizon: int) -> np.ndarray:
    if traj_steps.shape[0] >= horizon:
        return traj_steps[:horizon]
    pad = np.repeat(traj_steps[-1:], horizon - traj_steps.shape[0], axis=0)
    return np.vstack([traj_steps, pad])


def feature_trajectory(
    obs: ObservationSet,
    horizon: int,
    normalization: str = NORMALIZE_PER_AGENT,
    num_states: int | None = None,
    num_actions: int | None = None,
) -> FeatureVector:
    """Flat [s1, a1, ..., sH, aH] encoding, scale-normalized then averaged.

    Trajectories are truncated or padded (by repeating their final pair) to
    ``horizon`` pairs.  With per-agent normalization each of the 2H components
    is min-max scaled across the agent's own trajectories (constant
    components map to 0); ``range`` normalization instead divides states and
    actions by their global index ranges, which needs ``num_states`` and
    ``num_actions``.
    """
    obs.require_nonempty("feature_trajectory")
    if horizon < 1:
        raise ValidationError("horizon must be >= 1")
    encoded = np.stack(
        [_pad_or_truncate(traj.steps, horizon).reshape(-1) for traj in obs]
    ).astype(np.float64)

    if normalization == NORMALIZE_PER_AGENT:
        lo = encoded.min(axis=0)
        hi = encoded.max(axis=0)
        span = hi - lo
        scaled = np.where(span > 0, (encoded - lo) / np.where(span > 0, span, 1.0), 0.0)
    elif normalization == NORMALIZE_RANGE:
        if num_states is None or num_actions is None:
            raise ValidationError("range normalization needs num_states and num_actions")
        denom = np.empty(2 * horizon)
        denom[0::2] = max(num_states - 1, 1)
        denom[1::2] = max(num_actions - 1, 1)
        scaled = encoded / denom
    else:
        raise ValidationError(f"unknown normalization {normalization!r}")
    return FeatureVector(scaled.mean(axis=0), SOURCE_FT)


def feature_expectation(obs: ObservationSet, basis: BasisFunction, discount: float) -> FeatureVector:
    """Discounted sum of basis values along observed states, averaged over
    trajectories; the time index starts at 0 at the head of each trajectory."""
    obs.require_nonempty("feature_expectation")
    if not (0.0 < discount < 1.0):
        raise ValidationError("discount must lie in (0, 1)")
    total = np.zeros(basis.dimension)
    for traj in obs:
        weights = discount ** np.arange(len(traj), dtype=np.float64)
        total += weights @ basis.matrix[traj.states]
    return FeatureVector(total / len(obs), SOURCE_FE)


@dataclass(frozen=True)
class PcaResult:
    projected: np.ndarray
    components: np.ndarray
    explained_variance_ratio: np.ndarray
    mean: np.ndarray


def pca_fit(matrix: np.ndarray, num_components: int) -> PcaResult:
    """Mean-centered projection onto the top eigenvectors of the sample covariance.

    Eigenvalues are sorted descending; each eigenvector's sign is fixed so its
    largest-magnitude coordinate is positive.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] < 2:
        raise ValidationError("PCA needs at least two vectors")
    if not (1 <= num_components <= matrix.shape[1]):
        raise ValidationError(
            f"num_components must be in 1..{matrix.shape[1]}, got {num_components}"
        )
    mean = matrix.mean(axis=0)
    centered = matrix - mean
    cov = centered.T @ centered / (matrix.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]
    for j in range(eigvecs.shape[1]):
        pivot = np.argmax(np.abs(eigvecs[:, j]))
        if eigvecs[pivot, j] < 0:
            eigvecs[:, j] = -eigvecs[:, j]
    components = eigvecs[:, :num_components]
    total_var = eigvals.sum()
    ratios = eigvals[:num_components] / total_var if total_var > 0 else np.zeros(num_components)
    return PcaResult(centered @ components, components, ratios, mean)


def pca_project(vectors: list[FeatureVector], num_components: int) -> list[FeatureVector]:
    matrix = np.stack([vec.values for vec in vectors])
    result = pca_fit(matrix, num_components)
    return [FeatureVector(row, SOURCE_PCA) for row in result.projected]


# -- CSV interchange -------------------------------------------------------


def features_to_csv(path, vectors: list[FeatureVector], labels=None) -> None:
    """One agent per row, feature columns then a trailing label column."""
    if labels is not None and len(labels) != len(vectors):
        raise ValidationError("labels length must match vectors")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        width = len(vectors[0]) if vectors else 0
        writer.writerow([f"f{i}" for i in range(width)] + ["label"])
        for i, vec in enumerate(vectors):
            if len(vec) != width:
                raise ValidationError("feature vectors must share one length")
            label = "" if labels is None else labels[i]
            writer.writerow([f"{x:.12g}" for x in vec.values] + [label])


def features_from_csv(path, source: str = SOURCE_FT) -> tuple[list[FeatureVector], list]:
    vectors, labels = [], []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[-1] != "label":
            raise ValidationError("feature CSV must end with a label column")
        for row in reader:
            vectors.append(FeatureVector(np.array([float(x) for x in row[:-1]]), source))
            labels.append(None if row[-1] == "" else int(row[-1]))
    return vectors, labels
