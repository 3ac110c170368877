"""Recognition layer: k-means clustering, clustering metrics, four classifiers
written directly on numpy, and stratified cross-validation."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ValidationError
from .seeding import as_generator, spawn_generators
from .types import FeatureVector

_MAX_MATCHING_CLASSES = 8


@dataclass(frozen=True)
class Dataset:
    """Feature rows with optional integer labels."""

    matrix: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValidationError("dataset matrix must be 2-D")
        if not np.isfinite(matrix).all():
            raise ValidationError("dataset entries must be finite")
        object.__setattr__(self, "matrix", matrix)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (matrix.shape[0],):
                raise ValidationError("labels must align with rows")
            object.__setattr__(self, "labels", labels)

    @classmethod
    def from_features(cls, vectors: list[FeatureVector], labels=None) -> "Dataset":
        matrix = np.stack([vec.values for vec in vectors])
        return cls(matrix, None if labels is None else np.asarray(labels))

    @property
    def num_rows(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ClusterResult:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    inertia_history: tuple[float, ...] = field(default_factory=tuple)


def _squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _kmeans_plus_plus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            centers[j] = points[rng.integers(n)]
            continue
        centers[j] = points[rng.choice(n, p=closest / total)]
        closest = np.minimum(closest, ((points - centers[j]) ** 2).sum(axis=1))
    return centers


def _lloyd(points: np.ndarray, centers: np.ndarray, max_iter: int) -> ClusterResult:
    assignments = np.full(points.shape[0], -1)
    history = []
    for _ in range(max_iter):
        dists = _squared_distances(points, centers)
        new_assignments = dists.argmin(axis=1)
        history.append(float(dists[np.arange(points.shape[0]), new_assignments].sum()))
        if (new_assignments == assignments).all():
            break
        assignments = new_assignments
        for j in range(centers.shape[0]):
            mask = assignments == j
            if mask.any():
                centers[j] = points[mask].mean(axis=0)
            else:
                # deterministic empty-cluster fix: grab the worst-fit point
                worst = dists[np.arange(points.shape[0]), assignments].argmax()
                centers[j] = points[worst]
    dists = _squared_distances(points, centers)
    assignments = dists.argmin(axis=1)
    inertia = float(dists[np.arange(points.shape[0]), assignments].sum())
    return ClusterResult(assignments, centers, inertia, tuple(history))


def kmeans(data, k: int, restarts: int = 10, seed=0, max_iter: int = 300) -> ClusterResult:
    """Best-of-restarts Lloyd iteration with k-means++ seeding."""
    points = data.matrix if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    if k < 1:
        raise ValidationError("k must be >= 1")
    if k > points.shape[0]:
        raise ValidationError(f"k={k} exceeds number of rows {points.shape[0]}")
    best: ClusterResult | None = None
    for rng in spawn_generators(seed, restarts):
        centers = _kmeans_plus_plus(points, k, rng)
        result = _lloyd(points, centers.copy(), max_iter)
        if best is None or result.inertia < best.inertia:
            best = result
    return best


def _contingency(labels_a: np.ndarray, labels_b: np.ndarray) -> np.ndarray:
    _, a_idx = np.unique(labels_a, return_inverse=True)
    _, b_idx = np.unique(labels_b, return_inverse=True)
    table = np.zeros((a_idx.max() + 1, b_idx.max() + 1), dtype=np.int64)
    np.add.at(table, (a_idx, b_idx), 1)
    return table


def nmi(labels_a, labels_b) -> float:
    """Normalized mutual information I(A;B)/sqrt(H(A)H(B)) with natural logs.

    Degenerate single-cluster partitions (zero entropy) return 0 by
    convention.
    """
    labels_a = np.asarray(labels_a)
    labels_b = np.asarray(labels_b)
    if labels_a.shape != labels_b.shape:
        raise ValidationError("labelings must have equal length")
    n = labels_a.shape[0]
    table = _contingency(labels_a, labels_b)
    pa = table.sum(axis=1) / n
    pb = table.sum(axis=0) / n
    h_a = -np.sum(pa[pa > 0] * np.log(pa[pa > 0]))
    h_b = -np.sum(pb[pb > 0] * np.log(pb[pb > 0]))
    if h_a <= 0 or h_b <= 0:
        return 0.0
    pij = table / n
    outer = pa[:, None] * pb[None, :]
    mask = pij > 0
    info = np.sum(pij[mask] * np.log(pij[mask] / outer[mask]))
    return float(np.clip(info / np.sqrt(h_a * h_b), 0.0, 1.0))


def clustering_accuracy(pred, truth) -> float:
    """Best agreement fraction over one-to-one cluster-to-class matchings."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValidationError("labelings must have equal length")
    table = _contingency(pred, truth)
    size = max(table.shape)
    if size > _MAX_MATCHING_CLASSES:
        raise ValidationError(
            f"exhaustive matching supports at most {_MAX_MATCHING_CLASSES} classes"
        )
    padded = np.zeros((size, size), dtype=np.int64)
    padded[: table.shape[0], : table.shape[1]] = table
    best = max(
        sum(padded[i, perm[i]] for i in range(size))
        for perm in itertools.permutations(range(size))
    )
    return best / pred.shape[0]


# -- Classifiers ------------------------------------------------------------

KIND_SVM = "SVM"
KIND_KNN = "KNN"
KIND_FDA = "FDA"
KIND_LR = "LR"
CLASSIFIER_KINDS = (KIND_SVM, KIND_KNN, KIND_FDA, KIND_LR)


def _check_training_labels(labels: np.ndarray) -> np.ndarray:
    classes = np.unique(labels)
    if classes.shape[0] < 2:
        raise ValidationError("training set must contain at least 2 classes")
    return classes


class _Standardizer:
    def __init__(self, matrix: np.ndarray):
        self.mean = matrix.mean(axis=0)
        std = matrix.std(axis=0)
        self.std = np.where(std > 1e-12, std, 1.0)

    def __call__(self, matrix: np.ndarray) -> np.ndarray:
        return (matrix - self.mean) / self.std


def logistic_loss_grad(w: np.ndarray, x: np.ndarray, y: np.ndarray, l2: float):
    """Mean negative log-likelihood of binary labels plus L2 penalty.

    ``x`` already carries a bias column; the bias weight is not penalized.
    Returns (loss, gradient); exposed so the gradient can be checked against
    finite differences.
    """
    logits = x @ w
    # log(1 + exp(z)) computed stably on both tails
    softplus = np.where(logits > 0, logits + np.log1p(np.exp(-logits)), np.log1p(np.exp(logits)))
    loss = float(np.mean(softplus - y * logits))
    probs = 1.0 / (1.0 + np.exp(-np.clip(logits, -500, 500)))
    grad = x.T @ (probs - y) / x.shape[0]
    penalty = np.concatenate([w[:-1], [0.0]])
    return loss + 0.5 * l2 * float(penalty @ penalty), grad + l2 * penalty


class LogisticRegressionClassifier:
    """Binary logistic regression by gradient descent, one-vs-rest for multiclass."""

    def __init__(self, l2: float = 1e-3, step_size: float = 1.0, iters: int = 500):
        self.l2 = l2
        self.step_size = step_size
        self.iters = iters

    def fit(self, matrix: np.ndarray, labels: np.ndarray):
        self.classes = _check_training_labels(labels)
        self.scale = _Standardizer(matrix)
        x = np.hstack([self.scale(matrix), np.ones((matrix.shape[0], 1))])
        self.weights = np.stack([self._fit_binary(x, (labels == c).astype(float)) for c in self.classes])
        return self

    def _fit_binary(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        w = np.zeros(x.shape[1])
        step = self.step_size
        loss, grad = logistic_loss_grad(w, x, y, self.l2)
        for _ in range(self.iters):
            candidate = w - step * grad
            new_loss, new_grad = logistic_loss_grad(candidate, x, y, self.l2)
            if new_loss <= loss:
                w, loss, grad = candidate, new_loss, new_grad
                step *= 1.05
            else:
                step *= 0.5
                if step < 1e-12:
                    break
        return w

    def decision_values(self, matrix: np.ndarray) -> np.ndarray:
        x = np.hstack([self.scale(matrix), np.ones((matrix.shape[0], 1))])
        return x @ self.weights.T

    def predict(self, matrix: np.ndarray) -> np.ndarray:
        return self.classes[self.decision_values(matrix).argmax(axis=1)]


class KnnClassifier:
    """Majority vote over the k nearest rows in Euclidean distance.

    Neighbor ties at equal distance and vote ties both resolve to the lower
    index / label for determinism.
    """

    def __init__(self, k: int = 5):
        self.k = k

    def fit(self, matrix: np.ndarray, labels: np.ndarray):
        _check_training_labels(labels)
        self.train = matrix.copy()
        self.labels = labels.copy()
        return self

    def predict(self, matrix: np.ndarray) -> np.ndarray:
        k = min(self.k, self.train.shape[0])
        out = np.empty(matrix.shape[0], dtype=np.int64)
        dists = _squared_distances(matrix, self.train)
        for i in range(matrix.shape[0]):
            # stable sort keeps lower training indices first among distance ties
            order = np.argsort(dists[i], kind="stable")[:k]
            votes = self.labels[order]
            values, counts = np.unique(votes, return_counts=True)
            out[i] = values[counts.argmax()]
        return out


class FdaClassifier:
    """Fisher discriminant: within-class scatter direction, midpoint threshold.

    The scatter matrix is regularized with a trace-scaled identity because
    reward vectors are often collinear.  Multiclass uses one-vs-rest on the
    projected score.
    """

    def __init__(self, regularization: float = 1e-6):
        self.regularization = regularization

    def fit(self, matrix: np.ndarray, labels: np.ndarray):
        self.classes = _check_training_labels(labels)
        self.models = []
        for c in self.classes:
            mask = labels == c
            self.models.append(self._fit_binary(matrix[mask], matrix[~mask]))
        return self

    def _fit_binary(self, positive: np.ndarray, negative: np.ndarray):
        mean_pos = positive.mean(axis=0)
        mean_neg = negative.mean(axis=0)
        scatter = np.zeros((positive.shape[1], positive.shape[1]))
        for block, mean in ((positive, mean_pos), (negative, mean_neg)):
            centered = block - mean
            scatter += centered.T @ centered
        trace_scale = max(np.trace(scatter) / scatter.shape[0], 1.0)
        scatter += self.regularization * trace_scale * np.eye(scatter.shape[0])
        direction = np.linalg.solve(scatter, mean_pos - mean_neg)
        threshold = direction @ (mean_pos + mean_neg) / 2.0
        return direction, threshold

    def decision_values(self, matrix: np.ndarray) -> np.ndarray:
        return np.stack([matrix @ d - t for d, t in self.models], axis=1)

    def predict(self, matrix: np.ndarray) -> np.ndarray:
        return self.classes[self.decision_values(matrix).argmax(axis=1)]


class LinearSvmClassifier:
    """Linear soft-margin SVM trained by deterministic full-batch subgradient
    descent on the hinge objective; one-vs-rest for multiclass."""

    def __init__(self, l2: float = 1e-3, iters: int = 2000):
        self.l2 = l2
        self.iters = iters

    def fit(self, matrix: np.ndarray, labels: np.ndarray):
        self.classes = _check_training_labels(labels)
        self.scale = _Standardizer(matrix)
        x = np.hstack([self.scale(matrix), np.ones((matrix.shape[0], 1))])
        self.weights = np.stack(
            [self._fit_binary(x, np.where(labels == c, 1.0, -1.0)) for c in self.classes]
        )
        return self

    def _objective_grad(self, w, x, y):
        margins = y * (x @ w)
        hinge = np.maximum(0.0, 1.0 - margins)
        penalty = np.concatenate([w[:-1], [0.0]])
        obj = float(hinge.mean()) + 0.5 * self.l2 * float(penalty @ penalty)
        active = hinge > 0
        grad = -(x[active] * y[active, None]).sum(axis=0) / x.shape[0] + self.l2 * penalty
        return obj, grad

    def _fit_binary(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        w = np.zeros(x.shape[1])
        best_w, best_obj = w.copy(), np.inf
        for t in range(1, self.iters + 1):
            obj, grad = self._objective_grad(w, x, y)
            if obj < best_obj:
                best_obj, best_w = obj, w.copy()
            w = w - (1.0 / (self.l2 * t + 10.0)) * grad
        obj, _ = self._objective_grad(w, x, y)
        return w if obj < best_obj else best_w

    def decision_values(self, matrix: np.ndarray) -> np.ndarray:
        x = np.hstack([self.scale(matrix), np.ones((matrix.shape[0], 1))])
        return x @ self.weights.T

    def predict(self, matrix: np.ndarray) -> np.ndarray:
        return self.classes[self.decision_values(matrix).argmax(axis=1)]


def train_classifier(kind: str, train: Dataset, hyper: dict | None = None):
    """Build and fit one of SVM / KNN / FDA / LR on a labeled dataset."""
    if train.labels is None:
        raise ValidationError("training requires labels")
    hyper = dict(hyper or {})
    if kind == KIND_KNN:
        model = KnnClassifier(**hyper)
    elif kind == KIND_LR:
        model = LogisticRegressionClassifier(**hyper)
    elif kind == KIND_FDA:
        model = FdaClassifier(**hyper)
    elif kind == KIND_SVM:
        model = LinearSvmClassifier(**hyper)
    else:
        raise ValidationError(f"unknown classifier kind {kind!r}")
    return model.fit(train.matrix, train.labels)


def predict(classifier, rows: np.ndarray) -> np.ndarray:
    return classifier.predict(np.asarray(rows, dtype=np.float64))


# -- Cross-validation --------------------------------------------------------


@dataclass(frozen=True)
class CvResult:
    mean: float
    std: float
    fold_accuracies: tuple[float, ...]


def _stratified_folds(labels: np.ndarray, folds: int, rng: np.random.Generator) -> np.ndarray:
    assignment = np.empty(labels.shape[0], dtype=np.int64)
    offset = 0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        for i, row in enumerate(idx):
            assignment[row] = (offset + i) % folds
        offset += idx.shape[0]
    return assignment


def cross_validate(
    data: Dataset,
    kind: str,
    folds: int = 10,
    replications: int = 1,
    seed=0,
    hyper: dict | None = None,
) -> CvResult:
    """Stratified k-fold accuracy, reshuffled per replication.

    Reports mean and standard deviation across all folds x replications.
    """
    if data.labels is None:
        raise ValidationError("cross-validation requires labels")
    if folds < 2 or folds > data.num_rows:
        raise ValidationError("folds must lie in 2..num_rows")
    accuracies = []
    for rng in spawn_generators(seed, replications):
        assignment = _stratified_folds(data.labels, folds, rng)
        for fold in range(folds):
            test_mask = assignment == fold
            if not test_mask.any():
                raise ValidationError("a fold received no rows; reduce folds")
            train_labels = data.labels[~test_mask]
            if np.unique(train_labels).shape[0] < 2:
                raise ValidationError("stratification infeasible: a training split lost a class")
            model = train_classifier(
                kind, Dataset(data.matrix[~test_mask], train_labels), hyper
            )
            predicted = model.predict(data.matrix[test_mask])
            accuracies.append(float(np.mean(predicted == data.labels[test_mask])))
    accuracies = np.asarray(accuracies)
    return CvResult(float(accuracies.mean()), float(accuracies.std()), tuple(accuracies))
