"""One-vs-rest linear classification with cross-validated cost selection.

Training wraps liblinear's dual coordinate-descent solver for the
L2-regularized hinge loss (via scikit-learn), with a fixed shuffling seed,
tolerance 1e-4 and at most 1000 epochs so that identical inputs always give
identical models.  The regularization cost is chosen from a grid by mean
accuracy over seeded stratified cross-validation folds.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.svm import LinearSVC


@dataclass(frozen=True)
class ExperimentConfig:
    train_per_class: int = 100
    splits: int = 25
    cv_folds: int = 10
    cost_grid: tuple = (0.01, 0.1, 1.0, 10.0, 100.0)
    seed: int = 0

    def __post_init__(self):
        if self.train_per_class < self.cv_folds:
            raise ValueError("train_per_class must be >= cv_folds")
        if self.splits < 1 or self.cv_folds < 2:
            raise ValueError("need splits >= 1 and cv_folds >= 2")
        if not self.cost_grid or any(c <= 0 for c in self.cost_grid):
            raise ValueError("cost_grid must contain positive values")


@dataclass(frozen=True)
class ClassifierModel:
    """One weight vector and bias per class; prediction is the score argmax.

    Classes are kept sorted, and argmax takes the first maximum, so score
    ties resolve to the lexicographically smallest class name.
    """

    weights: np.ndarray  # (C, F)
    biases: np.ndarray  # (C,)
    classes: tuple
    cost: float

    def scores(self, features):
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        return x @ self.weights.T + self.biases

    def predict(self, features):
        idx = self.scores(features).argmax(axis=1)
        return np.asarray(self.classes, dtype=object)[idx]


def _fit_ovr(features, labels, classes, cost):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        svc = LinearSVC(C=cost, loss="hinge", dual=True, tol=1e-4,
                        max_iter=1000, random_state=0)
        svc.fit(features, labels)
    if len(classes) == 2:
        weights = np.vstack([-svc.coef_, svc.coef_])
        biases = np.concatenate([-svc.intercept_, svc.intercept_])
    else:
        weights = svc.coef_.copy()
        biases = svc.intercept_.copy()
    return ClassifierModel(weights=weights, biases=biases,
                           classes=tuple(classes), cost=float(cost))


def _stratified_folds(labels, n_folds, seed):
    """Deterministic stratified fold ids, one per sample."""
    rng = np.random.default_rng(seed)
    labels = np.asarray(labels)
    fold = np.empty(labels.shape[0], dtype=np.intp)
    for cls in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        fold[idx] = np.arange(idx.size) % n_folds
    return fold


def train_classifier(features, labels, cfg):
    """Cross-validate the cost grid, then refit on all data at the best cost.

    Ties in CV accuracy resolve to the earliest grid entry.
    """
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    y = np.asarray(labels)
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("training needs at least 2 classes")
    counts = np.array([(y == c).sum() for c in classes])
    if counts.min() < cfg.cv_folds:
        raise ValueError(
            f"every class needs >= cv_folds={cfg.cv_folds} examples, min is {counts.min()}"
        )
    fold = _stratified_folds(y, cfg.cv_folds, cfg.seed)
    cv_scores = []
    for cost in cfg.cost_grid:
        accs = []
        for f in range(cfg.cv_folds):
            train, val = fold != f, fold == f
            model = _fit_ovr(x[train], y[train], classes, cost)
            accs.append(float(np.mean(model.predict(x[val]) == y[val])))
        cv_scores.append(float(np.mean(accs)))
    best_cost = cfg.cost_grid[int(np.argmax(cv_scores))]
    return _fit_ovr(x, y, classes, best_cost)


def per_class_accuracy(y_true, y_pred, classes=None):
    """Accuracy per class, for the classes present in y_true."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if classes is None:
        classes = np.unique(y_true)
    rates = {}
    for cls in classes:
        mask = y_true == cls
        if mask.any():
            rates[str(cls)] = float(np.mean(y_pred[mask] == cls))
    return rates


def evaluate(model, features, labels):
    """Average recognition rate: mean over classes of per-class accuracy."""
    y = np.asarray(labels)
    if y.size == 0:
        raise ValueError("evaluate needs a nonempty test set")
    unknown = set(map(str, np.unique(y))) - set(map(str, model.classes))
    if unknown:
        raise ValueError(f"test labels outside the trained classes: {sorted(unknown)}")
    rates = per_class_accuracy(y, model.predict(features))
    return float(np.mean(list(rates.values())))
