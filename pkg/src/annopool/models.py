"""Binary probabilistic classifiers producing p(positive | x).

Three kinds: a native logistic regression (full-batch gradient descent,
zero-initialized, so training is deterministic without a seed), a
multinomial naive Bayes over raw counts, and an adapter that serves
externally computed scores from a file.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import sparse
from scipy.special import expit

from .features import FeatureVector


@dataclass
class TrainingConfig:
    learning_rate: float = 0.1
    epochs: int = 100
    l2_lambda: float = 1e-4
    laplace_alpha: float = 1.0  # naive Bayes only

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be a positive integer")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be nonnegative")
        if self.laplace_alpha <= 0:
            raise ValueError("laplace_alpha must be positive")


def stack_features(vectors: Sequence[FeatureVector]):
    """Stack feature vectors into one matrix (CSR when all sparse)."""
    if not vectors:
        raise ValueError("no feature vectors")
    dim = vectors[0].dimension
    if any(v.dimension != dim for v in vectors):
        raise ValueError("mixed feature dimensions")
    if any(v.dense is not None for v in vectors):
        return np.vstack([v.to_dense() for v in vectors])
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for v in vectors:
        indices.extend(v.indices)
        data.extend(v.weights)
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.asarray(data), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(vectors), dim),
    )


def lr_loss(w: np.ndarray, b: float, X, y: np.ndarray, l2_lambda: float) -> float:
    """Mean negative log-likelihood plus (l2/2)||w||^2 (bias unregularized)."""
    z = np.asarray(X @ w).ravel() + b
    # log(1 + exp(-|z|)) form is stable for large |z|
    nll = np.mean(np.logaddexp(0.0, z) - y * z)
    return float(nll + 0.5 * l2_lambda * float(w @ w))


def lr_gradient(w: np.ndarray, b: float, X, y: np.ndarray, l2_lambda: float):
    z = np.asarray(X @ w).ravel() + b
    err = expit(z) - y
    grad_w = np.asarray(X.T @ err).ravel() / len(y) + l2_lambda * w
    grad_b = float(err.mean())
    return grad_w, grad_b


@dataclass
class LogisticRegressionModel:
    kind = "logistic_regression"
    weights: np.ndarray
    bias: float
    dimension: int

    def predict(self, vec: FeatureVector) -> float:
        if vec.dimension != self.dimension:
            raise ValueError("feature space mismatch")
        if vec.dense is not None:
            z = float(self.weights @ vec.dense) + self.bias
        else:
            z = self.bias
            if vec.indices:
                z += float(self.weights[list(vec.indices)] @ np.asarray(vec.weights))
        return float(expit(z))

    def predict_matrix(self, X) -> np.ndarray:
        return expit(np.asarray(X @ self.weights).ravel() + self.bias)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "weights": self.weights.tolist(),
                "bias": self.bias, "dimension": self.dimension}

    @classmethod
    def from_dict(cls, d: dict) -> "LogisticRegressionModel":
        return cls(weights=np.asarray(d["weights"], dtype=float),
                   bias=float(d["bias"]), dimension=int(d["dimension"]))


def fit_logistic(X, y: np.ndarray, config: TrainingConfig) -> LogisticRegressionModel:
    """Deterministic full-batch gradient descent from zero weights."""
    y = np.asarray(y, dtype=float)
    if set(np.unique(y)) != {0.0, 1.0}:
        raise ValueError("degenerate training set: need both classes")
    dim = X.shape[1]
    w = np.zeros(dim)
    b = 0.0
    for _ in range(config.epochs):
        grad_w, grad_b = lr_gradient(w, b, X, y, config.l2_lambda)
        w = w - config.learning_rate * grad_w
        b = b - config.learning_rate * grad_b
    if not (np.all(np.isfinite(w)) and math.isfinite(b)):
        raise ValueError("training diverged to non-finite parameters")
    return LogisticRegressionModel(weights=w, bias=b, dimension=dim)


@dataclass
class NaiveBayesModel:
    kind = "naive_bayes"
    log_prior: dict[int, float]          # class -> log prior; absent class omitted
    feature_log_prob: dict[int, np.ndarray]
    dimension: int

    def _log_joint(self, counts: np.ndarray) -> dict[int, float]:
        return {c: self.log_prior[c] + float(counts @ self.feature_log_prob[c])
                for c in self.log_prior}

    def predict(self, vec: FeatureVector) -> float:
        if vec.dimension != self.dimension:
            raise ValueError("feature space mismatch")
        joint = self._log_joint(vec.to_dense())
        if 1 not in joint:
            return 0.0
        if 0 not in joint:
            return 1.0
        # p1 = e^j1 / (e^j0 + e^j1), computed stably
        return float(expit(joint[1] - joint[0]))

    def predict_both(self, vec: FeatureVector) -> tuple[float, float]:
        """(p0, p1), each computed stably from the log joint."""
        joint = self._log_joint(vec.to_dense())
        if 1 not in joint:
            return 1.0, 0.0
        if 0 not in joint:
            return 0.0, 1.0
        return float(expit(joint[0] - joint[1])), float(expit(joint[1] - joint[0]))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dimension": self.dimension,
                "log_prior": {str(c): v for c, v in self.log_prior.items()},
                "feature_log_prob": {str(c): v.tolist() for c, v in self.feature_log_prob.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "NaiveBayesModel":
        return cls(
            log_prior={int(c): float(v) for c, v in d["log_prior"].items()},
            feature_log_prob={int(c): np.asarray(v, dtype=float)
                              for c, v in d["feature_log_prob"].items()},
            dimension=int(d["dimension"]),
        )


def fit_naive_bayes(X, y: np.ndarray, config: TrainingConfig) -> NaiveBayesModel:
    """Multinomial NB over raw counts with Laplace smoothing."""
    y = np.asarray(y, dtype=int)
    n = len(y)
    if n == 0:
        raise ValueError("empty training set")
    dim = X.shape[1]
    alpha = config.laplace_alpha
    dense = X.toarray() if sparse.issparse(X) else np.asarray(X, dtype=float)
    log_prior: dict[int, float] = {}
    feature_log_prob: dict[int, np.ndarray] = {}
    for c in (0, 1):
        mask = y == c
        n_c = int(mask.sum())
        if n_c == 0:
            continue
        log_prior[c] = math.log(n_c / n)
        counts = dense[mask].sum(axis=0)
        total = float(counts.sum())
        feature_log_prob[c] = np.log((counts + alpha) / (total + alpha * dim))
    return NaiveBayesModel(log_prior=log_prior, feature_log_prob=feature_log_prob,
                           dimension=dim)


@dataclass
class ExternalScoresModel:
    """Adapter over precomputed doc_id -> score; scores trusted as
    probabilities, no recalibration."""

    kind = "external_scores"
    scores: dict[str, float]

    def predict(self, doc_id: str) -> float:
        if doc_id not in self.scores:
            raise KeyError(f"no score for document {doc_id!r}")
        return self.scores[doc_id]

    def get(self, doc_id: str):
        return self.scores.get(doc_id)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "scores": self.scores}

    @classmethod
    def from_dict(cls, d: dict) -> "ExternalScoresModel":
        return cls(scores={str(k): float(v) for k, v in d["scores"].items()})


BinaryClassifier = Union[LogisticRegressionModel, NaiveBayesModel, ExternalScoresModel]


def train(kind: str, examples: Sequence[tuple[FeatureVector, int]],
          config: TrainingConfig | None = None) -> BinaryClassifier:
    config = config or TrainingConfig()
    if not examples:
        raise ValueError("no training examples")
    X = stack_features([v for v, _ in examples])
    y = np.asarray([label for _, label in examples])
    if kind == "logistic_regression":
        return fit_logistic(X, y, config)
    if kind == "naive_bayes":
        return fit_naive_bayes(X, y, config)
    raise ValueError(f"unknown trainable kind {kind!r}")


def load_external_scores(path) -> ExternalScoresModel:
    """JSON Lines of {"doc_id", "score"}; scores must lie in [0, 1]."""
    scores: dict[str, float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            doc_id = str(row["doc_id"])
            score = float(row["score"])
            if not (0.0 <= score <= 1.0):
                raise ValueError(f"score out of [0, 1] for doc_id {doc_id!r}: {score}")
            if doc_id in scores:
                raise ValueError(f"duplicate score for doc_id {doc_id!r}")
            scores[doc_id] = score
    return ExternalScoresModel(scores=scores)


def save_model(model: BinaryClassifier, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh)


def load_model(path) -> BinaryClassifier:
    with open(path, "r", encoding="utf-8") as fh:
        d = json.load(fh)
    kind = d.get("kind")
    for cls in (LogisticRegressionModel, NaiveBayesModel, ExternalScoresModel):
        if kind == cls.kind:
            return cls.from_dict(d)
    raise ValueError(f"unknown model kind {kind!r}")
