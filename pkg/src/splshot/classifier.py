"""Shallow softmax classifier with a scikit-learn estimator surface.

``ShallowNetClassifier`` wraps the hand-written network core so the model
composes with the wider ecosystem (get_params/set_params, fit/predict/
predict_proba/score) while exposing the domain operations the selection
pipeline needs: head replacement for a new class set, warm-started
fine-tuning, per-label confidence scoring, and hidden-layer embeddings.

Labels may be arbitrary integers; internally they map to head indices via
the sorted ``classes_`` array, exactly as scikit-learn classifiers do.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .network import NetParams, TrainConfig, forward, init_head, init_params, softmax, train
from .seeding import derive_seed

__all__ = ["ShallowNetClassifier"]


def _check_matrix(X, d_feat=None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"expected a vector or a 2-d matrix, got ndim={X.ndim}")
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains non-finite values")
    if d_feat is not None and X.shape[1] != d_feat:
        raise ValueError(f"input has {X.shape[1]} features, expected {d_feat}")
    return X


class ShallowNetClassifier(BaseEstimator, ClassifierMixin):
    """Two-layer rectifier network trained with Adam on cross-entropy.

    Parameters
    ----------
    hidden_dim : width of the single hidden layer.
    learning_rate, batch_size, epochs, beta1, beta2, epsilon :
        optimizer settings used by :meth:`fit`.
    seed : root seed; weight init and epoch shuffling derive from it.
    """

    def __init__(
        self,
        hidden_dim: int = 64,
        learning_rate: float = 1e-3,
        batch_size: int = 32,
        epochs: int = 600,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
        seed: int = 0,
    ):
        self.hidden_dim = hidden_dim
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.seed = seed

    # -- fitting -----------------------------------------------------------

    def train_config(self, epochs: int | None = None, shuffle_seed: int | None = None) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs if epochs is None else epochs,
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.epsilon,
            shuffle_seed=derive_seed(self.seed, "shuffle") if shuffle_seed is None else shuffle_seed,
        )

    def fit(self, X, y) -> "ShallowNetClassifier":
        """Initialize fresh weights from the seed and train for `epochs`."""
        X = _check_matrix(X)
        y = np.asarray(y, dtype=np.int64)
        if y.shape != (X.shape[0],):
            raise ValueError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least 2 classes")
        self.n_features_in_ = X.shape[1]
        params = init_params(
            self.n_features_in_, self.hidden_dim, len(self.classes_), derive_seed(self.seed, "init")
        )
        self.params_ = train(params, X, y_idx, self.train_config())
        return self

    def fine_tune(self, X, y, cfg: TrainConfig) -> "ShallowNetClassifier":
        """Continue training from the current weights under an explicit config.

        Optimizer moments start fresh; weights carry over. Labels must
        already belong to ``classes_``.
        """
        self._require_fitted()
        X = _check_matrix(X, self.n_features_in_)
        y_idx = self._label_indices(np.asarray(y, dtype=np.int64))
        self.params_ = train(self.params_, X, y_idx, cfg)
        return self

    def adapt_head(self, novel_classes, seed: int) -> "ShallowNetClassifier":
        """Return a new classifier with the hidden layer copied verbatim and a
        freshly initialized output layer sized to the novel class set."""
        self._require_fitted()
        novel = np.unique(np.asarray(list(novel_classes), dtype=np.int64))
        if len(novel) < 2:
            raise ValueError("need at least 2 novel classes")
        clone = ShallowNetClassifier(**self.get_params())
        w2, b2 = init_head(self.params_.hidden_dim, len(novel), seed)
        clone.params_ = NetParams(self.params_.w1.copy(), self.params_.b1.copy(), w2, b2)
        clone.classes_ = novel
        clone.n_features_in_ = self.n_features_in_
        return clone

    # -- inference ---------------------------------------------------------

    def decision_function(self, X) -> np.ndarray:
        """Raw logits, one column per entry of ``classes_``."""
        self._require_fitted()
        X = _check_matrix(X, self.n_features_in_)
        logits, _ = forward(self.params_, X)
        return logits

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]

    def confidence(self, X, label: int) -> np.ndarray:
        """Softmax probability assigned to `label` for each row of X."""
        col = self._label_indices(np.asarray([label], dtype=np.int64))[0]
        return self.predict_proba(X)[:, col]

    def hidden_embedding(self, X) -> np.ndarray:
        """Activations of the last hidden layer, one row per input."""
        self._require_fitted()
        X = _check_matrix(X, self.n_features_in_)
        _, hidden = forward(self.params_, X)
        return hidden

    # -- helpers -----------------------------------------------------------

    def _require_fitted(self) -> None:
        if not hasattr(self, "params_"):
            raise NotFittedError("classifier has no weights; call fit or adapt_head first")

    def _label_indices(self, y: np.ndarray) -> np.ndarray:
        self._require_fitted()
        idx = np.searchsorted(self.classes_, y)
        bad = (idx >= len(self.classes_)) | (self.classes_[np.clip(idx, 0, len(self.classes_) - 1)] != y)
        if np.any(bad):
            raise ValueError(f"labels {np.unique(y[bad])} are not in classes_ {self.classes_}")
        return idx
