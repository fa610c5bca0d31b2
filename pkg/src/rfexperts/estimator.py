"""Scikit-learn estimator facade over the expert training core.

Lets an expert participate in sklearn pipelines, grid search and scoring
while the functional core in :mod:`rfexperts.expert` stays the single
source of truth for the numerics.
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import expert
from .errors import ParameterError


class MlpExpertClassifier(BaseEstimator, ClassifierMixin):
    """Binary MLP classifier with two ReLU layers and a sigmoid head.

    Parameters mirror :class:`rfexperts.expert.TrainConfig`.  ``fit``
    optionally takes an evaluation set; without one the training set
    doubles as the accuracy-curve set.
    """

    def __init__(
        self,
        hidden_sizes: Tuple[int, int] = expert.DEFAULT_HIDDEN_SIZES,
        epochs: int = expert.DEFAULT_EPOCHS,
        learning_rate: float = expert.DEFAULT_LEARNING_RATE,
        batch_size: int = expert.DEFAULT_BATCH_SIZE,
        seed: int = 0,
        early_stop_patience: Optional[int] = None,
        threshold: float = expert.DECISION_THRESHOLD,
    ):
        self.hidden_sizes = hidden_sizes
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.seed = seed
        self.early_stop_patience = early_stop_patience
        self.threshold = threshold

    def fit(self, X, y, eval_set: Optional[Tuple[np.ndarray, np.ndarray]] = None):
        X, y = check_X_y(X, y)
        classes = np.unique(y)
        if not np.all(np.isin(classes, (0, 1))):
            raise ParameterError("labels must be binary 0/1")
        config = expert.TrainConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            hidden_sizes=tuple(self.hidden_sizes),
            seed=self.seed,
            early_stop_patience=self.early_stop_patience,
        )
        if eval_set is None:
            eval_X, eval_y = X, y
        else:
            eval_X, eval_y = check_X_y(*eval_set)
        self.weights_, self.history_ = expert.train_arrays(
            config, X, y.astype(float), eval_X, eval_y.astype(float)
        )
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "weights_")
        X = check_array(X)
        p1 = expert.forward_batch(self.weights_, X)
        return np.column_stack([1.0 - p1, p1])

    def decision_function(self, X) -> np.ndarray:
        return self.predict_proba(X)[:, 1]

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= self.threshold).astype(int)
