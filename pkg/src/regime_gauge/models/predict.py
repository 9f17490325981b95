from __future__ import annotations

import numpy as np

from ..datasets import DataError, TabularDataset
from .base import FittedModel, sigmoid
from .gbm import gbm_logit
from .mlp import forward_logits


def _design(model: FittedModel, features: TabularDataset | np.ndarray) -> np.ndarray:
    if isinstance(features, TabularDataset):
        if features.feature_names != model.feature_names:
            raise DataError("dataset columns do not match the columns the model was trained on")
        X = features.features
    else:
        X = np.asarray(features, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
    if X.ndim != 2 or X.shape[1] != len(model.feature_names):
        raise DataError(f"expected {len(model.feature_names)} feature columns, got shape {X.shape}")
    # the training-environment standardizer is reused as-is, never refitted
    return model.standardizer.transform(X)[:, list(model.columns)]


def decision_function(model: FittedModel, features: TabularDataset | np.ndarray) -> np.ndarray:
    Xs = _design(model, features)
    family = model.spec.rung.family
    if family == "logistic":
        return Xs @ model.params["coef"] + model.params["intercept"]
    if family == "mlp":
        return forward_logits(model.params["weights"], model.params["biases"], Xs)
    return gbm_logit(model.params, Xs)


def predict_proba(model: FittedModel, features: TabularDataset | np.ndarray) -> np.ndarray:
    """Probability of label 1 per row.

    ``features`` is a dataset with the training schema or an array with one
    column per training feature (before any subset is applied).
    """
    return sigmoid(decision_function(model, features))
