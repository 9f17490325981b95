"""The capacity ladder: logistic regression, gradient boosting and MLPs."""

from .base import DEFAULT_HYPERPARAMS, FittedModel, ModelSpec, Rung, sigmoid
from .gbm import train_gbm
from .logistic import fit_logistic_arrays, train_logistic
from .mlp import DivergenceError, loss_and_grads, train_mlp
from .predict import decision_function, predict_proba


def train(spec: ModelSpec, data, env: str = "A") -> FittedModel:
    """Train any rung from a :class:`ModelSpec`."""
    hp = spec.hyperparams
    if spec.rung.family == "logistic":
        return train_logistic(
            data, env, spec.feature_subset, hp["l2"], spec.seed, spec.rung, hp["tol"], hp["max_iter"]
        )
    if spec.rung.family == "gbm":
        return train_gbm(data, env, hp["estimators"], hp["depth"], hp["lr"], spec.seed, spec.feature_subset)
    return train_mlp(
        data, env, hp["layers"], hp["l2"], hp["lr"], hp["epochs"], hp["batch"], spec.seed, spec.rung, spec.feature_subset
    )


__all__ = [
    "DEFAULT_HYPERPARAMS",
    "DivergenceError",
    "FittedModel",
    "ModelSpec",
    "Rung",
    "decision_function",
    "fit_logistic_arrays",
    "loss_and_grads",
    "predict_proba",
    "sigmoid",
    "train",
    "train_gbm",
    "train_logistic",
    "train_mlp",
]
