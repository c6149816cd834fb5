"""
Trainable binary classifiers: Gaussian Naive Bayes, logistic regression, linear SVM and a small MLP.

Every model exposes a real-valued decision (log-odds or signed margin) and a
positive-class probability obtained by logistic squashing of that decision.
"""

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, Mapping, Tuple

import numpy as np
from scipy.special import expit

from vbd_workbench.dataset import LabeledDataset
from vbd_workbench.exceptions import TrainingError, ValidationError
from vbd_workbench.utils import derive_seed, params_from_json, params_to_json, relative_error

logger = logging.getLogger("vbd-workbench.models")

KINDS = ("naive_bayes", "logistic", "linear_svm", "mlp")
GRADIENT_KINDS = ("logistic", "linear_svm", "mlp")


@dataclass(frozen=True)
class ClassifierSpec:
    """Classifier kind and training hyperparameters."""

    kind: str = "logistic"
    learning_rate: float = 0.1
    epochs: int = 200
    batch_size: int = 32
    l2: float = 1e-4
    hidden_sizes: Tuple[int, ...] = (16,)
    momentum: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"kind: unknown classifier '{self.kind}'; expected one of {', '.join(KINDS)}")
        if not self.learning_rate > 0:
            raise ValidationError(f"learning_rate must be positive, got {self.learning_rate}")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValidationError(f"epochs must be an integer >= 1, got {self.epochs}")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ValidationError(f"batch_size must be an integer >= 1, got {self.batch_size}")
        if self.l2 < 0:
            raise ValidationError(f"l2 must be >= 0, got {self.l2}")
        if not 0 <= self.momentum < 1:
            raise ValidationError(f"momentum must be in [0, 1), got {self.momentum}")
        hidden = tuple(int(h) for h in self.hidden_sizes)
        if self.kind == "mlp" and (not hidden or min(hidden) < 1):
            raise ValidationError(f"hidden_sizes must be positive widths, got {self.hidden_sizes}")
        object.__setattr__(self, "hidden_sizes", hidden)

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "ClassifierSpec":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(payload) - known)
        if unknown:
            raise ValidationError(f"classifier: unknown field(s) {', '.join(unknown)}")
        values = dict(payload)
        if "hidden_sizes" in values:
            values["hidden_sizes"] = tuple(values["hidden_sizes"])
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload["hidden_sizes"] = list(self.hidden_sizes)
        return payload


@dataclass(frozen=True, eq=False)
class TrainedClassifier:
    """Fitted model parameters."""

    kind: str
    input_dim: int
    params: Dict[str, np.ndarray] = field(repr=False)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "input_dim": self.input_dim, "parameters": params_to_json(self.params)}

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "TrainedClassifier":
        if payload.get("kind") not in KINDS:
            raise ValidationError(f"kind: unknown classifier '{payload.get('kind')}'")
        return cls(payload["kind"], int(payload["input_dim"]), params_from_json(payload["parameters"]))


def _weight_names(params: Mapping[str, np.ndarray]):
    return [name for name in params if name.startswith("W") or name == "w"]


def _mlp_layers(params: Mapping[str, np.ndarray]) -> int:
    return sum(1 for name in params if name.startswith("W"))


def _mlp_forward(params: Mapping[str, np.ndarray], X: np.ndarray):
    activations = [X]
    pre_activations = []
    layers = _mlp_layers(params)
    a = X
    for i in range(layers):
        z = a @ params[f"W{i}"] + params[f"b{i}"]
        pre_activations.append(z)
        a = np.maximum(z, 0.0) if i < layers - 1 else z
        activations.append(a)
    return a[:, 0], activations, pre_activations


def _logits(kind: str, params: Mapping[str, np.ndarray], X: np.ndarray) -> np.ndarray:
    if kind == "naive_bayes":
        mean, var, log_prior = params["mean"], params["var"], params["log_prior"]
        log_likelihood = -0.5 * (np.log(2.0 * np.pi * var)[None, :, :]
                                 + (X[:, None, :] - mean[None, :, :]) ** 2 / var[None, :, :]).sum(axis=2)
        joint = log_likelihood + log_prior[None, :]
        return joint[:, 1] - joint[:, 0]
    if kind in ("logistic", "linear_svm"):
        return X @ params["w"] + params["b"][0]
    return _mlp_forward(params, X)[0]


def loss_and_gradient(kind: str, params: Mapping[str, np.ndarray], X: np.ndarray, y: np.ndarray,
                      l2: float = 0.0) -> Tuple[float, Dict[str, np.ndarray]]:
    """
    Mean training loss and its gradient for the gradient-trained kinds.

    logistic and mlp use binary cross-entropy on the logit, linear_svm uses the
    hinge loss on labels mapped to {-1, +1}. An L2 penalty 0.5 * l2 * ||W||^2
    applies to weights only.

    Args:
        kind: "logistic", "linear_svm" or "mlp"
        params: Named parameter arrays
        X: Batch of inputs (rows)
        y: Batch labels in {0, 1}
        l2: L2 regularization strength

    Returns:
        (loss, gradients keyed like params)
    """
    batch = X.shape[0]
    if kind == "mlp":
        z, activations, pre_activations = _mlp_forward(params, X)
    else:
        z = X @ params["w"] + params["b"][0]

    if kind == "linear_svm":
        signs = 2.0 * y - 1.0
        margins = signs * z
        loss = float(np.maximum(0.0, 1.0 - margins).mean())
        dz = np.where(margins < 1.0, -signs, 0.0) / batch
    else:
        loss = float((np.logaddexp(0.0, z) - y * z).mean())
        dz = (expit(z) - y) / batch

    grads: Dict[str, np.ndarray] = {}
    if kind == "mlp":
        layers = _mlp_layers(params)
        delta = dz[:, None]
        for i in reversed(range(layers)):
            grads[f"W{i}"] = activations[i].T @ delta
            grads[f"b{i}"] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ params[f"W{i}"].T) * (pre_activations[i - 1] > 0.0)
    else:
        grads["w"] = X.T @ dz
        grads["b"] = np.array([dz.sum()])

    for name in _weight_names(params):
        loss += 0.5 * l2 * float(np.sum(params[name] ** 2))
        grads[name] = grads[name] + l2 * params[name]
    return loss, grads


def _init_params(spec: ClassifierSpec, input_dim: int) -> Dict[str, np.ndarray]:
    if spec.kind in ("logistic", "linear_svm"):
        return {"w": np.zeros(input_dim), "b": np.zeros(1)}

    rng = np.random.default_rng(derive_seed(spec.seed, "init"))
    sizes = (input_dim,) + spec.hidden_sizes + (1,)
    params = {}
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        limit = 1.0 / np.sqrt(fan_in)
        params[f"W{i}"] = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        params[f"b{i}"] = np.zeros(fan_out)
    return params


def _fit_gradient(spec: ClassifierSpec, X: np.ndarray, y: np.ndarray) -> Dict[str, np.ndarray]:
    """Mini-batch gradient descent with fixed learning rate and optional momentum."""
    params = _init_params(spec, X.shape[1])
    velocity = {name: np.zeros_like(value) for name, value in params.items()}
    rng = np.random.default_rng(derive_seed(spec.seed, "shuffle"))
    n = X.shape[0]

    for epoch in range(1, spec.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, spec.batch_size):
            batch = order[start:start + spec.batch_size]
            loss, grads = loss_and_gradient(spec.kind, params, X[batch], y[batch], spec.l2)
            if not np.isfinite(loss):
                raise TrainingError(f"{spec.kind} training produced a non-finite loss", epoch)
            total += loss * batch.shape[0]
            for name in params:
                velocity[name] = spec.momentum * velocity[name] - spec.learning_rate * grads[name]
                params[name] = params[name] + velocity[name]
        logger.debug(f"{spec.kind} epoch {epoch}: loss={total / n:.6f}")
    return params


def _fit_naive_bayes(X: np.ndarray, y: np.ndarray) -> Dict[str, np.ndarray]:
    """Closed-form Gaussian Naive Bayes with variance smoothing 1e-9 * max feature variance."""
    max_variance = float(X.var(axis=0).max())
    epsilon = 1e-9 * max_variance if max_variance > 0 else 1e-9
    means, variances, log_priors = [], [], []
    for label in (0, 1):
        members = X[y == label]
        means.append(members.mean(axis=0))
        variances.append(members.var(axis=0) + epsilon)
        log_priors.append(np.log(members.shape[0] / X.shape[0]))
    return {"mean": np.array(means), "var": np.array(variances), "log_prior": np.array(log_priors)}


def fit(spec: ClassifierSpec, data: LabeledDataset) -> TrainedClassifier:
    """
    Train a classifier on a labeled dataset.

    Args:
        spec: Classifier kind and hyperparameters
        data: Training data with both classes present

    Returns:
        TrainedClassifier; identical (spec, data) always give identical parameters
    """
    positives, negatives = data.class_counts()
    if positives == 0 or negatives == 0:
        raise ValidationError("training data must contain both classes")

    X = np.asarray(data.features, dtype=np.float64)
    y = np.asarray(data.labels, dtype=np.float64)
    if spec.kind == "naive_bayes":
        params = _fit_naive_bayes(X, y)
    else:
        params = _fit_gradient(spec, X, y)

    logger.debug(f"Fitted {spec.kind} on {data.instance_count} rows of dimension {data.feature_count}")
    return TrainedClassifier(spec.kind, data.feature_count, params)


def fit_linear_svm(data: LabeledDataset, config: ClassifierSpec) -> TrainedClassifier:
    """Linear SVM: hinge loss plus L2 penalty minimized by subgradient descent."""
    return fit(replace(config, kind="linear_svm"), data)


def _as_inputs(model: TrainedClassifier, x: Any) -> Tuple[np.ndarray, bool]:
    array = np.asarray(x, dtype=np.float64)
    single = array.ndim == 1
    array = np.atleast_2d(array)
    if array.shape[1] != model.input_dim:
        raise ValidationError(f"dimension mismatch: model expects {model.input_dim} features, got {array.shape[1]}")
    return array, single


def decision_function(model: TrainedClassifier, x: Any):
    """Log-odds (naive_bayes, logistic, mlp) or signed margin (linear_svm) for one vector or a matrix."""
    X, single = _as_inputs(model, x)
    values = _logits(model.kind, model.params, X)
    return float(values[0]) if single else values


def predict_proba(model: TrainedClassifier, x: Any):
    """Probability of class 1 for one vector (float) or a matrix of rows (array)."""
    X, single = _as_inputs(model, x)
    probabilities = expit(_logits(model.kind, model.params, X))
    return float(probabilities[0]) if single else probabilities


def predict(model: TrainedClassifier, X: Any) -> np.ndarray:
    """Hard labels: 1 where P(class 1) >= 0.5."""
    return (np.atleast_1d(predict_proba(model, X)) >= 0.5).astype(np.int64)


def gradient_check(kind: str, params: Mapping[str, np.ndarray], X: np.ndarray, y: np.ndarray,
                   l2: float = 0.0, epsilon: float = 1e-6) -> float:
    """
    Compare the analytic gradient of loss_and_gradient with central finite differences.

    Returns:
        Maximum norm-based relative error over the parameter arrays
    """
    if kind not in GRADIENT_KINDS:
        raise ValidationError(f"gradient_check supports {', '.join(GRADIENT_KINDS)}, got '{kind}'")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    params = {name: np.array(value, dtype=np.float64) for name, value in params.items()}
    _, analytic = loss_and_gradient(kind, params, X, y, l2)

    worst = 0.0
    for name, value in params.items():
        numeric = np.zeros_like(value)
        for index in np.ndindex(value.shape):
            original = value[index]
            value[index] = original + epsilon
            plus, _ = loss_and_gradient(kind, params, X, y, l2)
            value[index] = original - epsilon
            minus, _ = loss_and_gradient(kind, params, X, y, l2)
            value[index] = original
            numeric[index] = (plus - minus) / (2.0 * epsilon)
        worst = max(worst, relative_error(analytic[name], numeric))
    return worst
