"""
Dense autoencoders and a minimal variational autoencoder, trained on original data or on VBD.

Hidden layers use relu and the output layer a sigmoid, so inputs are expected
to be min-max normalized to [0, 1]. Reconstruction error is the mean squared
difference between an input and its reconstruction.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import expit

from vbd_workbench.exceptions import TrainingError, ValidationError
from vbd_workbench.utils import (as_matrix, as_vector, derive_seed, params_from_json, params_to_json,
                                 relative_error, write_metadata_lines)
from vbd_workbench.vbd import ConcatConfig, split_halves, synth_large, synth_small

logger = logging.getLogger("vbd-workbench.autoencoder")

OPTIMIZERS = ("adam", "sgd")

# (original data, VBD with c=2) layer widths per benchmark dataset
ARCHITECTURES: Dict[str, Tuple[Tuple[int, ...], Tuple[int, ...]]] = {
    "wbc": ((9, 6, 4, 3, 4, 6, 9), (18, 12, 8, 6, 8, 12, 18)),
    "pima": ((8, 6, 4, 3, 4, 6, 8), (16, 12, 8, 6, 8, 12, 16)),
    "haberman": ((3, 2, 1, 2, 3), (6, 4, 2, 4, 6)),
    "blood": ((4, 3, 2, 3, 4), (8, 6, 4, 6, 8)),
    "parkinsons": ((22, 18, 12, 6, 12, 18, 22), (44, 36, 24, 12, 24, 36, 44)),
    "mnist": ((784, 128, 64, 32, 64, 128, 784), (1568, 256, 128, 64, 128, 256, 1568)),
    "fashion-mnist": ((784, 128, 64, 32, 64, 128, 784), (1568, 256, 128, 64, 128, 256, 1568)),
}

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPSILON = 1e-8

# Above this size grad_check logs that it will be slow
_GRAD_CHECK_MAX_LAYERS = 4
_GRAD_CHECK_MAX_WIDTH = 6


@dataclass(frozen=True)
class AEArchitecture:
    """Layer widths from input to output, palindromic around a unique narrowest bottleneck."""

    layer_sizes: Tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 3:
            raise ValidationError(f"layer_sizes needs at least 3 widths, got {list(sizes)}")
        if min(sizes) < 1:
            raise ValidationError(f"layer_sizes must be positive, got {list(sizes)}")
        if sizes != sizes[::-1]:
            raise ValidationError(f"layer_sizes must be palindromic, got {list(sizes)}")
        middle = len(sizes) // 2
        if len(sizes) % 2 == 0 or sizes.count(sizes[middle]) != 1 or sizes[middle] != min(sizes):
            raise ValidationError(f"layer_sizes must have a unique narrowest middle layer, got {list(sizes)}")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def bottleneck_index(self) -> int:
        return len(self.layer_sizes) // 2

    @property
    def bottleneck_dim(self) -> int:
        return self.layer_sizes[self.bottleneck_index]

    @property
    def layer_count(self) -> int:
        """Number of weight layers."""
        return len(self.layer_sizes) - 1

    @property
    def activations(self) -> Tuple[str, ...]:
        return ("relu",) * (self.layer_count - 1) + ("sigmoid",)

    @classmethod
    def preset(cls, name: str, virtual: bool = False) -> "AEArchitecture":
        """Benchmark architecture by dataset name; `virtual` selects the doubled VBD widths."""
        if name not in ARCHITECTURES:
            raise ValidationError(f"architecture: unknown preset '{name}'; expected one of "
                                  f"{', '.join(sorted(ARCHITECTURES))}")
        original, doubled = ARCHITECTURES[name]
        return cls(doubled if virtual else original)

    @classmethod
    def symmetric(cls, input_dim: int, hidden: Sequence[int]) -> "AEArchitecture":
        """Mirror encoder widths `hidden` (ending with the bottleneck) around the bottleneck."""
        hidden = tuple(int(h) for h in hidden)
        if not hidden:
            raise ValidationError("hidden must name at least the bottleneck width")
        return cls((int(input_dim),) + hidden + hidden[-2::-1] + (int(input_dim),))

    def doubled(self) -> "AEArchitecture":
        """Same shape with every width doubled, for c=2 virtual vectors."""
        return AEArchitecture(tuple(2 * s for s in self.layer_sizes))


@dataclass(frozen=True)
class TrainConfig:
    """Autoencoder training hyperparameters."""

    epochs: int = 100
    learning_rate: float = 1e-3
    batch_size: int = 32
    seed: int = 0
    validation_fraction: float = 0.2
    optimizer: str = "adam"

    def __post_init__(self):
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValidationError(f"epochs must be an integer >= 1, got {self.epochs}")
        if not self.learning_rate > 0:
            raise ValidationError(f"learning_rate must be positive, got {self.learning_rate}")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ValidationError(f"batch_size must be an integer >= 1, got {self.batch_size}")
        if not 0 < self.validation_fraction < 1:
            raise ValidationError(f"validation_fraction must be in (0, 1), got {self.validation_fraction}")
        if self.optimizer not in OPTIMIZERS:
            raise ValidationError(f"optimizer: unknown optimizer '{self.optimizer}'; "
                                  f"expected one of {', '.join(OPTIMIZERS)}")

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "TrainConfig":
        unknown = sorted(set(payload) - set(cls.__dataclass_fields__))
        if unknown:
            raise ValidationError(f"training: unknown field(s) {', '.join(unknown)}")
        return cls(**payload)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class TrainReport:
    """Per-epoch mean training loss and validation loss."""

    train_loss: Tuple[float, ...]
    val_loss: Tuple[float, ...]

    @property
    def epochs(self) -> int:
        return len(self.train_loss)

    @property
    def final_val_loss(self) -> float:
        return self.val_loss[-1]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "epoch": np.arange(1, self.epochs + 1),
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
        })

    def write_csv(self, path: str, metadata: Optional[Mapping[str, Any]] = None) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            write_metadata_lines(f, metadata)
            self.to_frame().to_csv(f, index=False, float_format="%.17g")
        logger.info(f"Wrote training report ({self.epochs} epochs) to {path}")


def _stack(params: Mapping[str, np.ndarray], prefix: str, count: int) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    return ([params[f"{prefix}W{i}"] for i in range(count)],
            [params[f"{prefix}b{i}"] for i in range(count)])


@dataclass(frozen=True, eq=False)
class AEModel:
    """Autoencoder weights W0..W{L-1} and biases b0..b{L-1} for an architecture."""

    architecture: AEArchitecture
    params: Dict[str, np.ndarray] = field(repr=False)

    def __post_init__(self):
        sizes = self.architecture.layer_sizes
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            weight, bias = self.params.get(f"W{i}"), self.params.get(f"b{i}")
            if weight is None or weight.shape != (fan_in, fan_out):
                raise ValidationError(f"parameters.W{i}: expected shape {(fan_in, fan_out)}")
            if bias is None or bias.shape != (fan_out,):
                raise ValidationError(f"parameters.b{i}: expected shape {(fan_out,)}")

    @property
    def input_dim(self) -> int:
        return self.architecture.input_dim

    def layers(self) -> Tuple[List[np.ndarray], List[np.ndarray]]:
        return _stack(self.params, "", self.architecture.layer_count)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": "autoencoder",
            "input_dim": self.input_dim,
            "architecture": list(self.architecture.layer_sizes),
            "parameters": params_to_json(self.params),
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "AEModel":
        if payload.get("kind") != "autoencoder":
            raise ValidationError(f"kind: expected 'autoencoder', got '{payload.get('kind')}'")
        return cls(AEArchitecture(tuple(payload["architecture"])), params_from_json(payload["parameters"]))


def _vae_layout(arch: AEArchitecture) -> Tuple[int, int]:
    """(encoder layers before the latent heads, decoder layers)."""
    return arch.bottleneck_index - 1, arch.layer_count - arch.bottleneck_index


@dataclass(frozen=True, eq=False)
class VAEModel:
    """
    Variational autoencoder over an AEArchitecture.

    The encoder stops one layer short of the bottleneck, where two heads give the
    latent mean (mu_W, mu_b) and log-variance (logvar_W, logvar_b). The decoder
    mirrors the autoencoder's second half.
    """

    architecture: AEArchitecture
    params: Dict[str, np.ndarray] = field(repr=False)

    @property
    def input_dim(self) -> int:
        return self.architecture.input_dim

    @property
    def latent_dim(self) -> int:
        return self.architecture.bottleneck_dim

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": "vae",
            "input_dim": self.input_dim,
            "architecture": list(self.architecture.layer_sizes),
            "parameters": params_to_json(self.params),
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "VAEModel":
        if payload.get("kind") != "vae":
            raise ValidationError(f"kind: expected 'vae', got '{payload.get('kind')}'")
        return cls(AEArchitecture(tuple(payload["architecture"])), params_from_json(payload["parameters"]))


# Dense layer plumbing shared by the autoencoder and the VAE

def _activate(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        return expit(z)
    return z


def _activation_grad(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return (z > 0).astype(np.float64)
    if kind == "sigmoid":
        s = expit(z)
        return s * (1.0 - s)
    return np.ones_like(z)


def _forward(weights: Sequence[np.ndarray], biases: Sequence[np.ndarray], activations: Sequence[str],
             X: np.ndarray) -> Tuple[np.ndarray, List[Tuple[np.ndarray, np.ndarray]]]:
    cache = []
    a = X
    for W, b, kind in zip(weights, biases, activations):
        z = a @ W + b
        cache.append((a, z))
        a = _activate(kind, z)
    return a, cache


def _backward(weights: Sequence[np.ndarray], activations: Sequence[str],
              cache: Sequence[Tuple[np.ndarray, np.ndarray]],
              grad_output: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray], np.ndarray]:
    grads_W: List[np.ndarray] = [None] * len(weights)
    grads_b: List[np.ndarray] = [None] * len(weights)
    grad = grad_output
    for i in reversed(range(len(weights))):
        a_in, z = cache[i]
        delta = grad * _activation_grad(activations[i], z)
        grads_W[i] = a_in.T @ delta
        grads_b[i] = delta.sum(axis=0)
        grad = delta @ weights[i].T
    return grads_W, grads_b, grad


def _uniform_layer(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_ae_params(arch: AEArchitecture, seed: int) -> Dict[str, np.ndarray]:
    """Uniform fan-in scaled weights and zero biases."""
    rng = np.random.default_rng(derive_seed(seed, "init"))
    sizes = arch.layer_sizes
    params = {}
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        params[f"W{i}"] = _uniform_layer(rng, fan_in, fan_out)
        params[f"b{i}"] = np.zeros(fan_out)
    return params


def init_vae_params(arch: AEArchitecture, seed: int) -> Dict[str, np.ndarray]:
    rng = np.random.default_rng(derive_seed(seed, "init"))
    sizes = arch.layer_sizes
    bottleneck = arch.bottleneck_index
    encoder_layers, decoder_layers = _vae_layout(arch)
    params = {}
    for i in range(encoder_layers):
        params[f"enc_W{i}"] = _uniform_layer(rng, sizes[i], sizes[i + 1])
        params[f"enc_b{i}"] = np.zeros(sizes[i + 1])
    for head in ("mu", "logvar"):
        params[f"{head}_W"] = _uniform_layer(rng, sizes[bottleneck - 1], sizes[bottleneck])
        params[f"{head}_b"] = np.zeros(sizes[bottleneck])
    for i in range(decoder_layers):
        params[f"dec_W{i}"] = _uniform_layer(rng, sizes[bottleneck + i], sizes[bottleneck + i + 1])
        params[f"dec_b{i}"] = np.zeros(sizes[bottleneck + i + 1])
    return params


def ae_loss_and_gradient(arch: AEArchitecture, params: Mapping[str, np.ndarray],
                         X: np.ndarray) -> Tuple[float, Dict[str, np.ndarray]]:
    """Mean squared reconstruction error over all entries of the batch, and its gradient."""
    weights, biases = _stack(params, "", arch.layer_count)
    output, cache = _forward(weights, biases, arch.activations, X)
    residual = output - X
    loss = float(np.mean(residual ** 2))
    grads_W, grads_b, _ = _backward(weights, arch.activations, cache, 2.0 * residual / X.size)

    grads = {}
    for i in range(arch.layer_count):
        grads[f"W{i}"] = grads_W[i]
        grads[f"b{i}"] = grads_b[i]
    return loss, grads


def kl_divergence(mu: Any, logvar: Any):
    """
    Closed-form KL(N(mu, exp(logvar)) || N(0, I)) summed over latent dimensions.

    Returns a float for one latent vector and an array for a matrix of rows.
    """
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    if mu.shape != logvar.shape:
        raise ValidationError(f"mu and logvar shapes differ: {mu.shape} vs {logvar.shape}")
    kl = -0.5 * np.sum(1.0 + logvar - mu ** 2 - np.exp(logvar), axis=-1)
    return float(kl) if mu.ndim == 1 else kl


def _vae_parts(arch: AEArchitecture, params: Mapping[str, np.ndarray], X: np.ndarray):
    encoder_layers, decoder_layers = _vae_layout(arch)
    enc_W, enc_b = _stack(params, "enc_", encoder_layers)
    dec_W, dec_b = _stack(params, "dec_", decoder_layers)
    dec_activations = ("relu",) * (decoder_layers - 1) + ("sigmoid",)
    h, enc_cache = _forward(enc_W, enc_b, ("relu",) * encoder_layers, X)
    mu = h @ params["mu_W"] + params["mu_b"]
    logvar = h @ params["logvar_W"] + params["logvar_b"]
    return enc_W, enc_cache, h, mu, logvar, dec_W, dec_b, dec_activations


def vae_loss_and_gradient(arch: AEArchitecture, params: Mapping[str, np.ndarray], X: np.ndarray,
                          noise: np.ndarray) -> Tuple[float, Dict[str, np.ndarray]]:
    """
    VAE loss and its gradient for a batch with fixed standard-normal noise.

    loss = mean over rows of (sum of squared reconstruction error + KL to N(0, I)),
    with z = mu + exp(logvar / 2) * noise.
    """
    enc_W, enc_cache, h, mu, logvar, dec_W, dec_b, dec_activations = _vae_parts(arch, params, X)
    batch = X.shape[0]
    std = np.exp(0.5 * logvar)
    z = mu + std * noise
    output, dec_cache = _forward(dec_W, dec_b, dec_activations, z)
    residual = output - X
    reconstruction = float(np.sum(residual ** 2)) / batch
    kl = float(np.sum(kl_divergence(mu, logvar))) / batch
    loss = reconstruction + kl

    grads_dec_W, grads_dec_b, grad_z = _backward(dec_W, dec_activations, dec_cache, 2.0 * residual / batch)
    grad_mu = grad_z + mu / batch
    grad_logvar = grad_z * noise * 0.5 * std + 0.5 * (np.exp(logvar) - 1.0) / batch

    grads = {
        "mu_W": h.T @ grad_mu,
        "mu_b": grad_mu.sum(axis=0),
        "logvar_W": h.T @ grad_logvar,
        "logvar_b": grad_logvar.sum(axis=0),
    }
    for i in range(len(dec_W)):
        grads[f"dec_W{i}"] = grads_dec_W[i]
        grads[f"dec_b{i}"] = grads_dec_b[i]
    if enc_W:
        grad_h = grad_mu @ params["mu_W"].T + grad_logvar @ params["logvar_W"].T
        grads_enc_W, grads_enc_b, _ = _backward(enc_W, ("relu",) * len(enc_W), enc_cache, grad_h)
        for i in range(len(enc_W)):
            grads[f"enc_W{i}"] = grads_enc_W[i]
            grads[f"enc_b{i}"] = grads_enc_b[i]
    return loss, grads


class _Optimizer:
    """In-place Adam or plain SGD updates over a dict of parameter arrays."""

    def __init__(self, kind: str, learning_rate: float, params: Mapping[str, np.ndarray]):
        self.kind = kind
        self.learning_rate = learning_rate
        self.step_count = 0
        self.first = {name: np.zeros_like(value) for name, value in params.items()}
        self.second = {name: np.zeros_like(value) for name, value in params.items()}

    def step(self, params: Dict[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> None:
        if self.kind == "sgd":
            for name in params:
                params[name] -= self.learning_rate * grads[name]
            return

        self.step_count += 1
        first_correction = 1.0 - _ADAM_BETA1 ** self.step_count
        second_correction = 1.0 - _ADAM_BETA2 ** self.step_count
        for name in params:
            self.first[name] = _ADAM_BETA1 * self.first[name] + (1.0 - _ADAM_BETA1) * grads[name]
            self.second[name] = _ADAM_BETA2 * self.second[name] + (1.0 - _ADAM_BETA2) * grads[name] ** 2
            m_hat = self.first[name] / first_correction
            v_hat = self.second[name] / second_correction
            params[name] -= self.learning_rate * m_hat / (np.sqrt(v_hat) + _ADAM_EPSILON)


def _training_matrix(data: Any, arch: AEArchitecture) -> np.ndarray:
    X = as_matrix(data, "data")
    if X.shape[1] != arch.input_dim:
        raise ValidationError(f"dimension mismatch: architecture expects {arch.input_dim} features, "
                              f"got {X.shape[1]}")
    if X.shape[0] < 2:
        raise ValidationError(f"autoencoder training needs at least 2 instances, got {X.shape[0]}")
    if X.min() < 0.0 or X.max() > 1.0:
        raise ValidationError("autoencoder inputs must be normalized to [0, 1]")
    return X


def validation_split(n: int, config: TrainConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Seeded (train_indices, validation_indices); both sides keep at least one row."""
    rng = np.random.default_rng(derive_seed(config.seed, "validation"))
    order = rng.permutation(n)
    held_out = min(n - 1, max(1, int(round(n * config.validation_fraction))))
    return np.sort(order[held_out:]), np.sort(order[:held_out])


def _train(X: np.ndarray, config: TrainConfig, params: Dict[str, np.ndarray], loss_fn, val_fn,
           label: str) -> TrainReport:
    train_index, val_index = validation_split(X.shape[0], config)
    train, val = X[train_index], X[val_index]
    optimizer = _Optimizer(config.optimizer, config.learning_rate, params)
    rng = np.random.default_rng(derive_seed(config.seed, "shuffle"))

    train_losses, val_losses = [], []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(train.shape[0])
        total = 0.0
        for start in range(0, train.shape[0], config.batch_size):
            batch = train[order[start:start + config.batch_size]]
            loss, grads = loss_fn(params, batch, rng)
            if not np.isfinite(loss):
                raise TrainingError(f"{label} training produced a non-finite loss", epoch)
            total += loss * batch.shape[0]
            optimizer.step(params, grads)

        val_loss = val_fn(params, val)
        if not np.isfinite(val_loss):
            raise TrainingError(f"{label} validation loss is non-finite", epoch)
        train_losses.append(total / train.shape[0])
        val_losses.append(val_loss)
        logger.debug(f"{label} epoch {epoch}: train_loss={train_losses[-1]:.6f} val_loss={val_loss:.6f}")

    logger.info(f"Trained {label} for {config.epochs} epochs on {train.shape[0]} rows; "
                f"final val_loss={val_losses[-1]:.6f}")
    return TrainReport(tuple(train_losses), tuple(val_losses))


def train_ae(data: Any, arch: AEArchitecture, config: TrainConfig) -> Tuple[AEModel, TrainReport]:
    """
    Train an autoencoder by backprop on mean squared reconstruction error.

    Args:
        data: Vectors in [0, 1] with arch.input_dim features
        arch: Layer widths
        config: Training hyperparameters; a seeded share of `data` is held out for validation

    Returns:
        (AEModel, TrainReport)
    """
    X = _training_matrix(data, arch)
    params = init_ae_params(arch, config.seed)

    def loss_fn(p, batch, rng):
        return ae_loss_and_gradient(arch, p, batch)

    def val_fn(p, val):
        return ae_loss_and_gradient(arch, p, val)[0]

    report = _train(X, config, params, loss_fn, val_fn, "autoencoder")
    return AEModel(arch, params), report


def train_vae(data: Any, arch: AEArchitecture, config: TrainConfig) -> Tuple[VAEModel, TrainReport]:
    """
    Train a VAE with the reparameterization trick.

    The latent dimension is the architecture's bottleneck width. Validation loss uses
    the posterior mean (zero noise) so it is deterministic.
    """
    X = _training_matrix(data, arch)
    params = init_vae_params(arch, config.seed)
    latent = arch.bottleneck_dim

    def loss_fn(p, batch, rng):
        noise = rng.standard_normal((batch.shape[0], latent))
        return vae_loss_and_gradient(arch, p, batch, noise)

    def val_fn(p, val):
        return vae_loss_and_gradient(arch, p, val, np.zeros((val.shape[0], latent)))[0]

    report = _train(X, config, params, loss_fn, val_fn, "vae")
    return VAEModel(arch, params), report


def _model_inputs(model, x: Any) -> Tuple[np.ndarray, bool]:
    array = np.asarray(x, dtype=np.float64)
    single = array.ndim == 1
    array = np.atleast_2d(array)
    if array.ndim != 2 or array.shape[1] != model.input_dim:
        raise ValidationError(f"dimension mismatch: model expects {model.input_dim} features, "
                              f"got shape {np.shape(x)}")
    return array, single


def encode(model: AEModel, x: Any) -> np.ndarray:
    """Bottleneck representation of one vector (1-D result) or a matrix of rows."""
    X, single = _model_inputs(model, x)
    weights, biases = model.layers()
    b = model.architecture.bottleneck_index
    code, _ = _forward(weights[:b], biases[:b], model.architecture.activations[:b], X)
    return code[0] if single else code


def decode(model: AEModel, b: Any) -> np.ndarray:
    """Output layer values for one bottleneck vector or a matrix of them."""
    code = np.asarray(b, dtype=np.float64)
    single = code.ndim == 1
    code = np.atleast_2d(code)
    if code.shape[1] != model.architecture.bottleneck_dim:
        raise ValidationError(f"dimension mismatch: bottleneck has {model.architecture.bottleneck_dim} "
                              f"units, got {code.shape[1]}")
    weights, biases = model.layers()
    index = model.architecture.bottleneck_index
    output, _ = _forward(weights[index:], biases[index:], model.architecture.activations[index:], code)
    return output[0] if single else output


def reconstruct(model: AEModel, x: Any) -> np.ndarray:
    """Full forward pass, equal to decode(encode(x))."""
    X, single = _model_inputs(model, x)
    weights, biases = model.layers()
    output, _ = _forward(weights, biases, model.architecture.activations, X)
    return output[0] if single else output


def reconstruction_error(model, x: Any):
    """
    Mean squared error between x and its reconstruction.

    Accepts an AEModel or a VAEModel (decoded from the posterior mean). Returns a
    float for one vector and a per-row array for a matrix.
    """
    X, single = _model_inputs(model, x)
    if isinstance(model, VAEModel):
        output = vae_decode(model, vae_encode(model, X)[0])
    else:
        output = reconstruct(model, X)
    errors = np.mean((output - X) ** 2, axis=1)
    return float(errors[0]) if single else errors


def reconstruct_halves(model: AEModel, v: Any) -> Tuple[np.ndarray, np.ndarray]:
    """Reconstruct a c=2 virtual vector and split the output into its decoded halves (A', B')."""
    if model.input_dim % 2:
        raise ValidationError(f"model input dimension {model.input_dim} is odd; cannot split into halves")
    vector = as_vector(v, "v", dim=model.input_dim)
    return split_halves(reconstruct(model, vector))


def vae_encode(model: VAEModel, x: Any) -> Tuple[np.ndarray, np.ndarray]:
    """Latent (mu, logvar) for one vector or a matrix of rows."""
    X, single = _model_inputs(model, x)
    _, _, _, mu, logvar, _, _, _ = _vae_parts(model.architecture, model.params, X)
    return (mu[0], logvar[0]) if single else (mu, logvar)


def vae_decode(model: VAEModel, z: Any) -> np.ndarray:
    code = np.asarray(z, dtype=np.float64)
    single = code.ndim == 1
    code = np.atleast_2d(code)
    if code.shape[1] != model.latent_dim:
        raise ValidationError(f"dimension mismatch: latent has {model.latent_dim} units, got {code.shape[1]}")
    _, decoder_layers = _vae_layout(model.architecture)
    dec_W, dec_b = _stack(model.params, "dec_", decoder_layers)
    output, _ = _forward(dec_W, dec_b, ("relu",) * (decoder_layers - 1) + ("sigmoid",), code)
    return output[0] if single else output


def sample_latent(model: VAEModel, x: Any, rng: np.random.Generator) -> np.ndarray:
    """Reparameterized draw z = mu + exp(logvar / 2) * eps."""
    mu, logvar = vae_encode(model, x)
    return mu + np.exp(0.5 * logvar) * rng.standard_normal(np.shape(mu))


def grad_check(arch: AEArchitecture, batch: Any, epsilon: float = 1e-6, seed: int = 0,
               variational: bool = False, params: Optional[Mapping[str, np.ndarray]] = None) -> float:
    """
    Compare analytic backprop with central finite differences.

    Args:
        arch: Architecture to check
        batch: Input rows
        epsilon: Finite-difference step
        seed: Seed for random parameters (and the VAE noise)
        variational: Check the VAE loss instead of the autoencoder loss
        params: Explicit parameters; random ones with non-zero biases are drawn when omitted

    Returns:
        Maximum norm-based relative error over the parameter arrays
    """
    X = as_matrix(batch, "batch")
    if arch.layer_count > _GRAD_CHECK_MAX_LAYERS or max(arch.layer_sizes) > _GRAD_CHECK_MAX_WIDTH:
        logger.warning(f"grad_check on {list(arch.layer_sizes)} evaluates the loss twice per parameter")

    rng = np.random.default_rng(derive_seed(seed, "probe"))
    if params is None:
        params = init_vae_params(arch, seed) if variational else init_ae_params(arch, seed)
        params = {name: value + rng.uniform(-0.1, 0.1, size=value.shape)
                  if name.split("_")[-1].startswith("b") else value
                  for name, value in params.items()}
    params = {name: np.array(value, dtype=np.float64) for name, value in params.items()}

    if variational:
        noise = rng.standard_normal((X.shape[0], arch.bottleneck_dim))

        def loss_fn():
            return vae_loss_and_gradient(arch, params, X, noise)
    else:
        def loss_fn():
            return ae_loss_and_gradient(arch, params, X)

    _, analytic = loss_fn()
    worst = 0.0
    for name, value in params.items():
        numeric = np.zeros_like(value)
        for index in np.ndindex(value.shape):
            original = value[index]
            value[index] = original + epsilon
            plus, _ = loss_fn()
            value[index] = original - epsilon
            minus, _ = loss_fn()
            value[index] = original
            numeric[index] = (plus - minus) / (2.0 * epsilon)
        worst = max(worst, relative_error(analytic[name], numeric))
    return worst


@dataclass(frozen=True)
class LossComparison:
    """Validation-loss reports of the same data trained as original rows and as VBD."""

    original: TrainReport
    virtual: TrainReport
    variational: bool = False

    @property
    def virtual_wins(self) -> bool:
        return self.virtual.final_val_loss < self.original.final_val_loss


def _virtual_rows(X: np.ndarray, max_virtual: Optional[int], seed: int) -> np.ndarray:
    if max_virtual is not None and X.shape[0] ** 2 > max_virtual:
        return synth_large(X, ConcatConfig(c=2, u=max_virtual, seed=derive_seed(seed, "split"))).vectors
    return synth_small(X).vectors


def validation_loss_comparison(data: Any, arch: AEArchitecture, original_config: TrainConfig,
                               virtual_config: TrainConfig, variational: bool = False,
                               max_virtual: Optional[int] = None) -> LossComparison:
    """
    Train on the original rows with `arch` and on their VBD with the doubled architecture.

    Args:
        data: Normalized original vectors
        arch: Architecture for the original data
        original_config: Training config for the original run (e.g. 100 epochs)
        virtual_config: Training config for the VBD run (e.g. 10 epochs)
        variational: Train VAEs instead of plain autoencoders
        max_virtual: Draw this many VBD rows with synth_large instead of the full n*n cross product

    Returns:
        LossComparison
    """
    X = _training_matrix(data, arch)
    trainer = train_vae if variational else train_ae
    _, original = trainer(X, arch, original_config)
    _, virtual = trainer(_virtual_rows(X, max_virtual, virtual_config.seed), arch.doubled(), virtual_config)
    logger.info(f"Validation loss: original={original.final_val_loss:.6f} virtual={virtual.final_val_loss:.6f}")
    return LossComparison(original, virtual, variational)


def vbd_size_sweep(data: Any, arch: AEArchitecture, sizes: Sequence[int], config: TrainConfig) -> Dict[int, float]:
    """
    Final validation loss of an autoencoder trained on VBD of each requested size.

    `arch` is the architecture for the original data; virtual rows are drawn with
    synth_large (c=2) and trained with the doubled architecture.
    """
    X = _training_matrix(data, arch)
    doubled = arch.doubled()
    results = {}
    for size in sizes:
        virtual = synth_large(X, ConcatConfig(c=2, u=int(size), seed=derive_seed(config.seed, "split", int(size))))
        _, report = train_ae(virtual.vectors, doubled, config)
        results[int(size)] = report.final_val_loss
        logger.info(f"VBD size {size}: val_loss={report.final_val_loss:.6f}")
    return results
