"""Small feedforward network engine with manual backpropagation.

Supports exactly the two classifier shapes used for witness training: the
full-information bottleneck net (relu encoder/decoder around a linear code)
and the linear-code net whose bias-free first layer is the set of learned
linear measurements. Everything is plain numpy and deterministic in the seeds.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .data import _write_atomic

ACTIVATIONS = ("linear", "relu", "sigmoid")

SCORE_CLAMP = 1e-12

FULL_ENCODER_WIDTHS = (384, 192, 8)  # last entry is the linear code width
LINEAR_HIDDEN_WIDTHS = (256, 128)


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class LayerSpec:
    width: int
    activation: str
    has_bias: bool = True

    def __post_init__(self) -> None:
        if self.width < 1:
            raise ValueError(f"layer width must be >= 1, got {self.width}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass(eq=False)
class MlpModel:
    layer_specs: list[LayerSpec]
    weights: list[np.ndarray]  # per layer, shape (fan_out, fan_in)
    biases: list[np.ndarray | None]
    input_width: int = 15
    architecture: str = "custom"
    m: int | None = None
    training_config: "TrainConfig | None" = None
    best_epoch: int | None = None

    def __post_init__(self) -> None:
        if not self.layer_specs:
            raise ValueError("model needs at least one layer")
        if self.layer_specs[-1].width != 1 or self.layer_specs[-1].activation != "sigmoid":
            raise ValueError("final layer must be width 1 with sigmoid activation")
        fan_in = self.input_width
        for i, (spec, w, b) in enumerate(zip(self.layer_specs, self.weights, self.biases)):
            if w.shape != (spec.width, fan_in):
                raise ValueError(
                    f"layer {i}: weight shape {w.shape} != ({spec.width}, {fan_in})"
                )
            if spec.has_bias:
                if b is None or b.shape != (spec.width,):
                    raise ValueError(f"layer {i}: bias missing or misshapen")
            elif b is not None:
                raise ValueError(f"layer {i}: bias present but has_bias is false")
            fan_in = spec.width

    def copy(self) -> "MlpModel":
        return MlpModel(
            layer_specs=list(self.layer_specs),
            weights=[w.copy() for w in self.weights],
            biases=[None if b is None else b.copy() for b in self.biases],
            input_width=self.input_width,
            architecture=self.architecture,
            m=self.m,
            training_config=self.training_config,
            best_epoch=self.best_epoch,
        )


class Gradients(NamedTuple):
    weights: list[np.ndarray]
    biases: list[np.ndarray | None]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 256
    max_epochs: int = 120
    patience: int = 10
    seed: int = 0
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


class EpochRecord(NamedTuple):
    train_loss: float
    validation_loss: float
    validation_accuracy: float


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0


class TrainResult(NamedTuple):
    model: MlpModel
    history: TrainHistory


def _init_layers(
    rng: np.random.Generator, input_width: int, specs: Sequence[LayerSpec]
) -> tuple[list[np.ndarray], list[np.ndarray | None]]:
    # Gaussian weights scaled by 1/sqrt(fan_in); biases start at zero.
    weights, biases = [], []
    fan_in = input_width
    for spec in specs:
        weights.append(rng.standard_normal((spec.width, fan_in)) / np.sqrt(fan_in))
        biases.append(np.zeros(spec.width) if spec.has_bias else None)
        fan_in = spec.width
    return weights, biases


def model_new(
    architecture: str,
    seed: int,
    m: int | None = None,
    hidden: Sequence[int] | None = None,
) -> MlpModel:
    """Build one of the two classifier architectures with seeded initial weights.

    "nonlinear_full" stacks relu layers that narrow to a linear code of width 8
    and widen back symmetrically (`hidden` overrides the encoder widths, code
    last). "linear_code" starts with m bias-free linear nodes, the learned
    measurements, followed by relu layers (`hidden` overrides their widths).
    """
    if architecture == "nonlinear_full":
        enc = tuple(hidden) if hidden is not None else FULL_ENCODER_WIDTHS
        if len(enc) < 2:
            raise ValueError("nonlinear_full needs at least one relu layer plus a code")
        specs = [LayerSpec(w, "relu") for w in enc[:-1]]
        specs.append(LayerSpec(enc[-1], "linear"))
        specs.extend(LayerSpec(w, "relu") for w in reversed(enc[:-1]))
        specs.append(LayerSpec(1, "sigmoid"))
    elif architecture == "linear_code":
        if m is None or not 1 <= m <= 15:
            raise ValueError(f"linear_code needs m in 1..15, got {m}")
        widths = tuple(hidden) if hidden is not None else LINEAR_HIDDEN_WIDTHS
        specs = [LayerSpec(m, "linear", has_bias=False)]
        specs.extend(LayerSpec(w, "relu") for w in widths)
        specs.append(LayerSpec(1, "sigmoid"))
    else:
        raise ValueError(f"unknown architecture {architecture!r}")

    rng = np.random.default_rng(seed)
    weights, biases = _init_layers(rng, 15, specs)
    return MlpModel(
        layer_specs=specs,
        weights=weights,
        biases=biases,
        input_width=15,
        architecture=architecture,
        m=m if architecture == "linear_code" else None,
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "linear":
        return z
    if activation == "relu":
        return np.maximum(z, 0.0)
    return _sigmoid(z)


def _forward_trace(model: MlpModel, batch: np.ndarray) -> list[np.ndarray]:
    """Activations per layer, input first; index i+1 is the output of layer i."""
    acts = [batch]
    a = batch
    for spec, w, b in zip(model.layer_specs, model.weights, model.biases):
        z = a @ w.T
        if b is not None:
            z = z + b
        a = _activate(z, spec.activation)
        acts.append(a)
    return acts


def _check_batch(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=float)
    if batch.ndim != 2 or batch.shape[1] != model.input_width:
        raise ValueError(
            f"batch must have shape (n, {model.input_width}), got {batch.shape}"
        )
    return batch


def forward(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    """Entanglement scores in (0, 1), one per feature row."""
    batch = _check_batch(model, batch)
    return _forward_trace(model, batch)[-1][:, 0]


def code_values(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    """Outputs of the measurement layer of a linear_code model, shape (n, m)."""
    if model.architecture != "linear_code":
        raise ValueError("code_values requires a linear_code model")
    batch = _check_batch(model, batch)
    return batch @ model.weights[0].T


def code_weights(model: MlpModel) -> np.ndarray:
    """The m x 15 measurement matrix; row k combines the Pauli expectations."""
    if model.architecture != "linear_code":
        raise ValueError("code_weights requires a linear_code model")
    return model.weights[0].copy()


def loss_and_gradients(
    model: MlpModel, batch: np.ndarray, labels: np.ndarray
) -> tuple[float, Gradients]:
    """Mean binary cross-entropy and its reverse-mode gradients."""
    batch = _check_batch(model, batch)
    y = np.asarray(labels, dtype=float)
    if y.shape != (batch.shape[0],):
        raise ValueError(f"labels shape {y.shape} does not match batch {batch.shape}")

    acts = _forward_trace(model, batch)
    scores = acts[-1][:, 0]
    clamped = np.clip(scores, SCORE_CLAMP, 1.0 - SCORE_CLAMP)
    n = batch.shape[0]
    loss = float(-np.mean(y * np.log(clamped) + (1.0 - y) * np.log1p(-clamped)))

    # Fused sigmoid + cross-entropy derivative at the output.
    delta = ((scores - y) / n)[:, None]
    grads_w: list[np.ndarray] = [None] * len(model.weights)
    grads_b: list[np.ndarray | None] = [None] * len(model.weights)
    for i in range(len(model.weights) - 1, -1, -1):
        grads_w[i] = delta.T @ acts[i]
        grads_b[i] = delta.sum(axis=0) if model.biases[i] is not None else None
        if i == 0:
            break
        delta = delta @ model.weights[i]
        activation = model.layer_specs[i - 1].activation
        if activation == "relu":
            delta = delta * (acts[i] > 0.0)
        elif activation == "sigmoid":
            delta = delta * acts[i] * (1.0 - acts[i])
    return loss, Gradients(grads_w, grads_b)


class _Optimizer:
    def __init__(self, model: MlpModel, config: TrainConfig):
        self.config = config
        self.step_count = 0
        if config.optimizer == "adam":
            self.m_w = [np.zeros_like(w) for w in model.weights]
            self.v_w = [np.zeros_like(w) for w in model.weights]
            self.m_b = [None if b is None else np.zeros_like(b) for b in model.biases]
            self.v_b = [None if b is None else np.zeros_like(b) for b in model.biases]

    def step(self, model: MlpModel, grads: Gradients) -> None:
        cfg = self.config
        if cfg.optimizer == "sgd":
            for w, gw in zip(model.weights, grads.weights):
                w -= cfg.learning_rate * gw
            for b, gb in zip(model.biases, grads.biases):
                if b is not None:
                    b -= cfg.learning_rate * gb
            return
        self.step_count += 1
        t = self.step_count
        scale = np.sqrt(1.0 - cfg.beta2**t) / (1.0 - cfg.beta1**t)
        for i, (w, gw) in enumerate(zip(model.weights, grads.weights)):
            self.m_w[i] = cfg.beta1 * self.m_w[i] + (1.0 - cfg.beta1) * gw
            self.v_w[i] = cfg.beta2 * self.v_w[i] + (1.0 - cfg.beta2) * gw * gw
            w -= cfg.learning_rate * scale * self.m_w[i] / (np.sqrt(self.v_w[i]) + cfg.eps)
        for i, (b, gb) in enumerate(zip(model.biases, grads.biases)):
            if b is None:
                continue
            self.m_b[i] = cfg.beta1 * self.m_b[i] + (1.0 - cfg.beta1) * gb
            self.v_b[i] = cfg.beta2 * self.v_b[i] + (1.0 - cfg.beta2) * gb * gb
            b -= cfg.learning_rate * scale * self.m_b[i] / (np.sqrt(self.v_b[i]) + cfg.eps)


def train(model: MlpModel, train_ds, validation_ds, config: TrainConfig) -> TrainResult:
    """Mini-batch training with early stopping on validation loss.

    Shuffling is keyed to config.seed, so (seed, data, config) fully determine
    the result. The returned model carries the weights of the epoch with the
    lowest validation loss; the caller's model is never mutated.
    """
    x_train = _check_batch(model, train_ds.features)
    y_train = np.asarray(train_ds.labels, dtype=float)
    x_val = _check_batch(model, validation_ds.features)
    y_val = np.asarray(validation_ds.labels, dtype=float)
    if x_train.shape[0] == 0 or x_val.shape[0] == 0:
        raise ValueError("training and validation datasets must be non-empty")

    work = model.copy()
    optimizer = _Optimizer(work, config)
    rng = np.random.default_rng(config.seed)
    n = x_train.shape[0]

    history = TrainHistory()
    best_loss = np.inf
    best_weights = [w.copy() for w in work.weights]
    best_biases = [None if b is None else b.copy() for b in work.biases]

    for epoch in range(config.max_epochs):
        perm = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            loss, grads = loss_and_gradients(work, x_train[idx], y_train[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch)
            optimizer.step(work, grads)
            loss_sum += loss * idx.size
        train_loss = loss_sum / n

        val_scores = forward(work, x_val)
        val_clamped = np.clip(val_scores, SCORE_CLAMP, 1.0 - SCORE_CLAMP)
        val_loss = float(
            -np.mean(y_val * np.log(val_clamped) + (1.0 - y_val) * np.log1p(-val_clamped))
        )
        if not np.isfinite(val_loss):
            raise TrainingDivergedError(epoch)
        val_acc = float(np.mean((val_scores >= 0.5) == (y_val > 0.5)))
        history.epochs.append(EpochRecord(train_loss, val_loss, val_acc))

        if val_loss < best_loss:
            best_loss = val_loss
            history.best_epoch = epoch
            best_weights = [w.copy() for w in work.weights]
            best_biases = [None if b is None else b.copy() for b in work.biases]
        elif epoch - history.best_epoch >= config.patience:
            break

    best = MlpModel(
        layer_specs=list(work.layer_specs),
        weights=best_weights,
        biases=best_biases,
        input_width=work.input_width,
        architecture=work.architecture,
        m=work.m,
        training_config=config,
        best_epoch=history.best_epoch,
    )
    return TrainResult(best, history)


def save_model(model: MlpModel, path: str) -> None:
    """Serialize to JSON; floats round-trip exactly, so forward() is preserved."""
    payload = {
        "architecture": model.architecture,
        "m": model.m,
        "input_width": model.input_width,
        "layer_specs": [asdict(s) for s in model.layer_specs],
        "weights": [w.tolist() for w in model.weights],
        "biases": [None if b is None else b.tolist() for b in model.biases],
        "training_config": None if model.training_config is None else asdict(model.training_config),
        "best_epoch": model.best_epoch,
    }
    _write_atomic(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_model(path: str) -> MlpModel:
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    specs = [LayerSpec(**s) for s in payload["layer_specs"]]
    config = payload.get("training_config")
    return MlpModel(
        layer_specs=specs,
        weights=[np.array(w, dtype=float) for w in payload["weights"]],
        biases=[None if b is None else np.array(b, dtype=float) for b in payload["biases"]],
        input_width=payload["input_width"],
        architecture=payload["architecture"],
        m=payload["m"],
        training_config=None if config is None else TrainConfig(**config),
        best_epoch=payload["best_epoch"],
    )
