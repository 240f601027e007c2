"""A small from-scratch dense softmax classifier with the full training loop.

The network is a stack of fully connected layers with ReLU activations on
hidden layers, softmax on the output, optional inverted dropout, categorical
cross-entropy loss, and a choice of Adam, SGD with momentum, or RMSProp.
Training supports early stopping on validation loss with best-epoch
restoration. Everything runs in float64 and is bit-deterministic given the
config seed.

Determinism contract (all streams come from the documented generator):

* weight init uses stream ``derive_seed(seed, 1)``; each layer's weight
  matrix is filled row-major from Glorot-uniform draws in layer order, and
  biases start at zero,
* per-epoch batch shuffling uses stream ``derive_seed(seed, 2)``,
* dropout masks use stream ``derive_seed(seed, 3)``, drawn per hidden layer
  in layer order, row-major over (batch, units); a unit drops when its
  uniform draw is below the dropout rate.

Conventions fixed for reproducibility: the ReLU derivative at exactly 0 is
0, and probabilities are clamped to >= 1e-12 inside the loss (the clamp
guards the log only; gradients use the exact softmax cross-entropy
identity).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, NumericError
from .predict_io import ProbabilityMatrix
from .rng import SplitMix64, derive_seed

LOG_CLAMP = 1e-12
DEFAULT_MIN_DELTA = 1e-6

_INIT_STREAM = 1
_SHUFFLE_STREAM = 2
_DROPOUT_STREAM = 3


@dataclass(frozen=True)
class NetworkSpec:
    """Dense architecture: input width, hidden ReLU widths, softmax classes."""

    input_dim: int
    hidden: tuple[int, ...]
    classes: int
    dropout_rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim < 1:
            raise DataError(f"input_dim must be >= 1, got {self.input_dim}")
        if any(h < 1 for h in self.hidden):
            raise DataError(f"hidden sizes must be >= 1, got {self.hidden}")
        if self.classes < 2:
            raise DataError(f"need at least 2 classes, got {self.classes}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise DataError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.classes)


@dataclass(frozen=True)
class Adam:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise DataError("Adam needs 0 <= beta1, beta2 < 1 and eps > 0")


@dataclass(frozen=True)
class SGDMomentum:
    momentum: float = 0.9

    def __post_init__(self):
        if not 0 <= self.momentum < 1:
            raise DataError(f"momentum must be in [0, 1), got {self.momentum}")


@dataclass(frozen=True)
class RMSProp:
    rho: float = 0.9
    eps: float = 1e-8

    def __post_init__(self):
        if not (0 <= self.rho < 1 and self.eps > 0):
            raise DataError("RMSProp needs 0 <= rho < 1 and eps > 0")


Optimizer = Adam | SGDMomentum | RMSProp


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int
    batch_size: int
    learning_rate: float
    optimizer: Optimizer = field(default_factory=Adam)
    patience: int = 10
    min_delta: float = DEFAULT_MIN_DELTA
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise DataError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise DataError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise DataError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.patience < 1:
            raise DataError(f"patience must be >= 1, got {self.patience}")
        if self.min_delta < 0:
            raise DataError(f"min_delta must be >= 0, got {self.min_delta}")


@dataclass(frozen=True)
class ModelParams:
    """Per-layer float64 weight matrices (in_dim, out_dim) and bias vectors.

    The same container carries gradients, which share these shapes.
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        weights = tuple(np.asarray(w, dtype=np.float64) for w in self.weights)
        biases = tuple(np.asarray(b, dtype=np.float64) for b in self.biases)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)
        if len(weights) != len(biases) or not weights:
            raise DataError("need one weight matrix and one bias vector per layer")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise DataError(f"layer {i}: weight {w.shape} and bias {b.shape} mismatch")
            if i > 0 and weights[i - 1].shape[1] != w.shape[0]:
                raise DataError(f"layer {i}: input width does not chain from layer {i - 1}")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0], *(w.shape[1] for w in self.weights))


def init_params(spec: NetworkSpec, seed: int) -> ModelParams:
    """Glorot-uniform weights from the seeded generator, zero biases."""
    rng = SplitMix64(derive_seed(seed, _INIT_STREAM))
    weights, biases = [], []
    dims = spec.layer_dims
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        draws = rng.floats(fan_in * fan_out)
        weights.append(((2.0 * draws - 1.0) * limit).reshape(fan_in, fan_out))
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return ModelParams(tuple(weights), tuple(biases))


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted by the row max for stability."""
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _as_batch(batch, input_dim: int) -> np.ndarray:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != input_dim:
        raise DataError(f"batch shape {x.shape} does not match input_dim {input_dim}")
    return x


def _as_label_indices(labels, classes: int, batch_size: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim == 2:
        if y.shape[1] != classes:
            raise DataError(f"one-hot labels have {y.shape[1]} columns, expected {classes}")
        y = y.argmax(axis=1)
    y = y.astype(np.int64)
    if y.shape != (batch_size,):
        raise DataError(f"labels shape {y.shape} does not match batch size {batch_size}")
    if y.size and (y.min() < 0 or y.max() >= classes):
        raise DataError(f"labels out of range for {classes} classes")
    return y


def _forward_cached(spec: NetworkSpec, params: ModelParams, x: np.ndarray,
                    train: bool, rng: SplitMix64 | None):
    """Forward pass keeping activations and dropout masks for backprop."""
    use_dropout = train and spec.dropout_rate > 0.0
    if use_dropout and rng is None:
        raise DataError("train-mode forward with dropout needs a generator")
    keep_scale = 1.0 / (1.0 - spec.dropout_rate) if use_dropout else 1.0
    activations = [x]
    pre_acts = []
    masks = []
    a = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        pre_acts.append(z)
        if i == last:
            a = softmax(z)
            masks.append(None)
        else:
            a = np.maximum(z, 0.0)
            if use_dropout:
                keep = rng.floats(a.size).reshape(a.shape) >= spec.dropout_rate
                a = a * keep * keep_scale
                masks.append(keep)
            else:
                masks.append(None)
        activations.append(a)
    return activations, pre_acts, masks


def forward(spec: NetworkSpec, params: ModelParams, batch,
            mode: str = "eval", rng: SplitMix64 | None = None) -> np.ndarray:
    """Class probabilities for a batch; dropout is active only in train mode."""
    if mode not in ("train", "eval"):
        raise DataError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = _as_batch(batch, spec.input_dim)
    activations, _, _ = _forward_cached(spec, params, x, mode == "train", rng)
    return activations[-1]


def cross_entropy_loss(probs, labels) -> float:
    """Mean of -log p_true with p clamped to >= 1e-12 before the log."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2:
        raise DataError(f"probabilities must be 2-D, got shape {p.shape}")
    y = _as_label_indices(labels, p.shape[1], p.shape[0])
    p_true = np.clip(p[np.arange(len(y)), y], LOG_CLAMP, None)
    return float(np.mean(-np.log(p_true)))


def backward(spec: NetworkSpec, params: ModelParams, batch, labels,
             mode: str = "train", rng: SplitMix64 | None = None):
    """Loss and exact analytic gradients (mean reduction over the batch).

    The internal forward pass and the gradients share one dropout mask.
    Returns ``(loss, probs, grads)`` with grads shaped like ``params``.
    """
    if mode not in ("train", "eval"):
        raise DataError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = _as_batch(batch, spec.input_dim)
    y = _as_label_indices(labels, spec.classes, x.shape[0])
    activations, pre_acts, masks = _forward_cached(spec, params, x, mode == "train", rng)
    probs = activations[-1]
    loss = cross_entropy_loss(probs, y)

    n = x.shape[0]
    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n

    keep_scale = 1.0 / (1.0 - spec.dropout_rate) if spec.dropout_rate > 0 else 1.0
    grad_w = [None] * len(params.weights)
    grad_b = [None] * len(params.biases)
    for i in range(len(params.weights) - 1, -1, -1):
        grad_w[i] = activations[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            upstream = delta @ params.weights[i].T
            if masks[i - 1] is not None:
                upstream = upstream * masks[i - 1] * keep_scale
            delta = upstream * (pre_acts[i - 1] > 0.0)
    grads = ModelParams(tuple(grad_w), tuple(grad_b))
    return loss, probs, grads


@dataclass
class OptimizerState:
    """Slot buffers matching the parameter arrays, plus the Adam step count."""

    optimizer: Optimizer
    slot_a: list[np.ndarray]
    slot_b: list[np.ndarray] | None
    step_count: int = 0


def init_optimizer_state(optimizer: Optimizer, params: ModelParams) -> OptimizerState:
    arrays = list(params.weights) + list(params.biases)
    zeros = [np.zeros_like(a) for a in arrays]
    needs_second = isinstance(optimizer, Adam)
    return OptimizerState(
        optimizer=optimizer,
        slot_a=zeros,
        slot_b=[np.zeros_like(a) for a in arrays] if needs_second else None,
    )


def optimizer_step(state: OptimizerState, params: ModelParams,
                   grads: ModelParams, lr: float) -> ModelParams:
    """One update; slot buffers mutate in place, new parameter arrays return."""
    if params.layer_dims != grads.layer_dims:
        raise DataError("gradient shapes do not match parameters")
    arrays = list(params.weights) + list(params.biases)
    g_arrays = list(grads.weights) + list(grads.biases)
    if len(state.slot_a) != len(arrays):
        raise DataError("optimizer state does not match parameter count")
    opt = state.optimizer
    out = []
    if isinstance(opt, Adam):
        state.step_count += 1
        t = state.step_count
        bc1 = 1.0 - opt.beta1 ** t
        bc2 = 1.0 - opt.beta2 ** t
        for i, (theta, g) in enumerate(zip(arrays, g_arrays)):
            m = state.slot_a[i]
            v = state.slot_b[i]
            m *= opt.beta1
            m += (1.0 - opt.beta1) * g
            v *= opt.beta2
            v += (1.0 - opt.beta2) * g * g
            m_hat = m / bc1
            v_hat = v / bc2
            out.append(theta - lr * m_hat / (np.sqrt(v_hat) + opt.eps))
    elif isinstance(opt, SGDMomentum):
        for i, (theta, g) in enumerate(zip(arrays, g_arrays)):
            u = state.slot_a[i]
            u *= opt.momentum
            u += g
            out.append(theta - lr * u)
    elif isinstance(opt, RMSProp):
        for i, (theta, g) in enumerate(zip(arrays, g_arrays)):
            v = state.slot_a[i]
            v *= opt.rho
            v += (1.0 - opt.rho) * g * g
            out.append(theta - lr * g / (np.sqrt(v) + opt.eps))
    else:
        raise DataError(f"unknown optimizer {opt!r}")
    n = len(params.weights)
    return ModelParams(tuple(out[:n]), tuple(out[n:]))


@dataclass
class EarlyStopState:
    """Patience counter over a minimized metric (validation loss)."""

    patience: int
    min_delta: float = DEFAULT_MIN_DELTA
    best_metric: float = math.inf
    best_epoch: int = 0
    epochs_since_improvement: int = 0
    stopped: bool = False

    def __post_init__(self):
        if self.patience < 1:
            raise DataError(f"patience must be >= 1, got {self.patience}")

    def update(self, epoch: int, metric: float) -> bool:
        """Record one epoch's metric; returns True when it improved the best.

        Improvement means lower than the best by at least min_delta. After
        `patience` consecutive non-improving epochs, `stopped` latches.
        """
        if self.stopped:
            raise DataError("early stopping already triggered")
        if metric <= self.best_metric - self.min_delta:
            self.best_metric = metric
            self.best_epoch = epoch
            self.epochs_since_improvement = 0
            return True
        self.epochs_since_improvement += 1
        if self.epochs_since_improvement >= self.patience:
            self.stopped = True
        return False


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass(frozen=True)
class FitResult:
    params: ModelParams
    history: tuple[EpochRecord, ...]
    best_epoch: int
    best_val_loss: float
    stopped_early: bool

    @property
    def epochs_run(self) -> int:
        return len(self.history)


def _predicted_classes(probs: np.ndarray) -> np.ndarray:
    return probs.argmax(axis=1)


def evaluate(spec: NetworkSpec, params: ModelParams, x, labels) -> tuple[float, float]:
    """Eval-mode loss and accuracy over a whole dataset."""
    x = _as_batch(x, spec.input_dim)
    y = _as_label_indices(labels, spec.classes, x.shape[0])
    probs = forward(spec, params, x, mode="eval")
    loss = cross_entropy_loss(probs, y)
    acc = float(np.mean(_predicted_classes(probs) == y))
    return loss, acc


def fit(spec: NetworkSpec, config: TrainingConfig,
        train_x, train_labels, val_x, val_labels) -> FitResult:
    """Train with per-epoch validation and early stopping.

    Train loss/accuracy come from the training passes themselves (dropout
    active), validation metrics from an eval-mode pass after each epoch.
    The returned parameters are always the best-validation-loss epoch's.
    Non-finite losses abort with NumericError.
    """
    x = _as_batch(train_x, spec.input_dim)
    y = _as_label_indices(train_labels, spec.classes, x.shape[0])
    vx = _as_batch(val_x, spec.input_dim)
    vy = _as_label_indices(val_labels, spec.classes, vx.shape[0])
    if len(x) == 0 or len(vx) == 0:
        raise DataError("training and validation sets must be non-empty")

    params = init_params(spec, config.seed)
    opt_state = init_optimizer_state(config.optimizer, params)
    shuffle_rng = SplitMix64(derive_seed(config.seed, _SHUFFLE_STREAM))
    dropout_rng = SplitMix64(derive_seed(config.seed, _DROPOUT_STREAM))
    stopper = EarlyStopState(patience=config.patience, min_delta=config.min_delta)
    best_params = params
    history = []

    n = len(x)
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            batch, batch_y = x[idx], y[idx]
            loss, probs, grads = backward(
                spec, params, batch, batch_y, mode="train", rng=dropout_rng
            )
            if not math.isfinite(loss):
                raise NumericError(
                    f"non-finite training loss {loss} at epoch {epoch}"
                )
            params = optimizer_step(opt_state, params, grads, config.learning_rate)
            loss_sum += loss * len(idx)
            correct += int(np.sum(_predicted_classes(probs) == batch_y))
        train_loss = loss_sum / n
        train_acc = correct / n

        val_loss, val_acc = evaluate(spec, params, vx, vy)
        if not math.isfinite(val_loss):
            raise NumericError(f"non-finite validation loss {val_loss} at epoch {epoch}")

        history.append(EpochRecord(epoch, train_loss, train_acc, val_loss, val_acc))
        if stopper.update(epoch, val_loss):
            best_params = params
        if stopper.stopped:
            break

    return FitResult(
        params=best_params,
        history=tuple(history),
        best_epoch=stopper.best_epoch,
        best_val_loss=stopper.best_metric,
        stopped_early=stopper.stopped,
    )


def export_predictions(spec: NetworkSpec, params: ModelParams, x,
                       model_name: str, sample_ids=None,
                       class_names=None) -> ProbabilityMatrix:
    """Eval-mode probabilities packaged for the ensemble interchange format."""
    x = _as_batch(x, spec.input_dim)
    if sample_ids is None:
        width = len(str(max(len(x) - 1, 0)))
        sample_ids = tuple(f"s{i:0{width}d}" for i in range(len(x)))
    if class_names is None:
        class_names = tuple(f"class_{i}" for i in range(spec.classes))
    probs = forward(spec, params, x, mode="eval")
    return ProbabilityMatrix(
        model_name=model_name,
        class_names=tuple(class_names),
        sample_ids=tuple(sample_ids),
        rows=probs,
    )


def history_to_csv(history) -> str:
    """Serialize epoch records as epoch,train_loss,train_acc,val_loss,val_acc."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])
    for rec in history:
        writer.writerow([
            rec.epoch,
            repr(rec.train_loss),
            repr(rec.train_acc),
            repr(rec.val_loss),
            repr(rec.val_acc),
        ])
    return buf.getvalue()


def parse_history_csv(text: str) -> tuple[EpochRecord, ...]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["epoch", "train_loss", "train_acc", "val_loss", "val_acc"]:
        raise DataError("history CSV must start with the epoch/loss/accuracy header")
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 5:
            raise DataError(f"history line {lineno}: expected 5 fields, got {len(row)}")
        try:
            records.append(EpochRecord(
                epoch=int(row[0]),
                train_loss=float(row[1]),
                train_acc=float(row[2]),
                val_loss=float(row[3]),
                val_acc=float(row[4]),
            ))
        except ValueError as exc:
            raise DataError(f"history line {lineno}: {exc}") from None
    return tuple(records)


def save_params(params: ModelParams, path) -> None:
    """Write parameters as an .npz archive with W0,b0,W1,b1,... entries."""
    arrays = {}
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        arrays[f"W{i}"] = w
        arrays[f"b{i}"] = b
    np.savez(Path(path), **arrays)


def load_params(path) -> ModelParams:
    path = Path(path)
    try:
        with np.load(path) as data:
            weights, biases = [], []
            for i in range(len(data.files) // 2):
                if f"W{i}" not in data or f"b{i}" not in data:
                    raise DataError(f"{path}: missing W{i}/b{i} entries")
                weights.append(data[f"W{i}"])
                biases.append(data[f"b{i}"])
    except DataError:
        raise
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    except Exception as exc:
        raise DataError(f"{path}: cannot read parameter archive ({exc})") from None
    if not weights:
        raise DataError(f"{path}: no parameter arrays found")
    return ModelParams(tuple(weights), tuple(biases))
