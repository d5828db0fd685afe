"""Fully connected regression network (numpy, float64).

Hidden layers use ReLU, the output layer is affine. Inputs and outputs are
standardized per dimension with statistics stored in the model, so callers
always work in physical units.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, replace
from typing import TYPE_CHECKING

import numpy as np

from .common import DimensionMismatch, FormatError, NonFiniteLoss
from .formats import format_row, header_block, parse_row, read_lines, split_header, write_atomic

if TYPE_CHECKING:
    from collections.abc import Sequence
    from pathlib import Path

logger = logging.getLogger(__name__)

FORWARD_HIDDEN = (73, 300, 580, 880, 1200)
INVERSE_HIDDEN = (901, 700, 550, 300, 180)
MIN_STEP = 1e-12

# -----------------------------------------------------------------------------
# Data Types
# -----------------------------------------------------------------------------


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden_dims: tuple[int, ...]
    output_dim: int
    activation: str = "relu"
    seed: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 1e-4
    batch_size: int = 32
    max_epochs: int = 200
    patience: int = 20
    validation_fraction: float = 0.1

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if not self.hidden_dims:
            msg = "hidden_dims must not be empty"
            raise ValueError(msg)
        if min(self.input_dim, self.output_dim, *self.hidden_dims) < 1:
            msg = "all layer sizes must be at least 1"
            raise ValueError(msg)
        if self.activation != "relu":
            msg = f"unsupported activation {self.activation!r}"
            raise ValueError(msg)
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 1:
            msg = "learning_rate, batch_size and max_epochs must be positive"
            raise ValueError(msg)
        if not 0 <= self.validation_fraction < 1:
            msg = f"validation_fraction must be in [0, 1), got {self.validation_fraction}"
            raise ValueError(msg)

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_dims, self.output_dim)

    @classmethod
    def forward(cls, inputs: int = 36, outputs: int = 400, **kwargs: object) -> MlpSpec:
        return cls(inputs, FORWARD_HIDDEN, outputs, **kwargs)  # type: ignore[arg-type]

    @classmethod
    def inverse(cls, inputs: int = 400, outputs: int = 36, **kwargs: object) -> MlpSpec:
        return cls(inputs, INVERSE_HIDDEN, outputs, **kwargs)  # type: ignore[arg-type]


@dataclass(frozen=True)
class MlpModel:
    spec: MlpSpec
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: np.ndarray
    y_scale: np.ndarray
    fingerprint: str = ""

    def __post_init__(self) -> None:
        sizes = self.spec.layer_sizes
        for k, (w, b) in enumerate(zip(self.weights, self.biases, strict=True)):
            if w.shape != (sizes[k], sizes[k + 1]) or b.shape != (sizes[k + 1],):
                msg = f"layer {k} shape {w.shape} does not chain {sizes}"
                raise DimensionMismatch(msg)
        if len(self.weights) != len(sizes) - 1:
            msg = f"expected {len(sizes) - 1} layers, got {len(self.weights)}"
            raise DimensionMismatch(msg)

    @property
    def n_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases, strict=True))


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    validation_loss: list[float] = field(default_factory=list)
    r2: float = float("nan")
    mse: float = float("nan")
    seconds: float = 0.0
    epochs: int = 0
    final_step: float = 0.0


@dataclass(frozen=True)
class CurvePoint:
    size: int
    r2: float
    mse: float
    seconds: float
    epochs: int


# -----------------------------------------------------------------------------
# Metrics
# -----------------------------------------------------------------------------


def _as_matrix(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return a[:, None] if a.ndim == 1 else a


def r2_score(pred: np.ndarray, truth: np.ndarray) -> float:
    """Coefficient of determination averaged uniformly over output dimensions.

    A constant output dimension scores 1 when predicted exactly, else 0.
    """
    pred, truth = _as_matrix(pred), _as_matrix(truth)
    if pred.shape != truth.shape:
        msg = f"prediction shape {pred.shape} does not match {truth.shape}"
        raise DimensionMismatch(msg)
    if truth.shape[0] < 2:
        msg = "r2_score needs at least two rows"
        raise ValueError(msg)
    ss_res = np.sum((truth - pred) ** 2, axis=0)
    ss_tot = np.sum((truth - truth.mean(axis=0)) ** 2, axis=0)
    flat = ss_tot == 0
    scores = np.where(flat, (ss_res == 0).astype(float), 0.0)
    scores[~flat] = 1.0 - ss_res[~flat] / ss_tot[~flat]
    return float(scores.mean())


def mse(pred: np.ndarray, truth: np.ndarray) -> float:
    pred, truth = np.asarray(pred, dtype=float), np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        msg = f"prediction shape {pred.shape} does not match {truth.shape}"
        raise DimensionMismatch(msg)
    return float(np.mean((pred - truth) ** 2))


# -----------------------------------------------------------------------------
# Network
# -----------------------------------------------------------------------------


def init(spec: MlpSpec) -> MlpModel:
    """Scaled-uniform weights (He for ReLU layers, Glorot for the output), zero biases."""
    rng = np.random.default_rng(spec.seed)
    sizes = spec.layer_sizes
    weights, biases = [], []
    for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:], strict=True)):
        last = k == len(sizes) - 2
        limit = np.sqrt(6.0 / (fan_in + fan_out)) if last else np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(
        spec,
        tuple(weights),
        tuple(biases),
        np.zeros(spec.input_dim),
        np.ones(spec.input_dim),
        np.zeros(spec.output_dim),
        np.ones(spec.output_dim),
    )


def _forward(
    weights: Sequence[np.ndarray], biases: Sequence[np.ndarray], x: np.ndarray
) -> list[np.ndarray]:
    """Activations of every layer, input included."""
    acts = [x]
    for k, (w, b) in enumerate(zip(weights, biases, strict=True)):
        z = acts[-1] @ w + b
        acts.append(z if k == len(weights) - 1 else np.maximum(z, 0.0))
    return acts


def predict_batch(model: MlpModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.spec.input_dim:
        msg = f"input shape {x.shape} does not match input_dim {model.spec.input_dim}"
        raise DimensionMismatch(msg)
    xs = (x - model.x_mean) / model.x_scale
    out = _forward(model.weights, model.biases, xs)[-1]
    return out * model.y_scale + model.y_mean


def predict(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Output vector for a single input vector."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != model.spec.input_dim:
        msg = f"input length {x.size} does not match input_dim {model.spec.input_dim}"
        raise DimensionMismatch(msg)
    return predict_batch(model, x[None, :])[0]


def loss_and_gradients(
    model: MlpModel, x: np.ndarray, y: np.ndarray
) -> tuple[float, list[np.ndarray], list[np.ndarray], np.ndarray]:
    """Mean squared error in standardized units and its gradients.

    Returns (loss, weight grads, bias grads, input grad); ``x`` and ``y`` are
    already standardized.
    """
    acts = _forward(model.weights, model.biases, x)
    diff = acts[-1] - y
    loss = float(np.mean(diff**2))
    delta = 2.0 * diff / diff.size
    grads_w: list[np.ndarray] = [np.empty(0)] * len(model.weights)
    grads_b: list[np.ndarray] = [np.empty(0)] * len(model.weights)
    for k in range(len(model.weights) - 1, -1, -1):
        grads_w[k] = acts[k].T @ delta
        grads_b[k] = delta.sum(axis=0)
        delta = delta @ model.weights[k].T
        if k > 0:
            delta = delta * (acts[k] > 0)
    return loss, grads_w, grads_b, delta


def _standardizer(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = a.mean(axis=0)
    scale = a.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale


@dataclass
class _Adam:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> _Adam:
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])

    def copy(self) -> _Adam:
        return _Adam([a.copy() for a in self.m], [a.copy() for a in self.v], self.t)

    def update(
        self, params: list[np.ndarray], grads: Sequence[np.ndarray], spec: MlpSpec, step: float
    ) -> None:
        self.t += 1
        c1 = 1 - spec.beta1**self.t
        c2 = 1 - spec.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v, strict=True):
            m *= spec.beta1
            m += (1 - spec.beta1) * g
            v *= spec.beta2
            v += (1 - spec.beta2) * g * g
            p -= step * (m / c1) / (np.sqrt(v / c2) + 1e-8)


def train(
    model: MlpModel,
    x: np.ndarray,
    y: np.ndarray,
    *,
    holdout: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[MlpModel, TrainReport]:
    """Fit ``model`` to (x, y) with mini-batch Adam and early stopping.

    An epoch that increases the training loss is undone and the step size
    halved, so the recorded training loss never increases. R² and MSE in the
    report are measured on ``holdout`` when given, else on the validation split.
    """
    spec = model.spec
    x, y = _as_matrix(x), _as_matrix(y)
    if x.shape[0] != y.shape[0]:
        msg = f"{x.shape[0]} inputs but {y.shape[0]} outputs"
        raise DimensionMismatch(msg)
    if x.shape[1] != spec.input_dim or y.shape[1] != spec.output_dim:
        msg = f"data dims ({x.shape[1]}, {y.shape[1]}) do not match model"
        raise DimensionMismatch(msg)
    if x.shape[0] < 2:
        msg = "training needs at least two samples"
        raise ValueError(msg)

    started = time.perf_counter()
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(x.shape[0])
    n_val = int(round(spec.validation_fraction * x.shape[0]))
    n_val = min(n_val, x.shape[0] - 1)
    val_idx, train_idx = order[:n_val], order[n_val:]

    x_mean, x_scale = _standardizer(x[train_idx])
    y_mean, y_scale = _standardizer(y[train_idx])
    xs, ys = (x - x_mean) / x_scale, (y - y_mean) / y_scale
    xt, yt = xs[train_idx], ys[train_idx]
    xv, yv = xs[val_idx], ys[val_idx]

    model = replace(model, x_mean=x_mean, x_scale=x_scale, y_mean=y_mean, y_scale=y_scale)
    params = [w.copy() for w in model.weights] + [b.copy() for b in model.biases]
    n_layers = len(model.weights)
    adam = _Adam.zeros_like(params)
    step = spec.learning_rate
    report = TrainReport()

    def full_loss(p: list[np.ndarray], xa: np.ndarray, ya: np.ndarray) -> float:
        return float(np.mean((_forward(p[:n_layers], p[n_layers:], xa)[-1] - ya) ** 2))

    prev_train = full_loss(params, xt, yt)
    best_val, best_params, stale = np.inf, [p.copy() for p in params], 0
    for epoch in range(1, spec.max_epochs + 1):
        snapshot, adam_snapshot = [p.copy() for p in params], adam.copy()
        perm = rng.permutation(len(xt))
        for start in range(0, len(xt), spec.batch_size):
            batch = perm[start : start + spec.batch_size]
            current = replace(model, weights=tuple(params[:n_layers]), biases=tuple(params[n_layers:]))
            _, gw, gb, _ = loss_and_gradients(current, xt[batch], yt[batch])
            grads = [g + spec.weight_decay * w for g, w in zip(gw, params[:n_layers], strict=True)]
            adam.update(params, grads + gb, spec, step)

        train_loss = full_loss(params, xt, yt)
        if not np.isfinite(train_loss):
            msg = f"non-finite training loss at epoch {epoch} (step {step:.3g})"
            raise NonFiniteLoss(msg)
        if train_loss > prev_train:
            params, adam = snapshot, adam_snapshot
            step /= 2
            train_loss = prev_train
            logger.debug("epoch %d raised the loss; step halved to %.3g", epoch, step)
        prev_train = train_loss
        report.train_loss.append(train_loss)

        val_loss = full_loss(params, xv, yv) if n_val else train_loss
        report.validation_loss.append(val_loss)
        report.epochs = epoch
        if val_loss < best_val:
            best_val, best_params, stale = val_loss, [p.copy() for p in params], 0
        else:
            stale += 1
        if stale >= spec.patience or step < MIN_STEP:
            logger.debug("early stop at epoch %d", epoch)
            break

    trained = replace(
        model,
        weights=tuple(best_params[:n_layers]),
        biases=tuple(best_params[n_layers:]),
        fingerprint=f"n={x.shape[0]};seed={spec.seed};epochs={report.epochs}",
    )
    if holdout is not None:
        hx, hy = _as_matrix(holdout[0]), _as_matrix(holdout[1])
    elif n_val >= 2:
        hx, hy = x[val_idx], y[val_idx]
    else:
        hx, hy = x, y
    pred = predict_batch(trained, hx)
    report.r2 = r2_score(pred, hy)
    report.mse = mse(pred, hy)
    report.seconds = time.perf_counter() - started
    report.final_step = step
    logger.info(
        "trained %s in %d epochs (%.1f s): R² %.4f, MSE %.4g",
        spec.layer_sizes,
        report.epochs,
        report.seconds,
        report.r2,
        report.mse,
    )
    return trained, report


def learning_curve(
    train_xy: tuple[np.ndarray, np.ndarray],
    test_xy: tuple[np.ndarray, np.ndarray],
    sizes: Sequence[int],
    spec: MlpSpec,
) -> list[CurvePoint]:
    """Held-out R² and MSE for models trained on the first ``size`` samples."""
    x, y = train_xy
    points = []
    for size in sizes:
        if not 2 <= size <= len(x):
            msg = f"training size {size} outside 2..{len(x)}"
            raise ValueError(msg)
        _, report = train(init(spec), x[:size], y[:size], holdout=test_xy)
        points.append(CurvePoint(size, report.r2, report.mse, report.seconds, report.epochs))
    return points


def time_predict(model: MlpModel, x: np.ndarray, repeats: int = 50) -> float:
    """Median wall time (s) of a single-sample ``predict`` call."""
    predict(model, x)
    times = []
    for _ in range(max(repeats, 1)):
        started = time.perf_counter()
        predict(model, x)
        times.append(time.perf_counter() - started)
    return float(np.median(times))


# -----------------------------------------------------------------------------
# Persistence
# -----------------------------------------------------------------------------

MODEL_MAGIC = "morphgrid-mlp"


def save_model(model: MlpModel, path: str | Path) -> None:
    """Text file: ``# key=value`` spec header, then tagged rows of 17-digit values."""
    spec = asdict(model.spec)
    spec["hidden_dims"] = ",".join(str(h) for h in model.spec.hidden_dims)
    head = header_block({"format": MODEL_MAGIC, **spec, "fingerprint": model.fingerprint})
    lines = []
    for name in ("x_mean", "x_scale", "y_mean", "y_scale"):
        lines.append(f"{name},{format_row(getattr(model, name))}")
    for k, (w, b) in enumerate(zip(model.weights, model.biases, strict=True)):
        lines.extend(f"w{k},{format_row(row)}" for row in w)
        lines.append(f"b{k},{format_row(b)}")
    write_atomic(path, head + "\n".join(lines) + "\n")


_SPEC_TYPES = {
    "input_dim": int,
    "output_dim": int,
    "activation": str,
    "seed": int,
    "learning_rate": float,
    "beta1": float,
    "beta2": float,
    "weight_decay": float,
    "batch_size": int,
    "max_epochs": int,
    "patience": int,
    "validation_fraction": float,
}


def _read_spec(header: dict[str, str]) -> MlpSpec:
    if header.get("format") != MODEL_MAGIC:
        msg = "not a model file (missing format header)"
        raise FormatError(msg)
    try:
        values: dict[str, object] = {k: t(header[k]) for k, t in _SPEC_TYPES.items()}
        values["hidden_dims"] = tuple(int(h) for h in header["hidden_dims"].split(","))
        return MlpSpec(**values)  # type: ignore[arg-type]
    except KeyError as e:
        msg = f"missing header field {e.args[0]!r}"
        raise FormatError(msg) from None
    except ValueError as e:
        msg = f"bad model header: {e}"
        raise FormatError(msg) from None


def load_model(path: str | Path) -> MlpModel:
    header, body = split_header(read_lines(path))
    spec = _read_spec(header)
    rows: dict[str, list[list[float]]] = {}
    for number, text in body:
        tag, _, rest = text.partition(",")
        rows.setdefault(tag, []).append(parse_row(rest, number))

    def vector(tag: str, size: int) -> np.ndarray:
        got = rows.get(tag, [])
        if len(got) != 1 or len(got[0]) != size:
            msg = f"row {tag!r} missing or not of length {size}"
            raise FormatError(msg)
        return np.array(got[0])

    sizes = spec.layer_sizes
    weights, biases = [], []
    for k in range(len(sizes) - 1):
        block = rows.get(f"w{k}", [])
        if any(len(r) != sizes[k + 1] for r in block):
            msg = f"weight block w{k} has rows of the wrong length"
            raise FormatError(msg)
        w = np.array(block).reshape(len(block), sizes[k + 1])
        if w.shape != (sizes[k], sizes[k + 1]):
            msg = f"weight block w{k} has shape {w.shape}, expected {(sizes[k], sizes[k + 1])}"
            raise FormatError(msg)
        weights.append(w)
        biases.append(vector(f"b{k}", sizes[k + 1]))
    return MlpModel(
        spec,
        tuple(weights),
        tuple(biases),
        vector("x_mean", spec.input_dim),
        vector("x_scale", spec.input_dim),
        vector("y_mean", spec.output_dim),
        vector("y_scale", spec.output_dim),
        header.get("fingerprint", ""),
    )
