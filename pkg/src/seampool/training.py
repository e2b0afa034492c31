"""Training with early stopping, evaluation, and loss-history export."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, batches
from .errors import ConfigError
from .metrics import ConfusionMatrix, Metrics, metrics_from_confusion
from .tensor import sigmoid, sigmoid_bce_loss

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.01
    batch_size: int = 16
    max_epochs: int = 300
    patience: int = 25
    seed: int = 12

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        for name in ("batch_size", "max_epochs", "patience"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.patience >= self.max_epochs:
            raise ConfigError(f"patience ({self.patience}) must be below max_epochs ({self.max_epochs})")


@dataclass
class History:
    """Per-epoch mean losses; epoch numbers start at 1."""

    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0
    initial_train_loss: float | None = None
    initial_val_loss: float | None = None
    init_checksum: str | None = None

    def __len__(self) -> int:
        return len(self.train_loss)


def predict_logits(model, data: Dataset, chunk: int = 64) -> np.ndarray:
    return np.concatenate([
        np.atleast_1d(model.forward(data.images[i:i + chunk])) for i in range(0, len(data), chunk)
    ])


def mean_loss(model, data: Dataset) -> float:
    """Mean BCE over all of ``data``, summed in item order."""
    return float(np.mean(sigmoid_bce_loss(predict_logits(model, data), data.labels)))


def predict(model, data: Dataset) -> np.ndarray:
    """Class predictions; ``sigmoid(logit) >= 0.5`` is class 1."""
    return (sigmoid(predict_logits(model, data)) >= 0.5).astype(np.int64)


def accuracy(model, data: Dataset) -> float:
    return float(np.mean(predict(model, data) == data.labels))


def train(model, train_set: Dataset, val_set: Dataset, config: TrainConfig = TrainConfig()):
    """Mini-batch SGD with early stopping on validation loss.

    After every epoch the full validation set is scored. Training stops once
    ``patience`` consecutive epochs fail to strictly lower the best validation
    loss, or at ``max_epochs``. The model is left holding the best epoch's
    parameters.

    Returns:
        ``(model, history)``.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ConfigError("train and validation splits must be non-empty")
    hist = History()
    if hasattr(model, "checksum"):
        hist.init_checksum = model.checksum()
    hist.initial_train_loss = mean_loss(model, train_set)
    hist.initial_val_loss = mean_loss(model, val_set)
    best_loss = np.inf
    best_state = model.state_dict()
    since_best = 0
    for epoch in range(1, config.max_epochs + 1):
        losses = [model.train_step(x, y, config.lr) for x, y in batches(train_set, config.batch_size, config.seed, epoch)]
        hist.train_loss.append(float(np.mean(losses)))
        v = mean_loss(model, val_set)
        hist.val_loss.append(v)
        hist.stopped_epoch = epoch
        if v < best_loss:
            best_loss, hist.best_epoch, since_best = v, epoch, 0
            best_state = model.state_dict()
        else:
            since_best += 1
        log.info("epoch %d train_loss=%.6f val_loss=%.6f", epoch, hist.train_loss[-1], v)
        if since_best >= config.patience:
            break
    model.load_state_dict(best_state)
    return model, hist


def evaluate(model, test_set: Dataset) -> tuple[ConfusionMatrix, Metrics]:
    """Confusion matrix and metrics on ``test_set``; ``eval_loss`` is the mean BCE."""
    if len(test_set) == 0:
        raise ConfigError("test split is empty")
    logits = predict_logits(model, test_set)
    pred = (sigmoid(logits) >= 0.5).astype(np.int64)
    cm = ConfusionMatrix.from_predictions(test_set.labels, pred)
    loss = float(np.mean(sigmoid_bce_loss(logits, test_set.labels)))
    return cm, metrics_from_confusion(cm, eval_loss=loss)


def export_history(history: History, path) -> None:
    """Tab-separated ``epoch, train_loss, val_loss`` rows plus a ``#`` footer."""
    if len(history) == 0:
        raise ConfigError("history is empty")
    lines = ["epoch\ttrain_loss\tval_loss"]
    for i, (t, v) in enumerate(zip(history.train_loss, history.val_loss), start=1):
        lines.append(f"{i}\t{t:.6f}\t{v:.6f}")
    lines.append(f"# best_epoch={history.best_epoch}")
    lines.append(f"# stopped_epoch={history.stopped_epoch}")
    if history.initial_train_loss is not None:
        lines.append(f"# initial_train_loss={history.initial_train_loss:.6f}")
        lines.append(f"# initial_val_loss={history.initial_val_loss:.6f}")
    if history.init_checksum:
        lines.append(f"# init_checksum={history.init_checksum}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_history(path) -> History:
    hist = History()
    with open(path) as fh:
        for line in fh.read().splitlines()[1:]:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key in ("best_epoch", "stopped_epoch"):
                    setattr(hist, key, int(value))
                elif key in ("initial_train_loss", "initial_val_loss"):
                    setattr(hist, key, float(value))
                elif key == "init_checksum":
                    hist.init_checksum = value
            elif line:
                _, t, v = line.split("\t")
                hist.train_loss.append(float(t))
                hist.val_loss.append(float(v))
    return hist
