"""Binary confusion matrix and the metrics derived from it."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class ConfusionMatrix:
    """``counts[true][pred]`` for classes 0 and 1."""

    counts: tuple[tuple[int, int], tuple[int, int]]

    def __post_init__(self):
        arr = np.asarray(self.counts)
        if arr.shape != (2, 2) or np.any(arr < 0) or not np.all(arr == np.round(arr)):
            raise ConfigError(f"confusion matrix must be 2x2 non-negative counts, got {self.counts!r}")
        object.__setattr__(self, "counts", tuple(tuple(int(v) for v in row) for row in arr))

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "ConfusionMatrix":
        counts = np.zeros((2, 2), dtype=np.int64)
        np.add.at(counts, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
        return cls(counts)

    @property
    def total(self) -> int:
        return sum(map(sum, self.counts))

    def as_array(self) -> np.ndarray:
        return np.array(self.counts)


@dataclass(frozen=True)
class Metrics:
    precision: tuple[float, float]
    recall: tuple[float, float]
    f1: tuple[float, float]
    accuracy: float
    eval_loss: float | None = None
    # which per-class quantities had a zero denominator and were reported as 0
    undefined: tuple[str, ...] = field(default=())


def _ratio(num: int, den: int) -> Fraction | None:
    return None if den == 0 else Fraction(num, den)


def metrics_from_confusion(cm: ConfusionMatrix, eval_loss: float | None = None) -> Metrics:
    """Per-class precision/recall/F1 and accuracy, computed exactly on the counts.

    A zero denominator yields 0 and is listed in :attr:`Metrics.undefined`.
    """
    if cm.total == 0:
        raise ConfigError("confusion matrix is empty")
    m = cm.counts
    precision, recall, f1, undefined = [], [], [], []
    for c in (0, 1):
        tp = m[c][c]
        p = _ratio(tp, m[0][c] + m[1][c])
        r = _ratio(tp, m[c][0] + m[c][1])
        f = None if p is None or r is None or p + r == 0 else 2 * p * r / (p + r)
        for name, v in (("precision", p), ("recall", r), ("f1", f)):
            if v is None:
                undefined.append(f"class{c}.{name}")
        precision.append(float(p or 0))
        recall.append(float(r or 0))
        f1.append(float(f or 0))
    accuracy = float(Fraction(m[0][0] + m[1][1], cm.total))
    return Metrics(tuple(precision), tuple(recall), tuple(f1), accuracy, eval_loss, tuple(undefined))


def format_confusion(cm: ConfusionMatrix) -> str:
    (a, b), (c, d) = cm.counts
    width = max(len(str(v)) for v in (a, b, c, d, "pred1"))
    return "\n".join([
        f"{'':<7}{'pred0':>{width}} {'pred1':>{width}}",
        f"{'true0':<7}{a:>{width}} {b:>{width}}",
        f"{'true1':<7}{c:>{width}} {d:>{width}}",
    ])


def format_report(cm: ConfusionMatrix, metrics: Metrics, class_names=("class0", "class1")) -> str:
    """Key-value metric report followed by the confusion grid."""
    lines = [f"accuracy={metrics.accuracy:.6f}"]
    if metrics.eval_loss is not None:
        lines.append(f"eval_loss={metrics.eval_loss:.6f}")
    for c in (0, 1):
        lines.append(f"class{c}.name={class_names[c]}")
        lines.append(f"class{c}.precision={metrics.precision[c]:.6f}")
        lines.append(f"class{c}.recall={metrics.recall[c]:.6f}")
        lines.append(f"class{c}.f1-score={metrics.f1[c]:.6f}")
    if metrics.undefined:
        lines.append(f"undefined={','.join(metrics.undefined)}")
    (a, b), (c, d) = cm.counts
    lines.append(f"confusion={a},{b};{c},{d}")
    lines.append("")
    lines.append("confusion matrix (rows = true class, columns = predicted class)")
    lines.append(format_confusion(cm))
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if not line.strip():
            break
        key, _, value = line.partition("=")
        out[key] = value
    return out
