"""The two-convolution reference classifier with a pluggable pooling layer.

    3x32x32 -> conv 3->16 (3x3, pad 1) -> ReLU -> pool -> 16x16x16
            -> conv 16->32 (3x3, pad 1) -> ReLU -> flatten 8192 -> linear -> 1 logit

The seam and max variants share every parameter shape and, for a given seed,
every initial parameter value; only the pooling layer differs.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import ConfigError, ShapeError
from .pooling import POOL_KINDS, SEAM, MaxPool2d, SeamPool
from .tensor import Conv2d, Linear, ReLU, Tensor, init_params, make_rng, sgd_step, sigmoid_bce_grad, sigmoid_bce_loss

INPUT_SHAPE = (3, 32, 32)


class Model:
    """Reference CNN. Use :func:`build_model` to get an initialized instance.

    Args:
        pool_kind: ``"seam"`` or ``"max"``.
    """

    def __init__(self, pool_kind: str = SEAM):
        if pool_kind not in POOL_KINDS:
            raise ConfigError(f"pool kind must be one of {POOL_KINDS}, got {pool_kind!r}")
        self.pool_kind = pool_kind
        self.conv1 = Conv2d(3, 16, 3, padding=1)
        self.relu1 = ReLU()
        self.pool = SeamPool() if pool_kind == SEAM else MaxPool2d((2, 2))
        self.conv2 = Conv2d(16, 32, 3, padding=1)
        self.relu2 = ReLU()
        self.fc = Linear(32 * 16 * 16, 1)
        self.activations: dict[str, np.ndarray] = {}
        self._flat_shape = None

    # -- parameters

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = []
        for prefix in ("conv1", "conv2", "fc"):
            for name, t in getattr(self, prefix).parameters():
                out.append((f"{prefix}.{name}", t))
        return out

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(t.size for t in self.parameters())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for name, t in self.named_parameters():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != t.shape:
                raise ShapeError(f"parameter {name}: expected shape {t.shape}, got {arr.shape}")
            t.data[...] = arr
            t.zero_grad()

    def zero_grad(self) -> None:
        for t in self.parameters():
            t.zero_grad()

    def checksum(self) -> str:
        """SHA-256 over all parameter bytes in declaration order."""
        h = hashlib.sha256()
        for name, t in self.named_parameters():
            h.update(name.encode())
            h.update(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
        return h.hexdigest()

    # -- computation

    def forward(self, batch: np.ndarray, record: bool = False) -> np.ndarray:
        """Logits for an ``(N, 3, 32, 32)`` batch (or one ``(3, 32, 32)`` image).

        With ``record=True`` the post-ReLU conv outputs and the pool output are
        kept in :attr:`activations` under ``conv1``, ``pool`` and ``conv2``.
        """
        x = np.asarray(batch, dtype=np.float64)
        single = x.ndim == 3
        if single:
            x = x[np.newaxis]
        if x.ndim != 4 or x.shape[1:] != INPUT_SHAPE:
            raise ShapeError(f"model input must be (N, 3, 32, 32), got shape {np.shape(batch)}")
        a1 = self.relu1.forward(self.conv1.forward(x))
        p = self.pool.forward(a1)
        a2 = self.relu2.forward(self.conv2.forward(p))
        self._flat_shape = a2.shape
        # flatten is channel-major, row-major: (c, i, j)
        logits = self.fc.forward(a2.reshape(a2.shape[0], -1))[:, 0]
        if record:
            self.activations = {"conv1": a1, "pool": p, "conv2": a2}
        return logits[0] if single else logits

    __call__ = forward

    def backward(self, grad_logits: np.ndarray) -> None:
        """Accumulate parameter gradients for ``d loss / d logits``."""
        g = np.asarray(grad_logits, dtype=np.float64).reshape(-1, 1)
        g = self.fc.backward(g).reshape(self._flat_shape)
        g = self.conv2.backward(self.relu2.backward(g))
        g = self.pool.backward(g)
        self.conv1.backward(self.relu1.backward(g))

    def loss(self, batch: np.ndarray, labels: np.ndarray) -> float:
        """Mean sigmoid binary cross-entropy without touching gradients."""
        logits = self.forward(batch)
        return float(np.mean(sigmoid_bce_loss(logits, np.asarray(labels))))

    def loss_and_grad(self, batch, labels) -> float:
        labels = np.asarray(labels, dtype=np.float64)
        logits = np.atleast_1d(self.forward(batch))
        n = logits.shape[0]
        loss = float(np.mean(sigmoid_bce_loss(logits, labels)))
        self.backward(sigmoid_bce_grad(logits, labels) / n)
        return loss

    def train_step(self, batch, labels, lr: float) -> float:
        """One SGD step on the mean batch loss; returns the pre-step loss.

        ``lr == 0`` computes the loss and clears gradients without updating.
        """
        self.zero_grad()
        loss = self.loss_and_grad(batch, labels)
        if lr == 0:
            self.zero_grad()
        else:
            sgd_step(self.parameters(), lr)
        return loss

    def summary(self) -> str:
        return summary(self)


def build_model(pool_kind: str = SEAM, seed: int = 12) -> Model:
    """Create the reference model with seeded uniform initialization.

    Draws are taken in the fixed order conv1, conv2, fc (weights before bias
    within each), independent of ``pool_kind``.
    """
    model = Model(pool_kind)
    rng = make_rng(seed)
    for layer in (model.conv1, model.conv2, model.fc):
        init_params(layer, rng)
    return model


def layer_table(model: Model) -> list[tuple[str, tuple[int, ...], int]]:
    """``(name, output shape, parameter count)`` for each layer on a 3x32x32 input."""
    c1 = model.conv1.output_shape(32, 32)
    pooled = model.pool.output_shape(*c1)
    c2 = model.conv2.output_shape(*pooled[1:])
    flat = int(np.prod(c2))
    count = lambda layer: sum(t.size for _, t in layer.parameters())
    return [
        ("conv2d-1", c1, count(model.conv1)),
        ("relu-1", c1, 0),
        (model.pool.describe(), pooled, 0),
        ("conv2d-2", c2, count(model.conv2)),
        ("relu-2", c2, 0),
        ("flatten", (flat,), 0),
        ("linear", (model.fc.out_features,), count(model.fc)),
    ]


def _fmt_shape(shape) -> str:
    return "×".join(str(s) for s in shape)


def summary(model: Model) -> str:
    rows = layer_table(model)
    lines = [f"{'layer':<16}{'output shape':<16}{'params':>8}", "-" * 40]
    for name, shape, n in rows:
        lines.append(f"{name:<16}{_fmt_shape(shape):<16}{n:>8}")
    lines.append("-" * 40)
    lines.append(f"{'total':<32}{sum(r[2] for r in rows):>8}")
    return "\n".join(lines)
