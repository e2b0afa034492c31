"""Dense tensor containers and the differentiable layer primitives.

Activations travel between layers as plain float64 ``numpy`` arrays laid out
``(N, C, H, W)``; a 3-D ``(C, H, W)`` array is accepted anywhere a batch is and
treated as a batch of one. Trainable parameters live in :class:`Tensor`, which
pairs the values with a same-shaped gradient buffer.

Every layer keeps the cache of its last forward call and consumes it in
``backward``; a layer instance therefore serves one forward/backward pair at a
time.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, ShapeError, StateError

__all__ = [
    "Tensor",
    "make_rng",
    "Conv2d",
    "Linear",
    "ReLU",
    "conv2d_forward",
    "conv2d_backward",
    "relu",
    "relu_backward",
    "linear_forward",
    "linear_backward",
    "sigmoid",
    "sigmoid_bce_loss",
    "sigmoid_bce_grad",
    "sgd_step",
    "init_params",
]


class Tensor:
    """A parameter array with a paired gradient buffer.

    Args:
        data: Anything ``numpy`` can turn into a float64 array of rank 1 to 4
            with every extent at least 1.
    """

    __slots__ = ("data", "grad")

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64)
        if not 1 <= arr.ndim <= 4:
            raise ShapeError(f"tensor rank must be 1..4, got shape {arr.shape}")
        if 0 in arr.shape:
            raise ShapeError(f"tensor extents must be >= 1, got shape {arr.shape}")
        self.data = arr
        self.grad = np.zeros_like(arr)

    @classmethod
    def zeros(cls, shape) -> "Tensor":
        return cls(np.zeros(shape))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator used for every random draw in the package.

    PCG64 is a 64-bit-state generator whose stream is fixed by ``seed``, so two
    models built from the same seed consume identical draws.
    """
    return np.random.Generator(np.random.PCG64(seed))


def _as_batch(x: np.ndarray, rank: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == rank - 1:
        return x[np.newaxis], True
    if x.ndim != rank:
        raise ShapeError(f"expected a {rank - 1}-D or {rank}-D array, got shape {x.shape}")
    return x, False


class Conv2d:
    """Stride-1 2-D convolution computed through an im2col matrix product.

    Args:
        in_channels: Input channel count.
        out_channels: Output channel count.
        kernel_size: Odd square kernel extent.
        padding: Zero padding on each spatial border.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 3, padding: int = 1):
        if kernel_size < 1 or kernel_size % 2 == 0:
            raise ConfigError(f"kernel_size must be odd and positive, got {kernel_size}")
        if padding < 0:
            raise ConfigError(f"padding must be non-negative, got {padding}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.padding = padding
        self.weight = Tensor.zeros((out_channels, in_channels, kernel_size, kernel_size))
        self.bias = Tensor.zeros((out_channels,))
        self._cache = None

    def parameters(self) -> list[tuple[str, Tensor]]:
        return [("weight", self.weight), ("bias", self.bias)]

    def output_shape(self, h: int, w: int) -> tuple[int, int, int]:
        k, p = self.kernel_size, self.padding
        return self.out_channels, h + 2 * p - k + 1, w + 2 * p - k + 1

    def forward(self, x: np.ndarray) -> np.ndarray:
        xb, squeeze = _as_batch(x, 4)
        n, c, h, w = xb.shape
        if c != self.in_channels:
            raise ShapeError(
                f"conv input shape {x.shape} does not match weight shape {self.weight.shape}"
            )
        k, p = self.kernel_size, self.padding
        _, ho, wo = self.output_shape(h, w)
        if ho < 1 or wo < 1:
            raise ShapeError(f"kernel {k}x{k} with padding {p} does not fit input {x.shape}")
        xp = np.pad(xb, ((0, 0), (0, 0), (p, p), (p, p)))
        # (N, C, Ho, Wo, k, k) -> rows indexed by (n, i, j), columns by (c, u, v)
        windows = sliding_window_view(xp, (k, k), axis=(2, 3))
        cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
        wmat = self.weight.data.reshape(self.out_channels, -1)
        out = cols @ wmat.T + self.bias.data
        out = out.reshape(n, ho, wo, self.out_channels).transpose(0, 3, 1, 2)
        self._cache = (cols, xb.shape, squeeze)
        out = np.ascontiguousarray(out)
        return out[0] if squeeze else out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise StateError("Conv2d.backward called before forward")
        cols, (n, c, h, w), squeeze = self._cache
        g, _ = _as_batch(grad_out, 4)
        k, p = self.kernel_size, self.padding
        _, ho, wo = self.output_shape(h, w)
        if g.shape != (n, self.out_channels, ho, wo):
            raise ShapeError(
                f"grad_out shape {grad_out.shape} does not match forward output "
                f"{(n, self.out_channels, ho, wo)}"
            )
        gmat = g.transpose(0, 2, 3, 1).reshape(-1, self.out_channels)
        self.weight.grad += (gmat.T @ cols).reshape(self.weight.shape)
        self.bias.grad += gmat.sum(axis=0)
        dcols = (gmat @ self.weight.data.reshape(self.out_channels, -1)).reshape(n, ho, wo, c, k, k)
        dxp = np.zeros((n, c, h + 2 * p, w + 2 * p))
        for u in range(k):
            for v in range(k):
                dxp[:, :, u:u + ho, v:v + wo] += dcols[:, :, :, :, u, v].transpose(0, 3, 1, 2)
        dx = dxp[:, :, p:p + h, p:p + w]
        dx = np.ascontiguousarray(dx)
        return dx[0] if squeeze else dx


class Linear:
    """Fully connected layer ``out = W @ x + b`` over flat feature vectors."""

    def __init__(self, in_features: int, out_features: int):
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Tensor.zeros((out_features, in_features))
        self.bias = Tensor.zeros((out_features,))
        self._cache = None

    def parameters(self) -> list[tuple[str, Tensor]]:
        return [("weight", self.weight), ("bias", self.bias)]

    def forward(self, x: np.ndarray) -> np.ndarray:
        xb, squeeze = _as_batch(x, 2)
        if xb.shape[1] != self.in_features:
            raise ShapeError(
                f"linear input length {xb.shape[1]} does not match in_features {self.in_features}"
            )
        self._cache = (xb, squeeze)
        out = xb @ self.weight.data.T + self.bias.data
        return out[0] if squeeze else out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise StateError("Linear.backward called before forward")
        xb, squeeze = self._cache
        g, _ = _as_batch(grad_out, 2)
        if g.shape != (xb.shape[0], self.out_features):
            raise ShapeError(f"grad_out shape {grad_out.shape} does not match forward output")
        self.weight.grad += g.T @ xb
        self.bias.grad += g.sum(axis=0)
        dx = g @ self.weight.data
        return dx[0] if squeeze else dx


class ReLU:
    """Rectifier; the gradient at exactly zero is taken as zero."""

    def __init__(self):
        self._mask = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._mask is None:
            raise StateError("ReLU.backward called before forward")
        grad_out = np.asarray(grad_out, dtype=np.float64)
        if grad_out.shape != self._mask.shape:
            raise ShapeError(f"grad_out shape {grad_out.shape} does not match input {self._mask.shape}")
        return np.where(self._mask, grad_out, 0.0)

    @property
    def mask(self) -> np.ndarray | None:
        return self._mask


def conv2d_forward(x: np.ndarray, layer: Conv2d) -> np.ndarray:
    return layer.forward(x)


def conv2d_backward(grad_out: np.ndarray, layer: Conv2d) -> np.ndarray:
    return layer.backward(grad_out)


def linear_forward(x: np.ndarray, layer: Linear) -> np.ndarray:
    return layer.forward(x)


def linear_backward(grad_out: np.ndarray, layer: Linear) -> np.ndarray:
    return layer.backward(grad_out)


def relu(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0, x, 0.0)


def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.where(np.asarray(x) > 0, grad_out, 0.0)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    # split by sign so exp never overflows
    ez = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))


def sigmoid_bce_loss(logit, label):
    """Binary cross-entropy of ``sigmoid(logit)`` against ``label`` in {0, 1}.

    Uses ``max(z, 0) - z*y + log1p(exp(-|z|))``, which is finite for every
    finite logit. Works elementwise on arrays.
    """
    z = np.asarray(logit, dtype=np.float64)
    y = np.asarray(label, dtype=np.float64)
    if not np.all((y == 0) | (y == 1)):
        raise ConfigError(f"labels must be 0 or 1, got {label!r}")
    loss = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    return float(loss) if loss.ndim == 0 else loss


def sigmoid_bce_grad(logit, label):
    """Derivative of :func:`sigmoid_bce_loss` with respect to the logit: ``p - y``."""
    g = sigmoid(logit) - np.asarray(label, dtype=np.float64)
    return float(g) if g.ndim == 0 else g


def sgd_step(params, lr: float) -> None:
    """In-place ``p -= lr * grad`` for every tensor, then clear the gradients."""
    if not lr > 0:
        raise ConfigError(f"learning rate must be positive, got {lr}")
    for p in params:
        p.data -= lr * p.grad
        p.zero_grad()


def _fan_in(layer) -> int:
    return int(np.prod(layer.weight.shape[1:]))


def init_params(layer, rng: np.random.Generator):
    """Draw weights then bias uniformly on ``(-1/sqrt(fan_in), 1/sqrt(fan_in))``."""
    bound = 1.0 / math.sqrt(_fan_in(layer))
    layer.weight.data[...] = rng.uniform(-bound, bound, size=layer.weight.shape)
    layer.bias.data[...] = rng.uniform(-bound, bound, size=layer.bias.shape)
    layer.weight.zero_grad()
    layer.bias.zero_grad()
    return layer
