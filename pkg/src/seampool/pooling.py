"""Seam-carving pooling and max pooling with index-tracked backward passes.

Both layers only select input values, so their backward passes scatter the
upstream gradient onto the cached source coordinates and leave every other
input position at exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, ShapeError, StateError
from .seam import IndexMap, carve

SEAM = "seam"
MAX = "max"
POOL_KINDS = (SEAM, MAX)


@dataclass(frozen=True)
class PoolSpec:
    """Which pooling layer to build; ``kernel``/``stride`` apply to max pooling only."""

    kind: str = MAX
    kernel: tuple[int, int] = (2, 2)
    stride: tuple[int, int] | None = None

    def __post_init__(self):
        if self.kind not in POOL_KINDS:
            raise ConfigError(f"pool kind must be one of {POOL_KINDS}, got {self.kind!r}")
        if self.stride is None:
            object.__setattr__(self, "stride", tuple(self.kernel))
        if min(self.kernel) < 1 or min(self.stride) < 1:
            raise ConfigError(f"kernel {self.kernel} and stride {self.stride} must be positive")


@dataclass(frozen=True)
class PoolCache:
    """Source coordinate of each output cell plus the input shape.

    For max pooling ``index_map`` has one entry per output channel,
    ``(N, C, Ho, Wo)``; a seam map is shared by all channels, ``(N, Ho, Wo)``.
    """

    kind: str
    input_shape: tuple[int, ...]
    index_map: IndexMap

    @property
    def output_shape(self) -> tuple[int, ...]:
        n, c = self.input_shape[:2]
        return (n, c) + self.index_map.shape[-2:]


def _batch(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        return x[np.newaxis], True
    if x.ndim != 4:
        raise ShapeError(f"pooling expects (C, H, W) or (N, C, H, W), got shape {x.shape}")
    return x, False


def _scatter(grad_out: np.ndarray, cache: PoolCache, accumulate: bool) -> np.ndarray:
    g, squeeze = _batch(grad_out)
    if g.shape != cache.output_shape:
        raise StateError(
            f"grad_out shape {g.shape} does not match cached pool output {cache.output_shape}"
        )
    n, c = cache.input_shape[:2]
    rows, cols = cache.index_map.rows, cache.index_map.cols
    if rows.ndim == 3:
        rows, cols = rows[:, None], cols[:, None]
    bi = np.arange(n)[:, None, None, None]
    ci = np.arange(c)[None, :, None, None]
    grad_in = np.zeros(cache.input_shape)
    if accumulate:
        np.add.at(grad_in, (bi, ci, rows, cols), g)
    else:
        grad_in[bi, ci, rows, cols] = g
    return grad_in[0] if squeeze else grad_in


def seam_pool_forward(x: np.ndarray) -> tuple[np.ndarray, PoolCache]:
    """Halve height and width by carving ``W/2`` vertical then ``H/2`` horizontal seams.

    Each batch element is carved independently with one seam shared across
    its channels.
    """
    xb, squeeze = _batch(x)
    n, c, h, w = xb.shape
    if h % 2 or w % 2:
        raise ShapeError(
            f"seam pooling needs even height and width, got {h}x{w}; pad or crop the input first"
        )
    out, imap = carve(xb, w // 2, h // 2)
    cache = PoolCache(SEAM, xb.shape, imap)
    return (out[0] if squeeze else out), cache


def seam_pool_backward(grad_out: np.ndarray, cache: PoolCache) -> np.ndarray:
    """Route each output gradient to its source cell; carved cells get 0.

    The seam selection is held fixed, which is the exact derivative wherever
    the selection is locally constant.
    """
    if cache.kind != SEAM:
        raise StateError(f"expected a seam-pool cache, got {cache.kind!r}")
    return _scatter(grad_out, cache, accumulate=False)


def max_pool_forward(x: np.ndarray, spec: PoolSpec = PoolSpec()) -> tuple[np.ndarray, PoolCache]:
    """Window maximum; ties go to the first position in row-major window order."""
    xb, squeeze = _batch(x)
    n, c, h, w = xb.shape
    (kh, kw), (sh, sw) = spec.kernel, spec.stride
    if h < kh or w < kw or (h - kh) % sh or (w - kw) % sw:
        raise ShapeError(
            f"max-pool kernel {spec.kernel} with stride {spec.stride} does not tile input {h}x{w}"
        )
    win = sliding_window_view(xb, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    ho, wo = win.shape[2:4]
    flat = win.reshape(n, c, ho, wo, kh * kw)
    arg = np.argmax(flat, axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    rows = np.arange(ho)[:, None] * sh + arg // kw
    cols = np.arange(wo)[None, :] * sw + arg % kw
    cache = PoolCache(MAX, xb.shape, IndexMap(rows, cols))
    return (out[0] if squeeze else out), cache


def max_pool_backward(grad_out: np.ndarray, cache: PoolCache) -> np.ndarray:
    if cache.kind != MAX:
        raise StateError(f"expected a max-pool cache, got {cache.kind!r}")
    return _scatter(grad_out, cache, accumulate=True)


class SeamPool:
    """Layer wrapper around :func:`seam_pool_forward` / :func:`seam_pool_backward`."""

    kind = SEAM

    def __init__(self):
        self.cache: PoolCache | None = None

    def parameters(self):
        return []

    def output_shape(self, c: int, h: int, w: int) -> tuple[int, int, int]:
        return c, h // 2, w // 2

    def forward(self, x):
        out, self.cache = seam_pool_forward(x)
        return out

    def backward(self, grad_out):
        if self.cache is None:
            raise StateError("SeamPool.backward called before forward")
        return seam_pool_backward(grad_out, self.cache)

    def describe(self) -> str:
        return "seam-pool"


class MaxPool2d:
    """Layer wrapper around :func:`max_pool_forward` / :func:`max_pool_backward`."""

    kind = MAX

    def __init__(self, kernel=(2, 2), stride=None):
        self.spec = PoolSpec(MAX, tuple(kernel), None if stride is None else tuple(stride))
        self.cache: PoolCache | None = None

    def parameters(self):
        return []

    def output_shape(self, c: int, h: int, w: int) -> tuple[int, int, int]:
        (kh, kw), (sh, sw) = self.spec.kernel, self.spec.stride
        return c, (h - kh) // sh + 1, (w - kw) // sw + 1

    def forward(self, x):
        out, self.cache = max_pool_forward(x, self.spec)
        return out

    def backward(self, grad_out):
        if self.cache is None:
            raise StateError("MaxPool2d.backward called before forward")
        return max_pool_backward(grad_out, self.cache)

    def describe(self) -> str:
        kh, kw = self.spec.kernel
        return f"max-pool {kh}×{kw}"


def make_pool(spec: PoolSpec | str):
    if isinstance(spec, str):
        spec = PoolSpec(spec)
    if spec.kind == SEAM:
        return SeamPool()
    return MaxPool2d(spec.kernel, spec.stride)
