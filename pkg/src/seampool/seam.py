"""Seam carving: energy, minimal-seam dynamic programming and seam removal.

Arrays are channel-first. Single images are ``(C, H, W)``; every function also
accepts a leading batch axis ``(N, C, H, W)`` and then treats each element
independently, which is how the pooling layer carves a whole batch at once.

Energy is the channel-summed L1 gradient magnitude with forward differences,
where the last row and column reuse their neighbour's value (difference 0).
All seams are chosen with the smallest-index rule on ties, so results are
fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError

VERTICAL = "vertical"
HORIZONTAL = "horizontal"
_AXES = (VERTICAL, HORIZONTAL)


@dataclass(frozen=True)
class Seam:
    """Indices removed by one seam.

    ``indices[..., k]`` is the column removed from row ``k`` for a vertical
    seam, or the row removed from column ``k`` for a horizontal one.
    """

    axis: str
    indices: np.ndarray

    def __post_init__(self):
        if self.axis not in _AXES:
            raise ConfigError(f"seam axis must be one of {_AXES}, got {self.axis!r}")

    def is_connected(self) -> bool:
        return bool(np.all(np.abs(np.diff(self.indices, axis=-1)) <= 1))

    def total(self, energy: np.ndarray) -> np.ndarray:
        """Sum of ``energy`` along the seam, accumulated from the first row down."""
        e = np.asarray(energy, dtype=np.float64)
        if self.axis == HORIZONTAL:
            e = np.swapaxes(e, -1, -2)
        eb, idx, lead = _flat_seam_args(e, self.indices)
        picked = np.take_along_axis(eb, idx[:, :, None], axis=2)[:, :, 0]
        tot = picked[:, 0].copy()
        for k in range(1, picked.shape[1]):
            tot = tot + picked[:, k]
        return tot.reshape(lead) if lead else float(tot[0])


@dataclass(frozen=True)
class IndexMap:
    """Source coordinates of every retained output cell.

    ``rows[..., i, j]`` and ``cols[..., i, j]`` give the position in the
    original grid that output cell ``(i, j)`` was copied from.
    """

    rows: np.ndarray
    cols: np.ndarray

    @classmethod
    def identity(cls, h: int, w: int, lead: tuple[int, ...] = ()) -> "IndexMap":
        r, c = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
        return cls(np.broadcast_to(r, lead + (h, w)).copy(), np.broadcast_to(c, lead + (h, w)).copy())

    @property
    def shape(self) -> tuple[int, ...]:
        return self.rows.shape

    def is_injective(self) -> bool:
        h, w = self.rows.shape[-2:]
        codes = (self.rows.astype(np.int64) * (int(self.cols.max(initial=0)) + 1) + self.cols)
        codes = codes.reshape(-1, h * w)
        return all(np.unique(row).size == row.size for row in codes)

    def in_bounds(self, h: int, w: int) -> bool:
        return bool(
            np.all(self.rows >= 0) and np.all(self.rows < h)
            and np.all(self.cols >= 0) and np.all(self.cols < w)
        )

    def gather(self, x: np.ndarray) -> np.ndarray:
        """Pick ``x[..., c, rows, cols]`` for every channel ``c``."""
        x = np.asarray(x)
        if self.rows.ndim == 2:
            return x[..., self.rows, self.cols]
        b = np.arange(self.rows.shape[0])[:, None, None, None]
        ch = np.arange(x.shape[1])[None, :, None, None]
        return x[b, ch, self.rows[:, None], self.cols[:, None]]


def _flat_seam_args(e, indices):
    lead = e.shape[:-2]
    eb = e.reshape((-1,) + e.shape[-2:])
    idx = np.asarray(indices).reshape(eb.shape[0], -1)
    return eb, idx, lead


# -- batched kernels on canonical shapes: x (B, C, H, W), e/M (B, H, W), seam (B, H)

def _energy(x: np.ndarray) -> np.ndarray:
    dy = np.zeros_like(x)
    dx = np.zeros_like(x)
    dy[..., :-1, :] = np.abs(x[..., 1:, :] - x[..., :-1, :])
    dx[..., :, :-1] = np.abs(x[..., :, 1:] - x[..., :, :-1])
    return (dy + dx).sum(axis=-3)


def _cumulative(e: np.ndarray) -> np.ndarray:
    b, h, w = e.shape
    m = np.empty_like(e)
    m[:, 0] = e[:, 0]
    padded = np.full((b, w + 2), np.inf)
    for i in range(1, h):
        padded[:, 1:-1] = m[:, i - 1]
        best = np.minimum(np.minimum(padded[:, :-2], padded[:, 1:-1]), padded[:, 2:])
        m[:, i] = e[:, i] + best
    return m


_STEPS = np.array([-1, 0, 1])


def _backtrack(m: np.ndarray) -> np.ndarray:
    b, h, w = m.shape
    seam = np.empty((b, h), dtype=np.intp)
    j = np.argmin(m[:, -1], axis=1)
    seam[:, -1] = j
    bi = np.arange(b)[:, None]
    for i in range(h - 2, -1, -1):
        cand = j[:, None] + _STEPS
        vals = np.where((cand >= 0) & (cand < w), m[bi, i, np.clip(cand, 0, w - 1)], np.inf)
        # argmin returns the first minimum, i.e. the smallest column on ties
        j = cand[bi[:, 0], np.argmin(vals, axis=1)]
        seam[:, i] = j
    return seam


def _keep_columns(seam: np.ndarray, w: int) -> np.ndarray:
    ar = np.arange(w - 1)
    return ar + (ar >= seam[..., None])


def _remove(x, rows, cols, seam):
    w = x.shape[-1]
    keep = _keep_columns(seam, w)
    x = np.take_along_axis(x, keep[:, None], axis=3)
    rows = np.take_along_axis(rows, keep, axis=2)
    cols = np.take_along_axis(cols, keep, axis=2)
    return x, rows, cols


def _to_batch(x: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        return x[np.newaxis], True
    if x.ndim == 4:
        return x, False
    raise ShapeError(f"expected a (C, H, W) or (N, C, H, W) array, got shape {x.shape}")


def _check_axis(axis: str) -> None:
    if axis not in _AXES:
        raise ConfigError(f"axis must be one of {_AXES}, got {axis!r}")


# -- public API

def energy_map(x: np.ndarray) -> np.ndarray:
    """Channel-summed L1 forward-difference gradient magnitude.

    Args:
        x: ``(C, H, W)`` or ``(N, C, H, W)`` array. A 2-D array is read as a
            single channel.

    Returns:
        Non-negative ``(H, W)`` (or ``(N, H, W)``) energy map.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[np.newaxis]
    if x.ndim not in (3, 4):
        raise ShapeError(f"expected a (C, H, W) or (N, C, H, W) array, got shape {x.shape}")
    return _energy(x)


def cumulative_energy(e: np.ndarray, axis: str = VERTICAL) -> np.ndarray:
    """Minimal connected-path energy ending at every cell.

    For ``axis="vertical"`` paths run top to bottom; for ``"horizontal"`` they
    run left to right. The result keeps the orientation of ``e``.
    """
    _check_axis(axis)
    e = np.asarray(e, dtype=np.float64)
    if e.ndim < 2:
        raise ShapeError(f"energy map must be at least 2-D, got shape {e.shape}")
    if axis == HORIZONTAL:
        e = np.swapaxes(e, -1, -2)
    m = _cumulative(e.reshape((-1,) + e.shape[-2:])).reshape(e.shape)
    if axis == HORIZONTAL:
        m = np.swapaxes(m, -1, -2)
    return np.ascontiguousarray(m)


def extract_min_seam(m: np.ndarray, axis: str = VERTICAL) -> Seam:
    """Backtrack the minimal seam from a cumulative map.

    Starts at the first minimum of the last row (column for horizontal seams)
    and walks back choosing the smallest-index minimal predecessor among the
    up to three connected neighbours.
    """
    _check_axis(axis)
    m = np.asarray(m, dtype=np.float64)
    if axis == HORIZONTAL:
        m = np.swapaxes(m, -1, -2)
    lead = m.shape[:-2]
    seam = _backtrack(m.reshape((-1,) + m.shape[-2:]))
    return Seam(axis, seam.reshape(lead + seam.shape[-1:]))


def remove_seam(x: np.ndarray, seam: Seam, index_map: IndexMap | None = None):
    """Delete one seam from every channel of ``x``.

    Args:
        x: ``(C, H, W)`` or ``(N, C, H, W)`` array.
        seam: Seam for ``x``'s spatial grid, with one index row per batch element.
        index_map: Map of ``x`` into an earlier grid. Defaults to the identity.

    Returns:
        ``(carved, index_map)`` where ``index_map`` records, for each surviving
        cell, its source coordinate (composed with the map passed in).

    Raises:
        ShapeError: if the dimension being reduced is already 1 or the seam does
            not fit ``x``.
    """
    xb, squeeze = _to_batch(x)
    b, _, h, w = xb.shape
    if index_map is None:
        index_map = IndexMap.identity(h, w, () if squeeze else (b,))
    rows = index_map.rows.reshape(b, h, w)
    cols = index_map.cols.reshape(b, h, w)
    idx = np.asarray(seam.indices)
    horizontal = seam.axis == HORIZONTAL
    if horizontal:
        xb, rows, cols = (np.swapaxes(a, -1, -2) for a in (xb, rows, cols))
    length, width = xb.shape[-2:]
    if width < 2:
        raise ShapeError(f"cannot remove a {seam.axis} seam from a grid of shape {(h, w)}")
    idx = idx.reshape(b, -1)
    if idx.shape[1] != length or np.any(idx < 0) or np.any(idx >= width):
        raise ShapeError(f"{seam.axis} seam of shape {seam.indices.shape} does not fit grid {(h, w)}")
    if np.any(np.abs(np.diff(idx, axis=-1)) > 1):
        raise ShapeError("seam is not connected")
    xb, rows, cols = _remove(xb, rows, cols, idx)
    if horizontal:
        xb, rows, cols = (np.ascontiguousarray(np.swapaxes(a, -1, -2)) for a in (xb, rows, cols))
    if squeeze:
        return xb[0], IndexMap(rows[0], cols[0])
    return xb, IndexMap(rows, cols)


def carve(x: np.ndarray, k_vertical: int, k_horizontal: int = 0, return_seams: bool = False):
    """Remove ``k_vertical`` vertical then ``k_horizontal`` horizontal seams.

    Energy is recomputed from the current array before each seam, so this is
    the sequential greedy algorithm. Batched input carves each element
    independently; seams may differ between elements.

    Returns:
        ``(carved, index_map)`` with ``index_map`` pointing into the original
        grid. With ``return_seams=True`` a third item lists the removed seams
        in order, each expressed in the grid it was removed from.
    """
    xb, squeeze = _to_batch(x)
    b, _, h, w = xb.shape
    if not (0 <= k_vertical < w) or not (0 <= k_horizontal < h):
        raise ShapeError(
            f"cannot carve {k_vertical} vertical / {k_horizontal} horizontal seams "
            f"from a grid of shape {(h, w)}"
        )
    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    rows = np.broadcast_to(rows, (b, h, w)).copy()
    cols = np.broadcast_to(cols, (b, h, w)).copy()
    seams = []
    for _ in range(k_vertical):
        s = _backtrack(_cumulative(_energy(xb)))
        seams.append(Seam(VERTICAL, s[0] if squeeze else s))
        xb, rows, cols = _remove(xb, rows, cols, s)
    if k_horizontal:
        xb, rows, cols = (np.swapaxes(a, -1, -2) for a in (xb, rows, cols))
        for _ in range(k_horizontal):
            s = _backtrack(_cumulative(_energy(xb)))
            seams.append(Seam(HORIZONTAL, s[0] if squeeze else s))
            xb, rows, cols = _remove(xb, rows, cols, s)
        xb, rows, cols = (np.ascontiguousarray(np.swapaxes(a, -1, -2)) for a in (xb, rows, cols))
    if squeeze:
        out, imap = xb[0], IndexMap(rows[0], cols[0])
    else:
        out, imap = xb, IndexMap(rows, cols)
    return (out, imap, seams) if return_seams else (out, imap)


@dataclass
class RetargetResult:
    image: np.ndarray
    energy: np.ndarray
    index_map: IndexMap
    overlay: np.ndarray


SEAM_COLOR = (255, 0, 0)


def retarget_image(image: np.ndarray, target_w: int, target_h: int) -> RetargetResult:
    """Seam-carve an ``(H, W)`` or ``(H, W, C)`` pixel array to ``target_h x target_w``.

    The result also carries the pre-carve energy map and a copy of the input
    with every removed pixel painted :data:`SEAM_COLOR`. Pixel values are
    copied, never resampled, so the output dtype matches the input.
    """
    img = np.asarray(image)
    h, w = img.shape[:2]
    if not (1 <= target_w <= w and 1 <= target_h <= h):
        raise ConfigError(f"target {target_w}x{target_h} must lie within 1..{w} x 1..{h}")
    chw = img[np.newaxis] if img.ndim == 2 else np.moveaxis(img, -1, 0)
    chw = chw.astype(np.float64)
    energy = _energy(chw[np.newaxis])[0]
    _, imap = carve(chw, w - target_w, h - target_h)
    out = img[imap.rows, imap.cols]
    overlay = np.stack([img] * 3, axis=-1) if img.ndim == 2 else img[..., :3].copy()
    removed = np.ones((h, w), dtype=bool)
    removed[imap.rows, imap.cols] = False
    overlay[removed] = SEAM_COLOR
    return RetargetResult(out, energy, imap, overlay)
