"""Checkpoint files: a text manifest followed by little-endian float32 data.

Layout::

    SEAMPOOL-CHECKPOINT 1
    pool_kind=seam
    seed=12
    tensor conv1.weight 16,3,3,3 0
    ...
    end
    <raw float32 bytes>

Each ``tensor`` line gives name, shape and byte offset into the data block;
tensors are stored back to back in manifest order. Metadata lines are free
``key=value`` pairs.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import CheckpointError

MAGIC = "SEAMPOOL-CHECKPOINT 1"
_END = "end"


def save_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict[str, object] | None = None) -> None:
    lines = [MAGIC]
    for key, value in (meta or {}).items():
        if "\n" in str(value) or "=" in key:
            raise CheckpointError(f"invalid checkpoint metadata {key!r}")
        lines.append(f"{key}={value}")
    offset = 0
    blobs = []
    for name, arr in tensors.items():
        data = np.ascontiguousarray(arr, dtype="<f4")
        lines.append(f"tensor {name} {','.join(map(str, data.shape))} {offset}")
        blobs.append(data.tobytes())
        offset += data.nbytes
    lines.append(_END)
    header = ("\n".join(lines) + "\n").encode("ascii")
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            for b in blobs:
                fh.write(b)
    except OSError as exc:
        raise CheckpointError(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    """Read a checkpoint; returns ``(tensors as float64, metadata strings)``."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    marker = ("\n" + _END + "\n").encode()
    cut = raw.find(marker)
    if not raw.startswith(MAGIC.encode()) or cut < 0:
        raise CheckpointError(f"{path} is not a checkpoint file")
    data = raw[cut + len(marker):]
    meta: dict[str, str] = {}
    tensors: dict[str, np.ndarray] = {}
    try:
        for line in raw[:cut].decode("ascii").splitlines()[1:]:
            if line.startswith("tensor "):
                _, name, shape_s, off_s = line.split(" ")
                shape = tuple(int(s) for s in shape_s.split(","))
                off = int(off_s)
                count = int(np.prod(shape))
                if off + 4 * count > len(data):
                    raise CheckpointError(f"{path}: tensor {name} runs past end of file")
                arr = np.frombuffer(data, dtype="<f4", count=count, offset=off)
                tensors[name] = arr.reshape(shape).astype(np.float64)
            elif "=" in line:
                key, value = line.split("=", 1)
                meta[key] = value
            else:
                raise CheckpointError(f"{path}: malformed manifest line {line!r}")
    except (ValueError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"{path}: malformed manifest ({exc})") from exc
    return tensors, meta


def save_model(path, model, **meta) -> None:
    save_checkpoint(path, model.state_dict(), {"pool_kind": model.pool_kind, **meta})


def load_model(path, pool_kind: str | None = None):
    """Rebuild a model from ``path``.

    Returns ``(model, meta, mismatch)``; the pool kind always comes from the
    manifest and ``mismatch`` is True when ``pool_kind`` disagreed with it.
    """
    from .model import Model

    tensors, meta = load_checkpoint(path)
    kind = meta.get("pool_kind")
    if kind is None:
        raise CheckpointError(f"{path}: manifest has no pool_kind")
    try:
        model = Model(kind)
        model.load_state_dict(tensors)
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"{os.fspath(path)}: incompatible with the model ({exc})") from exc
    return model, meta, pool_kind is not None and pool_kind != kind
