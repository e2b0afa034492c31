"""Two-class image datasets, the test/train/val split protocol, and batching.

Images are stored as float64 ``(3, 32, 32)`` arrays scaled to ``[0, 1]``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigError, DataError
from .imageio import IMAGE_SUFFIXES, read_image
from .tensor import make_rng

IMAGE_SIZE = 32


@dataclass
class Dataset:
    images: np.ndarray  # (N, 3, 32, 32) in [0, 1]
    labels: np.ndarray  # (N,) ints in {0, 1}
    ids: list[str]
    class_names: tuple[str, str] = ("class0", "class1")

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64).reshape(-1, 3, IMAGE_SIZE, IMAGE_SIZE)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if not (len(self.images) == len(self.labels) == len(self.ids)):
            raise ConfigError("images, labels and ids must have equal length")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise ConfigError("labels must be 0 or 1")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.images[idx], self.labels[idx], [self.ids[i] for i in idx], self.class_names)


@dataclass(frozen=True)
class SplitSpec:
    test_per_class: int = 5
    train_fraction: float = 0.8
    seed: int = 12


def _image_to_array(img: Image.Image) -> np.ndarray:
    if img.size != (IMAGE_SIZE, IMAGE_SIZE):
        img = img.resize((IMAGE_SIZE, IMAGE_SIZE), Image.Resampling.BILINEAR)
    return np.asarray(img, dtype=np.float64).transpose(2, 0, 1) / 255.0


def load_image_tensor(path) -> np.ndarray:
    """Read one file as a ``(3, 32, 32)`` float array in ``[0, 1]``."""
    return _image_to_array(Image.fromarray(read_image(path, "RGB")))


def load_directory(root, class_dirs: tuple[str, str]) -> Dataset:
    """Load ``root/<class_dirs[0]>`` as label 0 and ``root/<class_dirs[1]>`` as label 1.

    Files are taken in lexicographic name order; that order defines which
    items count as "last" for the test split. Grayscale and palette images are
    converted to RGB; everything is bilinear-resized to 32x32.
    """
    root = Path(root)
    if len(class_dirs) != 2:
        raise ConfigError(f"exactly two class directories are required, got {class_dirs!r}")
    images, labels, ids = [], [], []
    for label, name in enumerate(class_dirs):
        d = root / name
        if not d.is_dir():
            raise ConfigError(f"class directory {d} does not exist")
        files = sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        if not files:
            raise DataError(f"class directory {d} contains no PNG/JPEG images")
        for p in files:
            images.append(load_image_tensor(p))
            labels.append(label)
            ids.append(str(p))
    return Dataset(np.stack(images), np.array(labels), ids, tuple(class_dirs))


def split(dataset: Dataset, spec: SplitSpec = SplitSpec()) -> tuple[Dataset, Dataset, Dataset]:
    """Per class: last ``test_per_class`` items to test, the rest shuffled then cut train/val.

    Both classes draw their shuffles from one generator seeded with
    ``spec.seed``, class 0 first.
    """
    if not 0 < spec.train_fraction <= 1:
        raise ConfigError(f"train_fraction must be in (0, 1], got {spec.train_fraction}")
    rng = make_rng(spec.seed)
    train, val, test = [], [], []
    for c in (0, 1):
        idx = np.flatnonzero(dataset.labels == c)
        if len(idx) < spec.test_per_class + 1:
            raise ConfigError(
                f"class {c} has {len(idx)} items; need more than test_per_class={spec.test_per_class}"
            )
        cut = len(idx) - spec.test_per_class
        test.extend(idx[cut:])
        rest = idx[:cut][rng.permutation(cut)]
        n_train = int(round(cut * spec.train_fraction))
        train.extend(rest[:n_train])
        val.extend(rest[n_train:])
    return dataset.subset(train), dataset.subset(val), dataset.subset(test)


def synth_dataset(seed: int = 12, n_per_class: int = 60) -> Dataset:
    """Noisy images with a bright bar: horizontal for class 0, vertical for class 1.

    The bar is 3 pixels thick at a uniformly drawn offset in 2..27; background
    noise is uniform on [0, 0.35] and the bar adds 0.65, so pixels stay in
    ``[0, 1]``.
    """
    if n_per_class < 6:
        raise ConfigError(f"n_per_class must be at least 6, got {n_per_class}")
    rng = make_rng(seed)
    images, labels, ids = [], [], []
    for c in (0, 1):
        for k in range(n_per_class):
            img = rng.uniform(0.0, 0.35, size=(3, IMAGE_SIZE, IMAGE_SIZE))
            pos = int(rng.integers(2, 28))
            if c == 0:
                img[:, pos:pos + 3, :] += 0.65
            else:
                img[:, :, pos:pos + 3] += 0.65
            images.append(np.clip(img, 0.0, 1.0))
            labels.append(c)
            ids.append(f"synthetic/{c}/{k:03d}")
    return Dataset(np.stack(images), np.array(labels), ids, ("horizontal-bar", "vertical-bar"))


def batches(data: Dataset, batch_size: int, seed: int, epoch: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Shuffled ``(images, labels)`` batches; the order depends only on ``(seed, epoch)``."""
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    order = np.random.Generator(np.random.PCG64([seed, epoch])).permutation(len(data))
    return [
        (data.images[order[i:i + batch_size]], data.labels[order[i:i + batch_size]])
        for i in range(0, len(data), batch_size)
    ]


def export_split_manifest(path, train: Dataset, val: Dataset, test: Dataset) -> None:
    """One ``path,label,split`` row per item."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "label", "split"])
        for name, part in (("train", train), ("val", val), ("test", test)):
            for sid, label in zip(part.ids, part.labels):
                w.writerow([sid, int(label), name])


def read_split_manifest(path) -> list[tuple[str, int, str]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return [(p, int(lab), s) for p, lab, s in rows[1:]]
