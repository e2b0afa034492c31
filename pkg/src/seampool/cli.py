"""Command-line entry point: ``seampool {train,eval,carve,featmaps,compare,bench}``.

Every command writes ``<command>-config.txt`` (``key=value`` lines) into its
output directory. Exit codes: 0 success, 2 configuration error, 3 data error,
4 checkpoint error.
"""

from __future__ import annotations

import argparse
import logging
import shlex
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_model, save_model
from .data import SplitSpec, export_split_manifest, load_directory, load_image_tensor, split, synth_dataset
from .errors import CheckpointError, ConfigError, DataError, ShapeError
from .imageio import read_image, to_gray8, write_png
from .metrics import format_report
from .model import build_model, summary
from .pooling import max_pool_backward, max_pool_forward, seam_pool_backward, seam_pool_forward
from .seam import retarget_image
from .training import TrainConfig, evaluate, export_history, train

log = logging.getLogger("seampool")

EXIT_CONFIG, EXIT_DATA, EXIT_CHECKPOINT = 2, 3, 4


def write_manifest(out_dir: Path, command: str, args: argparse.Namespace, **extra) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{command}-config.txt"
    items = {"command": command, "version": __version__}
    items.update({k: v for k, v in sorted(vars(args).items()) if k != "func"})
    items.update(extra)
    with open(path, "w") as fh:
        for k, v in items.items():
            if isinstance(v, (list, tuple)):
                v = ",".join(map(str, v))
            fh.write(f"{k}={v}\n")
    return path


def replay_argv(manifest: dict[str, str]) -> list[str]:
    """Argument vector that reproduces the run recorded in ``manifest``."""
    return shlex.split(manifest["argv"])


def read_manifest(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k] = v
    return out


# -- data helpers


def _class_dirs(root: Path, classes) -> tuple[str, str]:
    if classes:
        return tuple(classes)
    if not root.is_dir():
        raise ConfigError(f"data directory {root} does not exist")
    subdirs = sorted(p.name for p in root.iterdir() if p.is_dir())
    if len(subdirs) != 2:
        raise ConfigError(f"{root} must contain exactly two class directories (found {subdirs}); pass --classes")
    return subdirs[0], subdirs[1]


def load_splits(source: dict):
    """Build (train, val, test) from a data-source description."""
    if source["data"] is None:
        ds = synth_dataset(int(source["data_seed"]), int(source["n_per_class"]))
    else:
        root = Path(source["data"])
        ds = load_directory(root, _class_dirs(root, source.get("classes")))
    return ds, split(ds, SplitSpec(seed=int(source["split_seed"])))


def _source_from_args(args) -> dict:
    if args.data is None and not args.synthetic:
        raise ConfigError("one of --data or --synthetic is required")
    seed = args.seed
    return {
        "data": args.data,
        "classes": args.classes,
        "n_per_class": args.n_per_class,
        "data_seed": seed if args.data_seed is None else args.data_seed,
        "split_seed": seed,
    }


def _source_meta(source: dict) -> dict:
    return {
        "data": "synthetic" if source["data"] is None else source["data"],
        "classes": ",".join(source["classes"] or []),
        "n_per_class": source["n_per_class"],
        "data_seed": source["data_seed"],
        "split_seed": source["split_seed"],
    }


def _config_from_args(args) -> TrainConfig:
    return TrainConfig(lr=args.lr, batch_size=args.batch, max_epochs=args.max_epochs,
                       patience=args.patience, seed=args.seed)


def _train_one(kind: str, splits, cfg: TrainConfig, out: Path, source: dict):
    train_set, val_set, test_set = splits
    model = build_model(kind, cfg.seed)
    log.info("training %s model\n%s", kind, summary(model))
    model, hist = train(model, train_set, val_set, cfg)
    out.mkdir(parents=True, exist_ok=True)
    save_model(out / "checkpoint.ckpt", model, seed=cfg.seed, best_epoch=hist.best_epoch,
               stopped_epoch=hist.stopped_epoch, **_source_meta(source))
    export_history(hist, out / "history.tsv")
    export_split_manifest(out / "split.csv", *splits)
    cm, metrics = evaluate(model, test_set)
    (out / "report.txt").write_text(format_report(cm, metrics, train_set.class_names))
    return model, hist, cm, metrics


# -- commands


def cmd_train(args) -> int:
    source = _source_from_args(args)
    cfg = _config_from_args(args)
    out = Path(args.out)
    write_manifest(out, "train", args, **{f"effective_{k}": v for k, v in vars(cfg).items()})
    _, splits = load_splits(source)
    _, hist, _, metrics = _train_one(args.pool, splits, cfg, out, source)
    print(f"pool={args.pool} best_epoch={hist.best_epoch} stopped_epoch={hist.stopped_epoch} "
          f"test_accuracy={metrics.accuracy:.4f} eval_loss={metrics.eval_loss:.6f}")
    return 0


def cmd_eval(args) -> int:
    model, meta, mismatch = load_model(args.checkpoint, args.pool)
    if mismatch:
        log.warning("--pool %s disagrees with checkpoint pool_kind=%s; using %s",
                    args.pool, model.pool_kind, model.pool_kind)
    if args.data is None and not args.synthetic:
        if meta.get("data") is None:
            raise ConfigError("checkpoint has no data source; pass --data or --synthetic")
        source = {
            "data": None if meta["data"] == "synthetic" else meta["data"],
            "classes": [c for c in meta.get("classes", "").split(",") if c] or None,
            "n_per_class": meta.get("n_per_class", 60),
            "data_seed": meta.get("data_seed", meta.get("seed", 12)),
            "split_seed": meta.get("split_seed", meta.get("seed", 12)),
        }
    else:
        if args.seed is None:
            args.seed = int(meta.get("seed", 12))
        source = _source_from_args(args)
    out = Path(args.out) if args.out else Path(args.checkpoint).parent
    write_manifest(out, "eval", args, pool_kind=model.pool_kind, pool_mismatch=mismatch, **_source_meta(source))
    ds, (_, _, test_set) = load_splits(source)
    cm, metrics = evaluate(model, test_set)
    report = format_report(cm, metrics, ds.class_names)
    (out / "eval-report.txt").write_text(report)
    sys.stdout.write(report)
    return 0


def cmd_carve(args) -> int:
    src = Path(args.input)
    out = Path(args.out)
    write_manifest(out, "carve", args)
    img = read_image(src, "RGB")
    res = retarget_image(img, args.width, args.height)
    write_png(out / f"{src.stem}_carved.png", res.image)
    if args.emit_energy:
        write_png(out / f"{src.stem}_energy.png", to_gray8(res.energy))
    if args.emit_seams:
        write_png(out / f"{src.stem}_seams.png", res.overlay)
    print(f"{src} {img.shape[1]}x{img.shape[0]} -> {res.image.shape[1]}x{res.image.shape[0]}")
    return 0


def cmd_featmaps(args) -> int:
    model, meta, _ = load_model(args.checkpoint)
    out = Path(args.out)
    write_manifest(out, "featmaps", args, pool_kind=model.pool_kind)
    x = load_image_tensor(args.input)
    model.forward(x[np.newaxis], record=True)
    count = 0
    for stage in ("conv1", "pool", "conv2"):
        maps = model.activations[stage][0]
        (out / stage).mkdir(parents=True, exist_ok=True)
        for c, fmap in enumerate(maps):
            write_png(out / stage / f"{c:02d}.png", to_gray8(fmap))
            count += 1
    print(f"wrote {count} feature maps ({model.pool_kind} model) to {out}")
    return 0


COMPARE_ROWS = [
    ("eval_loss", lambda m, h: f"{m.eval_loss:.6f}"),
    ("accuracy", lambda m, h: f"{m.accuracy:.6f}"),
    *[(f"class{c}.{name}", (lambda c, attr: lambda m, h: f"{getattr(m, attr)[c]:.6f}")(c, attr))
      for c in (0, 1) for name, attr in (("precision", "precision"), ("recall", "recall"), ("f1-score", "f1"))],
    ("initial_train_loss", lambda m, h: f"{h.initial_train_loss:.6f}"),
    ("best_epoch", lambda m, h: str(h.best_epoch)),
    ("stopped_epoch", lambda m, h: str(h.stopped_epoch)),
    ("init_checksum", lambda m, h: h.init_checksum[:16]),
]


def cmd_compare(args) -> int:
    source = _source_from_args(args)
    cfg = _config_from_args(args)
    out = Path(args.out)
    write_manifest(out, "compare", args, **{f"effective_{k}": v for k, v in vars(cfg).items()})
    _, splits = load_splits(source)
    results = {}
    for kind in ("seam", "max"):
        _, hist, cm, metrics = _train_one(kind, splits, cfg, out / kind, source)
        results[kind] = (metrics, hist, cm)
    lines = [f"{'metric':<20}{'seam':>18}{'max':>18}"]
    for name, fmt in COMPARE_ROWS:
        lines.append(f"{name:<20}" + "".join(f"{fmt(results[k][0], results[k][1]):>18}" for k in ("seam", "max")))
    for kind in ("seam", "max"):
        (a, b), (c, d) = results[kind][2].counts
        lines.append(f"confusion.{kind}={a},{b};{c},{d}")
    lines.append("test_ids=" + ",".join(splits[2].ids))
    text = "\n".join(lines) + "\n"
    (out / "compare-report.txt").write_text(text)
    sys.stdout.write(text)
    return 0


def _parse_sizes(text: str) -> list[tuple[int, int, int]]:
    sizes = []
    for item in text.split(","):
        parts = item.lower().replace("×", "x").split("x")
        if len(parts) != 3:
            raise ConfigError(f"size {item!r} must look like CxHxW")
        sizes.append(tuple(int(p) for p in parts))
    return sizes


def _time(fn, repeats: int) -> list[float]:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return times


def bench_rows(sizes, repeats: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    rows = []
    for c, h, w in sizes:
        x = rng.random((1, c, h, w))

        def seam():
            out, cache = seam_pool_forward(x)
            seam_pool_backward(np.ones_like(out), cache)

        def mx():
            out, cache = max_pool_forward(x)
            max_pool_backward(np.ones_like(out), cache)

        ts, tm = _time(seam, repeats), _time(mx, repeats)
        rows.append(((c, h, w), min(ts), statistics.median(ts), min(tm), statistics.median(tm)))
    return rows


def cmd_bench(args) -> int:
    sizes = _parse_sizes(args.sizes)
    if args.repeats < 1:
        raise ConfigError("--repeats must be >= 1")
    out = Path(args.out)
    write_manifest(out, "bench", args)
    rows = bench_rows(sizes, args.repeats)
    lines = [f"{'size':<12}{'seam_min_s':>12}{'seam_med_s':>12}{'max_min_s':>12}{'max_med_s':>12}{'ratio':>10}"]
    for (c, h, w), smin, smed, mmin, mmed in rows:
        lines.append(f"{f'{c}x{h}x{w}':<12}{smin:>12.6f}{smed:>12.6f}{mmin:>12.6f}{mmed:>12.6f}{smed / mmed:>10.1f}")
        if smed <= mmed:
            log.warning("seam pooling was not slower than max pooling at %dx%dx%d", c, h, w)
    text = "\n".join(lines) + "\n"
    (out / "bench.tsv").write_text(text)
    sys.stdout.write(text)
    return 0


# -- parser


def _add_data_flags(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--data", help="root directory holding one sub-directory per class")
    g.add_argument("--synthetic", action="store_true", help="use the generated bar dataset")
    p.add_argument("--classes", nargs=2, metavar=("CLASS0", "CLASS1"), help="class directory names")
    p.add_argument("--n-per-class", type=int, default=60, help="synthetic images per class")
    p.add_argument("--data-seed", type=int, default=None, help="synthetic data seed (default: --seed)")


def _add_train_flags(p):
    d = TrainConfig()
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--lr", type=float, default=d.lr)
    p.add_argument("--batch", type=int, default=d.batch_size)
    p.add_argument("--max-epochs", type=int, default=d.max_epochs)
    p.add_argument("--patience", type=int, default=d.patience)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seampool", description="Seam-carving pooling experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model variant")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--pool", choices=("seam", "max"), default="seam")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on its test split")
    p.add_argument("--checkpoint", required=True)
    _add_data_flags(p)
    p.add_argument("--seed", type=int, default=None, help="split seed (default: from checkpoint)")
    p.add_argument("--pool", choices=("seam", "max"), default=None)
    p.add_argument("--out", default=None, help="report directory (default: checkpoint directory)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("carve", help="seam-carve an image to a target size")
    p.add_argument("--input", required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--emit-energy", action="store_true")
    p.add_argument("--emit-seams", action="store_true")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_carve)

    p = sub.add_parser("featmaps", help="dump per-channel feature maps for one image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_featmaps)

    p = sub.add_parser("compare", help="train and evaluate both pooling variants")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bench", help="time seam vs max pooling forward+backward")
    p.add_argument("--sizes", default="16x32x32,16x16x16,3x32x32,32x64x64")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    args.argv = shlex.join(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, ShapeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
