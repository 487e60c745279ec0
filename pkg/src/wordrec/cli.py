"""Command-line pipeline: extract features, corrupt audio, train, evaluate.

Subcommands:

    extract          manifest of WAVs -> per-utterance feature files + stats
    mix-noise        corrupt one WAV at a target SNR
    train            extracted features -> per-accent checkpoint
    eval             checkpoint + features -> accuracy rows in a results CSV
    filterbank dump  triangular filter weights as CSV
    plot             accuracy-vs-SNR curves from a results CSV (needs matplotlib)

Option precedence is flags > --config JSON file > built-in defaults; config
file keys use the underscore form of the flag names (e.g. "frame_ms").
Exit codes: 0 success, 1 data or validation error, 2 usage error.

Noisy evaluation corrupts the original test waveforms and re-runs the full
extraction, so the `extract` output directory records the source WAV of every
feature file plus the exact extraction configuration. Train and eval runs
write JSON run manifests naming their inputs, seeds, and artifacts; re-running
from the same manifest reproduces outputs bit-identically.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__, errors
from .audio_io import SAMPLE_RATE_HZ, load_manifest, load_wav, save_wav
from .cnn import CnnConfig, TrainConfig, evaluate, init_model, load_model, save_model, train
from .dsp import PREEMPHASIS_COEFF, FrameConfig
from .features import (
    TENSOR_COLS,
    TENSOR_ROWS,
    ChannelStats,
    compute_stats,
    extract_tensor,
    normalize_tensor,
    read_features,
    write_features,
)
from .melbank import build_filterbank
from .noise import NoiseSpec, mix_at_snr

INDEX_NAME = "index.csv"
STATS_NAME = "stats.json"
EXTRACT_NAME = "extract.json"

INDEX_HEADER = ["feature", "word", "accent", "split", "source"]
RESULTS_HEADER = ["accent", "features", "noise", "snr_db", "accuracy"]

# what the results CSV calls each extraction mode
FEATURE_LABELS = {"mfcc": "mfcc", "fc": "fc", "both": "mfcc+fc"}

DEFAULTS = {
    "features": "both",
    "frame_ms": 20.0,
    "shift_ms": 10.0,
    "fft_size": 512,
    "preemphasis": PREEMPHASIS_COEFF,
    "window": "hamming",
    "num_filters": 24,
    "fmin_hz": 0.0,
    "fmax_hz": 8000.0,
    "vocabulary": None,
    "epochs": 25,
    "batch_size": 8,
    "learning_rate": 1e-3,
    "seed": 0,
    "noise": "none",
    "snr_grid": (0.0, 5.0, 10.0, 15.0, 20.0),
}


@dataclass(frozen=True)
class RunManifest:
    """Record of one train/eval invocation, sufficient to re-run it."""

    version: str
    command: str
    config: dict
    seeds: dict
    artifacts: dict

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _append_manifest(path, manifest: RunManifest) -> None:
    path = Path(path)
    entries = json.loads(path.read_text(encoding="utf-8")) if path.exists() else []
    entries.append(manifest.as_dict())
    _write_json(path, entries)


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise errors.MissingFile(f"config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise errors.CorruptFile(f"config file {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise errors.CorruptFile(f"config file {path}: expected a JSON object")
    return obj


def _opt(args: argparse.Namespace, config: dict, name: str):
    value = getattr(args, name)
    if value is not None:
        return value
    if name in config:
        return config[name]
    return DEFAULTS[name]


def _parse_grid(text: str) -> tuple[float, ...]:
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    if not parts:
        raise argparse.ArgumentTypeError("SNR grid is empty")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad SNR grid {text!r}") from exc


def _coerce_grid(value) -> tuple[float, ...]:
    # config files may hold the grid as a JSON list rather than "0,5,10"
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    return _parse_grid(value)


def _parse_words(text: str) -> list[str]:
    words = [w.strip() for w in str(text).split(",") if w.strip()]
    if not words:
        raise argparse.ArgumentTypeError("vocabulary is empty")
    return words


def _frame_config(o: dict) -> FrameConfig:
    return FrameConfig(
        frame_ms=float(o["frame_ms"]),
        shift_ms=float(o["shift_ms"]),
        fft_size=int(o["fft_size"]),
        preemphasis_coeff=float(o["preemphasis"]),
        window=o["window"],
    )


def _build_bank(o: dict):
    return build_filterbank(
        n_filters=int(o["num_filters"]),
        f_min_hz=float(o["fmin_hz"]),
        f_max_hz=float(o["fmax_hz"]),
        fft_size=int(o["fft_size"]),
        sample_rate_hz=SAMPLE_RATE_HZ,
    )


# ---------------------------------------------------------------------------
# extract


def cmd_extract(args: argparse.Namespace) -> int:
    config = _load_config_file(args.config)
    names = (
        "features", "frame_ms", "shift_ms", "fft_size", "preemphasis",
        "window", "num_filters", "fmin_hz", "fmax_hz", "vocabulary",
    )
    o = {n: _opt(args, config, n) for n in names}
    vocabulary = _parse_words(o["vocabulary"]) if isinstance(o["vocabulary"], str) else o["vocabulary"]
    manifest = load_manifest(args.manifest, vocabulary=vocabulary)
    fcfg = _frame_config(o)
    bank = _build_bank(o)

    tensors = []
    failures = []
    for rec in manifest.records:
        try:
            tensors.append(extract_tensor(load_wav(rec.path), fcfg, bank, features=o["features"]))
        except errors.WordrecError as exc:
            failures.append(f"{rec.path}: {exc}")
    if failures:
        for line in failures:
            print(f"error: {line}", file=sys.stderr)
        return 1

    train_tensors = [t for t, r in zip(tensors, manifest.records) if r.split == "train"]
    if not train_tensors:
        raise errors.EmptyDataset("manifest has no train rows to compute stats from")
    stats = compute_stats(train_tensors)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    index_rows = []
    for i, (rec, tensor) in enumerate(zip(manifest.records, tensors)):
        name = f"{i:05d}_{rec.accent}_{rec.split}_{rec.word}.fcf"
        write_features(out_dir / name, normalize_tensor(tensor, stats))
        index_rows.append([name, rec.word, rec.accent, rec.split, str(rec.path)])

    with open(out_dir / INDEX_NAME, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(INDEX_HEADER)
        writer.writerows(index_rows)
    _write_json(out_dir / STATS_NAME, stats.to_dict())
    _write_json(
        out_dir / EXTRACT_NAME,
        {
            "version": __version__,
            "features": o["features"],
            "frame": {
                "frame_ms": fcfg.frame_ms,
                "shift_ms": fcfg.shift_ms,
                "fft_size": fcfg.fft_size,
                "preemphasis_coeff": fcfg.preemphasis_coeff,
                "window": fcfg.window,
            },
            "filterbank": {
                "n_filters": int(o["num_filters"]),
                "f_min_hz": float(o["fmin_hz"]),
                "f_max_hz": float(o["fmax_hz"]),
            },
            "tensor": {"rows": TENSOR_ROWS, "cols": TENSOR_COLS},
            "sample_rate_hz": SAMPLE_RATE_HZ,
            "vocabulary": manifest.vocabulary,
            "accents": manifest.accents,
            "manifest": str(Path(args.manifest).resolve()),
        },
    )
    print(f"wrote {len(tensors)} feature files to {out_dir}")
    return 0


def _read_extract_dir(features_dir) -> tuple[dict, ChannelStats, list[dict]]:
    features_dir = Path(features_dir)
    for name in (EXTRACT_NAME, STATS_NAME, INDEX_NAME):
        if not (features_dir / name).is_file():
            raise errors.MissingFile(f"{features_dir} has no {name}; run `wordrec extract` first")
    meta = json.loads((features_dir / EXTRACT_NAME).read_text(encoding="utf-8"))
    stats = ChannelStats.from_dict(json.loads((features_dir / STATS_NAME).read_text(encoding="utf-8")))
    with open(features_dir / INDEX_NAME, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != INDEX_HEADER:
            raise errors.BadHeader(f"{features_dir / INDEX_NAME}: header {reader.fieldnames}")
        rows = list(reader)
    return meta, stats, rows


# ---------------------------------------------------------------------------
# mix-noise


def cmd_mix_noise(args: argparse.Namespace) -> int:
    config = _load_config_file(args.config)
    seed = int(_opt(args, config, "seed"))
    clean = load_wav(args.infile)
    mixed = mix_at_snr(clean, NoiseSpec(source=args.noise, snr_db=args.snr_db, seed=seed))
    if float(abs(mixed.samples).max()) > 1.0:
        print("warning: mix exceeds full scale and will clip on write", file=sys.stderr)
    save_wav(args.out, mixed)
    print(f"wrote {args.out} ({args.noise} at {args.snr_db:g} dB, seed {seed})")
    return 0


# ---------------------------------------------------------------------------
# train


def cmd_train(args: argparse.Namespace) -> int:
    config = _load_config_file(args.config)
    o = {n: _opt(args, config, n) for n in ("epochs", "batch_size", "learning_rate", "seed")}
    features_dir = Path(args.features)
    meta, stats, index = _read_extract_dir(features_dir)
    rows = [r for r in index if r["accent"] == args.accent and r["split"] == "train"]
    if not rows:
        raise errors.EmptyDataset(f"no training rows for accent {args.accent!r} in {features_dir}")
    vocabulary = meta["vocabulary"]
    dataset = [
        (read_features(features_dir / r["feature"]), vocabulary.index(r["word"])) for r in rows
    ]

    cnn_config = CnnConfig(
        height=int(meta["tensor"]["rows"]),
        width=int(meta["tensor"]["cols"]),
        channels=len(stats.channel_names),
        n_classes=len(vocabulary),
        seed=int(o["seed"]),
    )
    train_config = TrainConfig(
        epochs=int(o["epochs"]),
        batch_size=int(o["batch_size"]),
        learning_rate=float(o["learning_rate"]),
        seed=int(o["seed"]),
    )
    model, history = train(init_model(cnn_config), dataset, train_config)

    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    save_model(out, model)
    history_path = out.parent / (out.stem + "_history.csv")
    with open(history_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        writer.writerows([i + 1, f"{loss_value:.10g}"] for i, loss_value in enumerate(history))
    manifest = RunManifest(
        version=__version__,
        command="train",
        config={
            "extract": meta,
            "cnn": dataclasses.asdict(cnn_config),
            "train": dataclasses.asdict(train_config),
            "accent": args.accent,
        },
        seeds={"init": int(o["seed"]), "shuffle": int(o["seed"])},
        artifacts={
            "features_dir": str(features_dir.resolve()),
            "checkpoint": str(out.resolve()),
            "history": str(history_path.resolve()),
        },
    )
    _write_json(out.parent / (out.stem + "_manifest.json"), manifest.as_dict())
    tail = f", final loss {history[-1]:.4f}" if history else ""
    print(f"trained {args.accent!r} on {len(dataset)} examples for {len(history)} epochs{tail}")
    print(f"checkpoint {out}")
    return 0


# ---------------------------------------------------------------------------
# eval


def _append_results(path, rows: list[list[str]]) -> None:
    path = Path(path)
    fresh = not path.exists()
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if fresh:
            writer.writerow(RESULTS_HEADER)
        writer.writerows(rows)


def cmd_eval(args: argparse.Namespace) -> int:
    config = _load_config_file(args.config)
    noise = _opt(args, config, "noise")
    seed = int(_opt(args, config, "seed"))
    grid = _coerce_grid(_opt(args, config, "snr_grid"))
    features_dir = Path(args.features)
    meta, stats, index = _read_extract_dir(features_dir)
    model = load_model(args.checkpoint)

    vocabulary = meta["vocabulary"]
    want = (int(meta["tensor"]["rows"]), int(meta["tensor"]["cols"]), len(stats.channel_names))
    have = (model.config.height, model.config.width, model.config.channels)
    if have != want or model.config.n_classes != len(vocabulary):
        raise errors.ShapeMismatch(
            f"checkpoint expects {have} / {model.config.n_classes} classes, "
            f"features provide {want} / {len(vocabulary)} classes"
        )
    rows = [r for r in index if r["accent"] == args.accent and r["split"] == "test"]
    if not rows:
        raise errors.EmptyDataset(f"no test rows for accent {args.accent!r} in {features_dir}")
    labels = [vocabulary.index(r["word"]) for r in rows]
    features_label = FEATURE_LABELS[meta["features"]]
    noise_label = noise if noise == "none" or "/" not in str(noise) else Path(noise).stem

    out_rows = []
    if noise == "none":
        dataset = [
            (read_features(features_dir / r["feature"]), lab) for r, lab in zip(rows, labels)
        ]
        report = evaluate(model, dataset, condition="clean")
        out_rows.append([args.accent, features_label, "none", "clean", f"{report.accuracy:.6f}"])
    else:
        fcfg = FrameConfig(**meta["frame"])
        bank = build_filterbank(
            **meta["filterbank"],
            fft_size=fcfg.fft_size,
            sample_rate_hz=int(meta["sample_rate_hz"]),
        )
        for snr in grid:
            dataset = []
            for j, (r, lab) in enumerate(zip(rows, labels)):
                spec = NoiseSpec(source=noise, snr_db=snr, seed=seed + j)
                mixed = mix_at_snr(load_wav(r["source"]), spec)
                tensor = extract_tensor(mixed, fcfg, bank, features=meta["features"])
                dataset.append((normalize_tensor(tensor, stats), lab))
            report = evaluate(model, dataset, condition=f"{noise_label}@{snr:g}dB")
            out_rows.append(
                [args.accent, features_label, noise_label, f"{snr:g}", f"{report.accuracy:.6f}"]
            )

    _append_results(args.out, out_rows)
    manifest = RunManifest(
        version=__version__,
        command="eval",
        config={
            "extract": meta,
            "noise": noise,
            "snr_grid": list(grid) if noise != "none" else [],
            "accent": args.accent,
        },
        seeds={"noise": seed},
        artifacts={
            "checkpoint": str(Path(args.checkpoint).resolve()),
            "features_dir": str(features_dir.resolve()),
            "results": str(Path(args.out).resolve()),
        },
    )
    out_path = Path(args.out)
    _append_manifest(out_path.parent / (out_path.stem + "_manifest.json"), manifest)
    for row in out_rows:
        print(",".join(str(v) for v in row))
    return 0


# ---------------------------------------------------------------------------
# filterbank dump


def cmd_filterbank_dump(args: argparse.Namespace) -> int:
    config = _load_config_file(args.config)
    o = {n: _opt(args, config, n) for n in ("num_filters", "fmin_hz", "fmax_hz", "fft_size")}
    bank = _build_bank(o)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row in bank.weights:
            writer.writerow([f"{w:.10g}" for w in row])
    print(f"wrote {bank.n_filters} filters x {bank.n_bins} bins to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# plot


def cmd_plot(args: argparse.Namespace) -> int:
    try:
        import matplotlib
    except ImportError:
        print("error: plotting needs matplotlib (pip install wordrec[plot])", file=sys.stderr)
        return 1
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(args.results, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RESULTS_HEADER:
            raise errors.BadHeader(f"{args.results}: header {reader.fieldnames}")
        rows = [r for r in reader if r["noise"] != "none"]
    if not rows:
        print("no noisy rows to plot")
        return 0

    groups: dict[tuple[str, str], dict[str, dict[float, float]]] = {}
    for r in rows:
        series = groups.setdefault((r["accent"], r["noise"]), {}).setdefault(r["features"], {})
        series[float(r["snr_db"])] = float(r["accuracy"])

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for (accent, noise), series_map in sorted(groups.items()):
        fig, ax = plt.subplots(figsize=(5, 4))
        for label in sorted(series_map):
            xs = sorted(series_map[label])
            ax.plot(xs, [series_map[label][x] for x in xs], marker="o", label=label)
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel("accuracy")
        ax.set_ylim(0.0, 1.05)
        ax.set_title(f"{accent} / {noise}")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out_dir / f"{accent}_{noise}.png", dpi=100)
        plt.close(fig)
    print(f"wrote {len(groups)} plot(s) to {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wordrec",
        description="MFCC + frequency-centroid features and a small CNN for word recognition",
    )
    parser.add_argument("--version", action="version", version=f"wordrec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="JSON", help="JSON file of option defaults (flags win)")

    p = sub.add_parser("extract", parents=[common], help="extract feature tensors from a manifest")
    p.add_argument("--manifest", required=True, help="CSV with path,word,accent,split rows")
    p.add_argument("--out", required=True, help="output directory for feature files")
    p.add_argument("--features", choices=sorted(FEATURE_LABELS))
    p.add_argument("--frame-ms", type=float, dest="frame_ms")
    p.add_argument("--shift-ms", type=float, dest="shift_ms")
    p.add_argument("--fft-size", type=int, dest="fft_size")
    p.add_argument("--preemphasis", type=float)
    p.add_argument("--window", choices=("hamming", "rectangular"))
    p.add_argument("--num-filters", type=int, dest="num_filters")
    p.add_argument("--fmin-hz", type=float, dest="fmin_hz")
    p.add_argument("--fmax-hz", type=float, dest="fmax_hz")
    p.add_argument("--vocabulary", type=_parse_words, help="comma-separated, fixes class order")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("mix-noise", parents=[common], help="corrupt one WAV at a target SNR")
    p.add_argument("--in", dest="infile", required=True, help="clean input WAV")
    p.add_argument("--out", required=True, help="output WAV")
    p.add_argument("--noise", required=True, help="white|babble-like|hfchannel-like or a WAV path")
    p.add_argument("--snr-db", type=float, dest="snr_db", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_mix_noise)

    p = sub.add_parser("train", parents=[common], help="train a per-accent model")
    p.add_argument("--features", required=True, help="directory written by `wordrec extract`")
    p.add_argument("--accent", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint, appending CSV rows")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--features", required=True, help="directory written by `wordrec extract`")
    p.add_argument("--accent", required=True)
    p.add_argument("--out", required=True, help="results CSV (appended)")
    p.add_argument("--noise", help="none|white|babble-like|hfchannel-like or a WAV path")
    p.add_argument("--snr-grid", type=_parse_grid, dest="snr_grid", help="e.g. 0,5,10,15,20")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("filterbank", help="filterbank utilities")
    fb_sub = p.add_subparsers(dest="subcommand", required=True)
    p = fb_sub.add_parser("dump", parents=[common], help="write filter weights as CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--num-filters", type=int, dest="num_filters")
    p.add_argument("--fmin-hz", type=float, dest="fmin_hz")
    p.add_argument("--fmax-hz", type=float, dest="fmax_hz")
    p.add_argument("--fft-size", type=int, dest="fft_size")
    p.set_defaults(func=cmd_filterbank_dump)

    p = sub.add_parser("plot", parents=[common], help="accuracy-vs-SNR curves from a results CSV")
    p.add_argument("--results", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (errors.WordrecError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
