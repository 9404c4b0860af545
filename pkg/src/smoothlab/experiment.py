"""Config-driven experiment orchestration: dataset generation, per-strategy
training runs with artifact emission, multi-seed comparisons, and report
consolidation. The config format is flat ``section.key=value`` text."""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import ece, reliability_bins, write_reliability_csv
from .datasets import (
    BlobSpec,
    LabeledDataset,
    SplitSpec,
    generate_confusable_blobs,
    load_csv,
    save_csv,
    standardize,
    stratified_split,
)
from .errors import ConfigError, ParseError
from .smoothing import STRATEGY_KINDS, TargetStrategy, write_confusion_csv
from .trainer import (
    EpochMetrics,
    MlpConfig,
    ModelParams,
    TrainConfig,
    evaluate,
    extract_features,
    fit,
    init_params,
)

_DEFAULTS: dict[str, str] = {
    "data.source": "synthetic",
    "data.csv": "",
    "data.classes": "8",
    "data.per_class": "100",
    "data.dimension": "8",
    "data.spread": "1.0",
    "data.overlap": "0:1,2:3",
    "split.train": "0.70",
    "split.val": "0.15",
    "split.test": "0.15",
    "model.hidden": "32",
    "train.epochs": "50",
    "train.batch_size": "32",
    "train.learning_rate": "0.1",
    "train.momentum": "0.9",
    "train.ece_bins": "10",
    "strategies": "hard,vanilla,ols,cpls",
    "vanilla.alpha": "0.1",
    "cpls.beta": "0.5",
    "cpls.warmup": "5",
    "ols.warmup": "5",
    "seeds": "1,2,3,4,5,6,7,8,9,10",
    "out": "runs",
}


@dataclass(frozen=True)
class ExperimentConfig:
    source: str
    csv_path: Path | None
    blob: BlobSpec | None
    split: SplitSpec
    hidden: tuple[int, ...]
    epochs: int
    batch_size: int
    learning_rate: float
    momentum: float
    ece_bins: int
    strategies: tuple[TargetStrategy, ...]
    seeds: tuple[int, ...]
    out_dir: Path


@dataclass
class RunRecord:
    strategy: str
    seed: int
    test_accuracy: float
    test_ece: float
    metrics: list[EpochMetrics]
    artifacts: dict[str, Path] = field(default_factory=dict)


def parse_kv_text(text: str, origin: str = "<config>") -> dict[str, str]:
    """Parse flat key=value lines; '#' starts a comment, blanks are skipped."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"{origin}: line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def _parse_int(raw: str, key: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"config key {key}: expected an integer, got {raw!r}") from None


def _parse_float(raw: str, key: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"config key {key}: expected a number, got {raw!r}") from None


def _parse_int_list(raw: str, key: str) -> tuple[int, ...]:
    if not raw:
        return ()
    return tuple(_parse_int(part.strip(), key) for part in raw.split(","))


def _parse_pairs(raw: str, key: str) -> tuple[tuple[int, int], ...]:
    if not raw:
        return ()
    pairs = []
    for part in raw.split(","):
        a, sep, b = part.strip().partition(":")
        if not sep:
            raise ConfigError(f"config key {key}: expected a:b pairs, got {part!r}")
        pairs.append((_parse_int(a, key), _parse_int(b, key)))
    return tuple(pairs)


def _build_strategy(name: str, values: dict[str, str]) -> TargetStrategy:
    if name == "hard":
        return TargetStrategy.hard()
    if name == "vanilla":
        return TargetStrategy.vanilla(alpha=_parse_float(values["vanilla.alpha"], "vanilla.alpha"))
    if name == "ols":
        return TargetStrategy.ols(warmup_epochs=_parse_int(values["ols.warmup"], "ols.warmup"))
    if name == "cpls":
        return TargetStrategy.cpls(
            beta=_parse_float(values["cpls.beta"], "cpls.beta"),
            warmup_epochs=_parse_int(values["cpls.warmup"], "cpls.warmup"),
        )
    raise ConfigError(f"unknown strategy {name!r}, expected one of {STRATEGY_KINDS}")


def config_from_values(values: dict[str, str]) -> ExperimentConfig:
    unknown = set(values) - set(_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    merged = {**_DEFAULTS, **values}

    source = merged["data.source"]
    if source not in ("synthetic", "csv"):
        raise ConfigError(f"data.source must be 'synthetic' or 'csv', got {source!r}")
    csv_path = Path(merged["data.csv"]) if merged["data.csv"] else None
    if source == "csv" and csv_path is None:
        raise ConfigError("data.source=csv requires data.csv to point at a feature CSV")
    blob = None
    if source == "synthetic":
        blob = BlobSpec.confusable(
            num_classes=_parse_int(merged["data.classes"], "data.classes"),
            samples_per_class=_parse_int(merged["data.per_class"], "data.per_class"),
            dimension=_parse_int(merged["data.dimension"], "data.dimension"),
            spread=_parse_float(merged["data.spread"], "data.spread"),
            overlap_pairs=_parse_pairs(merged["data.overlap"], "data.overlap"),
        )
    split = SplitSpec(
        _parse_float(merged["split.train"], "split.train"),
        _parse_float(merged["split.val"], "split.val"),
        _parse_float(merged["split.test"], "split.test"),
    )
    hidden = tuple(
        _parse_int(part.strip(), "model.hidden")
        for part in merged["model.hidden"].split(",")
        if part.strip()
    )
    strategy_names = [s.strip() for s in merged["strategies"].split(",") if s.strip()]
    if not strategy_names:
        raise ConfigError("at least one strategy is required")
    strategies = tuple(_build_strategy(name, merged) for name in strategy_names)
    seeds = _parse_int_list(merged["seeds"], "seeds")
    if not seeds:
        raise ConfigError("at least one seed is required")
    return ExperimentConfig(
        source=source,
        csv_path=csv_path,
        blob=blob,
        split=split,
        hidden=hidden,
        epochs=_parse_int(merged["train.epochs"], "train.epochs"),
        batch_size=_parse_int(merged["train.batch_size"], "train.batch_size"),
        learning_rate=_parse_float(merged["train.learning_rate"], "train.learning_rate"),
        momentum=_parse_float(merged["train.momentum"], "train.momentum"),
        ece_bins=_parse_int(merged["train.ece_bins"], "train.ece_bins"),
        strategies=strategies,
        seeds=seeds,
        out_dir=Path(merged["out"]),
    )


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    return config_from_values(parse_kv_text(path.read_text(encoding="utf-8"), str(path)))


def strategy_from_values(name: str, values: dict[str, str]) -> TargetStrategy:
    """Build one strategy by kind name, taking its parameters from config values."""
    return _build_strategy(name, {**_DEFAULTS, **values})


def write_manifest(blob: BlobSpec, seed: int, path: Path) -> None:
    # repr-precision floats so the manifest round-trips to an equal BlobSpec.
    centers = ";".join(":".join(repr(float(v)) for v in row) for row in blob.class_centers)
    overlap = ",".join(f"{a}:{b}" for a, b in blob.overlap_pairs)
    path.write_text(
        "\n".join(
            [
                f"blob.classes={blob.num_classes}",
                f"blob.per_class={blob.samples_per_class}",
                f"blob.dimension={blob.dimension}",
                f"blob.spread={blob.spread!r}",
                f"blob.overlap={overlap}",
                f"blob.centers={centers}",
                f"seed={seed}",
            ]
        )
        + "\n",
        encoding="utf-8",
    )


def read_manifest(path) -> tuple[BlobSpec, int]:
    path = Path(path)
    values = parse_kv_text(path.read_text(encoding="utf-8"), str(path))
    try:
        centers = np.array(
            [[float(v) for v in row.split(":")] for row in values["blob.centers"].split(";")]
        )
        blob = BlobSpec(
            num_classes=int(values["blob.classes"]),
            samples_per_class=int(values["blob.per_class"]),
            dimension=int(values["blob.dimension"]),
            class_centers=centers,
            spread=float(values["blob.spread"]),
            overlap_pairs=_parse_pairs(values["blob.overlap"], "blob.overlap"),
        )
        return blob, int(values["seed"])
    except KeyError as exc:
        raise ParseError(f"{path}: manifest is missing key {exc}") from None


def _load_source(cfg: ExperimentConfig, seed: int) -> LabeledDataset:
    if cfg.source == "synthetic":
        return generate_confusable_blobs(cfg.blob, seed)
    return load_csv(cfg.csv_path)


def prepare_splits(
    cfg: ExperimentConfig, seed: int
) -> tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    """Materialize standardized train/val/test splits for one seed."""
    ds = _load_source(cfg, seed)
    train, val, test = stratified_split(ds, cfg.split, seed)
    return standardize(train, val, test)


def run_generate(cfg: ExperimentConfig, seed: int | None = None) -> dict[str, Path]:
    """Write raw train/val/test CSVs plus a manifest of the blob spec and seed."""
    if cfg.source != "synthetic":
        raise ConfigError("generate requires data.source=synthetic")
    seed = cfg.seeds[0] if seed is None else seed
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    ds = generate_confusable_blobs(cfg.blob, seed)
    train, val, test = stratified_split(ds, cfg.split, seed)
    paths = {
        "train": out / "train.csv",
        "val": out / "val.csv",
        "test": out / "test.csv",
        "manifest": out / "manifest.txt",
    }
    save_csv(train, paths["train"])
    save_csv(val, paths["val"])
    save_csv(test, paths["test"])
    write_manifest(cfg.blob, seed, paths["manifest"])
    return paths


def _write_metrics_csv(metrics: list[EpochMetrics], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,phase,train_loss,val_loss,val_accuracy,val_ece\n")
        for m in metrics:
            fh.write(
                f"{m.epoch},{m.phase},{m.train_loss:.6f},{m.val_loss:.6f},"
                f"{m.val_accuracy:.6f},{m.val_ece:.6f}\n"
            )


def _write_counts_csv(counts: np.ndarray, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in counts:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def _write_summary(record: RunRecord, path: Path) -> None:
    lines = [
        f"strategy={record.strategy}",
        f"seed={record.seed}",
        f"test_accuracy={record.test_accuracy:.6f}",
        f"test_ece={record.test_ece:.6f}",
        f"epochs={len(record.metrics)}",
    ]
    for name in sorted(record.artifacts):
        lines.append(f"artifact.{name}={record.artifacts[name].name}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_single(
    splits: tuple[LabeledDataset, LabeledDataset, LabeledDataset],
    cfg: ExperimentConfig,
    strategy: TargetStrategy,
    seed: int,
    run_dir: Path,
    initial_params: ModelParams | None = None,
) -> RunRecord:
    """Train one (strategy, seed) pair on prepared splits and emit its artifacts."""
    train, val, test = splits
    run_dir.mkdir(parents=True, exist_ok=True)
    mlp = MlpConfig((train.n_features, *cfg.hidden, train.num_classes))
    train_cfg = TrainConfig(
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        strategy=strategy,
        seed=seed,
        momentum=cfg.momentum,
        ece_bins=cfg.ece_bins,
    )

    artifacts: dict[str, Path] = {}

    def snapshot_confusion(epoch, params, record, tracker):
        if strategy.kind == "cpls":
            path = run_dir / f"confusion_epoch_{epoch}.csv"
            write_confusion_csv(tracker.normalized, path)
            artifacts[f"confusion_epoch_{epoch}"] = path

    params, metrics, _ = fit(
        train, val, mlp, train_cfg, initial_params=initial_params, on_epoch=snapshot_confusion
    )

    # The test split is touched exactly once, after training finishes.
    test_accuracy, test_probs, test_confusion = evaluate(params, test)
    test_ece = ece(test_probs, test.labels, cfg.ece_bins)

    artifacts["metrics"] = run_dir / "metrics.csv"
    _write_metrics_csv(metrics, artifacts["metrics"])
    artifacts["reliability"] = run_dir / "reliability.csv"
    write_reliability_csv(
        reliability_bins(test_probs, test.labels, cfg.ece_bins), artifacts["reliability"]
    )
    artifacts["test_confusion"] = run_dir / "test_confusion.csv"
    _write_counts_csv(test_confusion, artifacts["test_confusion"])
    if mlp.num_hidden > 0:
        feats = extract_features(params, test)
        artifacts["features"] = run_dir / "features.csv"
        save_csv(LabeledDataset(feats, test.labels, test.num_classes), artifacts["features"])

    record = RunRecord(
        strategy=strategy.kind,
        seed=seed,
        test_accuracy=test_accuracy,
        test_ece=test_ece,
        metrics=metrics,
        artifacts=artifacts,
    )
    summary = run_dir / "summary.txt"
    _write_summary(record, summary)
    record.artifacts["summary"] = summary
    return record


def run_training(
    cfg: ExperimentConfig, strategy: TargetStrategy, seed: int, run_dir: Path | None = None
) -> RunRecord:
    """Standalone single run: prepare splits for the seed, then train and emit."""
    if run_dir is None:
        run_dir = cfg.out_dir / f"{strategy.kind}_seed{seed}"
    splits = prepare_splits(cfg, seed)
    return run_single(splits, cfg, strategy, seed, run_dir)


def run_compare(cfg: ExperimentConfig) -> tuple[Path, list[RunRecord]]:
    """Run every (strategy x seed) combination and emit the comparison table.

    For a given seed, every strategy trains on bit-identical splits and from
    bit-identical initial parameters; only the loss targets differ.
    """
    if len(cfg.strategies) < 2:
        raise ConfigError("compare needs at least 2 strategies")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    records: list[RunRecord] = []
    by_strategy: list[list[RunRecord]] = [[] for _ in cfg.strategies]
    for seed in cfg.seeds:
        splits = prepare_splits(cfg, seed)
        mlp = MlpConfig((splits[0].n_features, *cfg.hidden, splits[0].num_classes))
        shared_init = init_params(mlp, seed)
        for pos, strategy in enumerate(cfg.strategies):
            run_dir = cfg.out_dir / f"{strategy.kind}_seed{seed}"
            try:
                record = run_single(splits, cfg, strategy, seed, run_dir, initial_params=shared_init)
            except Exception as exc:
                raise RuntimeError(
                    f"run failed for strategy={strategy.kind} seed={seed}: {exc}"
                ) from exc
            records.append(record)
            by_strategy[pos].append(record)

    table_path = cfg.out_dir / "comparison.csv"
    with open(table_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("strategy,seed,test_accuracy,test_ece_x100\n")
        for runs in by_strategy:
            for r in runs:
                fh.write(f"{r.strategy},{r.seed},{r.test_accuracy:.6f},{r.test_ece * 100:.6f}\n")
        for runs in by_strategy:
            accs = [r.test_accuracy for r in runs]
            eces = [r.test_ece * 100 for r in runs]
            name = runs[0].strategy
            fh.write(f"{name},median,{statistics.median(accs):.6f},{statistics.median(eces):.6f}\n")
            fh.write(f"{name},mean,{statistics.mean(accs):.6f},{statistics.mean(eces):.6f}\n")
    return table_path, records


def run_report(run_dir) -> str:
    """Consolidate summary.txt files under a directory into one table.

    Pure presentation: nothing is recomputed, so repeated invocations emit
    identical bytes. Returns the rendered table; also writes report.csv.
    """
    run_dir = Path(run_dir)
    summaries = sorted(run_dir.rglob("summary.txt"))
    if not summaries:
        raise ConfigError(f"no runs found under {run_dir}")
    rows = []
    for summary in summaries:
        values = parse_kv_text(summary.read_text(encoding="utf-8"), str(summary))
        try:
            rows.append(
                (
                    values["strategy"],
                    int(values["seed"]),
                    values["test_accuracy"],
                    values["test_ece"],
                    summary.parent / values.get("artifact.metrics", "metrics.csv"),
                )
            )
        except (KeyError, ValueError) as exc:
            raise ParseError(f"{summary}: corrupt run summary ({exc})") from None
    rows.sort(key=lambda r: (r[0], r[1]))

    header = f"{'strategy':<10} {'seed':>6} {'test_accuracy':>14} {'test_ece':>10}  metrics"
    lines = [header, "-" * len(header)]
    for strategy, seed, acc, ece_value, metrics_path in rows:
        lines.append(f"{strategy:<10} {seed:>6} {acc:>14} {ece_value:>10}  {metrics_path}")
    text = "\n".join(lines) + "\n"

    report_path = run_dir / "report.csv"
    with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("strategy,seed,test_accuracy,test_ece\n")
        for strategy, seed, acc, ece_value, _ in rows:
            fh.write(f"{strategy},{seed},{acc},{ece_value}\n")
    return text
