"""Distortion sweeps: grid evaluation of (transform, class, intensity, replicate).

A sweep distorts every image of one dataset split, one cell at a time, asks
a predictor for label maps, aggregates a confusion matrix per cell, and
records the target class's IoU.  Sweeps are deterministic: identical
configurations produce identical records regardless of parallelism or image
processing order.

Config file schema (JSON)::

    {
      "manifest": "manifest.json",        # path, relative to the config file
      "split": "val",
      "seed": 7,                          # omit to fall back to EO_DISTORT_SEED / 0
      "context_masking": false,           # mask everything outside the class in every run
      "fill_stats": "train",              # or {"means": [r, g, b]}; needed when masking
      "classes": [1, 2],                  # optional; default: all non-background ids
      "predictor": {"kind": "oracle"},
      "transforms": [
        {"kind": "gray"},                 # default grid 0.0..1.0 step 0.1
        {"kind": "pixel-swap", "replicates": 3},
        {"kind": "color-dup", "channel": "R"},
        {"kind": "context-mask"}          # intensity ignored; default grid [0]
      ]
    }

Predictor kinds: ``oracle``, ``constant`` (class_id), ``nearest-color``
(centroids: {"<id>": [r, g, b]}), ``variance`` (threshold, window,
low_class, high_class), ``external`` (command, staging_dir, timeout).
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import distortions, metrics, predictors, raster_io
from .dataset import ChannelStats, DatasetManifest, load_manifest
from .distortions import (
    CONTEXT_MASK,
    DETERMINISTIC_KINDS,
    GRAY,
    KINDS,
    PIXEL_SWAP,
    COLOR_DUP,
    DistortionSpec,
)
from .errors import (
    EoDistortError,
    MalformedManifest,
    MissingPrediction,
    NoDefinedClasses,
    SweepCellError,
)
from .raster_io import ImageBuffer, LabelMap

DEFAULT_GRID = tuple(i / 10 for i in range(11))
DEFAULT_REPLICATES = {PIXEL_SWAP: 3}


@dataclass(frozen=True)
class TransformPlan:
    """One transform entry of a sweep: kind, grid, and replicate count."""

    kind: str
    grid: tuple[float, ...]
    replicates: int = 1
    channel: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MalformedManifest(f"unknown transform kind {self.kind!r}")
        if (self.channel is not None) != (self.kind == COLOR_DUP):
            raise MalformedManifest("'channel' is required for color-dup and only color-dup")
        if not self.grid:
            raise MalformedManifest("intensity grid must be non-empty")
        if list(self.grid) != sorted(self.grid):
            raise MalformedManifest(f"intensity grid must be sorted ascending: {self.grid}")
        for x in self.grid:
            if not 0.0 <= x <= 1.0:
                raise MalformedManifest(f"intensity {x} outside [0, 1]")
        if self.replicates < 1:
            raise MalformedManifest("replicates must be >= 1")
        if self.kind in DETERMINISTIC_KINDS and self.replicates != 1:
            raise MalformedManifest(
                f"{self.kind} is deterministic; replicates must be 1"
            )

    @property
    def label(self) -> str:
        if self.kind == COLOR_DUP:
            return f"{COLOR_DUP}-{self.channel}"
        return self.kind


@dataclass(frozen=True)
class SweepConfig:
    manifest_path: Path
    split: str
    transforms: tuple[TransformPlan, ...]
    predictor: dict
    seed: int = 0
    classes: tuple[int, ...] | None = None
    context_masking: bool = False
    fill_stats: str | dict | None = None

    @classmethod
    def from_dict(cls, doc: dict, base_dir: str | Path = ".") -> "SweepConfig":
        base = Path(base_dir)
        try:
            manifest_path = base / doc["manifest"]
            split = doc["split"]
            raw_transforms = doc["transforms"]
            predictor = doc["predictor"]
        except KeyError as exc:
            raise MalformedManifest(f"sweep config missing key {exc}")
        plans = []
        for raw in raw_transforms:
            kind = raw.get("kind")
            if kind not in KINDS:
                raise MalformedManifest(f"unknown transform kind {kind!r}")
            default_grid = (0.0,) if kind == CONTEXT_MASK else DEFAULT_GRID
            grid = tuple(float(x) for x in raw.get("grid", default_grid))
            replicates = int(raw.get("replicates", DEFAULT_REPLICATES.get(kind, 1)))
            plans.append(TransformPlan(kind=kind, grid=grid, replicates=replicates,
                                       channel=raw.get("channel")))
        seed = doc.get("seed")
        if seed is None:
            seed = int(os.environ.get("EO_DISTORT_SEED", "0"))
        classes = doc.get("classes")
        return cls(
            manifest_path=manifest_path,
            split=split,
            transforms=tuple(plans),
            predictor=dict(predictor),
            seed=int(seed),
            classes=None if classes is None else tuple(int(c) for c in classes),
            context_masking=bool(doc.get("context_masking", False)),
            fill_stats=doc.get("fill_stats"),
        )

    def digest(self) -> str:
        """Stable hash of the configuration, for provenance."""
        doc = {
            "manifest": str(self.manifest_path),
            "split": self.split,
            "seed": self.seed,
            "classes": self.classes,
            "context_masking": self.context_masking,
            "fill_stats": self.fill_stats,
            "predictor": self.predictor,
            "transforms": [
                {"kind": t.kind, "grid": t.grid, "replicates": t.replicates, "channel": t.channel}
                for t in self.transforms
            ],
        }
        blob = json.dumps(doc, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()

    def cell_count(self, n_classes: int) -> int:
        return sum(len(t.grid) * t.replicates * n_classes for t in self.transforms)


def load_sweep_config(path: str | Path) -> SweepConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise MalformedManifest(f"no such config: {path}")
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedManifest(f"cannot parse {path}: {exc}")
    return SweepConfig.from_dict(doc, base_dir=path.parent)


@dataclass(frozen=True)
class SweepRecord:
    """Result of one sweep cell, aggregated over the whole split."""

    transform: str
    class_id: int
    intensity: float
    replicate: int
    iou: float | None
    miou: float | None
    tp: int
    fp: int
    fn: int


@dataclass
class SweepReport:
    records: list[SweepRecord]
    split: str
    seed: int
    class_names: dict[int, str]
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "provenance": self.provenance,
            "split": self.split,
            "seed": self.seed,
            "class_names": {str(k): v for k, v in sorted(self.class_names.items())},
            "records": [
                {
                    "transform": r.transform,
                    "class_id": r.class_id,
                    "intensity": r.intensity,
                    "replicate": r.replicate,
                    "iou": r.iou,
                    "miou": r.miou,
                    "tp": r.tp,
                    "fp": r.fp,
                    "fn": r.fn,
                }
                for r in self.records
            ],
        }


def format_intensity(x: float) -> str:
    """Canonical short decimal used in staging paths ('0', '0.1', '1')."""
    text = f"{x:.6f}".rstrip("0").rstrip(".")
    return text if text else "0"


def resolve_fill(config: SweepConfig, manifest: DatasetManifest) -> ChannelStats | None:
    """Fill statistics for context masking, if the config needs them."""
    needs = config.context_masking or any(t.kind == CONTEXT_MASK for t in config.transforms)
    if not needs:
        return None
    source = config.fill_stats
    if source is None:
        source = "train"
    if isinstance(source, str):
        from .dataset import compute_channel_means

        return compute_channel_means(manifest, source)
    if isinstance(source, dict) and "means" in source:
        r, g, b = (float(v) for v in source["means"])
        return ChannelStats(mean_r=r, mean_g=g, mean_b=b,
                            pixel_count=int(source.get("pixel_count", 1)))
    raise MalformedManifest(f"cannot interpret fill_stats: {source!r}")


def build_predictor(spec: dict, truth: dict[str, LabelMap],
                    staging_dir: str | Path | None = None):
    """Instantiate a predictor from its config block.

    ``truth`` supplies ground-truth maps to the oracle.  ``staging_dir``
    overrides the external predictor's staging directory (sweeps give each
    cell its own).
    """
    kind = spec.get("kind")
    if kind == "oracle":
        return predictors.OraclePredictor(truth)
    if kind == "constant":
        return predictors.ConstantClassPredictor(int(spec["class_id"]))
    if kind == "nearest-color":
        centroids = {int(k): tuple(float(x) for x in v)
                     for k, v in spec["centroids"].items()}
        return predictors.NearestColorPredictor(centroids)
    if kind == "variance":
        return predictors.make_variance_predictor(
            threshold=float(spec["threshold"]),
            window=int(spec["window"]),
            low_class=int(spec["low_class"]),
            high_class=int(spec["high_class"]),
        )
    if kind == "external":
        return predictors.ExternalPredictor(
            command_template=spec["command"],
            staging_dir=staging_dir if staging_dir is not None else spec["staging_dir"],
            timeout=float(spec.get("timeout", predictors.DEFAULT_TIMEOUT)),
        )
    raise MalformedManifest(f"unknown predictor kind {kind!r}")


class _SplitData:
    """The split's entries with their label maps loaded once."""

    def __init__(self, manifest: DatasetManifest, split: str):
        self.entries = manifest.split_entries(split)
        if not self.entries:
            raise MalformedManifest(f"split {split!r} has no entries")
        self.ids = [e.id for e in self.entries]
        self.labels = {e.id: raster_io.load_labels(e.label_path) for e in self.entries}


def _iter_cells(config: SweepConfig, classes: list[int]):
    """Cell order: transforms as configured, then class, intensity, replicate."""
    for plan in config.transforms:
        for class_id in classes:
            for intensity in plan.grid:
                for replicate in range(plan.replicates):
                    yield plan, class_id, intensity, replicate


def _cell_spec(plan: TransformPlan, class_id: int, intensity: float, replicate: int,
               seed: int, fill: ChannelStats | None) -> DistortionSpec:
    return DistortionSpec(
        kind=plan.kind,
        class_id=class_id,
        intensity=intensity,
        channel=plan.channel,
        seed=seed,
        replicate=replicate,
        fill=fill if plan.kind == CONTEXT_MASK else None,
    )


def _distort_cell(data: _SplitData, spec: DistortionSpec,
                  context_fill: ChannelStats | None, jobs: int) -> predictors.Batch:
    """Distort every split image for one cell, preserving split order.

    Failures are tagged with the cell coordinates and the image id.
    """

    def one(index: int) -> tuple[str, ImageBuffer]:
        entry = data.entries[index]
        try:
            image = raster_io.load_image(entry.image_path)
            labels = data.labels[entry.id]
            raster_io.check_same_shape(image, labels)
            out = distortions.apply(image, labels, spec, image_index=index,
                                    context_fill=context_fill)
        except EoDistortError as exc:
            raise SweepCellError(spec.label, spec.class_id, spec.intensity,
                                 spec.replicate, entry.id, exc)
        return entry.id, out

    indices = range(len(data.entries))
    if jobs <= 1 or len(data.entries) <= 1:
        return [one(i) for i in indices]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, indices))


def _score_cell(data: _SplitData, preds: predictors.Predictions,
                manifest: DatasetManifest, classes: list[int],
                plan: TransformPlan, class_id: int, intensity: float,
                replicate: int) -> SweepRecord:
    cm = metrics.ConfusionMatrix(sorted(manifest.class_table))
    by_id = dict(preds)
    for image_id in data.ids:
        metrics.accumulate(cm, data.labels[image_id], by_id[image_id],
                           manifest.background_id)
    try:
        cell_miou = metrics.miou(cm, manifest.background_id, class_ids=classes)
    except NoDefinedClasses:
        cell_miou = None
    tp, fp, fn = metrics.tp_fp_fn(cm, class_id)
    return SweepRecord(
        transform=plan.label,
        class_id=class_id,
        intensity=intensity,
        replicate=replicate,
        iou=metrics.iou(cm, class_id),
        miou=cell_miou,
        tp=tp,
        fp=fp,
        fn=fn,
    )


def _cache_key(plan: TransformPlan, class_id: int, intensity: float,
               masking: bool) -> tuple | None:
    """Key under which this cell's predictions may be shared, or None.

    Zero-intensity mixing cells are the undistorted baseline (or, when
    masking, the masked-around-class baseline); context-mask cells are the
    masked baseline at every intensity.
    """
    if plan.kind == CONTEXT_MASK:
        return ("masked", class_id)
    if intensity == 0.0:
        return ("masked", class_id) if masking else ("plain",)
    return None


def run_sweep(config: SweepConfig, jobs: int | None = None,
              on_record=None) -> SweepReport:
    """Run every cell of the sweep and return the full report.

    ``on_record`` is called with each SweepRecord as it completes, so
    callers can flush partial results.  Cell failures raise SweepCellError
    tagged with the cell coordinates and carrying the completed records.
    """
    jobs = jobs if jobs and jobs > 0 else (os.cpu_count() or 1)
    started = datetime.now(timezone.utc).isoformat()
    manifest = load_manifest(config.manifest_path)
    data = _SplitData(manifest, config.split)
    classes = sorted(config.classes) if config.classes else manifest.target_classes()
    fill = resolve_fill(config, manifest)

    records: list[SweepRecord] = []
    cache: dict[tuple, predictors.Predictions] = {}
    external = config.predictor.get("kind") == "external"

    for plan, class_id, intensity, replicate in _iter_cells(config, classes):
        try:
            context_fill = fill if (config.context_masking and plan.kind != CONTEXT_MASK) else None
            key = _cache_key(plan, class_id, intensity, config.context_masking)
            if key is not None and key in cache:
                preds = cache[key]
            else:
                spec = _cell_spec(plan, class_id, intensity, replicate, config.seed, fill)
                batch = _distort_cell(data, spec, context_fill, jobs)
                if external:
                    cell_dir = Path(config.predictor["staging_dir"]) / plan.label / \
                        str(class_id) / format_intensity(intensity) / str(replicate)
                    predictor = build_predictor(config.predictor, data.labels, cell_dir)
                else:
                    predictor = build_predictor(config.predictor, data.labels)
                preds = predictor.predict_batch(batch)
                if key is not None:
                    cache[key] = preds
            record = _score_cell(data, preds, manifest, classes, plan,
                                 class_id, intensity, replicate)
        except SweepCellError as exc:
            exc.partial_records = records
            raise
        except EoDistortError as exc:
            raise SweepCellError(plan.label, class_id, intensity, replicate,
                                 None, exc, partial_records=records)
        records.append(record)
        if on_record is not None:
            on_record(record)

    finished = datetime.now(timezone.utc).isoformat()
    return SweepReport(
        records=records,
        split=config.split,
        seed=config.seed,
        class_names=dict(manifest.class_table),
        provenance={
            "seed": config.seed,
            "config_digest": config.digest(),
            "manifest": str(config.manifest_path),
            "split": config.split,
            "started_at": started,
            "finished_at": finished,
        },
    )


def cell_dir(staging_root: str | Path, plan_label: str, class_id: int,
             intensity: float, replicate: int) -> Path:
    return Path(staging_root) / plan_label / str(class_id) / \
        format_intensity(intensity) / str(replicate)


def stage_sweep(config: SweepConfig, staging_root: str | Path,
                jobs: int | None = None) -> list[Path]:
    """Materialize every cell's distorted images for offline prediction.

    Each cell directory gets ``input_dir/`` (PNGs plus batch.json),
    an empty ``output_dir/``, and a cell-level copy of batch.json.  Images
    are bit-identical to what run_sweep would feed the predictor.
    """
    jobs = jobs if jobs and jobs > 0 else (os.cpu_count() or 1)
    root = Path(staging_root)
    root.mkdir(parents=True, exist_ok=True)
    manifest = load_manifest(config.manifest_path)
    data = _SplitData(manifest, config.split)
    classes = sorted(config.classes) if config.classes else manifest.target_classes()
    fill = resolve_fill(config, manifest)

    (root / "config.json").write_text(json.dumps(
        {"config_digest": config.digest(), "split": config.split, "seed": config.seed},
        indent=2) + "\n")

    cells = []
    for plan, class_id, intensity, replicate in _iter_cells(config, classes):
        context_fill = fill if (config.context_masking and plan.kind != CONTEXT_MASK) else None
        spec = _cell_spec(plan, class_id, intensity, replicate, config.seed, fill)
        batch = _distort_cell(data, spec, context_fill, jobs)
        cdir = cell_dir(root, plan.label, class_id, intensity, replicate)
        (cdir / "output_dir").mkdir(parents=True, exist_ok=True)
        manifest_path = predictors.stage_batch(batch, cdir / "input_dir")
        (cdir / "batch.json").write_text(manifest_path.read_text())
        cells.append(cdir)
    return cells


def collect_sweep(config: SweepConfig, staging_root: str | Path) -> SweepReport:
    """Ingest predictions from a staged tree and build the report.

    Produces exactly the report run_sweep would have computed with an
    external predictor over the same staging.  Raises MissingPrediction
    listing every absent id across all cells before computing anything.
    """
    started = datetime.now(timezone.utc).isoformat()
    root = Path(staging_root)
    manifest = load_manifest(config.manifest_path)
    data = _SplitData(manifest, config.split)
    classes = sorted(config.classes) if config.classes else manifest.target_classes()

    missing = []
    for plan, class_id, intensity, replicate in _iter_cells(config, classes):
        out_dir = cell_dir(root, plan.label, class_id, intensity, replicate) / "output_dir"
        for image_id in data.ids:
            if not (out_dir / f"{image_id}.png").exists():
                missing.append(f"{plan.label}/{class_id}/{format_intensity(intensity)}"
                               f"/{replicate}/{image_id}")
    if missing:
        raise MissingPrediction(missing, str(root))

    records = []
    for plan, class_id, intensity, replicate in _iter_cells(config, classes):
        cdir = cell_dir(root, plan.label, class_id, intensity, replicate)
        expected = [(e.id, data.labels[e.id].width, data.labels[e.id].height)
                    for e in data.entries]
        try:
            preds = predictors.collect_batch(expected, cdir / "output_dir")
            record = _score_cell(data, preds, manifest, classes, plan,
                                 class_id, intensity, replicate)
        except EoDistortError as exc:
            raise SweepCellError(plan.label, class_id, intensity, replicate,
                                 None, exc, partial_records=records)
        records.append(record)

    finished = datetime.now(timezone.utc).isoformat()
    return SweepReport(
        records=records,
        split=config.split,
        seed=config.seed,
        class_names=dict(manifest.class_table),
        provenance={
            "seed": config.seed,
            "config_digest": config.digest(),
            "manifest": str(config.manifest_path),
            "split": config.split,
            "staging_root": str(root),
            "started_at": started,
            "finished_at": finished,
        },
    )


def evaluate_predictions(manifest: DatasetManifest, split: str,
                         pred_dir: str | Path) -> dict:
    """Undistorted evaluation from precomputed prediction maps.

    ``pred_dir`` must hold one ``<id>.png`` label map per split entry.
    Returns per-class IoU and the background-excluded mean.
    """
    data = _SplitData(manifest, split)
    expected = [(e.id, data.labels[e.id].width, data.labels[e.id].height)
                for e in data.entries]
    preds = predictors.collect_batch(expected, pred_dir)
    cm = metrics.ConfusionMatrix(sorted(manifest.class_table))
    by_id = dict(preds)
    for image_id in data.ids:
        metrics.accumulate(cm, data.labels[image_id], by_id[image_id],
                           manifest.background_id)
    per_class = {}
    for cid in cm.class_ids:
        if cid == manifest.background_id:
            continue
        v = metrics.iou(cm, cid)
        per_class[cid] = v
    try:
        mean = metrics.miou(cm, manifest.background_id)
    except NoDefinedClasses:
        mean = None
    return {
        "split": split,
        "per_class_iou": {str(k): per_class[k] for k in sorted(per_class)},
        "miou": mean,
    }
