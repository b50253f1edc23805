"""Dataset manifests and the corpus statistics the transforms depend on.

A manifest is a single JSON document:

    {
      "background_id": 0,
      "classes": {"0": "background", "1": "bare", ...},
      "entries": [
        {"image": "austin_1.png", "labels": "austin_1_labels.png", "split": "train"},
        ...
      ]
    }

Relative paths are resolved against the manifest file's directory.  When the
"classes" block is omitted the default land-cover table below is used.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import raster_io
from .errors import EmptySplit, MalformedManifest

SPLITS = ("train", "val", "test")

# Overridable per manifest; numeric ids are a packaging choice, not a given.
DEFAULT_CLASS_TABLE = {
    0: "background",
    1: "bare",
    2: "range",
    3: "developed",
    4: "road",
    5: "tree",
    6: "water",
    7: "agriculture",
    8: "building",
}
DEFAULT_BACKGROUND_ID = 0


@dataclass(frozen=True)
class ManifestEntry:
    image_path: Path
    label_path: Path
    split: str

    @property
    def id(self) -> str:
        """Stable per-entry identifier: the image filename stem."""
        return self.image_path.stem


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    class_table: dict[int, str] = field(default_factory=lambda: dict(DEFAULT_CLASS_TABLE))
    background_id: int = DEFAULT_BACKGROUND_ID

    def __post_init__(self):
        if self.background_id not in self.class_table:
            raise MalformedManifest(
                f"background_id {self.background_id} is not in the class table"
            )
        for entry in self.entries:
            if entry.split not in SPLITS:
                raise MalformedManifest(
                    f"{entry.image_path}: unknown split {entry.split!r}"
                )

    def split_entries(self, split: str) -> list[ManifestEntry]:
        """Entries of one split, in manifest order (this order defines image indices)."""
        if split not in SPLITS:
            raise MalformedManifest(f"unknown split {split!r}")
        return [e for e in self.entries if e.split == split]

    def target_classes(self) -> list[int]:
        """All class ids except background, ascending."""
        return sorted(c for c in self.class_table if c != self.background_id)


@dataclass(frozen=True)
class ChannelStats:
    """Per-channel means over all pixels of a split, plus the pixel count."""

    mean_r: float
    mean_g: float
    mean_b: float
    pixel_count: int

    def __post_init__(self):
        if self.pixel_count <= 0:
            raise EmptySplit("channel statistics require at least one pixel")
        for name in ("mean_r", "mean_g", "mean_b"):
            v = getattr(self, name)
            if not 0.0 <= v <= 255.0:
                raise MalformedManifest(f"{name}={v} outside [0, 255]")

    @property
    def means(self) -> tuple[float, float, float]:
        return (self.mean_r, self.mean_g, self.mean_b)


def load_manifest(path: str | Path) -> DatasetManifest:
    """Parse a manifest JSON file. Raises MalformedManifest on structural errors."""
    path = Path(path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise MalformedManifest(f"no such manifest: {path}")
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedManifest(f"cannot parse {path}: {exc}")
    if not isinstance(doc, dict):
        raise MalformedManifest(f"{path}: top level must be an object")

    base = path.parent
    raw_classes = doc.get("classes")
    if raw_classes is None:
        class_table = dict(DEFAULT_CLASS_TABLE)
    else:
        try:
            class_table = {int(k): str(v) for k, v in raw_classes.items()}
        except (TypeError, ValueError, AttributeError):
            raise MalformedManifest(f"{path}: 'classes' must map ids to names")
    background_id = doc.get("background_id", DEFAULT_BACKGROUND_ID)
    if not isinstance(background_id, int):
        raise MalformedManifest(f"{path}: 'background_id' must be an integer")

    raw_entries = doc.get("entries")
    if not isinstance(raw_entries, list):
        raise MalformedManifest(f"{path}: 'entries' must be a list")
    entries = []
    for i, raw in enumerate(raw_entries):
        if not isinstance(raw, dict) or not {"image", "labels", "split"} <= raw.keys():
            raise MalformedManifest(
                f"{path}: entry {i} must have 'image', 'labels', and 'split'"
            )
        entries.append(
            ManifestEntry(
                image_path=base / raw["image"],
                label_path=base / raw["labels"],
                split=str(raw["split"]),
            )
        )
    return DatasetManifest(
        entries=tuple(entries), class_table=class_table, background_id=background_id
    )


def validate_manifest(manifest: DatasetManifest) -> list[str]:
    """Check files on disk against the manifest. Returns one message per violation.

    Detects image/label dimension mismatches, label values missing from the
    class table, and duplicate entry ids within a split (ids must be unique
    because they name staged files).
    """
    violations: list[str] = []
    seen: dict[tuple[str, str], Path] = {}
    for entry in manifest.entries:
        key = (entry.split, entry.id)
        if key in seen:
            violations.append(
                f"duplicate id {entry.id!r} in split {entry.split!r}: "
                f"{seen[key]} and {entry.image_path}"
            )
        else:
            seen[key] = entry.image_path
        try:
            image = raster_io.load_image(entry.image_path)
            labels = raster_io.load_labels(entry.label_path)
        except Exception as exc:
            violations.append(str(exc))
            continue
        if (image.height, image.width) != (labels.height, labels.width):
            violations.append(
                f"dimension mismatch: {entry.image_path} is "
                f"{image.width}x{image.height} but {entry.label_path} is "
                f"{labels.width}x{labels.height}"
            )
        present = np.unique(labels.labels)
        unknown = [int(c) for c in present if int(c) not in manifest.class_table]
        if unknown:
            violations.append(
                f"{entry.label_path}: class ids {unknown} absent from the class table"
            )
    return violations


def compute_channel_means(manifest: DatasetManifest, split: str) -> ChannelStats:
    """Pixel-weighted per-channel means over every image of a split.

    Accumulates exact integer sums and divides once at the end, so the result
    is independent of entry order and image partitioning.
    """
    entries = manifest.split_entries(split)
    if not entries:
        raise EmptySplit(f"split {split!r} has no entries")
    sums = [0, 0, 0]
    count = 0
    for entry in entries:
        arr = raster_io.load_image(entry.image_path).pixels
        for ch in range(3):
            sums[ch] += int(arr[:, :, ch].sum(dtype=np.int64))
        count += arr.shape[0] * arr.shape[1]
    return ChannelStats(
        mean_r=sums[0] / count,
        mean_g=sums[1] / count,
        mean_b=sums[2] / count,
        pixel_count=count,
    )


def class_pixel_histogram(manifest: DatasetManifest, split: str) -> dict[int, int]:
    """Pixel counts per class id over a split.

    Every class-table id is present in the result (possibly with count 0);
    ids found in label maps but absent from the table are included as well,
    so the counts always sum to the split's total pixel count.
    """
    entries = manifest.split_entries(split)
    if not entries:
        raise EmptySplit(f"split {split!r} has no entries")
    counts = np.zeros(256, dtype=np.int64)
    for entry in entries:
        labels = raster_io.load_labels(entry.label_path).labels
        counts += np.bincount(labels.ravel(), minlength=256)
    histogram = {cid: int(counts[cid]) for cid in sorted(manifest.class_table)}
    for cid in np.nonzero(counts)[0]:
        histogram.setdefault(int(cid), int(counts[cid]))
    return histogram
