"""Shared synthetic-data helpers for the test suite."""

from __future__ import annotations

import json
import textwrap
from pathlib import Path

import numpy as np
import pytest

from eodistort import ImageBuffer, LabelMap, save_image, save_labels


def random_pair(rng: np.random.Generator, height: int, width: int,
                class_ids=(0, 1, 2, 3)) -> tuple[ImageBuffer, LabelMap]:
    """A random image and a random label map drawn from the given class ids."""
    img = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    lab = rng.choice(np.array(class_ids, dtype=np.uint8), size=(height, width))
    return ImageBuffer(img), LabelMap(lab)


def write_dataset(root: Path, items, classes: dict[int, str] | None = None,
                  background_id: int = 0) -> Path:
    """Write (name, image_array, label_array, split) items plus manifest.json.

    Returns the manifest path.
    """
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for name, img, lab, split in items:
        image_path = root / f"{name}.png"
        label_path = root / f"{name}_labels.png"
        save_image(ImageBuffer(img), image_path)
        save_labels(LabelMap(lab), label_path)
        entries.append({"image": image_path.name, "labels": label_path.name, "split": split})
    doc = {"background_id": background_id, "entries": entries}
    if classes is not None:
        doc["classes"] = {str(k): v for k, v in classes.items()}
    manifest_path = root / "manifest.json"
    manifest_path.write_text(json.dumps(doc, indent=2))
    return manifest_path


def four_image_dataset(root: Path, seed: int = 11) -> Path:
    """Four 16x16 train/val images over classes 0..3 (0 = background)."""
    rng = np.random.default_rng(seed)
    items = []
    for i, split in enumerate(["train", "train", "val", "val"]):
        img = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
        lab = rng.choice(np.array([0, 1, 2, 3], dtype=np.uint8), size=(16, 16))
        items.append((f"img{i}", img, lab, split))
    classes = {0: "background", 1: "bare", 2: "range", 3: "tree"}
    return write_dataset(root, items, classes=classes, background_id=0)


STUB_SCRIPT = textwrap.dedent(
    """\
    #!/usr/bin/env python3
    \"\"\"Predictor stub: copies ground-truth label maps for every listed id.\"\"\"
    import argparse
    import json
    import shutil
    import sys
    from pathlib import Path

    def main():
        p = argparse.ArgumentParser()
        p.add_argument("--input-dir", required=True)
        p.add_argument("--output-dir", required=True)
        p.add_argument("--labels-dir", required=True)
        p.add_argument("--skip-id", default=None)
        args = p.parse_args()
        batch = json.loads((Path(args.input_dir) / "batch.json").read_text())
        for item in batch["images"]:
            if item["id"] == args.skip_id:
                continue
            src = Path(args.labels_dir) / (item["id"] + ".png")
            if not src.exists():
                print("no ground truth for " + item["id"], file=sys.stderr)
                return 4
            shutil.copyfile(src, Path(args.output_dir) / (item["id"] + ".png"))
        return 0

    if __name__ == "__main__":
        sys.exit(main())
    """
)


@pytest.fixture
def stub_predictor(tmp_path):
    """Write the GT-copying stub and a labels dir; returns (script, labels_dir)."""
    script = tmp_path / "stub_predict.py"
    script.write_text(STUB_SCRIPT)
    labels_dir = tmp_path / "gt_labels"
    labels_dir.mkdir()
    return script, labels_dir
