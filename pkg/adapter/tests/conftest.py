"""Helpers for adapter tests: synthetic batches built with PIL only."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image


def write_rgb(path: Path, arr: np.ndarray) -> None:
    Image.fromarray(arr.astype(np.uint8), mode="RGB").save(path)


def write_gray(path: Path, arr: np.ndarray) -> None:
    Image.fromarray(arr.astype(np.uint8), mode="L").save(path)


def read_gray(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        assert img.mode == "L"
        return np.asarray(img, dtype=np.uint8)


@pytest.fixture
def batch(tmp_path):
    """A 3-image staged batch plus matching ground-truth maps.

    Returns (input_dir, output_dir, gt_dir, items).
    """
    rng = np.random.default_rng(8)
    input_dir = tmp_path / "input_dir"
    output_dir = tmp_path / "output_dir"
    gt_dir = tmp_path / "gt"
    for d in (input_dir, output_dir, gt_dir):
        d.mkdir()
    items = []
    for i, (h, w) in enumerate([(12, 10), (8, 8), (15, 6)]):
        img = rng.integers(0, 256, (h, w, 3), dtype=np.uint8)
        lab = rng.integers(0, 4, (h, w), dtype=np.uint8)
        write_rgb(input_dir / f"im{i}.png", img)
        write_gray(gt_dir / f"im{i}.png", lab)
        items.append({"id": f"im{i}", "file": f"im{i}.png", "width": w, "height": h})
    (input_dir / "batch.json").write_text(json.dumps({"images": items}))
    return input_dir, output_dir, gt_dir, items
