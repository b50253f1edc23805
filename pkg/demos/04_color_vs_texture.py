"""
Color sensitivity vs texture sensitivity
========================================

Two miniature experiments with toy predictors:

1. A nearest-color predictor separating two classes whose colors have
   nearly identical luma.  Gray mixing collapses both to the same gray, so
   one class's IoU crashes at full intensity.
2. A local-variance predictor separating a tiled texture from a flat
   region.  Pixel swapping preserves every pixel value but destroys the
   spatial arrangement, so the textured class's IoU drops sharply.

Together they show why the two transform families probe different model
behaviors even though both leave non-target pixels untouched.
"""

import json
from pathlib import Path

import numpy as np

from eodistort import ImageBuffer, LabelMap, run_sweep, save_image, save_labels
from eodistort.sweep import SweepConfig

root = Path(__file__).resolve().parent / "output" / "color_vs_texture"
root.mkdir(parents=True, exist_ok=True)


def write_scene(name, img, lab, classes):
    data_dir = root / name
    data_dir.mkdir(exist_ok=True)
    save_image(ImageBuffer(img), data_dir / "scene.png")
    save_labels(LabelMap(lab), data_dir / "scene_labels.png")
    (data_dir / "manifest.json").write_text(json.dumps({
        "background_id": 0,
        "classes": {"0": "background", **{str(k): v for k, v in classes.items()}},
        "entries": [{"image": "scene.png", "labels": "scene_labels.png", "split": "val"}],
    }))
    return data_dir


# --- experiment 1: near-equal luma colors, gray mixing -----------------------
# luma(255,0,0) = 54.19 and luma(0,75,0) = 53.66 differ by only ~0.5
img = np.empty((32, 32, 3), dtype=np.uint8)
img[:, :16] = (255, 0, 0)
img[:, 16:] = (0, 75, 0)
lab = np.empty((32, 32), dtype=np.uint8)
lab[:, :16] = 1
lab[:, 16:] = 2
data_dir = write_scene("isoluma", img, lab, {1: "red", 2: "green"})

config = SweepConfig.from_dict({
    "manifest": "manifest.json", "split": "val", "seed": 3, "classes": [1, 2],
    "predictor": {"kind": "nearest-color",
                  "centroids": {"1": [255, 0, 0], "2": [0, 75, 0]}},
    "transforms": [{"kind": "gray", "grid": [0.0, 0.5, 1.0]}],
}, base_dir=data_dir)
report = run_sweep(config)
print("gray mixing vs nearest-color predictor:")
for r in report.records:
    print(f"  class {r.class_id}  intensity {r.intensity:.1f}  IoU {r.iou:.3f}")

# --- experiment 2: tiled texture vs flat region, pixel swapping --------------
levels = np.array([0, 32, 64, 96, 128, 160, 192, 224, 255], dtype=np.uint8)
tile = levels.reshape(3, 3)
h = 64
tex = tile[np.arange(h)[:, None] % 3, np.arange(h)[None, :] % 3]
img = np.empty((h, 2 * h, 3), dtype=np.uint8)
img[:, :h] = tex[:, :, None]
img[:, h:] = 128
lab = np.empty((h, 2 * h), dtype=np.uint8)
lab[:, :h] = 1
lab[:, h:] = 2
data_dir = write_scene("texture", img, lab, {1: "textured", 2: "flat"})

config = SweepConfig.from_dict({
    "manifest": "manifest.json", "split": "val", "seed": 3, "classes": [1, 2],
    "predictor": {"kind": "variance", "threshold": 6700.0, "window": 3,
                  "low_class": 2, "high_class": 1},
    "transforms": [{"kind": "pixel-swap", "grid": [0.0, 0.5, 1.0], "replicates": 3}],
}, base_dir=data_dir)
report = run_sweep(config)
print("pixel swapping vs local-variance predictor (textured class):")
for x in (0.0, 0.5, 1.0):
    vals = [r.iou for r in report.records if r.class_id == 1 and r.intensity == x]
    print(f"  proportion {x:.1f}  IoU {sum(vals) / len(vals):.3f} (mean of {len(vals)} replicates)")
