"""
The external predictor protocol, offline
========================================

Real segmentation models plug in through a directory contract: the harness
stages distorted images plus a batch.json manifest, the model writes one
label map per id, and the harness collects them into a report.  This demo
walks the two-phase (stage, predict, collect) flow with a stand-in
"model" that just copies the ground truth.
"""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np

from eodistort import (
    ImageBuffer,
    LabelMap,
    collect_sweep,
    save_image,
    save_labels,
    stage_sweep,
    to_csv,
)
from eodistort.sweep import SweepConfig

root = Path(__file__).resolve().parent / "output" / "external"
data_dir = root / "data"
data_dir.mkdir(parents=True, exist_ok=True)

rng = np.random.default_rng(2)
entries = []
gt_dir = root / "ground_truth"
gt_dir.mkdir(exist_ok=True)
for i in range(3):
    img = rng.integers(0, 256, (24, 24, 3), dtype=np.uint8)
    lab = rng.choice(np.array([0, 1, 2], dtype=np.uint8), size=(24, 24))
    save_image(ImageBuffer(img), data_dir / f"img{i}.png")
    save_labels(LabelMap(lab), data_dir / f"img{i}_labels.png")
    save_labels(LabelMap(lab), gt_dir / f"img{i}.png")
    entries.append({"image": f"img{i}.png", "labels": f"img{i}_labels.png", "split": "val"})

(data_dir / "manifest.json").write_text(json.dumps({
    "background_id": 0,
    "classes": {"0": "background", "1": "low", "2": "high"},
    "entries": entries,
}))

config = SweepConfig.from_dict({
    "manifest": "manifest.json", "split": "val", "seed": 5, "classes": [1, 2],
    "predictor": {"kind": "oracle"},
    "transforms": [{"kind": "pixel-swap", "grid": [0.0, 1.0], "replicates": 2}],
}, base_dir=data_dir)

# phase 1: stage every cell
staging = root / "staging"
cells = stage_sweep(config, staging)
print(f"staged {len(cells)} cells under {staging}")

# phase 2: the "model" runs over each cell's input_dir (here: a copy stub)
stub = root / "copy_model.py"
stub.write_text(
    "import json, shutil, sys\n"
    "from pathlib import Path\n"
    "inp, out, gt = map(Path, sys.argv[1:4])\n"
    "for item in json.loads((inp / 'batch.json').read_text())['images']:\n"
    "    shutil.copyfile(gt / item['file'], out / item['file'])\n"
)
for cell in cells:
    subprocess.run([sys.executable, str(stub), str(cell / "input_dir"),
                    str(cell / "output_dir"), str(gt_dir)], check=True)
print("predictions written into every output_dir")

# phase 3: collect into the report
report = collect_sweep(config, staging)
to_csv(report, root / "report.csv")
print(f"collected {len(report.records)} records -> {root / 'report.csv'}")
print("all IoU 1.0 (the stub copies ground truth):",
      all(r.iou == 1.0 for r in report.records))
