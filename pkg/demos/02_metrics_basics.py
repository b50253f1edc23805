"""
Confusion matrices and per-class IoU
====================================

Accumulates a few truth/prediction pairs into one matrix and shows how
IoU and its background-excluded mean behave, including the exclusion of
background-truth pixels and undefined classes.
"""

import numpy as np

from eodistort import ConfusionMatrix, LabelMap, accumulate, iou, miou

truth = LabelMap(np.array([
    [1, 1, 2, 2],
    [1, 1, 2, 2],
    [0, 0, 3, 3],
    [0, 0, 3, 3],
], dtype=np.uint8))

# the predictor gets one field pixel wrong and misses the bottom-right class
pred = LabelMap(np.array([
    [1, 2, 2, 2],
    [1, 1, 2, 2],
    [1, 1, 3, 3],
    [1, 1, 3, 3],
], dtype=np.uint8))

cm = ConfusionMatrix([0, 1, 2, 3])
accumulate(cm, truth, pred, background_id=0)

print("total counted pixels:", cm.total, "(background truth never enters)")
for cid in (1, 2, 3):
    print(f"class {cid}: IoU = {iou(cm, cid)}")
print("mIoU (background excluded):", round(miou(cm, 0), 6))

# classes absent from both maps have no defined IoU and never skew the mean
wide = ConfusionMatrix([0, 1, 2, 3, 4])
accumulate(wide, truth, pred, background_id=0)
print("absent class 4 ->", iou(wide, 4))
print("mIoU unchanged:", round(miou(wide, 0), 6))
