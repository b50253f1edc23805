"""Confusion-matrix accumulation and IoU with background exclusion.

Pixels whose ground truth is the background class never enter the matrix;
predicting background on a non-background pixel does count, as a
(truth, background) entry.  Dataset-level scores are computed from the
aggregated matrix (micro aggregation), so they are invariant to how the
dataset is partitioned or ordered during accumulation.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NoDefinedClasses, UnknownClass
from .raster_io import LabelMap


class ConfusionMatrix:
    """C x C pixel counts; counts[t][p] = pixels with truth t predicted p."""

    def __init__(self, class_ids: list[int] | tuple[int, ...]):
        self.class_ids = tuple(sorted(class_ids))
        self._index = {cid: i for i, cid in enumerate(self.class_ids)}
        n = len(self.class_ids)
        self.counts = np.zeros((n, n), dtype=np.int64)

    def copy(self) -> "ConfusionMatrix":
        out = ConfusionMatrix(self.class_ids)
        out.counts = self.counts.copy()
        return out

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        """Elementwise addition; commutative and associative."""
        if other.class_ids != self.class_ids:
            raise UnknownClass("cannot merge matrices over different class tables")
        self.counts += other.counts
        return self

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def count(self, truth_id: int, pred_id: int) -> int:
        return int(self.counts[self._index[truth_id], self._index[pred_id]])

    def class_index(self, class_id: int) -> int:
        if class_id not in self._index:
            raise UnknownClass(f"class id {class_id} not in the class table")
        return self._index[class_id]


def accumulate(cm: ConfusionMatrix, truth: LabelMap, pred: LabelMap,
               background_id: int) -> ConfusionMatrix:
    """Add one image's pixel counts to the matrix, in place.

    Raises DimensionMismatch if the maps disagree in shape and UnknownClass
    if any counted truth or predicted label is absent from the class table.
    """
    if (truth.height, truth.width) != (pred.height, pred.width):
        raise DimensionMismatch(
            f"truth is {truth.width}x{truth.height} but prediction is "
            f"{pred.width}x{pred.height}"
        )
    t = truth.labels.ravel()
    p = pred.labels.ravel()
    keep = t != background_id
    t = t[keep]
    p = p[keep]
    if t.size == 0:
        return cm

    lut = np.full(256, -1, dtype=np.int64)
    for cid, idx in cm._index.items():
        if 0 <= cid <= 255:
            lut[cid] = idx
    ti = lut[t]
    pi = lut[p]
    bad = np.union1d(t[ti < 0], p[pi < 0])
    if bad.size:
        raise UnknownClass(
            f"label values {sorted(int(b) for b in bad)} absent from the class table"
        )
    n = len(cm.class_ids)
    flat = np.bincount(ti * n + pi, minlength=n * n)
    cm.counts += flat.reshape(n, n)
    return cm


def iou(cm: ConfusionMatrix, class_id: int) -> float | None:
    """Intersection over union for one class, or None when undefined.

    IoU = TP / (TP + FP + FN); undefined when the class appears in neither
    truth nor prediction (denominator zero).
    """
    i = cm.class_index(class_id)
    tp = int(cm.counts[i, i])
    fp = int(cm.counts[:, i].sum()) - tp
    fn = int(cm.counts[i, :].sum()) - tp
    denom = tp + fp + fn
    if denom == 0:
        return None
    return tp / denom


def tp_fp_fn(cm: ConfusionMatrix, class_id: int) -> tuple[int, int, int]:
    """The (TP, FP, FN) triple behind iou(), for reporting."""
    i = cm.class_index(class_id)
    tp = int(cm.counts[i, i])
    fp = int(cm.counts[:, i].sum()) - tp
    fn = int(cm.counts[i, :].sum()) - tp
    return tp, fp, fn


def miou(cm: ConfusionMatrix, background_id: int,
         class_ids: list[int] | None = None) -> float:
    """Unweighted mean of defined per-class IoUs.

    Background and classes with undefined IoU are excluded.  ``class_ids``
    restricts the mean to a subset (default: every class in the matrix).
    Raises NoDefinedClasses when nothing is defined.
    """
    candidates = cm.class_ids if class_ids is None else class_ids
    values = []
    for cid in candidates:
        if cid == background_id:
            continue
        v = iou(cm, cid)
        if v is not None:
            values.append(v)
    if not values:
        raise NoDefinedClasses("no class has a defined IoU")
    return sum(values) / len(values)
