"""Predictor abstraction: built-in toy predictors and the external contract.

Built-in predictors exist to test the harness without a trained network.
Real models plug in through a directory-based batch protocol: the harness
stages every image of a batch as ``<id>.png`` plus a ``batch.json`` manifest
into an input directory, invokes a user-supplied command, and collects
``<id>.png`` single-channel label maps from an output directory.

batch.json schema::

    { "images": [ {"id": str, "file": "<id>.png", "width": int, "height": int} ] }

The command template must contain both ``{input_dir}`` and ``{output_dir}``
placeholders.  A conforming predictor reads every listed PNG, writes one
label map per id, and exits 0.
"""

from __future__ import annotations

import json
import shlex
import subprocess
from pathlib import Path

import numpy as np
from scipy.ndimage import uniform_filter

from . import raster_io
from .errors import (
    DimensionMismatch,
    ExternalCommandFailed,
    ExternalTimeout,
    MissingPrediction,
)
from .raster_io import ImageBuffer, LabelMap

DEFAULT_TIMEOUT = 3600.0

Batch = list[tuple[str, ImageBuffer]]
Predictions = list[tuple[str, LabelMap]]


class OraclePredictor:
    """Returns the ground-truth maps supplied at construction, by id."""

    kind = "oracle"

    def __init__(self, truth: dict[str, LabelMap]):
        self._truth = dict(truth)

    def predict_batch(self, images: Batch) -> Predictions:
        out = []
        missing = [image_id for image_id, _ in images if image_id not in self._truth]
        if missing:
            raise MissingPrediction(missing, "oracle ground truth")
        for image_id, image in images:
            truth = self._truth[image_id]
            raster_io.check_same_shape(image, truth)
            out.append((image_id, truth))
        return out


class ConstantClassPredictor:
    """Labels every pixel with one fixed class."""

    kind = "constant"

    def __init__(self, class_id: int):
        self.class_id = class_id

    def predict_batch(self, images: Batch) -> Predictions:
        return [
            (image_id, LabelMap(np.full((img.height, img.width), self.class_id, dtype=np.uint8)))
            for image_id, img in images
        ]


class NearestColorPredictor:
    """Labels each pixel with the class whose RGB centroid is closest.

    Distance is squared Euclidean in RGB; ties go to the lowest class id.
    """

    kind = "nearest-color"

    def __init__(self, centroids: dict[int, tuple[float, float, float]]):
        if not centroids:
            raise ValueError("nearest-color predictor needs at least one centroid")
        self.class_ids = np.array(sorted(centroids), dtype=np.uint8)
        self.centroids = np.array([centroids[int(c)] for c in self.class_ids], dtype=np.float64)

    def predict_batch(self, images: Batch) -> Predictions:
        out = []
        for image_id, img in images:
            pixels = img.pixels.reshape(-1, 3).astype(np.float64)
            # (N, C) squared distances; argmin picks the first (lowest id) on ties
            d2 = ((pixels[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
            labels = self.class_ids[np.argmin(d2, axis=1)]
            out.append((image_id, LabelMap(labels.reshape(img.height, img.width))))
        return out


class VariancePredictor:
    """Thresholds the local window variance, averaged over channels.

    Each pixel gets ``low_class`` when the mean over channels of the
    per-channel variance inside its window is strictly below the threshold,
    else ``high_class``.  Borders use clamped (edge-replicated) windows.
    """

    kind = "variance"

    def __init__(self, threshold: float, window: int, low_class: int, high_class: int):
        if window < 3 or window % 2 == 0:
            raise ValueError("window must be an odd integer >= 3")
        self.threshold = float(threshold)
        self.window = int(window)
        self.low_class = int(low_class)
        self.high_class = int(high_class)

    def predict_batch(self, images: Batch) -> Predictions:
        out = []
        for image_id, img in images:
            arr = img.pixels.astype(np.float64)
            mean = uniform_filter(arr, size=(self.window, self.window, 1), mode="nearest")
            mean_sq = uniform_filter(arr * arr, size=(self.window, self.window, 1), mode="nearest")
            var = np.clip(mean_sq - mean * mean, 0.0, None).mean(axis=2)
            labels = np.where(var < self.threshold, self.low_class, self.high_class)
            out.append((image_id, LabelMap(labels.astype(np.uint8))))
        return out


def make_variance_predictor(threshold: float, window: int, low_class: int,
                            high_class: int) -> VariancePredictor:
    """Texture probe: low local variance maps to one class, high to the other."""
    return VariancePredictor(threshold, window, low_class, high_class)


def stage_batch(images: Batch, input_dir: str | Path) -> Path:
    """Write a batch's PNGs and its batch.json manifest into input_dir."""
    input_dir = Path(input_dir)
    input_dir.mkdir(parents=True, exist_ok=True)
    listed = []
    for image_id, img in images:
        raster_io.save_image(img, input_dir / f"{image_id}.png")
        listed.append(
            {"id": image_id, "file": f"{image_id}.png", "width": img.width, "height": img.height}
        )
    manifest_path = input_dir / "batch.json"
    manifest_path.write_text(json.dumps({"images": listed}, indent=2) + "\n")
    return manifest_path


def collect_batch(expected: list[tuple[str, int, int]], output_dir: str | Path) -> Predictions:
    """Read one label map per expected (id, width, height) from output_dir.

    Raises MissingPrediction with the exact list of absent ids, and
    DimensionMismatch if a map disagrees with its image's size.
    """
    output_dir = Path(output_dir)
    missing = [image_id for image_id, _, _ in expected
               if not (output_dir / f"{image_id}.png").exists()]
    if missing:
        raise MissingPrediction(missing, str(output_dir))
    out = []
    for image_id, width, height in expected:
        labels = raster_io.load_labels(output_dir / f"{image_id}.png")
        if (labels.width, labels.height) != (width, height):
            raise DimensionMismatch(
                f"prediction {image_id}.png is {labels.width}x{labels.height}, "
                f"expected {width}x{height}"
            )
        out.append((image_id, labels))
    return out


class ExternalPredictor:
    """Runs a user command over a staged directory batch.

    The staging directory receives ``input_dir/`` and ``output_dir/``
    subdirectories; at most one invocation may use a staging directory at a
    time.  The command is the template with both placeholders substituted,
    split with shell quoting rules, and run without a shell.
    """

    kind = "external"

    def __init__(self, command_template: str, staging_dir: str | Path,
                 timeout: float = DEFAULT_TIMEOUT):
        if "{input_dir}" not in command_template or "{output_dir}" not in command_template:
            raise ValueError("command template must contain {input_dir} and {output_dir}")
        self.command_template = command_template
        self.staging_dir = Path(staging_dir)
        self.timeout = timeout

    def predict_batch(self, images: Batch) -> Predictions:
        input_dir = self.staging_dir / "input_dir"
        output_dir = self.staging_dir / "output_dir"
        output_dir.mkdir(parents=True, exist_ok=True)
        for image_id, _ in images:  # stale outputs must not mask missing ones
            stale = output_dir / f"{image_id}.png"
            if stale.exists():
                stale.unlink()
        stage_batch(images, input_dir)
        run_command(self.command_template, input_dir, output_dir, self.timeout)
        expected = [(image_id, img.width, img.height) for image_id, img in images]
        return collect_batch(expected, output_dir)


def run_command(template: str, input_dir: Path, output_dir: Path, timeout: float) -> None:
    """Substitute the placeholders and run the predictor command."""
    command = template.format(input_dir=str(input_dir), output_dir=str(output_dir))
    argv = shlex.split(command)
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
    except subprocess.TimeoutExpired:
        raise ExternalTimeout(f"predictor exceeded {timeout}s: {command}")
    except OSError as exc:
        raise ExternalCommandFailed(f"cannot run {command!r}: {exc}")
    if proc.returncode != 0:
        tail = (proc.stderr or proc.stdout or "").strip().splitlines()[-5:]
        raise ExternalCommandFailed(
            f"predictor exited {proc.returncode}: {command}\n" + "\n".join(tail)
        )
