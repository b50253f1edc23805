"""PNG-backed rasters: RGB image buffers and single-channel label maps.

Conventions used throughout the package:

* images are 8-bit RGB PNGs, labels are 8-bit grayscale PNGs;
* pixel grids are indexed (row, col) with the origin at the top left;
* buffers are immutable once constructed (the backing arrays are frozen),
  so they are safe to share across threads.

Alpha channels, palettes, and bit depths other than 8 are rejected rather
than converted; silent conversion hides dataset packaging errors.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DimensionMismatch, IoFailure, MalformedRaster, MissingFile

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"

# PNG IHDR color types
_COLOR_GRAY = 0
_COLOR_RGB = 2


@dataclass(frozen=True)
class ImageBuffer:
    """An H x W x 3 array of 8-bit RGB intensities."""

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.uint8)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise MalformedRaster(f"image array must be HxWx3, got shape {arr.shape}")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(self.pixels, other.pixels)

    def __repr__(self) -> str:
        return f"ImageBuffer({self.width}x{self.height})"


@dataclass(frozen=True)
class LabelMap:
    """An H x W array of 8-bit class identifiers."""

    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.labels, dtype=np.uint8)
        if arr.ndim != 2:
            raise MalformedRaster(f"label array must be HxW, got shape {arr.shape}")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "labels", arr)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelMap):
            return NotImplemented
        return self.labels.shape == other.labels.shape and np.array_equal(self.labels, other.labels)

    def __repr__(self) -> str:
        return f"LabelMap({self.width}x{self.height})"


def check_same_shape(image: ImageBuffer, labels: LabelMap) -> None:
    """Raise DimensionMismatch unless image and labels share H x W."""
    if (image.height, image.width) != (labels.height, labels.width):
        raise DimensionMismatch(
            f"image is {image.width}x{image.height} but labels are "
            f"{labels.width}x{labels.height}"
        )


def _read_ihdr(path: Path) -> tuple[int, int, int, int]:
    """Return (width, height, bit_depth, color_type) from a PNG header.

    PIL silently widens or truncates some bit depths, so the IHDR chunk is
    inspected directly to enforce the 8-bit contract.
    """
    try:
        with open(path, "rb") as fh:
            head = fh.read(33)
    except FileNotFoundError:
        raise MissingFile(f"no such file: {path}")
    except OSError as exc:
        raise MalformedRaster(f"cannot read {path}: {exc}")
    if len(head) < 33 or head[:8] != _PNG_SIGNATURE:
        raise MalformedRaster(f"{path} is not a PNG file")
    length, chunk = struct.unpack(">I4s", head[8:16])
    if chunk != b"IHDR" or length != 13:
        raise MalformedRaster(f"{path} has a corrupt PNG header")
    width, height, bit_depth, color_type = struct.unpack(">IIBB", head[16:26])
    return width, height, bit_depth, color_type


def _decode(path: Path, want_color_type: int, what: str) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"no such file: {path}")
    width, height, bit_depth, color_type = _read_ihdr(path)
    if bit_depth != 8:
        raise MalformedRaster(f"{path}: expected 8 bits per channel, found {bit_depth}")
    if color_type != want_color_type:
        names = {0: "grayscale", 2: "RGB", 3: "palette", 4: "grayscale+alpha", 6: "RGBA"}
        found = names.get(color_type, f"color type {color_type}")
        raise MalformedRaster(f"{path}: expected {what}, found {found}")
    try:
        with Image.open(path) as img:
            img.load()
            arr = np.asarray(img)
    except Exception as exc:
        raise MalformedRaster(f"{path}: corrupt PNG stream: {exc}")
    if arr.shape[:2] != (height, width):
        raise MalformedRaster(f"{path}: decoded size disagrees with header")
    return arr


def load_image(path: str | Path) -> ImageBuffer:
    """Load an 8-bit RGB PNG.

    Raises MissingFile if the file does not exist and MalformedRaster for
    wrong bit depth, wrong channel count (including alpha or palette), or a
    corrupt stream.
    """
    arr = _decode(Path(path), _COLOR_RGB, "an 8-bit RGB image")
    return ImageBuffer(arr)


def save_image(buffer: ImageBuffer, path: str | Path) -> None:
    """Write an ImageBuffer as an 8-bit RGB PNG; load_image inverts it bit-exactly."""
    try:
        Image.fromarray(buffer.pixels, mode="RGB").save(Path(path), format="PNG")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}")


def load_labels(path: str | Path) -> LabelMap:
    """Load an 8-bit single-channel PNG as a label map."""
    arr = _decode(Path(path), _COLOR_GRAY, "an 8-bit single-channel label map")
    return LabelMap(arr)


def save_labels(labels: LabelMap, path: str | Path) -> None:
    """Write a LabelMap as an 8-bit grayscale PNG; load_labels inverts it bit-exactly."""
    try:
        Image.fromarray(labels.labels, mode="L").save(Path(path), format="PNG")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}")


def default_labels_path(image_path: str | Path) -> Path:
    """Implicit companion label file: <stem>_labels.png next to the image."""
    p = Path(image_path)
    return p.with_name(p.stem + "_labels.png")


def class_positions(labels: LabelMap, class_id: int) -> np.ndarray:
    """Positions of every pixel with the given class id, in row-major order.

    Returns an (K, 2) int array of (row, col) pairs; K may be zero.
    """
    return np.argwhere(labels.labels == class_id)
