"""Class-conditional image distortions.

All four transforms operate on one (image, labels, class) triple and return a
new image; the input buffers are never modified.  Pixels outside the target
class are left bit-identical (context masking inverts this rule: pixels of
the target class are kept and everything else is replaced).

Arithmetic convention: mixing is done in float64 from the integer inputs and
rounded exactly once at the end, half away from zero, then clamped to
[0, 255].  This avoids double-rounding drift and keeps outputs reproducible
across implementations.

Randomness: the pixel-swap transform draws from a SplitMix64 counter
generator.  A stream key is derived by hashing (seed, image index, class id,
replicate), so distinct images, classes, and replicates get independent
streams and any cell of a sweep can be recomputed in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import ChannelStats
from .errors import IntensityOutOfRange, MalformedRaster
from .raster_io import ImageBuffer, LabelMap, check_same_shape

# Transform kinds (also the CLI vocabulary).
GRAY = "gray"
PIXEL_SWAP = "pixel-swap"
COLOR_DUP = "color-dup"
CONTEXT_MASK = "context-mask"
KINDS = (GRAY, PIXEL_SWAP, COLOR_DUP, CONTEXT_MASK)

# Transforms whose output is a deterministic function of (image, labels,
# class, intensity) alone; replicates are meaningless for them.
DETERMINISTIC_KINDS = (GRAY, COLOR_DUP, CONTEXT_MASK)

CHANNELS = ("R", "G", "B")

# Luma weights of the common rgb2gray conversion (ITU-R BT.709 primaries).
LUMA_WEIGHTS = (0.2125, 0.7154, 0.0721)

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix64(z: int) -> int:
    """SplitMix64 finalizer: a 64-bit bijective scrambler."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class RngStream:
    """Counter-based 64-bit generator (SplitMix64).

    state_{n+1} = state_n + 0x9E3779B97F4A7C15 (mod 2^64); each output is the
    finalizer applied to the new state.  Streams with equal keys produce
    equal sequences; the key derivation chains the finalizer over the four
    derivation inputs.
    """

    def __init__(self, key: int):
        self._state = key & _MASK64

    @classmethod
    def derive(cls, seed: int, image_index: int, class_id: int, replicate: int) -> "RngStream":
        key = _mix64(seed)
        for part in (image_index, class_id, replicate):
            key = _mix64(key ^ (part & _MASK64))
        return cls(key)

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _mix64(self._state)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError("below() requires n >= 1")
        # Reject the low (2^64 mod n) values so every residue is equally likely.
        lim = (1 << 64) % n
        while True:
            r = self.next_u64()
            if r >= lim:
                return r % n


def round_half_away(values: np.ndarray | float) -> np.ndarray | float:
    """Round to nearest integer with ties going away from zero."""
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def _finalize_channels(mixed: np.ndarray) -> np.ndarray:
    """Single final rounding of mixed float channels, clamped to [0, 255]."""
    return np.clip(round_half_away(mixed), 0, 255).astype(np.uint8)


def _check_intensity(value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise IntensityOutOfRange(f"intensity {value} outside [0, 1]")


@dataclass(frozen=True)
class DistortionSpec:
    """One distortion request: which transform, on which class, how strong.

    ``intensity`` is the mixing weight for gray and color duplication, the
    swapped proportion for pixel swap, and ignored by context masking.
    ``channel`` is required by color duplication only; ``fill`` is required
    by context masking only.  ``replicate`` selects one random realisation
    of the pixel-swap transform.
    """

    kind: str
    class_id: int
    intensity: float = 0.0
    channel: str | None = None
    seed: int = 0
    replicate: int = 0
    fill: ChannelStats | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if self.kind != CONTEXT_MASK:
            _check_intensity(self.intensity)
        if (self.channel is not None) != (self.kind == COLOR_DUP):
            raise ValueError("'channel' must be given for color-dup and only for color-dup")
        if self.channel is not None and self.channel not in CHANNELS:
            raise ValueError(f"channel must be one of {CHANNELS}, got {self.channel!r}")
        if (self.fill is not None) != (self.kind == CONTEXT_MASK):
            raise ValueError("'fill' must be given for context-mask and only for context-mask")
        if self.replicate < 0:
            raise ValueError("replicate must be >= 0")

    @property
    def label(self) -> str:
        """Transform name for records and file names; color duplication keeps its channel."""
        if self.kind == COLOR_DUP:
            return f"{COLOR_DUP}-{self.channel}"
        return self.kind


def luma(pixels: np.ndarray) -> np.ndarray:
    """Unrounded luma of an (..., 3) uint8 array, as float64."""
    arr = pixels.astype(np.float64)
    r, g, b = LUMA_WEIGHTS
    return arr[..., 0] * r + arr[..., 1] * g + arr[..., 2] * b


def rgb_to_gray(pixel: tuple[int, int, int]) -> int:
    """Gray value of one RGB pixel: the rounded luma, in [0, 255]."""
    for v in pixel:
        if not 0 <= v <= 255:
            raise MalformedRaster(f"channel value {v} outside [0, 255]")
    value = luma(np.asarray(pixel, dtype=np.uint8))
    return int(np.clip(round_half_away(value), 0, 255))


def gray_scale_transform(image: ImageBuffer, labels: LabelMap, class_id: int,
                         intensity: float) -> ImageBuffer:
    """Mix target-class pixels toward their gray value.

    Each class pixel becomes round((1-w) * channel + w * luma) per channel,
    with the luma kept unrounded inside the mix; the gray value is shared by
    all three output channels at w = 1.  Other pixels are untouched.
    """
    check_same_shape(image, labels)
    _check_intensity(intensity)
    mask = labels.labels == class_id
    if intensity == 0.0 or not mask.any():
        return ImageBuffer(image.pixels)
    out = np.array(image.pixels)
    selected = image.pixels[mask].astype(np.float64)
    gray = luma(image.pixels[mask])[:, None]
    out[mask] = _finalize_channels((1.0 - intensity) * selected + intensity * gray)
    return ImageBuffer(out)


def color_duplication(image: ImageBuffer, labels: LabelMap, class_id: int,
                      channel: str, intensity: float) -> ImageBuffer:
    """Mix target-class pixels toward a copy of one of their own channels.

    At full intensity every class pixel becomes (v, v, v) where v is its
    original value in ``channel``; that channel itself is preserved exactly
    at every intensity.  Other pixels are untouched.
    """
    check_same_shape(image, labels)
    _check_intensity(intensity)
    if channel not in CHANNELS:
        raise ValueError(f"channel must be one of {CHANNELS}, got {channel!r}")
    mask = labels.labels == class_id
    if intensity == 0.0 or not mask.any():
        return ImageBuffer(image.pixels)
    ch = CHANNELS.index(channel)
    out = np.array(image.pixels)
    selected = image.pixels[mask].astype(np.float64)
    dup = selected[:, ch][:, None]
    mixed = _finalize_channels((1.0 - intensity) * selected + intensity * dup)
    mixed[:, ch] = image.pixels[mask][:, ch]  # exact by algebra; enforce bit-exactness
    out[mask] = mixed
    return ImageBuffer(out)


def swap_plan(rng: RngStream, positions: np.ndarray, proportion: float) -> tuple[np.ndarray, np.ndarray]:
    """Choose which class positions to swap and where their values go.

    Returns (selected, source) where ``selected`` holds m = round(p*K)
    flat positions sampled without replacement (partial Fisher-Yates over
    the row-major position list) and ``source[i]`` is the index into
    ``selected`` whose original value lands at ``selected[i]`` (a uniform
    permutation from a second Fisher-Yates pass).
    """
    k = len(positions)
    m = int(round_half_away(proportion * k))
    pool = positions.tolist()
    for i in range(m):
        j = i + rng.below(k - i)
        pool[i], pool[j] = pool[j], pool[i]
    perm = list(range(m))
    for i in range(m - 1, 0, -1):
        j = rng.below(i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return np.asarray(pool[:m], dtype=np.int64), np.asarray(perm, dtype=np.int64)


def pixel_swap(image: ImageBuffer, labels: LabelMap, class_id: int,
               proportion: float, rng: RngStream) -> ImageBuffer:
    """Randomly permute a proportion of the target class's pixel values.

    round(p*K) positions are sampled without replacement from the class's
    row-major position list and their (r, g, b) triples are rearranged by a
    uniformly random permutation; triples move atomically.  All other pixels
    are untouched.  Output is a deterministic function of the inputs and the
    stream's derivation inputs.
    """
    check_same_shape(image, labels)
    _check_intensity(proportion)
    flat_positions = np.flatnonzero(labels.labels.ravel() == class_id)
    if len(flat_positions) == 0:
        return ImageBuffer(image.pixels)
    selected, source = swap_plan(rng, flat_positions, proportion)
    if len(selected) <= 1:
        return ImageBuffer(image.pixels)
    out = np.array(image.pixels)
    flat = out.reshape(-1, 3)
    flat[selected] = flat[selected][source]
    return ImageBuffer(out)


def context_mask(image: ImageBuffer, labels: LabelMap, class_id: int,
                 fill: ChannelStats) -> ImageBuffer:
    """Replace every pixel outside the target class with the fill means.

    The fill means are rounded (half away from zero) only here, where the
    fill pixel is materialized.  Target-class pixels are untouched.
    """
    check_same_shape(image, labels)
    fill_pixel = _finalize_channels(np.asarray(fill.means, dtype=np.float64))
    mask = labels.labels == class_id
    out = np.array(image.pixels)
    out[~mask] = fill_pixel
    return ImageBuffer(out)


def apply(image: ImageBuffer, labels: LabelMap, spec: DistortionSpec,
          image_index: int = 0, context_fill: ChannelStats | None = None) -> ImageBuffer:
    """Apply one distortion spec to one image.

    ``image_index`` is the image's position within the sweep ordering and
    feeds the random stream derivation.  When ``context_fill`` is given and
    the requested transform is not itself a context mask, everything outside
    the target class is additionally replaced by the fill means; the two
    pixel sets are disjoint, so the combination is order-independent.
    """
    if spec.kind == GRAY:
        out = gray_scale_transform(image, labels, spec.class_id, spec.intensity)
    elif spec.kind == COLOR_DUP:
        out = color_duplication(image, labels, spec.class_id, spec.channel, spec.intensity)
    elif spec.kind == PIXEL_SWAP:
        rng = RngStream.derive(spec.seed, image_index, spec.class_id, spec.replicate)
        out = pixel_swap(image, labels, spec.class_id, spec.intensity, rng)
    elif spec.kind == CONTEXT_MASK:
        return context_mask(image, labels, spec.class_id, spec.fill)
    else:  # unreachable; DistortionSpec validates kind
        raise ValueError(f"unknown transform kind {spec.kind!r}")
    if context_fill is not None:
        out = context_mask(out, labels, spec.class_id, context_fill)
    return out
