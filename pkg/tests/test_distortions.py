"""Distortion transforms against independent oracles and their invariants."""

import math
from collections import Counter

import numpy as np
import pytest

from eodistort import (
    ChannelStats,
    DistortionSpec,
    ImageBuffer,
    LabelMap,
    RngStream,
    apply,
    color_duplication,
    context_mask,
    gray_scale_transform,
    pixel_swap,
    rgb_to_gray,
)
from eodistort.distortions import CHANNELS, swap_plan
from eodistort.errors import DimensionMismatch, IntensityOutOfRange

from conftest import random_pair


# ---------------------------------------------------------------------------
# independent oracles
# ---------------------------------------------------------------------------

def ref_luma(r, g, b):
    """Same IEEE evaluation order as the library, through plain Python floats."""
    return r * 0.2125 + g * 0.7154 + b * 0.0721


def ref_round(x):
    return int(math.copysign(math.floor(abs(x) + 0.5), x)) if x else 0


def reference_pixel_swap(image, labels, class_id, proportion, rng):
    """Straight reimplementation of the documented selection + permutation."""
    h, w = labels.shape
    positions = [(r, c) for r in range(h) for c in range(w) if labels[r, c] == class_id]
    k = len(positions)
    if k == 0:
        return image.copy()
    m = ref_round(proportion * k)
    pool = list(positions)
    for i in range(m):
        j = i + rng.below(k - i)
        pool[i], pool[j] = pool[j], pool[i]
    chosen = pool[:m]
    perm = list(range(m))
    for i in range(m - 1, 0, -1):
        j = rng.below(i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    out = image.copy()
    values = [tuple(image[r, c]) for r, c in chosen]
    for i, (r, c) in enumerate(chosen):
        out[r, c] = values[perm[i]]
    return out


# ---------------------------------------------------------------------------
# rgb_to_gray
# ---------------------------------------------------------------------------

def test_gray_zero():
    assert rgb_to_gray((0, 0, 0)) == 0


def test_gray_white():
    assert rgb_to_gray((255, 255, 255)) == 255


def test_gray_spot_value():
    # 0.2125*100 + 0.7154*150 + 0.0721*200 = 142.98 -> 143
    assert rgb_to_gray((100, 150, 200)) == 143


def test_gray_matches_reference_everywhere():
    rng = np.random.default_rng(21)
    for _ in range(500):
        r, g, b = (int(v) for v in rng.integers(0, 256, 3))
        assert rgb_to_gray((r, g, b)) == min(255, max(0, ref_round(ref_luma(r, g, b))))


def test_gray_rejects_out_of_range():
    from eodistort.errors import MalformedRaster
    with pytest.raises(MalformedRaster):
        rgb_to_gray((300, 0, 0))


# ---------------------------------------------------------------------------
# gray_scale_transform
# ---------------------------------------------------------------------------

def test_gray_transform_identity_at_zero():
    rng = np.random.default_rng(22)
    img, lab = random_pair(rng, 8, 8)
    out = gray_scale_transform(img, lab, 1, 0.0)
    assert out == img


def test_gray_transform_full_intensity_spot():
    img = ImageBuffer(np.full((1, 1, 3), (100, 150, 200), dtype=np.uint8))
    lab = LabelMap(np.array([[1]], dtype=np.uint8))
    out = gray_scale_transform(img, lab, 1, 1.0)
    assert out.pixels[0, 0].tolist() == [143, 143, 143]


def test_gray_transform_half_intensity_spot():
    # (0.5*100 + 0.5*142.98, ...) = (121.49, 146.49, 171.49) -> (121, 146, 171)
    img = ImageBuffer(np.full((1, 1, 3), (100, 150, 200), dtype=np.uint8))
    lab = LabelMap(np.array([[1]], dtype=np.uint8))
    out = gray_scale_transform(img, lab, 1, 0.5)
    assert out.pixels[0, 0].tolist() == [121, 146, 171]


def test_gray_transform_matches_scalar_reference():
    rng = np.random.default_rng(23)
    img, lab = random_pair(rng, 6, 7)
    for intensity in (0.1, 0.33, 0.66, 0.9):
        out = gray_scale_transform(img, lab, 2, intensity)
        for r in range(6):
            for c in range(7):
                src = img.pixels[r, c].tolist()
                if lab.labels[r, c] == 2:
                    g = ref_luma(*src)
                    expect = [ref_round((1 - intensity) * v + intensity * g) for v in src]
                    assert out.pixels[r, c].tolist() == expect
                else:
                    assert out.pixels[r, c].tolist() == src


def test_gray_transform_saturates():
    rng = np.random.default_rng(24)
    img, lab = random_pair(rng, 16, 16)
    out = gray_scale_transform(img, lab, 3, 1.0)
    mask = lab.labels == 3
    channels = out.pixels[mask]
    assert (channels[:, 0] == channels[:, 1]).all()
    assert (channels[:, 1] == channels[:, 2]).all()


def test_gray_transform_rejects_bad_inputs():
    img = ImageBuffer(np.zeros((2, 2, 3), dtype=np.uint8))
    lab = LabelMap(np.zeros((3, 3), dtype=np.uint8))
    with pytest.raises(DimensionMismatch):
        gray_scale_transform(img, lab, 1, 0.5)
    lab2 = LabelMap(np.zeros((2, 2), dtype=np.uint8))
    with pytest.raises(IntensityOutOfRange):
        gray_scale_transform(img, lab2, 1, 1.5)


def test_gray_transform_absent_class_is_identity():
    rng = np.random.default_rng(25)
    img, lab = random_pair(rng, 5, 5, class_ids=(0, 1))
    assert gray_scale_transform(img, lab, 9, 1.0) == img


# ---------------------------------------------------------------------------
# color_duplication
# ---------------------------------------------------------------------------

def test_color_dup_identity_at_zero():
    rng = np.random.default_rng(26)
    img, lab = random_pair(rng, 8, 8)
    for ch in CHANNELS:
        assert color_duplication(img, lab, 1, ch, 0.0) == img


def test_color_dup_full_red():
    img = ImageBuffer(np.full((1, 1, 3), (10, 20, 30), dtype=np.uint8))
    lab = LabelMap(np.array([[1]], dtype=np.uint8))
    out = color_duplication(img, lab, 1, "R", 1.0)
    assert out.pixels[0, 0].tolist() == [10, 10, 10]


def test_color_dup_half_green():
    img = ImageBuffer(np.full((1, 1, 3), (10, 20, 30), dtype=np.uint8))
    lab = LabelMap(np.array([[1]], dtype=np.uint8))
    out = color_duplication(img, lab, 1, "G", 0.5)
    assert out.pixels[0, 0].tolist() == [15, 20, 25]


def test_color_dup_preserves_source_channel():
    rng = np.random.default_rng(27)
    img, lab = random_pair(rng, 12, 12)
    for ci, ch in enumerate(CHANNELS):
        for intensity in (0.0, 0.25, 0.5, 0.75, 1.0):
            out = color_duplication(img, lab, 2, ch, intensity)
            assert np.array_equal(out.pixels[:, :, ci][lab.labels == 2],
                                  img.pixels[:, :, ci][lab.labels == 2])


def test_color_dup_matches_scalar_reference():
    rng = np.random.default_rng(28)
    img, lab = random_pair(rng, 5, 6)
    for ci, ch in enumerate(CHANNELS):
        out = color_duplication(img, lab, 1, ch, 0.4)
        for r in range(5):
            for c in range(6):
                src = img.pixels[r, c].tolist()
                if lab.labels[r, c] == 1:
                    v = src[ci]
                    expect = [ref_round(0.6 * s + 0.4 * v) for s in src]
                    expect[ci] = v
                    assert out.pixels[r, c].tolist() == expect
                else:
                    assert out.pixels[r, c].tolist() == src


# ---------------------------------------------------------------------------
# pixel_swap
# ---------------------------------------------------------------------------

def test_pixel_swap_identity_at_zero():
    rng = np.random.default_rng(29)
    img, lab = random_pair(rng, 8, 8)
    stream = RngStream.derive(1, 0, 1, 0)
    assert pixel_swap(img, lab, 1, 0.0, stream) == img


def test_pixel_swap_preserves_multiset():
    rng = np.random.default_rng(30)
    for trial in range(20):
        img, lab = random_pair(rng, 10, 10)
        p = float(rng.uniform(0, 1))
        stream = RngStream.derive(7, trial, 2, 0)
        out = pixel_swap(img, lab, 2, p, stream)
        mask = lab.labels == 2
        before = Counter(map(tuple, img.pixels[mask].tolist()))
        after = Counter(map(tuple, out.pixels[mask].tolist()))
        assert before == after
        assert np.array_equal(out.pixels[~mask], img.pixels[~mask])


def test_pixel_swap_matches_reference():
    rng = np.random.default_rng(31)
    for trial in range(25):
        h, w = int(rng.integers(1, 12)), int(rng.integers(1, 12))
        img, lab = random_pair(rng, h, w)
        p = float(rng.choice([0.0, 0.3, 0.5, 0.77, 1.0]))
        seed, class_id, replicate = 5, 1, int(rng.integers(0, 3))
        out = pixel_swap(img, lab, class_id, p,
                         RngStream.derive(seed, trial, class_id, replicate))
        expect = reference_pixel_swap(np.array(img.pixels), lab.labels, class_id, p,
                                      RngStream.derive(seed, trial, class_id, replicate))
        assert np.array_equal(out.pixels, expect)


def test_pixel_swap_three_by_three_exact():
    # all nine pixels distinct, class covers the image; reference decides the bytes
    img = ImageBuffer(np.arange(27, dtype=np.uint8).reshape(3, 3, 3))
    lab = LabelMap(np.full((3, 3), 1, dtype=np.uint8))
    out = pixel_swap(img, lab, 1, 1.0, RngStream.derive(42, 0, 1, 0))
    expect = reference_pixel_swap(np.array(img.pixels), lab.labels, 1, 1.0,
                                  RngStream.derive(42, 0, 1, 0))
    assert np.array_equal(out.pixels, expect)
    assert Counter(map(tuple, out.pixels.reshape(-1, 3).tolist())) == \
        Counter(map(tuple, img.pixels.reshape(-1, 3).tolist()))


def test_pixel_swap_selection_count():
    rng = np.random.default_rng(32)
    for _ in range(30):
        k = int(rng.integers(1, 200))
        p = float(rng.uniform(0, 1))
        positions = np.arange(k, dtype=np.int64)
        selected, perm = swap_plan(RngStream.derive(3, 0, 1, 0), positions, p)
        assert len(selected) == ref_round(p * k)
        assert len(perm) == len(selected)
        assert sorted(perm.tolist()) == list(range(len(selected)))
        assert len(set(selected.tolist())) == len(selected)


def test_pixel_swap_full_selects_everything():
    positions = np.arange(17, dtype=np.int64)
    selected, _ = swap_plan(RngStream.derive(0, 0, 0, 0), positions, 1.0)
    assert sorted(selected.tolist()) == list(range(17))


def test_pixel_swap_single_pixel_class():
    img = ImageBuffer(np.zeros((2, 2, 3), dtype=np.uint8))
    lab = LabelMap(np.array([[1, 0], [0, 0]], dtype=np.uint8))
    out = pixel_swap(img, lab, 1, 1.0, RngStream.derive(0, 0, 1, 0))
    assert out == img


def test_pixel_swap_deterministic():
    rng = np.random.default_rng(33)
    img, lab = random_pair(rng, 9, 9)
    a = pixel_swap(img, lab, 1, 0.8, RngStream.derive(11, 4, 1, 2))
    b = pixel_swap(img, lab, 1, 0.8, RngStream.derive(11, 4, 1, 2))
    c = pixel_swap(img, lab, 1, 0.8, RngStream.derive(11, 4, 1, 3))
    assert a == b
    assert a != c or (lab.labels == 1).sum() <= 1


# ---------------------------------------------------------------------------
# context_mask
# ---------------------------------------------------------------------------

def test_context_mask_all_class_identity():
    rng = np.random.default_rng(34)
    img, _ = random_pair(rng, 6, 6)
    lab = LabelMap(np.full((6, 6), 2, dtype=np.uint8))
    fill = ChannelStats(1.0, 2.0, 3.0, 10)
    assert context_mask(img, lab, 2, fill) == img


def test_context_mask_fill_rounding():
    rng = np.random.default_rng(35)
    img, _ = random_pair(rng, 4, 4)
    lab = LabelMap(np.zeros((4, 4), dtype=np.uint8))
    fill = ChannelStats(101.5, 99.2, 100.0, 10)
    out = context_mask(img, lab, 1, fill)
    assert (out.pixels == np.array([102, 99, 100], dtype=np.uint8)).all()


def test_context_mask_mixed_exhaustive():
    rng = np.random.default_rng(36)
    img, lab = random_pair(rng, 9, 9)
    fill = ChannelStats(10.4, 200.5, 0.0, 10)
    out = context_mask(img, lab, 1, fill)
    for r in range(9):
        for c in range(9):
            if lab.labels[r, c] == 1:
                assert out.pixels[r, c].tolist() == img.pixels[r, c].tolist()
            else:
                assert out.pixels[r, c].tolist() == [10, 201, 0]


# ---------------------------------------------------------------------------
# apply and spec validation
# ---------------------------------------------------------------------------

def test_apply_dispatch_identity():
    rng = np.random.default_rng(37)
    img, lab = random_pair(rng, 8, 8)
    spec = DistortionSpec(kind="gray", class_id=1, intensity=0.0)
    assert apply(img, lab, spec) == img


def test_apply_masked_swap_commutes():
    rng = np.random.default_rng(38)
    img, lab = random_pair(rng, 10, 10)
    fill = ChannelStats(50.0, 60.0, 70.0, 10)
    spec = DistortionSpec(kind="pixel-swap", class_id=2, intensity=1.0, seed=9)
    combined = apply(img, lab, spec, image_index=3, context_fill=fill)
    swapped = pixel_swap(img, lab, 2, 1.0, RngStream.derive(9, 3, 2, 0))
    other_order = context_mask(swapped, lab, 2, fill)
    assert combined == other_order
    masked_first = context_mask(img, lab, 2, fill)
    swapped_after = pixel_swap(masked_first, lab, 2, 1.0, RngStream.derive(9, 3, 2, 0))
    assert combined == swapped_after


def test_apply_twice_at_zero_is_identity():
    rng = np.random.default_rng(39)
    img, lab = random_pair(rng, 8, 8)
    for kind in ("gray", "pixel-swap"):
        spec = DistortionSpec(kind=kind, class_id=1, intensity=0.0)
        once = apply(img, lab, spec)
        twice = apply(once, lab, spec)
        assert twice == img


def test_spec_validation():
    with pytest.raises(ValueError):
        DistortionSpec(kind="nope", class_id=1)
    with pytest.raises(IntensityOutOfRange):
        DistortionSpec(kind="gray", class_id=1, intensity=1.2)
    with pytest.raises(ValueError):
        DistortionSpec(kind="gray", class_id=1, channel="R")
    with pytest.raises(ValueError):
        DistortionSpec(kind="color-dup", class_id=1, intensity=0.5)
    with pytest.raises(ValueError):
        DistortionSpec(kind="context-mask", class_id=1)
    with pytest.raises(ValueError):
        DistortionSpec(kind="gray", class_id=1, intensity=0.5,
                       fill=ChannelStats(1, 2, 3, 1))


def test_rng_streams_differ_by_derivation():
    base = [RngStream.derive(1, 0, 1, 0).next_u64() for _ in range(4)]
    same = [RngStream.derive(1, 0, 1, 0).next_u64() for _ in range(4)]
    other_image = [RngStream.derive(1, 1, 1, 0).next_u64() for _ in range(4)]
    other_class = [RngStream.derive(1, 0, 2, 0).next_u64() for _ in range(4)]
    other_rep = [RngStream.derive(1, 0, 1, 1).next_u64() for _ in range(4)]
    assert base == same
    assert base != other_image and base != other_class and base != other_rep


def test_rng_below_bounds_and_reach():
    stream = RngStream.derive(5, 0, 0, 0)
    seen = set()
    for _ in range(2000):
        v = stream.below(7)
        assert 0 <= v < 7
        seen.add(v)
    assert seen == set(range(7))
