"""Manifests and corpus statistics."""

import json

import numpy as np
import pytest

from eodistort import (
    class_pixel_histogram,
    compute_channel_means,
    load_manifest,
    validate_manifest,
)
from eodistort.dataset import DEFAULT_CLASS_TABLE
from eodistort.errors import EmptySplit, MalformedManifest

from conftest import write_dataset


def constant_image(h, w, rgb):
    return np.tile(np.array(rgb, dtype=np.uint8), (h, w, 1))


def test_load_manifest_defaults(tmp_path):
    manifest_path = write_dataset(
        tmp_path,
        [("a", constant_image(2, 2, (1, 2, 3)), np.zeros((2, 2), dtype=np.uint8), "train")],
    )
    m = load_manifest(manifest_path)
    assert m.class_table == DEFAULT_CLASS_TABLE
    assert m.background_id == 0
    assert [e.id for e in m.split_entries("train")] == ["a"]
    assert m.target_classes() == [1, 2, 3, 4, 5, 6, 7, 8]


def test_load_manifest_missing_background():
    doc = {"background_id": 9, "classes": {"1": "x"}, "entries": []}
    with pytest.raises(MalformedManifest):
        from eodistort.dataset import DatasetManifest
        DatasetManifest(entries=(), class_table={1: "x"}, background_id=9)
    del doc


def test_load_manifest_bad_json(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text("{not json")
    with pytest.raises(MalformedManifest):
        load_manifest(path)


def test_validate_clean(tmp_path):
    manifest_path = write_dataset(
        tmp_path,
        [("a", constant_image(4, 4, (9, 9, 9)), np.ones((4, 4), dtype=np.uint8), "train")],
        classes={0: "background", 1: "one"},
    )
    assert validate_manifest(load_manifest(manifest_path)) == []


def test_validate_dimension_mismatch(tmp_path):
    manifest_path = write_dataset(
        tmp_path,
        [("a", constant_image(4, 4, (9, 9, 9)), np.ones((4, 4), dtype=np.uint8), "train")],
        classes={0: "background", 1: "one"},
    )
    # overwrite the labels with a smaller map
    from eodistort import LabelMap, save_labels
    save_labels(LabelMap(np.ones((2, 2), dtype=np.uint8)), tmp_path / "a_labels.png")
    violations = validate_manifest(load_manifest(manifest_path))
    assert len(violations) == 1
    assert "a.png" in violations[0] and "a_labels.png" in violations[0]


def test_validate_unknown_class(tmp_path):
    lab = np.ones((4, 4), dtype=np.uint8)
    lab[0, 0] = 99
    manifest_path = write_dataset(
        tmp_path,
        [("a", constant_image(4, 4, (9, 9, 9)), lab, "train")],
        classes={0: "background", 1: "one"},
    )
    violations = validate_manifest(load_manifest(manifest_path))
    assert len(violations) == 1
    assert "99" in violations[0]


def test_channel_means_constant(tmp_path):
    manifest_path = write_dataset(
        tmp_path,
        [("a", constant_image(3, 5, (10, 20, 30)), np.zeros((3, 5), dtype=np.uint8), "train")],
    )
    stats = compute_channel_means(load_manifest(manifest_path), "train")
    assert stats.means == (10.0, 20.0, 30.0)
    assert stats.pixel_count == 15


def test_channel_means_two_pixels(tmp_path):
    manifest_path = write_dataset(
        tmp_path,
        [
            ("a", constant_image(1, 1, (0, 0, 0)), np.zeros((1, 1), dtype=np.uint8), "train"),
            ("b", constant_image(1, 1, (2, 4, 6)), np.zeros((1, 1), dtype=np.uint8), "train"),
        ],
    )
    stats = compute_channel_means(load_manifest(manifest_path), "train")
    assert stats.means == (1.0, 2.0, 3.0)


def test_channel_means_matches_flat_scan(tmp_path):
    rng = np.random.default_rng(7)
    items = []
    arrays = []
    for i, (h, w) in enumerate([(3, 4), (5, 2), (7, 7)]):
        img = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
        arrays.append(img)
        items.append((f"img{i}", img, np.zeros((h, w), dtype=np.uint8), "train"))
    manifest_path = write_dataset(tmp_path, items)
    stats = compute_channel_means(load_manifest(manifest_path), "train")

    # independent single-pass accumulator over the flattened pixels
    total = [0, 0, 0]
    count = 0
    for arr in arrays:
        for row in arr.reshape(-1, 3).tolist():
            for ch in range(3):
                total[ch] += row[ch]
            count += 1
    assert stats.pixel_count == count
    assert stats.means == (total[0] / count, total[1] / count, total[2] / count)


def test_channel_means_entry_order_invariant(tmp_path):
    rng = np.random.default_rng(8)
    imgs = [rng.integers(0, 256, size=(4, 4, 3), dtype=np.uint8) for _ in range(3)]
    labs = [np.zeros((4, 4), dtype=np.uint8) for _ in range(3)]
    fwd = write_dataset(tmp_path / "fwd",
                        [(f"i{k}", imgs[k], labs[k], "train") for k in range(3)])
    rev = write_dataset(tmp_path / "rev",
                        [(f"i{k}", imgs[k], labs[k], "train") for k in reversed(range(3))])
    assert compute_channel_means(load_manifest(fwd), "train").means == \
        compute_channel_means(load_manifest(rev), "train").means


def test_channel_means_empty_split(tmp_path):
    manifest_path = write_dataset(
        tmp_path,
        [("a", constant_image(1, 1, (0, 0, 0)), np.zeros((1, 1), dtype=np.uint8), "train")],
    )
    with pytest.raises(EmptySplit):
        compute_channel_means(load_manifest(manifest_path), "val")


def test_histogram_single_class(tmp_path):
    manifest_path = write_dataset(
        tmp_path,
        [("a", constant_image(4, 6, (1, 1, 1)), np.ones((4, 6), dtype=np.uint8), "train")],
        classes={0: "background", 1: "one"},
    )
    hist = class_pixel_histogram(load_manifest(manifest_path), "train")
    assert hist[1] == 24
    assert hist[0] == 0


def test_histogram_background_fraction(tmp_path):
    # a split constructed with 0.6% background pixels reports that fraction
    lab = np.ones((25, 40), dtype=np.uint8)
    lab.ravel()[:6] = 0  # 6 of 1000 pixels
    manifest_path = write_dataset(
        tmp_path,
        [("a", constant_image(25, 40, (5, 5, 5)), lab, "train")],
        classes={0: "background", 1: "one"},
    )
    hist = class_pixel_histogram(load_manifest(manifest_path), "train")
    assert hist[0] / sum(hist.values()) == pytest.approx(0.006)


def test_histogram_partition(tmp_path):
    rng = np.random.default_rng(9)
    items = []
    total = 0
    for i, (h, w) in enumerate([(3, 3), (6, 2), (4, 5)]):
        lab = rng.integers(0, 4, size=(h, w), dtype=np.uint8)
        items.append((f"i{i}", rng.integers(0, 256, (h, w, 3), dtype=np.uint8), lab, "val"))
        total += h * w
    manifest_path = write_dataset(tmp_path, items,
                                  classes={0: "background", 1: "a", 2: "b", 3: "c"})
    hist = class_pixel_histogram(load_manifest(manifest_path), "val")
    assert sum(hist.values()) == total


def test_manifest_paths_relative_to_file(tmp_path):
    sub = tmp_path / "deep" / "nested"
    manifest_path = write_dataset(
        sub,
        [("a", constant_image(1, 1, (0, 0, 0)), np.zeros((1, 1), dtype=np.uint8), "train")],
    )
    m = load_manifest(manifest_path)
    assert m.entries[0].image_path.exists()


def test_duplicate_ids_flagged(tmp_path):
    img = constant_image(2, 2, (0, 0, 0))
    lab = np.zeros((2, 2), dtype=np.uint8)
    sub = tmp_path / "dup"
    sub.mkdir()
    (sub / "inner").mkdir()
    from eodistort import ImageBuffer, LabelMap, save_image, save_labels
    for where in (sub, sub / "inner"):
        save_image(ImageBuffer(img), where / "a.png")
        save_labels(LabelMap(lab), where / "a_labels.png")
    doc = {
        "background_id": 0,
        "entries": [
            {"image": "a.png", "labels": "a_labels.png", "split": "train"},
            {"image": "inner/a.png", "labels": "inner/a_labels.png", "split": "train"},
        ],
    }
    manifest_path = sub / "manifest.json"
    manifest_path.write_text(json.dumps(doc))
    violations = validate_manifest(load_manifest(manifest_path))
    assert any("duplicate id" in v for v in violations)
