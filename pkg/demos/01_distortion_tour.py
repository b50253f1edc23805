"""
Tour of the four class-conditional distortions
==============================================

Builds a small synthetic aerial-style scene with three classes, applies
each transform at a few intensities, and writes the results as PNGs so
they can be inspected side by side.
"""

from pathlib import Path

import numpy as np

from eodistort import (
    ChannelStats,
    ImageBuffer,
    LabelMap,
    RngStream,
    color_duplication,
    context_mask,
    gray_scale_transform,
    pixel_swap,
    save_image,
)

out_dir = Path(__file__).resolve().parent / "output" / "tour"
out_dir.mkdir(parents=True, exist_ok=True)

# a 96x96 scene: green "field" with texture, gray "road" band, blue "water" pool
rng = np.random.default_rng(0)
img = np.zeros((96, 96, 3), dtype=np.uint8)
lab = np.zeros((96, 96), dtype=np.uint8)

img[:, :] = (70, 140, 60) + rng.integers(-25, 26, (96, 96, 3))
lab[:, :] = 1  # field
img[40:56, :] = (120, 120, 120) + rng.integers(-10, 11, (16, 96, 3))
lab[40:56, :] = 2  # road
img[64:92, 60:92] = (40, 70, 160) + rng.integers(-8, 9, (28, 32, 3))
lab[64:92, 60:92] = 3  # water

image = ImageBuffer(np.clip(img, 0, 255).astype(np.uint8))
labels = LabelMap(lab)
save_image(image, out_dir / "original.png")

# gray mixing on the field: color drains away while texture stays
for intensity in (0.33, 0.66, 1.0):
    out = gray_scale_transform(image, labels, 1, intensity)
    save_image(out, out_dir / f"gray_field_{intensity:.2f}.png")

# pixel swap on the field: texture dissolves while the color histogram stays
for proportion in (0.1, 0.5, 1.0):
    stream = RngStream.derive(seed=7, image_index=0, class_id=1, replicate=0)
    out = pixel_swap(image, labels, 1, proportion, stream)
    save_image(out, out_dir / f"swap_field_{proportion:.2f}.png")

# duplicating the red channel onto the water region
for intensity in (0.5, 1.0):
    out = color_duplication(image, labels, 3, "R", intensity)
    save_image(out, out_dir / f"red_dup_water_{intensity:.2f}.png")

# masking everything except the road with a mid-gray fill
fill = ChannelStats(mean_r=101.5, mean_g=99.2, mean_b=100.0, pixel_count=1)
save_image(context_mask(image, labels, 2, fill), out_dir / "context_road_only.png")

print(f"wrote {len(list(out_dir.glob('*.png')))} images to {out_dir}")
