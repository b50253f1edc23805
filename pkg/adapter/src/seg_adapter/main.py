"""Directory-protocol segmentation adapter.

Serves one prediction batch: reads ``batch.json`` plus the listed RGB PNGs
from an input directory, runs per-pixel argmax segmentation, and writes one
8-bit single-channel ``<id>.png`` label map per image into an output
directory.  Label values are the model's output channel indices.

batch.json schema::

    { "images": [ {"id": str, "file": "<name>.png", "width": int, "height": int} ] }

Modes
-----
* ``--stub-copy-labels DIR`` bypasses the model and copies ``<id>.png``
  ground-truth maps from DIR, for contract tests without a checkpoint.
* ``--arch torchscript --checkpoint model.pt`` runs any TorchScript module
  mapping a normalized float batch (N, 3, H, W) to logits (N, C, H, W).
  Export whatever architecture you trained to TorchScript and point the
  adapter at it.
* ``--arch deeplabv3-resnet50 --checkpoint state.pth --num-classes C``
  builds the torchvision model and loads a state dict.

The adapter owns normalization and resizing; the harness never touches
pixel values.  ``--norm-means`` / ``--norm-stds`` are in 0-255 pixel units
(defaults scale input to [0, 1]).  ``--resize N`` runs inference at NxN and
rescales the label map back to the native size with nearest neighbor.

Exit codes: 0 success; 2 model-load failure; 3 missing or malformed
batch.json, or any unreadable listed image.  Label maps are written via a
temporary file and renamed, so a crash never leaves a partial map behind.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
from PIL import Image

EXIT_OK = 0
EXIT_MODEL = 2
EXIT_INPUT = 3


class InputError(Exception):
    """Unusable batch manifest or image file (exit 3)."""


class ModelError(Exception):
    """Model could not be constructed or loaded (exit 2)."""


def read_batch(input_dir: Path) -> list[dict]:
    manifest = input_dir / "batch.json"
    if not manifest.exists():
        raise InputError(f"no batch.json in {input_dir}")
    try:
        doc = json.loads(manifest.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot parse {manifest}: {exc}")
    images = doc.get("images") if isinstance(doc, dict) else None
    if not isinstance(images, list):
        raise InputError(f"{manifest}: expected an object with an 'images' list")
    for item in images:
        if not isinstance(item, dict) or not {"id", "file", "width", "height"} <= item.keys():
            raise InputError(f"{manifest}: every image needs id, file, width, height")
    return images


def load_rgb(path: Path) -> np.ndarray:
    if not path.exists():
        raise InputError(f"listed image missing: {path}")
    try:
        with Image.open(path) as img:
            if img.mode != "RGB":
                raise InputError(f"{path}: expected an RGB image, found mode {img.mode}")
            return np.asarray(img, dtype=np.uint8)
    except InputError:
        raise
    except Exception as exc:
        raise InputError(f"cannot read {path}: {exc}")


def write_label_map(labels: np.ndarray, target: Path) -> None:
    """Atomic write: the map appears complete or not at all."""
    tmp = target.with_suffix(".png.tmp")
    Image.fromarray(labels.astype(np.uint8), mode="L").save(tmp, format="PNG")
    os.replace(tmp, target)


def parse_triple(text: str, flag: str) -> tuple[float, float, float]:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 3:
        raise InputError(f"{flag} expects three comma-separated values, got {text!r}")
    return tuple(parts)


def run_stub(images: list[dict], labels_dir: Path, output_dir: Path) -> None:
    """Copy ground-truth maps, still enforcing the size contract."""
    for item in images:
        src = labels_dir / f"{item['id']}.png"
        if not src.exists():
            raise InputError(f"stub has no ground truth for id {item['id']!r}")
        try:
            with Image.open(src) as img:
                if img.mode != "L":
                    raise InputError(f"{src}: ground truth must be single-channel 8-bit")
                if img.size != (item["width"], item["height"]):
                    raise InputError(
                        f"{src}: is {img.size[0]}x{img.size[1]}, batch lists "
                        f"{item['width']}x{item['height']}"
                    )
                arr = np.asarray(img, dtype=np.uint8)
        except InputError:
            raise
        except Exception as exc:
            raise InputError(f"cannot read {src}: {exc}")
        write_label_map(arr, output_dir / f"{item['id']}.png")


def build_model(arch: str, checkpoint: Path, num_classes: int, device: str):
    try:
        import torch
    except ImportError as exc:
        raise ModelError(f"torch is required for model mode: {exc}")
    try:
        if arch == "torchscript":
            model = torch.jit.load(str(checkpoint), map_location=device)
        elif arch == "deeplabv3-resnet50":
            from torchvision.models.segmentation import deeplabv3_resnet50

            model = deeplabv3_resnet50(weights=None, num_classes=num_classes)
            state = torch.load(str(checkpoint), map_location=device)
            model.load_state_dict(state)
        else:
            raise ModelError(
                f"unknown arch {arch!r}; export your network to TorchScript instead"
            )
        model.to(device)
        model.eval()
        return model
    except ModelError:
        raise
    except Exception as exc:
        raise ModelError(f"cannot load {arch} model from {checkpoint}: {exc}")


def infer_batch(model, arrays: list[np.ndarray], means, stds, resize: int,
                device: str) -> list[np.ndarray]:
    import torch
    import torch.nn.functional as F

    out = []
    with torch.no_grad():
        for arr in arrays:
            h, w = arr.shape[:2]
            x = torch.from_numpy(arr.astype(np.float32)).permute(2, 0, 1).unsqueeze(0)
            x = (x - torch.tensor(means).view(1, 3, 1, 1)) / torch.tensor(stds).view(1, 3, 1, 1)
            if resize:
                x = F.interpolate(x, size=(resize, resize), mode="bilinear",
                                  align_corners=False)
            logits = model(x.to(device))
            if isinstance(logits, dict):  # torchvision segmentation heads
                logits = logits["out"]
            labels = logits.argmax(dim=1).to(torch.uint8).cpu()
            if resize:
                labels = F.interpolate(labels.unsqueeze(1).float(), size=(h, w),
                                       mode="nearest").squeeze(1).to(torch.uint8)
            out.append(labels.squeeze(0).numpy())
    return out


def run_model(images: list[dict], args, input_dir: Path, output_dir: Path) -> None:
    means = parse_triple(args.norm_means, "--norm-means")
    stds = parse_triple(args.norm_stds, "--norm-stds")
    if args.checkpoint is None:
        raise ModelError("--checkpoint is required unless --stub-copy-labels is given")
    model = build_model(args.arch, Path(args.checkpoint), args.num_classes, args.device)
    for start in range(0, len(images), args.batch_size):
        chunk = images[start:start + args.batch_size]
        arrays = [load_rgb(input_dir / item["file"]) for item in chunk]
        for item, arr in zip(chunk, arrays):
            if arr.shape[:2] != (item["height"], item["width"]):
                raise InputError(
                    f"{item['file']}: is {arr.shape[1]}x{arr.shape[0]}, batch lists "
                    f"{item['width']}x{item['height']}"
                )
        maps = infer_batch(model, arrays, means, stds, args.resize, args.device)
        for item, labels in zip(chunk, maps):
            write_label_map(labels, output_dir / f"{item['id']}.png")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="seg-adapter",
        description="Serve segmentation label maps over the directory batch protocol.",
    )
    parser.add_argument("--input-dir", required=True)
    parser.add_argument("--output-dir", required=True)
    parser.add_argument("--stub-copy-labels", metavar="DIR",
                        help="copy ground-truth maps from DIR instead of running a model")
    parser.add_argument("--arch", default="torchscript",
                        choices=["torchscript", "deeplabv3-resnet50"])
    parser.add_argument("--checkpoint")
    parser.add_argument("--num-classes", type=int, default=9)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--batch-size", type=int, default=4)
    parser.add_argument("--norm-means", default="0,0,0",
                        help="per-channel means in 0-255 units, e.g. 118.2,112.9,104.4")
    parser.add_argument("--norm-stds", default="255,255,255")
    parser.add_argument("--resize", type=int, default=0,
                        help="run inference at NxN and rescale labels back (0: native size)")
    args = parser.parse_args(argv)

    input_dir = Path(args.input_dir)
    output_dir = Path(args.output_dir)
    try:
        images = read_batch(input_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        if args.stub_copy_labels:
            run_stub(images, Path(args.stub_copy_labels), output_dir)
        else:
            run_model(images, args, input_dir, output_dir)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    return EXIT_OK


def cli() -> None:
    sys.exit(main())


if __name__ == "__main__":
    cli()
