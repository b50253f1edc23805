"""Sweep report serialization (CSV) and degradation charts (SVG).

The CSV is the source of truth: charts are rendered only from curve sets
built out of parsed CSV rows, never from in-memory sweep state.  SVG output
is byte-deterministic for identical input, so renders can be diffed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from .errors import IoFailure, MalformedManifest
from .sweep import SweepReport

CSV_COLUMNS = ("transform", "class_id", "class_name", "intensity", "replicate",
               "iou", "split", "seed")

# Deterministic class color assignment: palette[i % 8] by ascending class id.
PALETTE = ("#4477aa", "#ee6677", "#228833", "#ccbb44",
           "#66ccee", "#aa3377", "#bbbbbb", "#ee8866")

GAP = None  # series value for undefined IoU; rendered as a break, never as 0


def to_csv(report: SweepReport, path: str | Path) -> None:
    """Write one row per record, ordered by (transform, class, intensity, replicate).

    Real numbers carry 6 decimal places; undefined IoU becomes an empty field.
    """
    if not report.records:
        raise MalformedManifest("refusing to write an empty report")
    rows = sorted(
        report.records,
        key=lambda r: (r.transform, r.class_id, r.intensity, r.replicate),
    )
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for r in rows:
                writer.writerow([
                    r.transform,
                    r.class_id,
                    report.class_names.get(r.class_id, str(r.class_id)),
                    f"{r.intensity:.6f}",
                    r.replicate,
                    "" if r.iou is None else f"{r.iou:.6f}",
                    report.split,
                    report.seed,
                ])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}")


def read_csv(path: str | Path) -> list[dict]:
    """Parse a report CSV back into typed row dicts."""
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
                raise MalformedManifest(f"{path}: unexpected CSV header {reader.fieldnames}")
            rows = []
            for raw in reader:
                rows.append({
                    "transform": raw["transform"],
                    "class_id": int(raw["class_id"]),
                    "class_name": raw["class_name"],
                    "intensity": float(raw["intensity"]),
                    "replicate": int(raw["replicate"]),
                    "iou": None if raw["iou"] == "" else float(raw["iou"]),
                    "split": raw["split"],
                    "seed": int(raw["seed"]),
                })
            return rows
    except FileNotFoundError:
        raise MalformedManifest(f"no such CSV: {path}")
    except (OSError, ValueError, KeyError) as exc:
        raise MalformedManifest(f"cannot parse {path}: {exc}")


@dataclass
class CurveSet:
    """Per-class degradation curves for one transform, plus their mean.

    ``series`` maps a class label to one y per x (None marks a gap where the
    IoU is undefined).  ``comparison`` optionally holds a second set of mean
    values drawn dashed (e.g. the same sweep on the training split).
    """

    transform: str
    xs: list[float]
    series: dict[str, list[float | None]]
    mean: list[float | None]
    comparison: list[float | None] | None = None
    comparison_label: str = "comparison mean"
    class_colors: dict[str, str] = field(default_factory=dict)


def build_curves(rows: list[dict]) -> dict[str, CurveSet]:
    """Group CSV rows into one CurveSet per transform.

    Replicates are averaged first (per class and intensity), then the mean
    series is the unweighted mean over classes at each intensity, skipping
    gaps on both levels.
    """
    by_transform: dict[str, list[dict]] = {}
    for row in rows:
        by_transform.setdefault(row["transform"], []).append(row)

    curves = {}
    for transform in sorted(by_transform):
        t_rows = by_transform[transform]
        xs = sorted({r["intensity"] for r in t_rows})
        class_ids = sorted({r["class_id"] for r in t_rows})
        names = {r["class_id"]: r["class_name"] for r in t_rows}
        series: dict[str, list[float | None]] = {}
        colors: dict[str, str] = {}
        for pos, cid in enumerate(class_ids):
            label = names[cid]
            ys: list[float | None] = []
            for x in xs:
                vals = [r["iou"] for r in t_rows
                        if r["class_id"] == cid and r["intensity"] == x and r["iou"] is not None]
                ys.append(sum(vals) / len(vals) if vals else GAP)
            series[label] = ys
            colors[label] = PALETTE[pos % len(PALETTE)]
        mean: list[float | None] = []
        for i in range(len(xs)):
            vals = [ys[i] for ys in series.values() if ys[i] is not None]
            mean.append(sum(vals) / len(vals) if vals else GAP)
        curves[transform] = CurveSet(transform=transform, xs=xs, series=series,
                                     mean=mean, class_colors=colors)
    return curves


def attach_comparison(curves: dict[str, CurveSet], other_rows: list[dict],
                      label: str = "comparison mean") -> None:
    """Overlay another CSV's mean series (dashed) onto matching transforms."""
    other = build_curves(other_rows)
    for transform, curve in curves.items():
        if transform in other and other[transform].xs == curve.xs:
            curve.comparison = other[transform].mean
            curve.comparison_label = label


# Fixed chart geometry (viewBox 800x600).
_X0, _Y0, _X1, _Y1 = 60.0, 40.0, 600.0, 540.0


def _px(x: float) -> str:
    return f"{x:.2f}"


def _map_point(x: float, y: float) -> tuple[float, float]:
    return (_X0 + x * (_X1 - _X0), _Y1 - y * (_Y1 - _Y0))


def _polyline_segments(xs: list[float], ys: list[float | None]) -> list[list[tuple[float, float]]]:
    """Consecutive defined points; gaps split the line."""
    segments: list[list[tuple[float, float]]] = []
    current: list[tuple[float, float]] = []
    for x, y in zip(xs, ys):
        if y is None:
            if current:
                segments.append(current)
                current = []
        else:
            current.append(_map_point(x, y))
    if current:
        segments.append(current)
    return segments


def _emit_series(parts: list[str], xs: list[float], ys: list[float | None],
                 color: str, width: float, dashed: bool = False) -> None:
    dash = ' stroke-dasharray="8 5"' if dashed else ""
    for seg in _polyline_segments(xs, ys):
        if len(seg) == 1:
            cx, cy = seg[0]
            parts.append(f'<circle cx="{_px(cx)}" cy="{_px(cy)}" r="2.5" fill="{color}"/>')
        else:
            points = " ".join(f"{_px(px)},{_px(py)}" for px, py in seg)
            parts.append(
                f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{dash} '
                f'points="{points}"/>'
            )


def render_svg(curve: CurveSet, path: str | Path) -> None:
    """Render one transform's curves as a standalone, deterministic SVG."""
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        'width="800" height="600" viewBox="0 0 800 600">',
        '<rect width="800" height="600" fill="white"/>',
        f'<text x="{_px((_X0 + _X1) / 2)}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{curve.transform}</text>',
    ]
    # gridlines and axis ticks at 0.0, 0.2, ..., 1.0
    for i in range(6):
        v = i / 5
        gx, gy = _map_point(v, v)
        parts.append(f'<line x1="{_px(gx)}" y1="{_px(_Y0)}" x2="{_px(gx)}" y2="{_px(_Y1)}" '
                     'stroke="#dddddd" stroke-width="1"/>')
        parts.append(f'<line x1="{_px(_X0)}" y1="{_px(gy)}" x2="{_px(_X1)}" y2="{_px(gy)}" '
                     'stroke="#dddddd" stroke-width="1"/>')
        parts.append(f'<text x="{_px(gx)}" y="{_px(_Y1 + 18)}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{v:.1f}</text>')
        parts.append(f'<text x="{_px(_X0 - 8)}" y="{_px(gy + 4)}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{v:.1f}</text>')
    parts.append(f'<rect x="{_px(_X0)}" y="{_px(_Y0)}" width="{_px(_X1 - _X0)}" '
                 f'height="{_px(_Y1 - _Y0)}" fill="none" stroke="#333333"/>')
    parts.append(f'<text x="{_px((_X0 + _X1) / 2)}" y="{_px(_Y1 + 38)}" text-anchor="middle" '
                 'font-family="sans-serif" font-size="13">intensity</text>')
    parts.append(f'<text x="18" y="{_px((_Y0 + _Y1) / 2)}" text-anchor="middle" '
                 'font-family="sans-serif" font-size="13" '
                 f'transform="rotate(-90 18 {_px((_Y0 + _Y1) / 2)})">IoU</text>')

    for label in sorted(curve.series):
        _emit_series(parts, curve.xs, curve.series[label],
                     curve.class_colors.get(label, PALETTE[0]), 1.5)
    _emit_series(parts, curve.xs, curve.mean, "#000000", 2.5)
    if curve.comparison is not None:
        _emit_series(parts, curve.xs, curve.comparison, "#000000", 2.0, dashed=True)

    # legend
    lx, ly = _X1 + 16, _Y0 + 10
    entries = [(label, curve.class_colors.get(label, PALETTE[0]), False)
               for label in sorted(curve.series)]
    entries.append(("mean", "#000000", False))
    if curve.comparison is not None:
        entries.append((curve.comparison_label, "#000000", True))
    for i, (label, color, dashed) in enumerate(entries):
        y = ly + i * 20
        dash = ' stroke-dasharray="8 5"' if dashed else ""
        parts.append(f'<line x1="{_px(lx)}" y1="{_px(y)}" x2="{_px(lx + 26)}" y2="{_px(y)}" '
                     f'stroke="{color}" stroke-width="2"{dash}/>')
        parts.append(f'<text x="{_px(lx + 32)}" y="{_px(y + 4)}" '
                     f'font-family="sans-serif" font-size="12">{label}</text>')
    parts.append("</svg>")
    try:
        Path(path).write_text("\n".join(parts) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}")


def render_all(curves: dict[str, CurveSet], out_dir: str | Path) -> list[Path]:
    """One SVG per transform, named after it."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for transform in sorted(curves):
        target = out_dir / f"{transform}.svg"
        render_svg(curves[transform], target)
        written.append(target)
    return written
