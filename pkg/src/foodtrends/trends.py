"""Aggregates thresholded classifier output and external detections into
per-food counts, per-region favorites, and exportable report files.

Counting rule: a (image, label) pair contributes once, no matter how many
sources assert it; a single image may still contribute several distinct
labels. Regional tallies only cover images with geo coordinates, so regional
sums never exceed the global ones.
"""

from __future__ import annotations

import colorsys
import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import FormatError, ValidationError
from .geogrid import GridPoint, Region, RegionSet, assign_region

DEFAULT_CONFIDENCE_THRESHOLD = 0.70
CLASSIFIER_SOURCE = "classifier"

_UNREGIONED_FILL = "#cccccc"


@dataclass(frozen=True)
class DetectionRow:
    example_id: str
    label: str
    confidence: float
    source: str

    def __post_init__(self):
        if not self.example_id:
            raise ValidationError("detection example_id must be non-empty")
        if not self.label:
            raise ValidationError("detection label must be non-empty")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValidationError(f"confidence {self.confidence} outside [0, 1]")
        if not self.source:
            raise ValidationError("detection source must be non-empty")


def load_detections(path) -> list:
    """Read detection rows from a headerless CSV: example_id,label,confidence,source."""
    path = Path(path)
    rows = []
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                if len(row) != 4:
                    raise FormatError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
                try:
                    confidence = float(row[2])
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: bad confidence {row[2]!r}") from None
                try:
                    rows.append(
                        DetectionRow(
                            example_id=row[0].strip(),
                            label=row[1].strip(),
                            confidence=confidence,
                            source=row[3].strip(),
                        )
                    )
                except ValidationError as exc:
                    raise FormatError(f"{path}:{lineno}: {exc}") from exc
    except OSError as exc:
        raise FormatError(f"cannot read detections {path}: {exc}") from exc
    return rows


@dataclass(frozen=True)
class TrendConfig:
    confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD
    sources_enabled: frozenset | None = None  # None enables every source

    def __post_init__(self):
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValidationError("confidence_threshold must be in [0, 1]")
        if self.sources_enabled is not None:
            object.__setattr__(self, "sources_enabled", frozenset(self.sources_enabled))

    def allows(self, source: str) -> bool:
        return self.sources_enabled is None or source in self.sources_enabled


@dataclass(frozen=True)
class TrendReport:
    per_food_counts: dict
    per_region_top: dict  # region -> (label, count)
    n_images_with_food: int
    multi_label_images: int
    per_source_counts: dict
    unknown_ids_skipped: int
    confidence_threshold: float


def analyze_trends(
    predictions,
    classes,
    detections,
    geo,
    regions: RegionSet | None,
    cfg: TrendConfig,
    *,
    known_ids=None,
) -> TrendReport:
    """Tally accepted (image, label) pairs globally and per region.

    Classifier predictions enter under the source name "classifier" with
    their top label; detection rows keep their own source. Detections whose
    example_id is not a known image are skipped and counted. Images missing
    from geo count globally but not regionally.
    """
    classes = tuple(classes)
    prediction_ids = {p.example_id for p in predictions}
    if known_ids is None:
        known = prediction_ids | set(geo)
    else:
        known = set(known_ids) | prediction_ids

    accepted: set = set()  # (example_id, label) after cross-source dedup
    per_source: dict[str, set] = {}
    unknown_skipped = 0

    def admit(example_id: str, label: str, confidence: float, source: str) -> None:
        if confidence < cfg.confidence_threshold or not cfg.allows(source):
            return
        per_source.setdefault(source, set()).add((example_id, label))
        accepted.add((example_id, label))

    for pred in predictions:
        if not 0 <= pred.top_label < len(classes):
            raise ValidationError(
                f"{pred.example_id}: top_label {pred.top_label} out of range for {len(classes)} classes"
            )
        admit(pred.example_id, classes[pred.top_label], pred.confidence, CLASSIFIER_SOURCE)
    for det in detections:
        if det.example_id not in known:
            unknown_skipped += 1
            continue
        admit(det.example_id, det.label, det.confidence, det.source)

    per_food: dict[str, int] = {}
    labels_by_image: dict[str, set] = {}
    for example_id, label in accepted:
        per_food[label] = per_food.get(label, 0) + 1
        labels_by_image.setdefault(example_id, set()).add(label)

    region_counts: dict[str, dict[str, int]] = {}
    region_of: dict[str, str | None] = {}
    for example_id, label in accepted:
        if regions is None or example_id not in geo:
            continue
        if example_id not in region_of:
            lat, lon = geo[example_id]
            region_of[example_id] = assign_region(GridPoint(lat, lon), regions)
        name = region_of[example_id]
        if name is None:
            continue
        counts = region_counts.setdefault(name, {})
        counts[label] = counts.get(label, 0) + 1

    per_region_top = {
        region: min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        for region, counts in region_counts.items()
    }
    return TrendReport(
        per_food_counts=dict(sorted(per_food.items())),
        per_region_top={r: per_region_top[r] for r in sorted(per_region_top)},
        n_images_with_food=len(labels_by_image),
        multi_label_images=sum(1 for labels in labels_by_image.values() if len(labels) > 1),
        per_source_counts={s: len(pairs) for s, pairs in sorted(per_source.items())},
        unknown_ids_skipped=unknown_skipped,
        confidence_threshold=cfg.confidence_threshold,
    )


def label_color(label: str) -> str:
    """Stable label -> hex color via a hash-picked hue."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    hue = int.from_bytes(digest[:2], "big") % 360
    r, g, b = colorsys.hls_to_rgb(hue / 360.0, 0.55, 0.65)
    return f"#{round(r * 255):02x}{round(g * 255):02x}{round(b * 255):02x}"


def export_report(report: TrendReport, out_dir, regions: RegionSet | None = None) -> list:
    """Write report.json, per_region.csv, choropleth.svg; byte-deterministic."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    report_path = out_dir / "report.json"
    payload = {
        "per_food_counts": report.per_food_counts,
        "per_region_top": {
            region: {"label": label, "count": count}
            for region, (label, count) in report.per_region_top.items()
        },
        "n_images_with_food": report.n_images_with_food,
        "multi_label_images": report.multi_label_images,
        "per_source_counts": report.per_source_counts,
        "unknown_ids_skipped": report.unknown_ids_skipped,
        "confidence_threshold": report.confidence_threshold,
    }
    report_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    csv_path = out_dir / "per_region.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["region", "top_food", "count"])
        for region, (label, count) in report.per_region_top.items():
            writer.writerow([region, label, count])

    svg_path = out_dir / "choropleth.svg"
    svg_path.write_text(_render_choropleth(report, regions), encoding="utf-8")
    return [report_path, csv_path, svg_path]


def _region_fill(report: TrendReport, region: Region) -> str:
    top = report.per_region_top.get(region.name)
    return label_color(top[0]) if top else _UNREGIONED_FILL


def _render_choropleth(report: TrendReport, regions: RegionSet | None) -> str:
    width = 800.0
    legend_labels = sorted({label for label, _ in report.per_region_top.values()})
    legend_height = 24.0 * len(legend_labels) + 16.0

    region_list = list(regions.regions) if regions is not None else []
    lats = [v[0] for r in region_list for poly in r.polygons for ring in poly for v in ring]
    lons = [v[1] for r in region_list for poly in r.polygons for ring in poly for v in ring]
    parts = []
    if lats:
        pad_lat = 0.02 * ((max(lats) - min(lats)) or 1.0)
        pad_lon = 0.02 * ((max(lons) - min(lons)) or 1.0)
        lo_lat, hi_lat = min(lats) - pad_lat, max(lats) + pad_lat
        lo_lon, hi_lon = min(lons) - pad_lon, max(lons) + pad_lon
        scale = width / (hi_lon - lo_lon)
        map_height = (hi_lat - lo_lat) * scale

        def project(vertex):
            lat, lon = vertex
            return (lon - lo_lon) * scale, (hi_lat - lat) * scale

        for region in region_list:
            subpaths = []
            for polygon in region.polygons:
                for ring in polygon:
                    coords = " L ".join(f"{x:.4f},{y:.4f}" for x, y in map(project, ring))
                    subpaths.append(f"M {coords} Z")
            fill = _region_fill(report, region)
            parts.append(
                f'<g class="region"><title>{_xml_escape(region.name)}</title>'
                f'<path d="{" ".join(subpaths)}" fill="{fill}" fill-rule="evenodd" '
                f'stroke="#333333" stroke-width="1"/></g>'
            )
    else:
        map_height = 40.0
        parts.append('<text x="10" y="25" font-size="14">no region geometry supplied</text>')

    legend_top = map_height + 8.0
    for i, label in enumerate(legend_labels):
        y = legend_top + 24.0 * i
        parts.append(
            f'<g class="legend-entry"><rect x="10" y="{y:.4f}" width="18" height="18" '
            f'fill="{label_color(label)}"/>'
            f'<text x="34" y="{y + 14.0:.4f}" font-size="14">{_xml_escape(label)}</text></g>'
        )

    height = map_height + legend_height
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.4f}" viewBox="0 0 {width:.0f} {height:.4f}">\n'
        + "\n".join(parts)
        + "\n</svg>\n"
    )


def _xml_escape(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")
    )
