"""Search-grid enumeration over geographic bounding boxes and region lookup.

Coordinates are plain decimal lat/lon degrees throughout; no projection
handling. Grid points are spaced at a fixed stride (default 0.02 degrees)
anchored at each box's minimum corner.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import ValidationError

DEFAULT_STRIDE_DEG = 0.02

# Absolute tolerance for "point is on the box edge" so float error in
# min + i*stride never drops the far boundary row/column.
EDGE_TOL = 1e-9

# Dedup precision for points emitted by overlapping boxes (~0.1 m).
DEDUP_DECIMALS = 6


@dataclass(frozen=True)
class GeoBoundingBox:
    min_lat: float
    max_lat: float
    min_lon: float
    max_lon: float

    def __post_init__(self):
        if not (-90.0 <= self.min_lat <= 90.0 and -90.0 <= self.max_lat <= 90.0):
            raise ValidationError(f"latitude out of [-90, 90]: min_lat={self.min_lat}, max_lat={self.max_lat}")
        if not (-180.0 <= self.min_lon <= 180.0 and -180.0 <= self.max_lon <= 180.0):
            raise ValidationError(f"longitude out of [-180, 180]: min_lon={self.min_lon}, max_lon={self.max_lon}")
        if self.min_lat > self.max_lat:
            raise ValidationError(f"min_lat {self.min_lat} exceeds max_lat {self.max_lat}")
        if self.min_lon > self.max_lon:
            raise ValidationError(f"min_lon {self.min_lon} exceeds max_lon {self.max_lon}")

    def contains(self, lat: float, lon: float, tol: float = EDGE_TOL) -> bool:
        return (
            self.min_lat - tol <= lat <= self.max_lat + tol
            and self.min_lon - tol <= lon <= self.max_lon + tol
        )


@dataclass(frozen=True)
class GridSpec:
    boxes: tuple[GeoBoundingBox, ...]
    stride_lat: float = DEFAULT_STRIDE_DEG
    stride_lon: float = DEFAULT_STRIDE_DEG

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))
        if not self.boxes:
            raise ValidationError("boxes must be non-empty")
        if not self.stride_lat > 0:
            raise ValidationError(f"stride_lat must be > 0, got {self.stride_lat}")
        if not self.stride_lon > 0:
            raise ValidationError(f"stride_lon must be > 0, got {self.stride_lon}")


@dataclass(frozen=True)
class GridPoint:
    lat: float
    lon: float


def _steps(span: float, stride: float) -> int:
    # Number of strides that fit in span, tolerating float error at the edge.
    return int(math.floor((span + EDGE_TOL) / stride))


def enumerate_grid(spec: GridSpec) -> list[GridPoint]:
    """Enumerate grid points box by box, lat-major, deduplicated across boxes.

    Points from overlapping boxes are deduplicated by coordinate equality
    after rounding to 6 decimal places; the first occurrence wins, so the
    output order is deterministic.
    """
    points: list[GridPoint] = []
    seen: set[tuple[float, float]] = set()
    for box in spec.boxes:
        n_lat = _steps(box.max_lat - box.min_lat, spec.stride_lat)
        n_lon = _steps(box.max_lon - box.min_lon, spec.stride_lon)
        for i in range(n_lat + 1):
            lat = box.min_lat + i * spec.stride_lat
            for j in range(n_lon + 1):
                lon = box.min_lon + j * spec.stride_lon
                key = (round(lat, DEDUP_DECIMALS), round(lon, DEDUP_DECIMALS))
                if key in seen:
                    continue
                seen.add(key)
                points.append(GridPoint(lat, lon))
    return points


@dataclass(frozen=True)
class Region:
    """A named region: one or more polygons, each a list of closed rings."""

    name: str
    polygons: tuple[tuple[tuple[tuple[float, float], ...], ...], ...]


@dataclass(frozen=True)
class RegionSet:
    regions: tuple[Region, ...]

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        names = [r.name for r in self.regions]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValidationError(f"duplicate region names: {dupes}")
        for region in self.regions:
            for polygon in region.polygons:
                for ring in polygon:
                    if len(ring) < 3:
                        raise ValidationError(
                            f"region {region.name!r} has a ring with fewer than 3 vertices"
                        )


def _normalize_ring(vertices) -> tuple[tuple[float, float], ...]:
    ring = [(float(lat), float(lon)) for lat, lon in vertices]
    if len(ring) > 1 and ring[0] == ring[-1]:
        ring = ring[:-1]
    return tuple(ring)


def make_region(name: str, rings) -> Region:
    """Build a single-polygon region from (lat, lon) rings."""
    return Region(name=name, polygons=(tuple(_normalize_ring(r) for r in rings),))


_ON_EDGE_EPS = 1e-12


def _on_segment(lat, lon, a, b) -> bool:
    cross = (b[1] - a[1]) * (lat - a[0]) - (b[0] - a[0]) * (lon - a[1])
    if abs(cross) > _ON_EDGE_EPS:
        return False
    return (
        min(a[0], b[0]) - _ON_EDGE_EPS <= lat <= max(a[0], b[0]) + _ON_EDGE_EPS
        and min(a[1], b[1]) - _ON_EDGE_EPS <= lon <= max(a[1], b[1]) + _ON_EDGE_EPS
    )


def _in_polygon(lat: float, lon: float, polygon) -> bool:
    # Even-odd rule over all rings (outer + holes); boundary counts as inside.
    inside = False
    for ring in polygon:
        n = len(ring)
        for k in range(n):
            a = ring[k]
            b = ring[(k + 1) % n]
            if _on_segment(lat, lon, a, b):
                return True
            if (a[0] > lat) != (b[0] > lat):
                lon_cross = a[1] + (lat - a[0]) / (b[0] - a[0]) * (b[1] - a[1])
                if lon < lon_cross:
                    inside = not inside
    return inside


def assign_region(p: GridPoint, rs: RegionSet) -> str | None:
    """Name of the first declared region containing p, or None.

    Containment uses the even-odd rule with boundaries counted as inside;
    when several regions contain p the first in declared order wins.
    """
    for region in rs.regions:
        for polygon in region.polygons:
            if _in_polygon(p.lat, p.lon, polygon):
                return region.name
    return None


def load_regions(path) -> RegionSet:
    """Load a RegionSet from a GeoJSON FeatureCollection.

    Accepts Polygon and MultiPolygon features carrying a "name" property.
    GeoJSON positions are [lon, lat]; they are flipped to (lat, lon) here.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read region file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"region file {path} is not valid JSON: {exc}") from exc

    if doc.get("type") != "FeatureCollection":
        raise ValidationError(f"region file {path}: expected a FeatureCollection")
    regions = []
    for feature in doc.get("features", []):
        props = feature.get("properties") or {}
        name = props.get("name")
        if not name:
            raise ValidationError(f"region file {path}: feature without a \"name\" property")
        geometry = feature.get("geometry") or {}
        gtype = geometry.get("type")
        coords = geometry.get("coordinates")
        if gtype == "Polygon":
            polys = [coords]
        elif gtype == "MultiPolygon":
            polys = coords
        else:
            raise ValidationError(
                f"region file {path}: feature {name!r} has unsupported geometry {gtype!r}"
            )
        polygons = tuple(
            tuple(_normalize_ring((lat, lon) for lon, lat in ring) for ring in poly)
            for poly in polys
        )
        regions.append(Region(name=str(name), polygons=polygons))
    return RegionSet(regions=tuple(regions))
