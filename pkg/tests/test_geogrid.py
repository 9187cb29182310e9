import json
import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from foodtrends.errors import ValidationError
from foodtrends.geogrid import (
    DEFAULT_STRIDE_DEG,
    GeoBoundingBox,
    GridPoint,
    GridSpec,
    RegionSet,
    assign_region,
    enumerate_grid,
    load_regions,
    make_region,
)

# Oracle: direct nested-loop tiling, kept deliberately dumb. A point lands on
# the grid iff it is min + k*stride for integer k and does not exceed the box
# max by more than the documented edge tolerance.


def oracle_grid(boxes, stride_lat, stride_lon):
    points = []
    seen = set()
    for box in boxes:
        n_lat = math.floor((box.max_lat - box.min_lat + 1e-9) / stride_lat)
        n_lon = math.floor((box.max_lon - box.min_lon + 1e-9) / stride_lon)
        for i in range(n_lat + 1):
            for j in range(n_lon + 1):
                lat = box.min_lat + i * stride_lat
                lon = box.min_lon + j * stride_lon
                key = (round(lat, 6), round(lon, 6))
                if key not in seen:
                    seen.add(key)
                    points.append(key)
    return points


def test_unit_box_default_stride_count():
    spec = GridSpec(boxes=(GeoBoundingBox(-1.8, -0.8, 36.3, 37.3),))
    assert len(enumerate_grid(spec)) == 51 * 51


def test_matches_oracle_on_simple_box():
    box = GeoBoundingBox(0.0, 0.1, 10.0, 10.1)
    spec = GridSpec(boxes=(box,), stride_lat=0.02, stride_lon=0.02)
    got = [(round(p.lat, 6), round(p.lon, 6)) for p in enumerate_grid(spec)]
    assert got == oracle_grid([box], 0.02, 0.02)


def test_matches_oracle_randomized():
    import random

    rng = random.Random(2024)
    for _ in range(25):
        min_lat = rng.uniform(-10, 10)
        min_lon = rng.uniform(-10, 10)
        box = GeoBoundingBox(
            min_lat, min_lat + rng.uniform(0.01, 0.5), min_lon, min_lon + rng.uniform(0.01, 0.5)
        )
        stride = rng.choice([0.01, 0.02, 0.05, 0.13])
        spec = GridSpec(boxes=(box,), stride_lat=stride, stride_lon=stride)
        got = [(round(p.lat, 6), round(p.lon, 6)) for p in enumerate_grid(spec)]
        assert got == oracle_grid([box], stride, stride)


def test_lat_major_order():
    spec = GridSpec(boxes=(GeoBoundingBox(0.0, 0.04, 0.0, 0.04),), stride_lat=0.02, stride_lon=0.02)
    pts = enumerate_grid(spec)
    assert [(round(p.lat, 2), round(p.lon, 2)) for p in pts] == [
        (0.0, 0.0), (0.0, 0.02), (0.0, 0.04),
        (0.02, 0.0), (0.02, 0.02), (0.02, 0.04),
        (0.04, 0.0), (0.04, 0.02), (0.04, 0.04),
    ]


def test_overlapping_boxes_dedup():
    box = GeoBoundingBox(0.0, 0.1, 0.0, 0.1)
    one = enumerate_grid(GridSpec(boxes=(box,)))
    two = enumerate_grid(GridSpec(boxes=(box, box)))
    assert len(one) == len(two)


def test_points_stay_inside_boxes():
    box = GeoBoundingBox(3.0, 3.37, -2.0, -1.49)
    for p in enumerate_grid(GridSpec(boxes=(box,), stride_lat=0.07, stride_lon=0.03)):
        assert box.min_lat - 1e-9 <= p.lat <= box.max_lat + 1e-9
        assert box.min_lon - 1e-9 <= p.lon <= box.max_lon + 1e-9


@given(
    min_lat=st.floats(-60, 60, allow_nan=False),
    span=st.floats(0.001, 1.0, allow_nan=False),
    stride=st.sampled_from([0.01, 0.02, 0.05, 0.1, 0.25]),
)
@settings(max_examples=60, deadline=None)
def test_count_matches_oracle_property(min_lat, span, stride):
    box = GeoBoundingBox(min_lat, min_lat + span, 5.0, 5.0 + span)
    spec = GridSpec(boxes=(box,), stride_lat=stride, stride_lon=stride)
    assert len(enumerate_grid(spec)) == len(oracle_grid([box], stride, stride))


def test_bad_box_rejected():
    with pytest.raises(ValidationError):
        GeoBoundingBox(1.0, 0.0, 0.0, 1.0)
    with pytest.raises(ValidationError):
        GeoBoundingBox(95.0, 96.0, 0.0, 1.0)


def test_bad_stride_rejected():
    box = GeoBoundingBox(0.0, 1.0, 0.0, 1.0)
    with pytest.raises(ValidationError):
        GridSpec(boxes=(box,), stride_lat=0.0)
    with pytest.raises(ValidationError):
        GridSpec(boxes=(box,), stride_lon=-0.1)


def test_empty_boxes_rejected():
    with pytest.raises(ValidationError):
        GridSpec(boxes=())


def test_default_stride_value():
    assert DEFAULT_STRIDE_DEG == 0.02


# Region assignment. The square oracle is analytic: inside iff both
# coordinates lie in [lo, hi].

SQUARE = make_region("square", [[(0.0, 0.0), (0.0, 4.0), (4.0, 4.0), (4.0, 0.0)]])


def test_square_membership():
    rs = RegionSet(regions=(SQUARE,))
    assert assign_region(GridPoint(2.0, 2.0), rs) == "square"
    assert assign_region(GridPoint(5.0, 2.0), rs) is None
    assert assign_region(GridPoint(-0.1, 2.0), rs) is None


@given(
    lat=st.floats(-1.0, 5.0, allow_nan=False),
    lon=st.floats(-1.0, 5.0, allow_nan=False),
)
@settings(max_examples=120, deadline=None)
def test_square_membership_property(lat, lon):
    # Stay clear of the boundary tolerance shell; exact edges are covered by
    # test_boundary_is_inclusive.
    assume(all(abs(v - edge) > 1e-9 for v in (lat, lon) for edge in (0.0, 4.0)))
    rs = RegionSet(regions=(SQUARE,))
    expected = "square" if (0.0 < lat < 4.0 and 0.0 < lon < 4.0) else None
    assert assign_region(GridPoint(lat, lon), rs) == expected


def test_boundary_is_inclusive():
    rs = RegionSet(regions=(SQUARE,))
    for point in [(0.0, 0.0), (0.0, 2.0), (4.0, 4.0), (2.0, 4.0)]:
        assert assign_region(GridPoint(*point), rs) == "square"


def test_hole_excluded_even_odd():
    donut = make_region(
        "donut",
        [
            [(0.0, 0.0), (0.0, 4.0), (4.0, 4.0), (4.0, 0.0)],
            [(1.0, 1.0), (1.0, 3.0), (3.0, 3.0), (3.0, 1.0)],
        ],
    )
    rs = RegionSet(regions=(donut,))
    assert assign_region(GridPoint(0.5, 0.5), rs) == "donut"
    assert assign_region(GridPoint(2.0, 2.0), rs) is None


def test_first_declared_region_wins_overlap():
    a = make_region("a", [[(0.0, 0.0), (0.0, 2.0), (2.0, 2.0), (2.0, 0.0)]])
    b = make_region("b", [[(0.0, 0.0), (0.0, 2.0), (2.0, 2.0), (2.0, 0.0)]])
    assert assign_region(GridPoint(1.0, 1.0), RegionSet(regions=(a, b))) == "a"
    assert assign_region(GridPoint(1.0, 1.0), RegionSet(regions=(b, a))) == "b"


def test_geojson_loader_swaps_lon_lat(tmp_path):
    collection = {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "properties": {"name": "east"},
                "geometry": {
                    "type": "Polygon",
                    # GeoJSON rings are [lon, lat]
                    "coordinates": [
                        [[36.0, -1.0], [37.0, -1.0], [37.0, 0.0], [36.0, 0.0], [36.0, -1.0]]
                    ],
                },
            }
        ],
    }
    path = tmp_path / "r.geojson"
    path.write_text(json.dumps(collection), encoding="utf-8")
    rs = load_regions(path)
    assert [r.name for r in rs.regions] == ["east"]
    assert assign_region(GridPoint(-0.5, 36.5), rs) == "east"
    assert assign_region(GridPoint(36.5, -0.5), rs) is None


def test_geojson_multipolygon(tmp_path):
    collection = {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "properties": {"name": "twin"},
                "geometry": {
                    "type": "MultiPolygon",
                    "coordinates": [
                        [[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]]],
                        [[[5.0, 5.0], [6.0, 5.0], [6.0, 6.0], [5.0, 6.0], [5.0, 5.0]]],
                    ],
                },
            }
        ],
    }
    path = tmp_path / "r.geojson"
    path.write_text(json.dumps(collection), encoding="utf-8")
    rs = load_regions(path)
    assert assign_region(GridPoint(0.5, 0.5), rs) == "twin"
    assert assign_region(GridPoint(5.5, 5.5), rs) == "twin"
    assert assign_region(GridPoint(3.0, 3.0), rs) is None


def test_geojson_loader_errors(tmp_path):
    path = tmp_path / "bad.geojson"
    path.write_text("not json", encoding="utf-8")
    with pytest.raises(ValidationError):
        load_regions(path)
    with pytest.raises(ValidationError):
        load_regions(tmp_path / "missing.geojson")
