from datetime import datetime

import numpy as np
import pytest

from arsim.errors import InputError
from arsim.grid import CellCoord, GridWorld
from arsim.ingest import (
    RawTrip,
    StudyWindow,
    default_window,
    filter_window,
    ingest_file,
    load_trips,
    map_to_grid,
    parse_trip_records,
    point_in_polygon,
    save_trips,
    stratified_sample,
    synthetic_trips,
)

from conftest import DATA, trip

HEADER = "tpep_pickup_datetime,pickup_longitude,pickup_latitude,dropoff_longitude,dropoff_latitude\n"
SQUARE = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))
T0 = datetime(2016, 1, 2, 9)
T1 = datetime(2016, 1, 2, 10)


def raw(lon, lat, when=datetime(2016, 1, 2, 9, 30), lon2=None, lat2=None):
    return RawTrip(lon, lat, lon if lon2 is None else lon2, lat if lat2 is None else lat2, when)


def test_empty_file_with_header(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text(HEADER)
    assert parse_trip_records(p) == ([], 0)


def test_one_valid_one_malformed(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text(HEADER + "2016-01-02 09:10:00,-74,40.7,-73.99,40.72\n2016-01-02 09:11:00,abc,40.7,-73.99,40.72\n")
    trips, skipped = parse_trip_records(p)
    assert len(trips) == 1 and skipped == 1


def test_missing_file_and_column(tmp_path):
    with pytest.raises(InputError):
        parse_trip_records(tmp_path / "nope.csv")
    p = tmp_path / "c.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(InputError, match="pickup_longitude"):
        parse_trip_records(p)


def test_column_map(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("t,plon,plat,dlon,dlat\n2016-01-02 09:10:00,-74,40.7,-73.99,40.72\n")
    cols = {"pickup_time_col": "t", "pickup_lon_col": "plon", "pickup_lat_col": "plat", "dropoff_lon_col": "dlon", "dropoff_lat_col": "dlat"}
    trips, _ = parse_trip_records(p, cols)
    assert trips[0].dropoff_lat == 40.72


def test_bundled_fixture_counts():
    # fixture composition: 60 clean trips, 10 malformed rows, 10 outside the
    # hour, 10 with an endpoint outside the region, 10 same-cell trips
    trips, stats = ingest_file(DATA / "tlc_sample.csv", default_window(), GridWorld())
    assert stats == {"rows": 100, "skipped": 10, "in_window": 70, "same_cell": 10}
    assert len(trips) == 60


def test_half_open_interval():
    w = StudyWindow(SQUARE, T0, T1)
    kept = filter_window([raw(0.5, 0.5, T0), raw(0.5, 0.5, T1)], w)
    assert [t.pickup_time for t in kept] == [T0]


def test_vertex_counts_as_inside():
    w = StudyWindow(SQUARE, T0, T1)
    assert len(filter_window([raw(0.0, 0.0, lon2=1.0, lat2=1.0)], w)) == 1
    assert point_in_polygon((0.5, 0.0), SQUARE)


def test_ten_in_ten_out():
    w = StudyWindow(SQUARE, T0, T1)
    inside = [raw(0.05 + 0.09 * k, 0.1 + 0.08 * k) for k in range(10)]
    outside = [raw(1.0 + 0.01 * (k + 1), 0.5) if k % 2 else raw(0.5, -0.01 * (k + 1)) for k in range(10)]
    assert filter_window(inside + outside, w) == inside


def test_bad_windows():
    with pytest.raises(InputError):
        StudyWindow(SQUARE, T1, T0)
    with pytest.raises(InputError):
        StudyWindow(((0, 0), (1, 1), (1, 0), (0, 1)), T0, T1)


def test_map_to_grid_corners():
    g = GridWorld()
    w = StudyWindow(SQUARE, T0, T1)
    t = map_to_grid(raw(0.0, 0.0, lon2=1.0, lat2=1.0), w, g)
    assert t.origin == CellCoord(0, 0) and t.destination == CellCoord(14, 14)
    t = map_to_grid(raw(0.5, 0.5, lon2=1.0, lat2=1.0), w, g)
    assert t.origin == CellCoord(7, 7)
    assert map_to_grid(raw(0.5, 0.5, lon2=0.501, lat2=0.5), w, g) is None


def test_degenerate_window_is_error():
    w = StudyWindow(((0, 0), (1, 0), (2, 0), (3, 0)), T0, T1)
    with pytest.raises(InputError):
        map_to_grid(raw(0.0, 0.0, lon2=1.0, lat2=0.0), w, GridWorld())


def test_stratified_sample_trivial_cases():
    rng = np.random.default_rng(0)
    trips = [trip(0, 0, k + 1, 0) for k in range(5)]
    assert stratified_sample(trips, 0, 3, rng) == []
    one = stratified_sample(trips, 1, 1, rng)
    assert len(one) == 1 and one[0] in trips
    same = [trip(0, k, 1, k) for k in range(6)]
    assert all(t in same for t in stratified_sample(same, 4, 3, rng))


def test_stratified_sample_three_bins():
    # 10 trips each of length 1, 5 and 9 cells: three equal-width bins
    trips = [trip(0, k % 10, 1, k % 10) for k in range(10)]
    trips += [trip(0, k, 5, k) for k in range(10)]
    trips += [trip(0, k, 9, k) for k in range(10)]
    out = stratified_sample(trips, 9, 3, np.random.default_rng(5))
    lengths = sorted(abs(t.origin.x - t.destination.x) for t in out)
    assert lengths == [1, 1, 1, 5, 5, 5, 9, 9, 9]


def test_stratified_sample_deterministic():
    g = GridWorld()
    pool = synthetic_trips(g, 200, np.random.default_rng(1))
    a = stratified_sample(pool, 50, 5, np.random.default_rng(9), g)
    b = stratified_sample(pool, 50, 5, np.random.default_rng(9), g)
    assert a == b


def test_synthetic_trips_valid():
    g = GridWorld(4, 3, 1.0)
    for t in synthetic_trips(g, 300, np.random.default_rng(2)):
        assert t.origin != t.destination
        assert g.in_bounds(t.origin) and g.in_bounds(t.destination)


def test_trip_file_round_trip(tmp_path):
    trips = synthetic_trips(GridWorld(), 20, np.random.default_rng(3))
    save_trips(trips, tmp_path / "t.txt")
    assert load_trips(tmp_path / "t.txt") == trips
