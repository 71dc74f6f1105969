import math
from importlib import resources

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtkit.instruments import (
    EARTH_RADIUS_KM,
    ROSTER_SIZE,
    FirmLocation,
    InstrumentError,
    ListingPanel,
    UniversitySite,
    build_iv,
    haversine_km,
    haversine_mm,
    load_roster,
    mean_distance,
)


def spherical_law_of_cosines_km(lat1, lon1, lat2, lon2):
    """Independent great-circle formula used as oracle."""
    p1, l1, p2, l2 = map(math.radians, (lat1, lon1, lat2, lon2))
    central = math.acos(
        min(1.0, max(-1.0, math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(l2 - l1)))
    )
    return EARTH_RADIUS_KM * central


def firm(lat, lon, fid="F1", city="C1"):
    return FirmLocation(fid, lat, lon, city)


def site(lat, lon, name="U"):
    return UniversitySite(name, lat, lon)


class TestHaversine:
    def test_identical_points(self):
        assert haversine_mm(firm(40.0, -70.0), site(40.0, -70.0)) == 0.0

    def test_antipodal_maximum(self):
        d = haversine_mm(firm(0.0, 0.0), site(0.0, 180.0))
        assert d == pytest.approx(math.pi * EARTH_RADIUS_KM / 1000.0, rel=1e-12)

    def test_new_york_to_los_angeles(self):
        ny = (40.7128, -74.0060)
        la = (34.0522, -118.2437)
        oracle_mm = spherical_law_of_cosines_km(*ny, *la) / 1000.0
        d = haversine_mm(firm(*ny), site(*la))
        assert d == pytest.approx(oracle_mm, rel=1e-9)
        assert d == pytest.approx(3.94, rel=0.01)

    def test_invalid_coordinates_rejected(self):
        with pytest.raises(InstrumentError):
            haversine_km(91.0, 0.0, 0.0, 0.0)
        with pytest.raises(InstrumentError):
            haversine_km(0.0, 181.0, 0.0, 0.0)
        with pytest.raises(InstrumentError):
            FirmLocation("F1", 0.0, float("nan"), "C1")

    coords = st.tuples(
        st.floats(-90, 90, allow_nan=False), st.floats(-180, 180, allow_nan=False)
    )

    @given(a=coords, b=coords)
    @settings(max_examples=300, deadline=None)
    def test_symmetry(self, a, b):
        assert haversine_km(*a, *b) == pytest.approx(haversine_km(*b, *a), abs=1e-9)

    @given(a=coords, b=coords, c=coords)
    @settings(max_examples=300, deadline=None)
    def test_triangle_inequality(self, a, b, c):
        ab = haversine_km(*a, *b)
        bc = haversine_km(*b, *c)
        ac = haversine_km(*a, *c)
        assert ac <= ab + bc + 1e-9

    @given(a=coords, b=coords)
    @settings(max_examples=200, deadline=None)
    def test_agrees_with_law_of_cosines(self, a, b):
        # law of cosines is ill-conditioned for near-identical points; skip those
        if haversine_km(*a, *b) < 1.0:
            return
        assert haversine_km(*a, *b) == pytest.approx(
            spherical_law_of_cosines_km(*a, *b), rel=1e-6, abs=1e-6
        )


def synthetic_roster(n=ROSTER_SIZE):
    return [site(10.0 + 0.5 * i, -100.0 + 0.5 * i, f"U{i}") for i in range(n)]


class TestMeanDistance:
    def test_equal_distances(self):
        # all sites at the same point -> mean equals that single distance
        f = firm(0.0, 0.0)
        sites = [site(0.0, 10.0, f"U{i}") for i in range(30)]
        d = haversine_mm(f, sites[0])
        assert mean_distance(f, sites) == pytest.approx(d, rel=1e-12)

    def test_collocated_firm(self):
        f = firm(12.0, 34.0)
        sites = [site(12.0, 34.0, f"U{i}") for i in range(30)]
        assert mean_distance(f, sites) == 0.0

    def test_roster_size_enforced(self):
        with pytest.raises(InstrumentError, match="exactly 30"):
            mean_distance(firm(0, 0), synthetic_roster(29))

    def test_bundled_roster_loads(self):
        path = resources.files("dtkit.data") / "universities.csv"
        roster = load_roster(str(path))
        assert len(roster) == ROSTER_SIZE
        assert len({s.name for s in roster}) == ROSTER_SIZE
        chicago = firm(41.8781, -87.6298)
        assert 0.1 < mean_distance(chicago, roster) < 4.0


class TestBuildIv:
    def test_direct_evaluation(self):
        f = firm(0.0, 0.0, city="C1")
        sites = [site(0.0, 17.9754, f"U{i}") for i in range(30)]
        d = mean_distance(f, sites)
        records = [(f"F{i}", 2015, "C1") for i in range(50)]
        panel = ListingPanel(records)
        iv = build_iv(f, 2015, panel, sites, rho=100.0)
        assert iv == pytest.approx(d * 50 / 100.0, rel=1e-12)

    def test_minimum_count_is_one(self):
        f = firm(5.0, 5.0, fid="F9", city="LONELY")
        sites = synthetic_roster()
        panel = ListingPanel([("F9", 2015, "LONELY")])
        iv = build_iv(f, 2015, panel, sites, rho=2.0)
        assert iv == pytest.approx(mean_distance(f, sites) / 2.0, rel=1e-12)

    def test_rho_must_be_positive(self):
        panel = ListingPanel([("F1", 2015, "C1")])
        with pytest.raises(InstrumentError, match="rho"):
            build_iv(firm(0, 0), 2015, panel, synthetic_roster(), rho=0.0)

    def test_absent_city_year_named(self):
        panel = ListingPanel([("F1", 2015, "C1")])
        with pytest.raises(InstrumentError, match="C1.*2016"):
            build_iv(firm(0, 0), 2016, panel, synthetic_roster())

    def test_rho_homogeneity(self):
        f = firm(20.0, -50.0)
        panel = ListingPanel([("F1", 2015, "C1"), ("F2", 2015, "C1"), ("F3", 2015, "C1")])
        roster = synthetic_roster()
        base = build_iv(f, 2015, panel, roster, rho=10.0)
        for c in (0.5, 2.0, 7.0):
            assert build_iv(f, 2015, panel, roster, rho=10.0 * c) == pytest.approx(base / c, rel=1e-14)
