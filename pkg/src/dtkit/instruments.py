"""Geographic instrument construction.

The instrument for a firm-year combines two pieces: the mean great-circle
distance from the firm's registered office to a fixed roster of 30 leading IT
universities, and the number of listed firms sharing the firm's city that
year, scaled by a positive constant rho:

    iv(firm, year) = mean_distance(firm) * count(city, year) / rho

Distances are in 1000-km units. rho only rescales the instrument, which
leaves every 2SLS t-statistic and F diagnostic unchanged, so its value is a
config knob (default 100) rather than something estimated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

EARTH_RADIUS_KM = 6371.0088
ROSTER_SIZE = 30
DEFAULT_RHO = 100.0


class InstrumentError(ValueError):
    pass


@dataclass(frozen=True)
class UniversitySite:
    name: str
    latitude: float
    longitude: float

    def __post_init__(self):
        _check_coords(self.latitude, self.longitude, self.name)


@dataclass(frozen=True)
class FirmLocation:
    firm_id: str
    latitude: float
    longitude: float
    city_id: str

    def __post_init__(self):
        if not self.firm_id:
            raise InstrumentError("firm_id must be non-empty")
        if not self.city_id:
            raise InstrumentError(f"{self.firm_id}: city_id must be non-empty")
        _check_coords(self.latitude, self.longitude, self.firm_id)


def _check_coords(lat: float, lon: float, what: str) -> None:
    if not (math.isfinite(lat) and -90.0 <= lat <= 90.0):
        raise InstrumentError(f"{what}: latitude {lat} out of range")
    if not (math.isfinite(lon) and -180.0 <= lon <= 180.0):
        raise InstrumentError(f"{what}: longitude {lon} out of range")


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in km on a sphere of radius 6371.0088 km."""
    _check_coords(lat1, lon1, "point a")
    _check_coords(lat2, lon2, "point b")
    p1, l1, p2, l2 = map(math.radians, (lat1, lon1, lat2, lon2))
    dp = p2 - p1
    dl = l2 - l1
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(a)))


def haversine_mm(a: FirmLocation, b: UniversitySite) -> float:
    """Firm-to-site great-circle distance in 1000-km units."""
    return haversine_km(a.latitude, a.longitude, b.latitude, b.longitude) / 1000.0


def mean_distance(firm: FirmLocation, roster: Sequence[UniversitySite]) -> float:
    """Arithmetic mean of the firm's distances to all 30 roster sites."""
    if len(roster) != ROSTER_SIZE:
        raise InstrumentError(f"roster must have exactly {ROSTER_SIZE} sites, got {len(roster)}")
    return sum(haversine_mm(firm, site) for site in roster) / ROSTER_SIZE


class ListingPanel:
    """Which firms are listed in which city each year; backs the count term."""

    def __init__(self, records: Iterable[tuple[str, int, str]]):
        self._cities: dict[tuple[str, int], set[str]] = {}
        for firm_id, year, city_id in records:
            self._cities.setdefault((city_id, int(year)), set()).add(firm_id)

    def count(self, city_id: str, year: int) -> int:
        key = (city_id, int(year))
        if key not in self._cities:
            raise InstrumentError(f"no listed firms recorded for city {city_id!r} in {year}")
        return len(self._cities[key])


def build_iv(
    firm: FirmLocation,
    year: int,
    panel: ListingPanel,
    roster: Sequence[UniversitySite],
    rho: float = DEFAULT_RHO,
) -> float:
    """Instrument value: mean roster distance times the firm's city listing
    count that year, divided by rho. The firm counts itself, so the count is
    at least 1 whenever the city-year is present."""
    if not rho > 0:
        raise InstrumentError(f"rho must be positive, got {rho}")
    return mean_distance(firm, roster) * panel.count(firm.city_id, year) / rho


def load_roster(path: str | Path) -> list[UniversitySite]:
    """Roster CSV: name,lat,lon."""
    sites = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if set(reader.fieldnames or []) != {"name", "lat", "lon"}:
            raise InstrumentError(f"{path}: expected header name,lat,lon")
        for row in reader:
            sites.append(UniversitySite(row["name"], float(row["lat"]), float(row["lon"])))
    return sites


def load_firm_locations(path: str | Path) -> dict[str, FirmLocation]:
    """Firm locations CSV: firm_id,lat,lon,city_id."""
    out: dict[str, FirmLocation] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if set(reader.fieldnames or []) != {"firm_id", "lat", "lon", "city_id"}:
            raise InstrumentError(f"{path}: expected header firm_id,lat,lon,city_id")
        for row in reader:
            loc = FirmLocation(row["firm_id"], float(row["lat"]), float(row["lon"]), row["city_id"])
            if loc.firm_id in out:
                raise InstrumentError(f"{path}: duplicate firm_id {loc.firm_id}")
            out[loc.firm_id] = loc
    return out
