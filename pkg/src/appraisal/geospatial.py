"""Great-circle distances and reverse geocoding with a persistent local cache.

The geocoder talks to an OpenStreetMap-compatible reverse endpoint but is
polite about it: cache first, at most one request per second, one retry.
With a warm cache the module never touches the network, which keeps full
evaluation runs reproducible offline.
"""
from __future__ import annotations

import datetime as dt
import json
import logging
import math
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import httpx
import numpy as np

log = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0088  # IUGG mean radius
CACHE_KEY_DECIMALS = 5  # ~1.1 m, below parcel resolution


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not (-180.0 <= self.lon <= 180.0):
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class GeocodeEntry:
    point: GeoPoint
    address: str
    fetched_at: str
    source: str  # service | cache | manual


def haversine(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in kilometers between two points."""
    phi_a, phi_b = math.radians(a.lat), math.radians(b.lat)
    dphi = phi_b - phi_a
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi_a) * math.cos(phi_b) * math.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def haversine_to_many(lat: float, lon: float, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
    """Vectorized haversine from one point to arrays of coordinates (km)."""
    phi = math.radians(lat)
    phis = np.radians(lats)
    dphi = phis - phi
    dlam = np.radians(lons) - math.radians(lon)
    h = np.sin(dphi / 2) ** 2 + math.cos(phi) * np.cos(phis) * np.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def cache_key(point: GeoPoint) -> str:
    return f"{point.lat:.{CACHE_KEY_DECIMALS}f},{point.lon:.{CACHE_KEY_DECIMALS}f}"


class GeocodeCache:
    """Append-only JSONL cache of reverse-geocode results, keyed by rounded point."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[str, GeocodeEntry] = {}
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                raw = json.loads(line)
                lat, lon = (float(x) for x in raw["key"].split(","))
                self._entries[raw["key"]] = GeocodeEntry(
                    point=GeoPoint(lat, lon),
                    address=raw["address"],
                    fetched_at=raw["fetched_at"],
                    source="cache",
                )

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, point: GeoPoint) -> GeocodeEntry | None:
        return self._entries.get(cache_key(point))

    def put(self, entry: GeocodeEntry) -> None:
        key = cache_key(entry.point)
        with self._lock:
            self._entries[key] = entry
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(
                    json.dumps(
                        {"key": key, "address": entry.address, "fetched_at": entry.fetched_at}
                    )
                    + "\n"
                )


class Geocoder:
    """Reverse geocoder: cache first, then the configured HTTP service.

    Network access is serialized and limited to one request per
    ``rate_limit_s`` seconds. A failed lookup (unreachable service, non-200
    after one retry) yields an entry with an empty address and source
    ``manual`` so prompt assembly can skip the address line.
    """

    def __init__(
        self,
        cache: GeocodeCache,
        base_url: str = "",
        user_agent: str = "appraisal-engine/0.1 (local research use)",
        zoom: int = 18,
        rate_limit_s: float = 1.0,
        timeout_s: float = 10.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.cache = cache
        self.base_url = base_url.rstrip("/")
        self.zoom = zoom
        self.rate_limit_s = rate_limit_s
        self._net_lock = threading.Lock()
        self._last_request = 0.0
        self._client = httpx.Client(
            headers={"User-Agent": user_agent}, timeout=timeout_s, transport=transport
        )

    def reverse_geocode(self, point: GeoPoint) -> GeocodeEntry:
        cached = self.cache.get(point)
        if cached is not None:
            return cached
        if not self.base_url:
            return self._fallback(point)
        with self._net_lock:
            address = self._fetch(point)
        if address is None:
            return self._fallback(point)
        entry = GeocodeEntry(
            point=point,
            address=address,
            fetched_at=dt.datetime.now(dt.timezone.utc).isoformat(),
            source="service",
        )
        self.cache.put(entry)
        return entry

    def _fetch(self, point: GeoPoint) -> str | None:
        url = f"{self.base_url}/reverse"
        params = {"lat": point.lat, "lon": point.lon, "format": "jsonv2", "zoom": self.zoom}
        for attempt in range(2):
            wait = self.rate_limit_s - (time.monotonic() - self._last_request)
            if wait > 0:
                time.sleep(wait)
            self._last_request = time.monotonic()
            try:
                resp = self._client.get(url, params=params)
            except httpx.HTTPError as exc:
                log.warning("reverse geocode failed (%s): %s", cache_key(point), exc)
                continue
            if resp.status_code == 200:
                address = str(resp.json().get("display_name", "")).strip()
                if address:
                    return address
            log.warning(
                "reverse geocode HTTP %s for %s (attempt %d)",
                resp.status_code,
                cache_key(point),
                attempt + 1,
            )
        return None

    def _fallback(self, point: GeoPoint) -> GeocodeEntry:
        return GeocodeEntry(
            point=point,
            address="",
            fetched_at=dt.datetime.now(dt.timezone.utc).isoformat(),
            source="manual",
        )


@dataclass(frozen=True)
class WarmCacheResult:
    fetched: int
    unresolved: tuple[str, ...]


def warm_cache(geocoder: Geocoder, dataset) -> WarmCacheResult:
    """Ensure every record's coordinates have a cache entry. Idempotent.

    Records whose lookup fails are reported by id; the run continues.
    """
    fetched = 0
    unresolved: list[str] = []
    for record in dataset.records:
        point = GeoPoint(record.lat, record.lon)
        if geocoder.cache.get(point) is not None:
            continue
        entry = geocoder.reverse_geocode(point)
        if entry.source == "manual":
            unresolved.append(record.id)
        else:
            fetched += 1
    return WarmCacheResult(fetched=fetched, unresolved=tuple(unresolved))
