"""Static-map tile requests, ground resolution, and a cached, rate-limited fetcher."""

import math
import os
import re
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from urllib.parse import urlencode

from ..fsutil import write_atomic

EARTH_RESOLUTION_M = 156543.03392  # metres per pixel at zoom 0 on the equator
MERCATOR_MAX_LAT = 85.05
API_KEY_ENV = "MAPS_API_KEY"
DEFAULT_BASE_URL = "https://maps.googleapis.com/maps/api/staticmap"


class MissingAPIKeyError(RuntimeError):
    pass


class HTTPStatusError(Exception):
    def __init__(self, status, url=""):
        super().__init__(f"HTTP {status} for {url}")
        self.status = status


def ground_resolution(latitude, zoom):
    """Metres of ground per pixel at ``latitude`` (degrees) and ``zoom`` (Web Mercator)."""
    if not 0 <= zoom <= 22:
        raise ValueError(f"zoom must be in [0, 22], got {zoom}")
    if abs(latitude) >= MERCATOR_MAX_LAT:
        raise ValueError(f"latitude {latitude} outside Web Mercator range (|lat| < {MERCATOR_MAX_LAT})")
    return EARTH_RESOLUTION_M * math.cos(math.radians(latitude)) / 2 ** zoom


@dataclass(frozen=True)
class TileConfig:
    zoom: int = 20
    size: tuple = (200, 200)
    maptype: str = "satellite"
    format: str = "png"
    base_url: str = DEFAULT_BASE_URL


@dataclass(frozen=True)
class TileRequest:
    center: tuple
    zoom: int
    size: tuple
    format: str = "png"


def build_tile_request(record, config=None, api_key=None):
    """Return ``(TileRequest, url)``. The key comes from ``MAPS_API_KEY`` if not given."""
    config = config or TileConfig()
    if api_key is None:
        api_key = os.environ.get(API_KEY_ENV)
    if not api_key:
        raise MissingAPIKeyError(f"environment variable {API_KEY_ENV} is not set")
    req = TileRequest((record.latitude, record.longitude), config.zoom, tuple(config.size), config.format)
    query = urlencode(
        {
            "center": f"{record.latitude:.6f},{record.longitude:.6f}",
            "zoom": config.zoom,
            "size": f"{config.size[0]}x{config.size[1]}",
            "maptype": config.maptype,
            "format": config.format,
            "key": api_key,
        },
        safe=",",
    )
    return req, f"{config.base_url}?{query}"


def _safe_id(rid):
    return re.sub(r"[^A-Za-z0-9._-]", "_", str(rid))


def cache_path(cache_dir, record, config=None):
    """``<cache>/<zoom>/<W>x<H>/<id>_<lat6>_<lon6>.<format>``."""
    config = config or TileConfig()
    name = f"{_safe_id(record.id)}_{record.latitude:.6f}_{record.longitude:.6f}.{config.format}"
    return os.path.join(os.fspath(cache_dir), str(config.zoom), f"{config.size[0]}x{config.size[1]}", name)


class UrllibClient:
    """Minimal HTTP transport: ``get(url) -> bytes``, raising :class:`HTTPStatusError`."""

    def __init__(self, timeout=30.0):
        self.timeout = timeout

    def get(self, url):
        try:
            with urllib.request.urlopen(url, timeout=self.timeout) as resp:
                return resp.read()
        except urllib.error.HTTPError as exc:
            raise HTTPStatusError(exc.code, url) from exc


class RateLimiter:
    """Spaces request starts at least ``1 / rate`` seconds apart across threads."""

    def __init__(self, rate, clock=time.monotonic, sleep=time.sleep):
        self.interval = 1.0 / rate if rate else 0.0
        self.clock = clock
        self.sleep = sleep
        self._lock = threading.Lock()
        self._next = 0.0

    def wait(self):
        if not self.interval:
            return
        with self._lock:
            now = self.clock()
            start = max(now, self._next)
            self._next = start + self.interval
        if start > now:
            self.sleep(start - now)


@dataclass
class FetchStatus:
    id: str
    path: str
    status: str  # "cached", "fetched" or "failed"
    attempts: int = 0
    error: str = ""


def _is_retryable(exc):
    if isinstance(exc, HTTPStatusError):
        return exc.status == 429 or exc.status >= 500
    return isinstance(exc, (OSError, TimeoutError))


def fetch_tiles(records, client, cache_dir, config=None, parallelism=4, rate_limit=None,
                max_retries=4, backoff=0.5, api_key=None, sleep=time.sleep):
    """Download one tile per record into the cache; return a :class:`FetchStatus` per record.

    Cached tiles are never re-requested. 429 and 5xx responses (and
    transport errors) are retried with exponential backoff
    ``backoff * 2**attempt`` up to ``max_retries`` retries; other 4xx fail
    the record immediately. Failures never abort the run.
    """
    config = config or TileConfig()
    limiter = RateLimiter(rate_limit, sleep=sleep)
    # resolve the key once, before any network use
    if api_key is None:
        api_key = os.environ.get(API_KEY_ENV)
    if not api_key:
        raise MissingAPIKeyError(f"environment variable {API_KEY_ENV} is not set")

    def one(record):
        path = cache_path(cache_dir, record, config)
        if os.path.exists(path):
            return FetchStatus(record.id, path, "cached")
        _, url = build_tile_request(record, config, api_key)
        attempt = 0
        while True:
            limiter.wait()
            attempt += 1
            try:
                data = client.get(url)
            except Exception as exc:  # noqa: BLE001 - any transport failure is per-record
                if _is_retryable(exc) and attempt <= max_retries:
                    sleep(backoff * 2 ** (attempt - 1))
                    continue
                return FetchStatus(record.id, path, "failed", attempt, str(exc))
            write_atomic(path, data)
            return FetchStatus(record.id, path, "fetched", attempt)

    if parallelism <= 1:
        return [one(r) for r in records]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, records))
