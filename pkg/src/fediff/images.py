"""Image search client: keyword -> concrete image URLs.

Live mode talks to a stock-image HTTP API; fixture mode fabricates
deterministic assets so the pipeline runs offline. Results are cached as
JSON files keyed by (name, modifier); concurrent identical queries coalesce
into one lookup.
"""
from __future__ import annotations

import json
import os
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .design import ImageKeyword, ORIENTATION_MODIFIERS, SIZE_MODIFIERS
from .errors import InvalidArgument, NoResults, SearchUnavailable


@dataclass(frozen=True)
class ImageAsset:
    url: str
    width_px: int
    height_px: int
    attribution: str = ""
    query_used: str = ""

    def __post_init__(self) -> None:
        if self.width_px <= 0 or self.height_px <= 0:
            raise InvalidArgument("asset dimensions must be positive")

    def to_dict(self) -> dict:
        return {
            "url": self.url,
            "width_px": self.width_px,
            "height_px": self.height_px,
            "attribution": self.attribution,
            "query_used": self.query_used,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ImageAsset":
        return cls(**data)


@dataclass(frozen=True)
class ImageSearchConfig:
    endpoint_url: str = "fixture"
    credentials_env_var: str = "FD_IMAGE_API_KEY"
    results_per_query: int = 1
    cache_dir: Optional[Path] = None

    def __post_init__(self) -> None:
        if self.results_per_query < 1:
            raise InvalidArgument("results_per_query must be >= 1")

    @property
    def is_fixture(self) -> bool:
        return self.endpoint_url == "fixture"


# Dimensions per modifier; the closed world the fixture provider draws from.
FIXTURE_DIMENSIONS: dict[Optional[str], tuple[int, int]] = {
    "landscape": (1920, 1080),
    "portrait": (1080, 1350),
    "square": (1024, 1024),
    "large": (1600, 1200),
    "medium": (1024, 768),
    "small": (640, 480),
    None: (1024, 768),
}


def _query_params(keyword: ImageKeyword) -> dict[str, str]:
    params = {"query": keyword.name}
    if keyword.modifier in ORIENTATION_MODIFIERS:
        params["orientation"] = keyword.modifier
    elif keyword.modifier in SIZE_MODIFIERS:
        params["size"] = keyword.modifier
    return params


def _query_string(keyword: ImageKeyword) -> str:
    params = _query_params(keyword)
    return "&".join(f"{k}={v}" for k, v in sorted(params.items()))


def _fixture_assets(keyword: ImageKeyword, count: int) -> list[ImageAsset]:
    width, height = FIXTURE_DIMENSIONS[keyword.modifier]
    slug = f"{keyword.name}-{keyword.modifier or 'any'}"
    return [
        ImageAsset(
            url=f"placeholder-fixture://{slug}-{i}",
            width_px=width,
            height_px=height,
            attribution="fixture",
            query_used=_query_string(keyword),
        )
        for i in range(count)
    ]


def _live_search(keyword: ImageKeyword, config: ImageSearchConfig) -> list[ImageAsset]:
    import requests

    api_key = os.environ.get(config.credentials_env_var, "")
    if not api_key:
        raise SearchUnavailable(
            f"credential env var {config.credentials_env_var!r} is not set"
        )
    try:
        resp = requests.get(
            config.endpoint_url,
            params={**_query_params(keyword), "per_page": str(config.results_per_query)},
            headers={"Authorization": api_key},
            timeout=15,
        )
    except requests.RequestException as exc:
        raise SearchUnavailable(str(exc)) from exc
    if resp.status_code in (401, 403):
        raise SearchUnavailable(f"image API rejected credentials ({resp.status_code})")
    if resp.status_code != 200:
        raise SearchUnavailable(f"image API returned status {resp.status_code}")
    photos = resp.json().get("photos", [])
    if not photos:
        raise NoResults(f"no images for query {keyword.name!r}")
    assets = []
    for photo in photos[: config.results_per_query]:
        assets.append(
            ImageAsset(
                url=photo["src"]["original"] if isinstance(photo.get("src"), dict) else photo["url"],
                width_px=int(photo.get("width", 1)),
                height_px=int(photo.get("height", 1)),
                attribution=str(photo.get("photographer", "")),
                query_used=_query_string(keyword),
            )
        )
    return assets


_SAFE_KEY_RE = re.compile(r"[^a-z0-9_-]+")


class ImageClient:
    """Search with per-keyword caching and single-flight coalescing."""

    def __init__(self, config: ImageSearchConfig):
        self.config = config
        self._memory: dict[tuple[str, Optional[str]], list[ImageAsset]] = {}
        self._locks: dict[tuple[str, Optional[str]], threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self.network_calls = 0
        if config.cache_dir:
            Path(config.cache_dir).mkdir(parents=True, exist_ok=True)

    def _cache_path(self, key: tuple[str, Optional[str]]) -> Optional[Path]:
        if not self.config.cache_dir:
            return None
        slug = _SAFE_KEY_RE.sub("_", f"{key[0]}-{key[1] or 'any'}")
        return Path(self.config.cache_dir) / f"{slug}.json"

    def _keyword_lock(self, key: tuple[str, Optional[str]]) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(key, threading.Lock())

    def cache_lookup(self, keyword: ImageKeyword) -> Optional[list[ImageAsset]]:
        """Cached assets for the keyword, or None on miss.

        A corrupt cache file counts as a miss and is evicted.
        """
        key = keyword.search_key
        if key in self._memory:
            return self._memory[key]
        path = self._cache_path(key)
        if path is None or not path.exists():
            return None
        try:
            entries = json.loads(path.read_text(encoding="utf-8"))
            assets = [ImageAsset.from_dict(e) for e in entries]
        except (ValueError, TypeError, KeyError):
            path.unlink(missing_ok=True)
            return None
        self._memory[key] = assets
        return assets

    def _cache_store(self, key: tuple[str, Optional[str]], assets: list[ImageAsset]) -> None:
        self._memory[key] = assets
        path = self._cache_path(key)
        if path is not None:
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps([a.to_dict() for a in assets]), encoding="utf-8")
            os.replace(tmp, path)

    def search(self, keyword: ImageKeyword) -> list[ImageAsset]:
        key = keyword.search_key
        with self._keyword_lock(key):
            cached = self.cache_lookup(keyword)
            if cached is not None:
                return cached
            self.network_calls += 1
            if self.config.is_fixture:
                assets = _fixture_assets(keyword, self.config.results_per_query)
            else:
                assets = _live_search(keyword, self.config)
            self._cache_store(key, assets)
            return assets


def resolve_keywords(
    keywords: list[ImageKeyword], client: ImageClient
) -> tuple[dict, list[str]]:
    """Assign the first search result to each distinct (name, modifier) key.

    Search failures degrade to a missing assignment (the injector substitutes
    a placeholder) plus a warning; they never abort the pipeline.
    """
    assignments: dict = {}
    warnings: list[str] = []
    for kw in keywords:
        if kw.search_key in assignments:
            continue
        try:
            assets = client.search(kw)
        except (SearchUnavailable, NoResults) as exc:
            warnings.append(f"image search failed for [{kw.name}({kw.raw_modifier})]: {exc}")
            continue
        if assets:
            assignments[kw.search_key] = assets[0]
    return assignments, warnings
