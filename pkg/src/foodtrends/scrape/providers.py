"""Post provider interface, the deterministic simulated provider, and env loading.

Providers page with opaque string cursors: "" asks for the first page, and a
returned next-cursor of "" means the listing is exhausted. Providers are
snapshot-consistent during a run: the same cursor yields the same page.
"""

from __future__ import annotations

import hashlib
import importlib
import math
import os
import random
from abc import ABC, abstractmethod
from dataclasses import dataclass

from ..errors import ProviderError, ValidationError
from ..geogrid import GeoBoundingBox, GridPoint
from ..seeds import derive_seed
from ..text import KeywordList, match_keywords, normalize
from .records import LocationRecord, MediaRef, PostRecord, Source

ENV_PROVIDER_VAR = "FOODTRENDS_PROVIDER"


class PostProvider(ABC):
    """Minimal capability set a harvesting backend must offer."""

    @abstractmethod
    def search_locations_near(
        self, point: GridPoint, radius_deg: float, cursor: str = ""
    ) -> tuple[list[LocationRecord], str]:
        """One page of registered locations near a point, plus next cursor."""

    @abstractmethod
    def fetch_posts_by_location(
        self, location_id: str, cursor: str = ""
    ) -> tuple[list[PostRecord], str]:
        """One page of recent posts for a location, plus next cursor."""

    @abstractmethod
    def search_posts_by_keyword(
        self, keyword: str, cursor: str = ""
    ) -> tuple[list[PostRecord], str]:
        """One page of posts whose captions match the keyword, plus next cursor."""

    @abstractmethod
    def fetch_media(self, url: str) -> bytes:
        """Raw bytes behind a media URL."""


@dataclass(frozen=True)
class SimWorldConfig:
    """Deterministic world generation parameters; same config, same world."""

    seed: int
    n_locations: int
    posts_per_location: tuple[int, int]
    boxes: tuple[GeoBoundingBox, ...]
    keyword_caption_probability: float = 0.5
    keywords: tuple[str, ...] = ()  # hashtag vocabulary; defaults to shipped list

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))
        object.__setattr__(self, "keywords", tuple(self.keywords))
        if self.n_locations < 0:
            raise ValidationError(f"n_locations must be >= 0, got {self.n_locations}")
        lo, hi = self.posts_per_location
        if lo < 0 or hi < lo:
            raise ValidationError(f"posts_per_location range invalid: [{lo}, {hi}]")
        if not 0.0 <= self.keyword_caption_probability <= 1.0:
            raise ValidationError(
                f"keyword_caption_probability must be in [0, 1], got {self.keyword_caption_probability}"
            )
        if not self.boxes:
            raise ValidationError("boxes must be non-empty")


_CAPTION_VOCAB = (
    "dinner", "lunch", "breakfast", "today", "friends", "family", "good",
    "best", "yummy", "tasty", "love", "home", "weekend", "eat", "fresh",
    "sunday", "enjoy", "amazing", "time", "happy",
)

# Fixed epoch inside March 2019 so synthetic timestamps look like real ones.
_TIME_BASE = 1552000000

_MEDIA_SCHEME = "sim://media/"


def _media_bytes(url: str) -> bytes:
    digest = hashlib.sha256(url.encode("utf-8")).digest()
    n_blocks = 6 + digest[0] % 8
    blocks = [digest]
    for i in range(1, n_blocks):
        blocks.append(hashlib.sha256(blocks[-1] + bytes([i])).digest())
    return b"".join(blocks)


class SimProvider(PostProvider):
    """Fully in-memory deterministic provider generated from a seed."""

    def __init__(self, cfg: SimWorldConfig, page_size: int = 7):
        if page_size < 1:
            raise ValidationError(f"page_size must be >= 1, got {page_size}")
        self.cfg = cfg
        self.page_size = page_size
        keywords = cfg.keywords
        if not keywords:
            from ..text import default_keywords

            keywords = default_keywords().names
        self._keywords = tuple(keywords)
        self._locations: list[LocationRecord] = []
        self._posts_by_location: dict[str, list[PostRecord]] = {}
        self._media: dict[str, bytes] = {}
        self._generate()

    def _generate(self) -> None:
        cfg = self.cfg
        for i in range(cfg.n_locations):
            rng = random.Random(derive_seed(cfg.seed, "loc", i))
            box = cfg.boxes[rng.randrange(len(cfg.boxes))]
            lat = rng.uniform(box.min_lat, box.max_lat)
            lon = rng.uniform(box.min_lon, box.max_lon)
            location_id = f"loc-{i:05d}"
            self._locations.append(
                LocationRecord(location_id=location_id, name=f"Sim Venue {i}", lat=lat, lon=lon)
            )
            lo, hi = cfg.posts_per_location
            n_posts = rng.randint(lo, hi)
            posts = []
            for j in range(n_posts):
                posts.append(self._make_post(i, j, lat, lon, location_id))
            # newest first, the way real feeds page
            posts.sort(key=lambda p: (-p.timestamp, p.primary_key))
            self._posts_by_location[location_id] = posts

    def _make_post(self, i: int, j: int, lat: float, lon: float, location_id: str) -> PostRecord:
        cfg = self.cfg
        rng = random.Random(derive_seed(cfg.seed, "post", i, j))
        primary_key = f"sim-{i:05d}-{j:04d}"
        caption: str | None
        if rng.random() < 0.1:
            caption = None
        else:
            words = [rng.choice(_CAPTION_VOCAB) for _ in range(rng.randint(3, 8))]
            caption = " ".join(words)
            if rng.random() < cfg.keyword_caption_probability:
                kw = self._keywords[rng.randrange(len(self._keywords))]
                caption += " #" + kw.replace(" ", "")
        n_images = 2 if rng.random() < 0.15 else 1
        refs = tuple(
            MediaRef(url=f"{_MEDIA_SCHEME}{primary_key}/{k}") for k in range(n_images)
        )
        for ref in refs:
            self._media[ref.url] = _media_bytes(ref.url)
        geo = (
            lat + rng.uniform(-0.001, 0.001),
            lon + rng.uniform(-0.001, 0.001),
            location_id,
        )
        return PostRecord(
            primary_key=primary_key,
            post_id=f"{i}-{j}",
            image_refs=refs,
            caption=caption,
            geo=geo,
            timestamp=_TIME_BASE + i * 3600 + j * 60,
            source=Source.BY_LOCATION,
        )

    # -- test/oracle access ------------------------------------------------

    def all_locations(self) -> list[LocationRecord]:
        return list(self._locations)

    def all_posts(self) -> list[PostRecord]:
        out = []
        for location_id in sorted(self._posts_by_location):
            out.extend(self._posts_by_location[location_id])
        return out

    # -- PostProvider ------------------------------------------------------

    def _page(self, items: list, cursor: str) -> tuple[list, str]:
        offset = 0
        if cursor:
            try:
                offset = int(cursor)
            except ValueError as exc:
                raise ProviderError(f"bad cursor {cursor!r}") from exc
            if offset < 0 or offset > len(items):
                raise ProviderError(f"cursor {cursor!r} out of range")
        page = items[offset : offset + self.page_size]
        nxt = offset + self.page_size
        return list(page), (str(nxt) if nxt < len(items) else "")

    def search_locations_near(self, point, radius_deg, cursor=""):
        hits = [
            loc
            for loc in self._locations
            if math.hypot(loc.lat - point.lat, loc.lon - point.lon) <= radius_deg
        ]
        hits.sort(key=lambda l: l.location_id)
        return self._page(hits, cursor)

    def fetch_posts_by_location(self, location_id, cursor=""):
        if location_id not in self._posts_by_location:
            raise ProviderError(f"unknown location_id {location_id!r}")
        return self._page(self._posts_by_location[location_id], cursor)

    def search_posts_by_keyword(self, keyword, cursor=""):
        kw = KeywordList.of([keyword])
        hits = [
            PostRecord(
                primary_key=p.primary_key,
                post_id=p.post_id,
                image_refs=p.image_refs,
                caption=p.caption,
                geo=p.geo,
                timestamp=p.timestamp,
                source=Source.BY_KEYWORD,
            )
            for p in self.all_posts()
            if p.caption and match_keywords(normalize(p.caption), kw)
        ]
        hits.sort(key=lambda p: (-p.timestamp, p.primary_key))
        return self._page(hits, cursor)

    def fetch_media(self, url):
        try:
            return self._media[url]
        except KeyError as exc:
            raise ProviderError(f"unknown media url {url!r}") from exc


def simulate_world(cfg: SimWorldConfig, page_size: int = 7) -> SimProvider:
    """Build the deterministic provider described by cfg."""
    return SimProvider(cfg, page_size=page_size)


def provider_from_env() -> PostProvider:
    """Instantiate an external provider named by FOODTRENDS_PROVIDER.

    The variable holds "module.path:factory"; the factory takes no arguments
    and reads its own credential environment variables. Credentials never
    pass through config files.
    """
    spec = os.environ.get(ENV_PROVIDER_VAR, "").strip()
    if not spec:
        raise ProviderError(
            f"{ENV_PROVIDER_VAR} is not set; expected \"module.path:factory\""
        )
    module_name, sep, attr = spec.partition(":")
    if not sep or not module_name or not attr:
        raise ProviderError(f"{ENV_PROVIDER_VAR}={spec!r} is not \"module.path:factory\"")
    try:
        module = importlib.import_module(module_name)
        factory = getattr(module, attr)
    except (ImportError, AttributeError) as exc:
        raise ProviderError(f"cannot load provider factory {spec!r}: {exc}") from exc
    provider = factory()
    if not isinstance(provider, PostProvider):
        raise ProviderError(f"factory {spec!r} returned {type(provider).__name__}, not a PostProvider")
    return provider
