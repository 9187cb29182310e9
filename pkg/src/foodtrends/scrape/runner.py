"""Location- and keyword-driven harvesting with rate limiting and resume.

Fetch tasks run on a small thread pool, but their results are consumed and
ingested in submission order by the calling thread, so store contents and
checkpoint files come out identical regardless of scheduling. Checkpoints
("DONE <token>" lines) are a crash journal: they let an interrupted run skip
completed locations/keywords, and a run that finishes cleanly clears its own
tokens so the next full run re-fetches (and dedups) everything.
"""

from __future__ import annotations

import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from ..errors import ProviderError, ValidationError
from ..geogrid import GridSpec, enumerate_grid
from ..seeds import derive_seed
from .providers import PostProvider
from .ratelimit import RateLimiter
from .records import LocationRecord, MediaRef, PostRecord

DEFAULT_SEARCH_RADIUS_DEG = 0.02


@dataclass(frozen=True)
class ScrapeLimits:
    max_requests_per_second: float = 50.0
    max_retries: int = 3
    backoff_base: float = 0.05  # seconds; delay = base * 2^(failures-1), +/-20% jitter
    max_concurrent_fetchers: int = 4

    def __post_init__(self):
        if not self.max_requests_per_second > 0:
            raise ValidationError("max_requests_per_second must be positive")
        if self.max_retries < 1:
            raise ValidationError("max_retries must be positive")
        if not self.backoff_base > 0:
            raise ValidationError("backoff_base must be positive")
        if self.max_concurrent_fetchers < 1:
            raise ValidationError("max_concurrent_fetchers must be positive")


@dataclass
class ScrapeStats:
    locations_found: int = 0
    posts_fetched: int = 0
    posts_deduped: int = 0
    images_fetched: int = 0
    errors: int = 0
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "locations_found": self.locations_found,
            "posts_fetched": self.posts_fetched,
            "posts_deduped": self.posts_deduped,
            "images_fetched": self.images_fetched,
            "errors": self.errors,
            "wall_time": self.wall_time,
        }


class _Retrier:
    def __init__(self, limits: ScrapeLimits, limiter: RateLimiter, sleep, jitter_rng):
        self.limits = limits
        self.limiter = limiter
        self.sleep = sleep
        self.rng = jitter_rng

    def call(self, fn):
        failures = 0
        while True:
            self.limiter.acquire()
            try:
                return fn()
            except Exception as exc:
                failures += 1
                if failures > self.limits.max_retries:
                    raise ProviderError(f"provider call failed after {failures} attempts: {exc}") from exc
                delay = self.limits.backoff_base * (2 ** (failures - 1))
                self.sleep(delay * self.rng.uniform(0.8, 1.2))


def _drain_pages(retrier: _Retrier, fetch_page) -> list:
    """Follow cursors until the provider signals the final page."""
    items = []
    cursor = ""
    while True:
        page, cursor = retrier.call(lambda c=cursor: fetch_page(c))
        items.extend(page)
        if not cursor:
            return items


def _fetch_post_media(retrier: _Retrier, provider: PostProvider, post: PostRecord):
    """Fetch each image's bytes; failures leave the ref unfetched."""
    blobs: list[bytes | None] = []
    failures = 0
    for ref in post.image_refs:
        try:
            blobs.append(retrier.call(lambda u=ref.url: provider.fetch_media(u)))
        except ProviderError:
            blobs.append(None)
            failures += 1
    return blobs, failures


def _ingest_with_media(store, post: PostRecord, blobs, stats: ScrapeStats, tags=()) -> None:
    refs = []
    for ref, blob in zip(post.image_refs, blobs):
        if blob is None:
            refs.append(MediaRef(url=ref.url))
        else:
            digest, rel = store.store_media(blob)
            refs.append(MediaRef(url=ref.url, local_path=rel, content_hash=digest))
            stats.images_fetched += 1
    record = post.with_image_refs(refs)
    if tags:
        record = record.with_tags(tags)
    if not store.ingest_post(record):
        stats.posts_deduped += 1
        if tags:
            store.add_tags(record.primary_key, tags)


def scrape_by_location(
    spec: GridSpec,
    provider: PostProvider,
    store,
    limits: ScrapeLimits,
    *,
    radius_deg: float = DEFAULT_SEARCH_RADIUS_DEG,
    on_location_done=None,
    sleep=time.sleep,
    jitter_seed: int = 0,
) -> ScrapeStats:
    """Harvest every location discoverable from the grid, resumably.

    Discovers locations near each grid point, dedups them by id, then pulls
    every page of every location's posts plus their media. A checkpoint is
    written after each completed location; re-running after a crash skips
    completed ones and converges to the same store contents.
    """
    start = time.monotonic()
    stats = ScrapeStats()
    limiter = RateLimiter(limits.max_requests_per_second, sleep=sleep)
    retrier = _Retrier(limits, limiter, sleep, random.Random(derive_seed(jitter_seed, "jitter")))
    points = enumerate_grid(spec)

    with ThreadPoolExecutor(max_workers=limits.max_concurrent_fetchers) as pool:
        # Phase 1: discover locations, in grid order.
        def discover(point):
            return _drain_pages(
                retrier, lambda c: provider.search_locations_near(point, radius_deg, c)
            )

        locations: list[LocationRecord] = []
        seen_ids: set[str] = set()
        for future in [pool.submit(discover, p) for p in points]:
            try:
                found = future.result()
            except ProviderError:
                stats.errors += 1
                continue
            for loc in found:
                if loc.location_id not in seen_ids:
                    seen_ids.add(loc.location_id)
                    locations.append(loc)
        stats.locations_found = len(locations)

        # Phase 2: pull posts + media per location, checkpointing completions.
        pending = [loc for loc in locations if not store.is_done(loc.location_id)]

        def pull(location):
            posts = _drain_pages(
                retrier, lambda c: provider.fetch_posts_by_location(location.location_id, c)
            )
            enriched = []
            media_failures = 0
            for post in posts:
                blobs, failed = _fetch_post_media(retrier, provider, post)
                media_failures += failed
                enriched.append((post, blobs))
            return enriched, media_failures

        futures = [(loc, pool.submit(pull, loc)) for loc in pending]
        for loc, future in futures:
            try:
                enriched, media_failures = future.result()
            except ProviderError:
                stats.errors += 1
                continue
            stats.errors += media_failures
            for post, blobs in enriched:
                stats.posts_fetched += 1
                _ingest_with_media(store, post, blobs, stats)
            store.mark_done(loc.location_id)
            if on_location_done is not None:
                on_location_done(loc.location_id)

    store.clear_done([loc.location_id for loc in locations])
    stats.wall_time = time.monotonic() - start
    return stats


def scrape_by_keywords(
    keywords,
    provider: PostProvider,
    store,
    limits: ScrapeLimits,
    *,
    on_keyword_done=None,
    sleep=time.sleep,
    jitter_seed: int = 0,
) -> ScrapeStats:
    """Harvest posts matching each keyword; dedup merges provenance tags."""
    keywords = list(keywords)
    if not keywords:
        raise ValidationError("keywords must be non-empty")
    start = time.monotonic()
    stats = ScrapeStats()
    limiter = RateLimiter(limits.max_requests_per_second, sleep=sleep)
    retrier = _Retrier(limits, limiter, sleep, random.Random(derive_seed(jitter_seed, "jitter")))

    pending = [kw for kw in keywords if not store.is_done(kw)]

    with ThreadPoolExecutor(max_workers=limits.max_concurrent_fetchers) as pool:

        def pull(keyword):
            posts = _drain_pages(
                retrier, lambda c: provider.search_posts_by_keyword(keyword, c)
            )
            enriched = []
            media_failures = 0
            for post in posts:
                blobs, failed = _fetch_post_media(retrier, provider, post)
                media_failures += failed
                enriched.append((post, blobs))
            return enriched, media_failures

        futures = [(kw, pool.submit(pull, kw)) for kw in pending]
        for keyword, future in futures:
            try:
                enriched, media_failures = future.result()
            except ProviderError:
                stats.errors += 1
                continue
            stats.errors += media_failures
            for post, blobs in enriched:
                stats.posts_fetched += 1
                _ingest_with_media(store, post, blobs, stats, tags=[keyword])
            store.mark_done(keyword)
            if on_keyword_done is not None:
                on_keyword_done(keyword)

    store.clear_done(keywords)
    stats.wall_time = time.monotonic() - start
    return stats
