"""Post harvesting: pluggable providers, rate limiting, checkpointed runners."""

from .records import LocationRecord, MediaRef, PostRecord, Source
from .ratelimit import RateLimiter
from .providers import PostProvider, SimWorldConfig, simulate_world, provider_from_env
from .runner import ScrapeLimits, ScrapeStats, scrape_by_location, scrape_by_keywords

__all__ = [
    "LocationRecord",
    "MediaRef",
    "PostRecord",
    "Source",
    "RateLimiter",
    "PostProvider",
    "SimWorldConfig",
    "simulate_world",
    "provider_from_env",
    "ScrapeLimits",
    "ScrapeStats",
    "scrape_by_location",
    "scrape_by_keywords",
]
