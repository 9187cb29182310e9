"""Harvested-post record types shared by providers and the corpus store."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

from ..errors import ValidationError


class Source(str, Enum):
    BY_LOCATION = "by_location"
    BY_KEYWORD = "by_keyword"


@dataclass(frozen=True)
class LocationRecord:
    location_id: str
    name: str
    lat: float
    lon: float

    def __post_init__(self):
        if not self.location_id:
            raise ValidationError("location_id must be non-empty")


@dataclass(frozen=True)
class MediaRef:
    url: str
    local_path: str | None = None
    content_hash: str | None = None  # sha256 hex once fetched

    def __post_init__(self):
        if (self.local_path is None) != (self.content_hash is None):
            raise ValidationError(
                f"MediaRef for {self.url!r}: content_hash must be present iff local_path is"
            )

    def to_dict(self) -> dict:
        return {"url": self.url, "local_path": self.local_path, "content_hash": self.content_hash}

    @classmethod
    def from_dict(cls, d: dict) -> "MediaRef":
        return cls(url=d["url"], local_path=d.get("local_path"), content_hash=d.get("content_hash"))


@dataclass(frozen=True)
class PostRecord:
    primary_key: str
    post_id: str
    image_refs: tuple[MediaRef, ...] = ()
    caption: str | None = None
    geo: tuple[float, float, str] | None = None  # (lat, lon, location_id)
    timestamp: int = 0  # UTC seconds
    source: Source = Source.BY_LOCATION
    tags: tuple[str, ...] = ()  # keyword provenance, sorted unique

    def __post_init__(self):
        if not self.primary_key:
            raise ValidationError("primary_key must be non-empty")
        object.__setattr__(self, "image_refs", tuple(self.image_refs))
        object.__setattr__(self, "tags", tuple(sorted(set(self.tags))))
        if not self.image_refs and self.source is Source.BY_LOCATION:
            raise ValidationError(
                f"post {self.primary_key}: image_refs may be empty only for by_keyword records"
            )

    def with_tags(self, extra) -> "PostRecord":
        return replace(self, tags=tuple(sorted(set(self.tags) | set(extra))))

    def with_image_refs(self, refs) -> "PostRecord":
        return replace(self, image_refs=tuple(refs))

    def to_dict(self) -> dict:
        return {
            "primary_key": self.primary_key,
            "post_id": self.post_id,
            "image_refs": [r.to_dict() for r in self.image_refs],
            "caption": self.caption,
            "geo": list(self.geo) if self.geo is not None else None,
            "timestamp": self.timestamp,
            "source": self.source.value,
            "tags": list(self.tags),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PostRecord":
        geo = d.get("geo")
        return cls(
            primary_key=d["primary_key"],
            post_id=d.get("post_id", ""),
            image_refs=tuple(MediaRef.from_dict(r) for r in d.get("image_refs", [])),
            caption=d.get("caption"),
            geo=(float(geo[0]), float(geo[1]), str(geo[2])) if geo else None,
            timestamp=int(d.get("timestamp", 0)),
            source=Source(d.get("source", "by_location")),
            tags=tuple(d.get("tags", ())),
        )
