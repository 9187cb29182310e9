"""Append-only corpus store for harvested posts.

Layout under the store root:

    records.jsonl   append-only log: {"kind": "post", ...} and {"kind": "tags", ...}
    progress        crash-recovery checkpoint, lines "DONE <token>"
    media/<h2>/<h>  content-addressed media files (sha256 hex, first 2 chars shard)

The in-memory primary-key index is rebuilt from the log on open, so the two
cannot disagree. Writes are single-writer; reads are safe from many threads
once ingestion is quiet.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

from ..errors import StorageError, ValidationError
from ..scrape.records import MediaRef, PostRecord

RECORDS_FILE = "records.jsonl"
PROGRESS_FILE = "progress"
MEDIA_DIR = "media"


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


class CorpusStore:
    """Durable post set keyed by provider primary_key."""

    def __init__(self, root):
        self.root = Path(root)
        try:
            self.root.mkdir(parents=True, exist_ok=True)
            (self.root / MEDIA_DIR).mkdir(exist_ok=True)
        except OSError as exc:
            raise StorageError(f"cannot create store at {self.root}: {exc}") from exc
        self._records: dict[str, PostRecord] = {}
        self._done: set[str] = set()
        self._replay()
        self._log = self._open_append(self.root / RECORDS_FILE)
        self._progress = self._open_append(self.root / PROGRESS_FILE)

    def _open_append(self, path: Path):
        try:
            return open(path, "a", encoding="utf-8")
        except OSError as exc:
            raise StorageError(f"cannot open {path} for append: {exc}") from exc

    def _replay(self) -> None:
        log_path = self.root / RECORDS_FILE
        if log_path.exists():
            try:
                with open(log_path, "r", encoding="utf-8") as fh:
                    for lineno, line in enumerate(fh, 1):
                        line = line.strip()
                        if not line:
                            continue
                        entry = json.loads(line)
                        kind = entry.get("kind")
                        if kind == "post":
                            record = PostRecord.from_dict(entry["record"])
                            if record.primary_key in self._records:
                                raise StorageError(
                                    f"{log_path}:{lineno}: duplicate primary_key "
                                    f"{record.primary_key!r} in log"
                                )
                            self._records[record.primary_key] = record
                        elif kind == "tags":
                            pk = entry["primary_key"]
                            if pk not in self._records:
                                raise StorageError(
                                    f"{log_path}:{lineno}: tags for unknown primary_key {pk!r}"
                                )
                            self._records[pk] = self._records[pk].with_tags(entry["tags"])
                        else:
                            raise StorageError(f"{log_path}:{lineno}: unknown entry kind {kind!r}")
            except (OSError, json.JSONDecodeError) as exc:
                raise StorageError(f"cannot replay store log {log_path}: {exc}") from exc
        progress_path = self.root / PROGRESS_FILE
        if progress_path.exists():
            try:
                with open(progress_path, "r", encoding="utf-8") as fh:
                    for line in fh:
                        line = line.strip()
                        if line.startswith("DONE "):
                            self._done.add(line[5:])
            except OSError as exc:
                raise StorageError(f"cannot read progress file {progress_path}: {exc}") from exc

    def close(self) -> None:
        self._log.close()
        self._progress.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    # -- records -------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, primary_key: str) -> bool:
        return primary_key in self._records

    def get(self, primary_key: str) -> PostRecord | None:
        return self._records.get(primary_key)

    def records(self) -> list[PostRecord]:
        """All records, sorted by primary_key for deterministic iteration."""
        return [self._records[pk] for pk in sorted(self._records)]

    def _append(self, entry: dict) -> None:
        try:
            self._log.write(_canonical_json(entry) + "\n")
            self._log.flush()
            os.fsync(self._log.fileno())
        except OSError as exc:
            raise StorageError(f"write to {self.root / RECORDS_FILE} failed: {exc}") from exc

    def ingest_post(self, record: PostRecord) -> bool:
        """Insert a record; returns False without mutating if the key exists."""
        if record.primary_key in self._records:
            return False
        self._append({"kind": "post", "record": record.to_dict()})
        self._records[record.primary_key] = record
        return True

    def add_tags(self, primary_key: str, tags) -> None:
        """Merge provenance tags into an existing record."""
        record = self._records.get(primary_key)
        if record is None:
            raise ValidationError(f"add_tags: unknown primary_key {primary_key!r}")
        merged = record.with_tags(tags)
        if merged.tags == record.tags:
            return
        self._append({"kind": "tags", "primary_key": primary_key, "tags": sorted(set(tags))})
        self._records[primary_key] = merged

    def canonical_dump(self) -> bytes:
        """Canonical byte serialization: records sorted by primary_key."""
        lines = [_canonical_json(r.to_dict()) for r in self.records()]
        return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""

    # -- media ---------------------------------------------------------------

    def store_media(self, content: bytes) -> tuple[str, str]:
        """Write content-addressed media; returns (sha256 hex, relative path)."""
        digest = hashlib.sha256(content).hexdigest()
        rel = f"{MEDIA_DIR}/{digest[:2]}/{digest}"
        path = self.root / rel
        if not path.exists():
            try:
                path.parent.mkdir(parents=True, exist_ok=True)
                tmp = path.with_suffix(".tmp")
                tmp.write_bytes(content)
                os.replace(tmp, path)
            except OSError as exc:
                raise StorageError(f"cannot write media {path}: {exc}") from exc
        return digest, rel

    def media_path(self, ref: MediaRef) -> Path | None:
        if ref.local_path is None:
            return None
        return self.root / ref.local_path

    # -- checkpointing ---------------------------------------------------------

    def is_done(self, token: str) -> bool:
        return token in self._done

    def mark_done(self, token: str) -> None:
        if token in self._done:
            return
        try:
            self._progress.write(f"DONE {token}\n")
            self._progress.flush()
            os.fsync(self._progress.fileno())
        except OSError as exc:
            raise StorageError(f"write to {self.root / PROGRESS_FILE} failed: {exc}") from exc
        self._done.add(token)

    def clear_done(self, tokens) -> None:
        """Drop finished tokens from the progress journal (run completed)."""
        drop = set(tokens)
        self._done -= drop
        self._progress.close()
        path = self.root / PROGRESS_FILE
        try:
            keep = sorted(self._done)
            with open(path, "w", encoding="utf-8") as fh:
                for token in keep:
                    fh.write(f"DONE {token}\n")
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise StorageError(f"rewrite of {path} failed: {exc}") from exc
        self._progress = self._open_append(path)
