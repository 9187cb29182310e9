"""Pipeline configuration: one TOML file drives every subcommand.

Relative paths are resolved against the config file's directory. Static
input files named in the config (regions, keywords, stopwords, detections,
decisions) must exist at load time; artifact paths (store, manifests,
features, reports) are created by the commands that write them.

Randomness policy: the config carries a single root seed, and every stage
derives its own seed from (root, stage name), so a --seed override changes
all stages coherently.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import FormatError, ValidationError
from .geogrid import DEFAULT_STRIDE_DEG, GeoBoundingBox, GridSpec
from .scrape.runner import DEFAULT_SEARCH_RADIUS_DEG, ScrapeLimits
from .trends import DEFAULT_CONFIDENCE_THRESHOLD, TrendConfig

DEFAULT_MIN_CLASS_SIZE = 200
DEFAULT_BINARY_THRESHOLD = 0.5
DEFAULT_TARGET_PER_CLASS = 100
DEFAULT_IMAGE_DIM = 2048
DEFAULT_TEXT_DIM = 768


@dataclass(frozen=True)
class PathsConfig:
    store: Path
    food_manifest: Path
    binary_manifest: Path
    image_features: Path
    text_features: Path
    head: Path
    eval_dir: Path
    trends_dir: Path
    regions: Path | None = None
    keywords: Path | None = None  # None -> shipped Kiswahili list
    stopwords: Path | None = None  # None -> shipped stopword list
    detections: Path | None = None
    decisions: Path | None = None


@dataclass(frozen=True)
class SimSettings:
    n_locations: int = 20
    posts_min: int = 1
    posts_max: int = 5
    keyword_caption_probability: float = 0.6

    def __post_init__(self):
        if self.n_locations < 1:
            raise ValidationError("sim.n_locations must be positive")
        if not 1 <= self.posts_min <= self.posts_max:
            raise ValidationError("sim posts range must satisfy 1 <= min <= max")
        if not 0.0 <= self.keyword_caption_probability <= 1.0:
            raise ValidationError("sim.keyword_caption_probability must be in [0, 1]")


@dataclass(frozen=True)
class BuildSettings:
    min_class_size: int = DEFAULT_MIN_CLASS_SIZE
    binary_threshold: float = DEFAULT_BINARY_THRESHOLD
    target_per_class: int = DEFAULT_TARGET_PER_CLASS

    def __post_init__(self):
        if self.min_class_size < 1:
            raise ValidationError("build.min_class_size must be >= 1")
        if not 0.0 <= self.binary_threshold <= 1.0:
            raise ValidationError("build.binary_threshold must be in [0, 1]")
        if self.target_per_class < 1:
            raise ValidationError("build.target_per_class must be >= 1")


@dataclass(frozen=True)
class TrainSettings:
    learning_rate: float = 0.0001
    momentum: float = 0.9
    epochs: int | None = None  # unset -> 12, or 10 for a 2-class manifest
    batch_size: int = 32
    hidden: int = 10_000

    def epochs_for(self, n_classes: int) -> int:
        if self.epochs is not None:
            return self.epochs
        return 10 if n_classes == 2 else 12


@dataclass(frozen=True)
class StubSettings:
    image_dim: int = DEFAULT_IMAGE_DIM
    text_dim: int = DEFAULT_TEXT_DIM

    def __post_init__(self):
        if self.image_dim < 1 or self.text_dim < 1:
            raise ValidationError("stub feature dims must be positive")


@dataclass(frozen=True)
class PipelineConfig:
    seed: int
    paths: PathsConfig
    grid: GridSpec | None
    scrape: ScrapeLimits
    radius_deg: float
    sim: SimSettings
    build: BuildSettings
    train: TrainSettings
    trends: TrendConfig
    stub: StubSettings

    def with_seed(self, seed: int) -> "PipelineConfig":
        return replace(self, seed=seed)


def _require_table(raw: dict, key: str) -> dict:
    value = raw.get(key, {})
    if not isinstance(value, dict):
        raise FormatError(f"[{key}] must be a table")
    return value


def _settings(cls, table: dict, section: str):
    try:
        return cls(**table)
    except TypeError as exc:
        raise ValidationError(f"[{section}]: {exc}") from exc


def _resolve(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def _optional_input_path(base: Path, table: dict, key: str) -> Path | None:
    value = table.get(key, "")
    if not value:
        return None
    path = _resolve(base, value)
    if not path.exists():
        raise ValidationError(f"paths.{key}: {path} does not exist")
    return path


def _grid_from_table(table: dict) -> GridSpec | None:
    boxes = table.get("boxes", [])
    if not boxes:
        return None
    parsed = []
    for i, box in enumerate(boxes):
        try:
            parsed.append(
                GeoBoundingBox(
                    min_lat=float(box["min_lat"]),
                    max_lat=float(box["max_lat"]),
                    min_lon=float(box["min_lon"]),
                    max_lon=float(box["max_lon"]),
                )
            )
        except KeyError as exc:
            raise FormatError(f"grid.boxes[{i}] missing field {exc}") from exc
    return GridSpec(
        boxes=tuple(parsed),
        stride_lat=float(table.get("stride_lat", DEFAULT_STRIDE_DEG)),
        stride_lon=float(table.get("stride_lon", DEFAULT_STRIDE_DEG)),
    )


def load_config(path, *, seed_override: int | None = None) -> PipelineConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise FormatError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise FormatError(f"{path}: invalid TOML: {exc}") from exc
    base = path.resolve().parent

    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ValidationError("seed must be an integer")
    if seed_override is not None:
        seed = seed_override

    p = _require_table(raw, "paths")
    paths = PathsConfig(
        store=_resolve(base, p.get("store", "work/store")),
        food_manifest=_resolve(base, p.get("food_manifest", "work/food_types.jsonl")),
        binary_manifest=_resolve(base, p.get("binary_manifest", "work/food_binary.jsonl")),
        image_features=_resolve(base, p.get("image_features", "work/image.kenyfeat")),
        text_features=_resolve(base, p.get("text_features", "work/text.kenyfeat")),
        head=_resolve(base, p.get("head", "work/head.kenyhead")),
        eval_dir=_resolve(base, p.get("eval_dir", "work/eval")),
        trends_dir=_resolve(base, p.get("trends_dir", "work/trends")),
        regions=_optional_input_path(base, p, "regions"),
        keywords=_optional_input_path(base, p, "keywords"),
        stopwords=_optional_input_path(base, p, "stopwords"),
        detections=_optional_input_path(base, p, "detections"),
        decisions=_optional_input_path(base, p, "decisions"),
    )

    scrape_table = _require_table(raw, "scrape")
    radius_deg = float(scrape_table.pop("radius_deg", DEFAULT_SEARCH_RADIUS_DEG))
    if radius_deg <= 0:
        raise ValidationError("scrape.radius_deg must be positive")
    known_scrape = {
        "max_requests_per_second",
        "max_retries",
        "backoff_base",
        "max_concurrent_fetchers",
    }
    unknown = set(scrape_table) - known_scrape
    if unknown:
        raise ValidationError(f"unknown [scrape] keys: {sorted(unknown)}")
    limits = _settings(ScrapeLimits, scrape_table, "scrape")

    trends_table = _require_table(raw, "trends")
    sources = trends_table.get("sources_enabled")
    trend_cfg = TrendConfig(
        confidence_threshold=float(
            trends_table.get("confidence_threshold", DEFAULT_CONFIDENCE_THRESHOLD)
        ),
        sources_enabled=frozenset(sources) if sources else None,
    )

    return PipelineConfig(
        seed=seed,
        paths=paths,
        grid=_grid_from_table(_require_table(raw, "grid")),
        scrape=limits,
        radius_deg=radius_deg,
        sim=_settings(SimSettings, _require_table(raw, "sim"), "sim"),
        build=_settings(BuildSettings, _require_table(raw, "build"), "build"),
        train=_settings(TrainSettings, _require_table(raw, "train"), "train"),
        trends=trend_cfg,
        stub=_settings(StubSettings, _require_table(raw, "stub"), "stub"),
    )
