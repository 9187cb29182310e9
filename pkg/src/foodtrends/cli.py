"""Command-line entry point: the whole pipeline as subcommands.

Exit codes: 0 success, 1 validation error, 2 storage/provider/format error,
64 usage error (unknown subcommand, missing arguments). All subcommands are
reproducible: the same config and seed produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .config import PipelineConfig, load_config
from .corpus.builders import (
    Detector,
    assign_splits,
    bootstrap_binary_manifest,
    build_food_type_manifest,
)
from .corpus.manifest import (
    FOLD_HOLDOUT,
    ReviewDecisions,
    load_decisions,
    load_manifest,
    save_manifest,
)
from .corpus.store import CorpusStore
from .errors import FoodTrendsError, ValidationError
from .evalkit import cross_validate, topk_accuracy, write_eval_report
from .fusion.features import Modality, read_feature_file, stub_feature_table, zero_filled_table
from .fusion.head import load_head, save_head
from .fusion.train import TrainConfig, predict_batch, train
from .geogrid import enumerate_grid, load_regions
from .scrape.providers import SimWorldConfig, provider_from_env, simulate_world
from .scrape.runner import scrape_by_keywords, scrape_by_location
from .seeds import derive_seed
from .text import (
    default_keywords,
    default_stopwords,
    load_keywords,
    load_stopwords,
    sorted_frequencies,
    strip_food_name_hashtags,
    word_frequencies,
)
from .trends import analyze_trends, export_report, load_detections

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_USAGE = 64


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems instead of calling sys.exit(2)."""

    def error(self, message):
        raise _UsageError(message)


def _keywords(cfg: PipelineConfig):
    return load_keywords(cfg.paths.keywords) if cfg.paths.keywords else default_keywords()


def _stopwords(cfg: PipelineConfig):
    return load_stopwords(cfg.paths.stopwords) if cfg.paths.stopwords else default_stopwords()


def _decisions(cfg: PipelineConfig) -> ReviewDecisions:
    if cfg.paths.decisions:
        return load_decisions(cfg.paths.decisions)
    return ReviewDecisions.empty()


def _manifest_path(cfg: PipelineConfig, target: str) -> Path:
    return cfg.paths.food_manifest if target == "food-types" else cfg.paths.binary_manifest


def _provider(cfg: PipelineConfig, kind: str):
    if kind == "env":
        return provider_from_env()
    if cfg.grid is None:
        raise ValidationError("a [grid] table with boxes is required to simulate a world")
    keywords = _keywords(cfg)
    return simulate_world(
        SimWorldConfig(
            seed=derive_seed(cfg.seed, "sim"),
            n_locations=cfg.sim.n_locations,
            posts_per_location=(cfg.sim.posts_min, cfg.sim.posts_max),
            keyword_caption_probability=cfg.sim.keyword_caption_probability,
            boxes=cfg.grid.boxes,
            keywords=tuple(keywords.names),
        )
    )


def _feature_tables(cfg: PipelineConfig, manifest, mode: str):
    """Feature tables for every manifest example, from files or stubs.

    Stub text rows only cover examples with a caption; the training contract
    turns the missing rows into zero vectors, matching captionless posts.
    """
    if mode == "files":
        img = read_feature_file(cfg.paths.image_features)
        txt = read_feature_file(cfg.paths.text_features)
        return img, txt
    ids = [ex.example_id for ex in manifest.examples]
    captioned = [ex.example_id for ex in manifest.examples if ex.caption]
    img = stub_feature_table(ids, Modality.IMAGE, cfg.stub.image_dim, derive_seed(cfg.seed, "stub-img"))
    txt = stub_feature_table(captioned, Modality.TEXT, cfg.stub.text_dim, derive_seed(cfg.seed, "stub-txt"))
    return img, txt


def _train_config(cfg: PipelineConfig, n_classes: int, epochs_override=None) -> TrainConfig:
    return TrainConfig(
        learning_rate=cfg.train.learning_rate,
        momentum=cfg.train.momentum,
        epochs=epochs_override if epochs_override is not None else cfg.train.epochs_for(n_classes),
        batch_size=cfg.train.batch_size,
        hidden=cfg.train.hidden,
        seed=derive_seed(cfg.seed, "train"),
    )


def _stripped_captions(store: CorpusStore, keywords):
    for post in store.records():
        if post.caption:
            yield post.primary_key, strip_food_name_hashtags(post.caption, keywords)


def _cmd_grid(cfg: PipelineConfig, args) -> int:
    if cfg.grid is None:
        raise ValidationError("a [grid] table with boxes is required")
    for point in enumerate_grid(cfg.grid):
        print(f"{point.lat:.6f},{point.lon:.6f}")
    return EXIT_OK


def _cmd_scrape(cfg: PipelineConfig, args) -> int:
    provider = _provider(cfg, args.provider)
    with CorpusStore(cfg.paths.store) as store:
        if args.mode == "location":
            if cfg.grid is None:
                raise ValidationError("a [grid] table with boxes is required")
            stats = scrape_by_location(
                cfg.grid,
                provider,
                store,
                cfg.scrape,
                radius_deg=cfg.radius_deg,
                jitter_seed=derive_seed(cfg.seed, "scrape"),
            )
        else:
            stats = scrape_by_keywords(
                _keywords(cfg).names,
                provider,
                store,
                cfg.scrape,
                jitter_seed=derive_seed(cfg.seed, "scrape"),
            )
    printable = stats.to_dict()
    printable.pop("wall_time")  # keep stdout reproducible
    print(json.dumps(printable, sort_keys=True))
    return EXIT_OK


def _cmd_build(cfg: PipelineConfig, args) -> int:
    decisions = _decisions(cfg)
    with CorpusStore(cfg.paths.store) as store:
        if args.target == "food-types":
            manifest = build_food_type_manifest(
                store, _keywords(cfg), cfg.build.min_class_size, decisions
            )
        else:
            positives = load_manifest(cfg.paths.food_manifest)
            head = load_head(cfg.paths.head)
            img, txt = _feature_tables_for_store(cfg, store)
            manifest = bootstrap_binary_manifest(
                positives,
                store,
                Detector(head=head, img=img, txt=txt),
                cfg.build.binary_threshold,
                decisions,
                cfg.build.target_per_class,
                seed=derive_seed(cfg.seed, "binary"),
            )
    out = _manifest_path(cfg, args.target)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_manifest(manifest, out)
    print(json.dumps({"examples": len(manifest.examples), "classes": manifest.class_counts()}, sort_keys=True))
    return EXIT_OK


def _feature_tables_for_store(cfg: PipelineConfig, store: CorpusStore):
    """Stub tables covering every fetched image in the store (binary build)."""
    if _stored_feature_files_exist(cfg):
        return read_feature_file(cfg.paths.image_features), read_feature_file(cfg.paths.text_features)
    ids = []
    captioned = []
    for post in store.records():
        for idx, ref in enumerate(post.image_refs):
            if ref.content_hash is None:
                continue
            eid = f"{post.primary_key}:{idx}"
            ids.append(eid)
            if post.caption:
                captioned.append(eid)
    img = stub_feature_table(ids, Modality.IMAGE, cfg.stub.image_dim, derive_seed(cfg.seed, "stub-img"))
    txt = stub_feature_table(captioned, Modality.TEXT, cfg.stub.text_dim, derive_seed(cfg.seed, "stub-txt"))
    return img, txt


def _stored_feature_files_exist(cfg: PipelineConfig) -> bool:
    return cfg.paths.image_features.exists() and cfg.paths.text_features.exists()


def _cmd_split(cfg: PipelineConfig, args) -> int:
    path = _manifest_path(cfg, args.target)
    manifest = assign_splits(load_manifest(path), derive_seed(cfg.seed, "split"))
    save_manifest(manifest, path)
    folds: dict[str, int] = {}
    for ex in manifest.examples:
        folds[str(ex.fold)] = folds.get(str(ex.fold), 0) + 1
    print(json.dumps(folds, sort_keys=True))
    return EXIT_OK


def _cmd_train(cfg: PipelineConfig, args) -> int:
    manifest = load_manifest(_manifest_path(cfg, args.target))
    img, txt = _feature_tables(cfg, manifest, args.features)
    tcfg = _train_config(cfg, len(manifest.classes), args.epochs)
    params, history = train(manifest, img, txt, args.fold, tcfg)
    cfg.paths.head.parent.mkdir(parents=True, exist_ok=True)
    save_head(params, cfg.paths.head)
    history_path = cfg.paths.head.with_suffix(".history.json")
    history_path.write_text(json.dumps(history, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(
        json.dumps(
            {
                "fold": args.fold,
                "best_epoch": history["best_epoch"],
                "best_val_accuracy": history["best_val_accuracy"],
                "head": str(cfg.paths.head),
            },
            sort_keys=True,
        )
    )
    return EXIT_OK


def _cmd_eval(cfg: PipelineConfig, args) -> int:
    manifest = load_manifest(_manifest_path(cfg, args.target))
    img, txt = _feature_tables(cfg, manifest, args.features)
    tcfg = _train_config(cfg, len(manifest.classes), args.epochs)
    report = cross_validate(manifest, img, txt, tcfg)
    write_eval_report(report, cfg.paths.eval_dir)
    print(
        json.dumps(
            {
                "top1_mean": report.top1_mean,
                "top1_std": report.top1_std,
                "top3_mean": report.top3_mean,
                "top3_std": report.top3_std,
            },
            sort_keys=True,
        )
    )
    return EXIT_OK


def _cmd_ablate(cfg: PipelineConfig, args) -> int:
    manifest = load_manifest(_manifest_path(cfg, args.target))
    img, txt = _feature_tables(cfg, manifest, args.features)
    tcfg = _train_config(cfg, len(manifest.classes), args.epochs)
    holdout = [ex for ex in manifest.examples if ex.fold == FOLD_HOLDOUT]
    if not holdout:
        raise ValidationError("manifest has no holdout examples; run split first")
    ids = [ex.example_id for ex in holdout]
    labels = [ex.label for ex in holdout]
    all_ids = [ex.example_id for ex in manifest.examples]

    arms = {
        "image": (img, zero_filled_table(all_ids, Modality.TEXT, txt.dim)),
        "caption": (zero_filled_table(all_ids, Modality.IMAGE, img.dim), txt),
        "fused": (img, txt),
    }
    results = {}
    for name in ("image", "caption", "fused"):
        arm_img, arm_txt = arms[name]
        params, _ = train(manifest, arm_img, arm_txt, args.fold, tcfg)
        predictions = predict_batch(params, ids, arm_img, arm_txt)
        results[name] = topk_accuracy(predictions, labels, 1)
        print(f"{name},{results[name]:.2f}")
    cfg.paths.eval_dir.mkdir(parents=True, exist_ok=True)
    (cfg.paths.eval_dir / "ablation.json").write_text(
        json.dumps(results, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return EXIT_OK


def _cmd_trends(cfg: PipelineConfig, args) -> int:
    manifest = load_manifest(_manifest_path(cfg, args.target))
    img, txt = _feature_tables(cfg, manifest, args.features)
    params = load_head(cfg.paths.head)
    predictions = predict_batch(params, [ex.example_id for ex in manifest.examples], img, txt)

    geo = {}
    known_ids = set()
    with CorpusStore(cfg.paths.store) as store:
        for post in store.records():
            for idx, ref in enumerate(post.image_refs):
                if ref.content_hash is None:
                    continue
                eid = f"{post.primary_key}:{idx}"
                known_ids.add(eid)
                if post.geo is not None:
                    geo[eid] = (post.geo[0], post.geo[1])

    regions = load_regions(cfg.paths.regions) if cfg.paths.regions else None
    detections = load_detections(cfg.paths.detections) if cfg.paths.detections else []
    report = analyze_trends(
        predictions,
        manifest.classes,
        detections,
        geo,
        regions,
        cfg.trends,
        known_ids=known_ids,
    )
    export_report(report, cfg.paths.trends_dir, regions)
    print(json.dumps(report.per_food_counts, sort_keys=True))
    return EXIT_OK


def _cmd_strip_captions(cfg: PipelineConfig, args) -> int:
    keywords = _keywords(cfg)
    lines = []
    with CorpusStore(cfg.paths.store) as store:
        for pk, stripped in _stripped_captions(store, keywords):
            lines.append(f"{pk}\t{stripped}")
    body = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        Path(args.out).write_text(body, encoding="utf-8")
    else:
        sys.stdout.write(body)
    return EXIT_OK


def _cmd_wordfreq(cfg: PipelineConfig, args) -> int:
    keywords = _keywords(cfg)
    stopwords = _stopwords(cfg)
    with CorpusStore(cfg.paths.store) as store:
        stripped = [text for _, text in _stripped_captions(store, keywords)]
    counts = word_frequencies(stripped, stopwords)
    for word, count in sorted_frequencies(counts)[: args.top]:
        print(f"{word},{count}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="foodtrends", description="Food trend mining pipeline")
    parser.add_argument("--version", action="version", version=f"foodtrends {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p):
        p.add_argument("--config", required=True, help="TOML config file")
        p.add_argument("--seed", type=int, default=None, help="override the config root seed")

    p_grid = sub.add_parser("grid", help="print the grid points as lat,lon lines")
    common(p_grid)
    p_grid.set_defaults(fn=_cmd_grid)

    p_scrape = sub.add_parser("scrape", help="harvest posts into the corpus store")
    p_scrape.add_argument("mode", choices=["location", "keywords"])
    p_scrape.add_argument("--provider", choices=["sim", "env"], default="sim")
    common(p_scrape)
    p_scrape.set_defaults(fn=_cmd_scrape)

    p_build = sub.add_parser("build", help="build a dataset manifest from the store")
    p_build.add_argument("target", choices=["food-types", "binary"])
    common(p_build)
    p_build.set_defaults(fn=_cmd_build)

    def target_flag(p):
        p.add_argument("--target", choices=["food-types", "binary"], default="food-types")

    p_split = sub.add_parser("split", help="assign holdout and folds to a manifest")
    target_flag(p_split)
    common(p_split)
    p_split.set_defaults(fn=_cmd_split)

    def train_flags(p):
        target_flag(p)
        p.add_argument("--fold", type=int, default=0)
        p.add_argument("--features", choices=["files", "stub"], default="stub")
        p.add_argument("--epochs", type=int, default=None)

    p_train = sub.add_parser("train", help="train the fusion head on one fold")
    train_flags(p_train)
    common(p_train)
    p_train.set_defaults(fn=_cmd_train)

    p_eval = sub.add_parser("eval", help="5-fold cross-validation report")
    train_flags(p_eval)
    common(p_eval)
    p_eval.set_defaults(fn=_cmd_eval)

    p_ablate = sub.add_parser("ablate", help="image-only / caption-only / fused comparison")
    train_flags(p_ablate)
    common(p_ablate)
    p_ablate.set_defaults(fn=_cmd_ablate)

    p_trends = sub.add_parser("trends", help="aggregate predictions into trend reports")
    target_flag(p_trends)
    p_trends.add_argument("--features", choices=["files", "stub"], default="stub")
    common(p_trends)
    p_trends.set_defaults(fn=_cmd_trends)

    p_strip = sub.add_parser("strip-captions", help="captions with food-name hashtags removed")
    p_strip.add_argument("--out", default=None, help="write to a file instead of stdout")
    common(p_strip)
    p_strip.set_defaults(fn=_cmd_strip_captions)

    p_freq = sub.add_parser("wordfreq", help="word frequencies over stripped captions")
    p_freq.add_argument("--top", type=int, default=50)
    common(p_freq)
    p_freq.set_defaults(fn=_cmd_wordfreq)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    if getattr(args, "command", None) is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config, seed_override=args.seed)
        return args.fn(cfg, args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FoodTrendsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run())
