import numpy as np
import pytest
from PIL import Image

from featexport import ExportConfig, ExportError, export_features
from conftest import add_media, read_kenyfeat_raw, write_manifest


def image_cfg(corpus, tmp_path, **overrides):
    manifest, media, _ = corpus
    kwargs = dict(
        manifest=manifest, media_dir=media, modality="image",
        out=tmp_path / "img.kenyfeat", seed=3,
    )
    kwargs.update(overrides)
    return ExportConfig(**kwargs)


def text_cfg(corpus, tmp_path, **overrides):
    manifest, media, _ = corpus
    kwargs = dict(
        manifest=manifest, media_dir=media, modality="text",
        out=tmp_path / "txt.kenyfeat",
    )
    kwargs.update(overrides)
    return ExportConfig(**kwargs)


# -- image exports ---------------------------------------------------------


def test_image_export_one_row_per_example(corpus, tmp_path):
    result = export_features(image_cfg(corpus, tmp_path))
    assert result.written == 4
    assert result.skipped == ()
    assert result.errors_file is None
    modality, dim, rows = read_kenyfeat_raw(result.out)
    assert (modality, dim) == (0, 2048)
    assert list(rows) == ["e0", "e1", "e2", "e3"]
    for vec in rows.values():
        assert np.all(np.isfinite(vec))
        assert np.any(vec)


def test_image_export_deterministic(corpus, tmp_path):
    first = export_features(image_cfg(corpus, tmp_path, out=tmp_path / "a.kenyfeat"))
    second = export_features(image_cfg(corpus, tmp_path, out=tmp_path / "b.kenyfeat"))
    assert first.out.read_bytes() == second.out.read_bytes()


def test_augmented_export_deterministic_per_seed(corpus, tmp_path):
    one = export_features(image_cfg(corpus, tmp_path, augment=True, out=tmp_path / "a"))
    two = export_features(image_cfg(corpus, tmp_path, augment=True, out=tmp_path / "b"))
    assert one.out.read_bytes() == two.out.read_bytes()

    other_seed = export_features(
        image_cfg(corpus, tmp_path, augment=True, seed=4, out=tmp_path / "c")
    )
    assert other_seed.out.read_bytes() != one.out.read_bytes()


def test_augmentation_changes_features(corpus, tmp_path):
    plain = export_features(image_cfg(corpus, tmp_path, out=tmp_path / "plain"))
    augmented = export_features(
        image_cfg(corpus, tmp_path, augment=True, out=tmp_path / "aug")
    )
    assert plain.out.read_bytes() != augmented.out.read_bytes()
    # row ids stay aligned either way
    _, _, plain_rows = read_kenyfeat_raw(plain.out)
    _, _, aug_rows = read_kenyfeat_raw(augmented.out)
    assert list(plain_rows) == list(aug_rows)


def test_undecodable_media_skipped_and_listed(tmp_path):
    media = tmp_path / "media"
    good = add_media(media, Image.new("RGB", (50, 50), "green"))
    bad_hash = "00" + "ab" * 31
    bad_path = media / bad_hash[:2] / bad_hash
    bad_path.parent.mkdir(parents=True, exist_ok=True)
    bad_path.write_bytes(b"this is not a jpeg")
    manifest = tmp_path / "m.jsonl"
    write_manifest(
        manifest,
        ["ugali"],
        [("ok", good, "caption", 0), ("broken", bad_hash, "caption", 0),
         ("absent", "ff" * 32, "caption", 0)],
    )

    result = export_features(
        ExportConfig(manifest=manifest, media_dir=media, modality="image",
                     out=tmp_path / "img.kenyfeat")
    )
    assert result.written == 1
    assert [eid for eid, _ in result.skipped] == ["broken", "absent"]
    _, _, rows = read_kenyfeat_raw(result.out)
    assert list(rows) == ["ok"]

    assert result.errors_file == tmp_path / "img.kenyfeat.errors"
    lines = result.errors_file.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2
    assert lines[0].startswith("broken\t")
    assert lines[1].startswith("absent\t")


def test_clean_rerun_clears_stale_sidecar(tmp_path):
    media = tmp_path / "media"
    good = add_media(media, Image.new("RGB", (40, 40), "blue"))
    broken_hash = "11" + "cd" * 31
    broken_path = media / broken_hash[:2] / broken_hash
    broken_path.parent.mkdir(parents=True, exist_ok=True)
    broken_path.write_bytes(b"junk")
    manifest = tmp_path / "m.jsonl"
    write_manifest(manifest, [], [("ok", good, "", 0), ("broken", broken_hash, "", 0)])
    cfg = ExportConfig(manifest=manifest, media_dir=media, modality="image",
                       out=tmp_path / "img.kenyfeat")

    first = export_features(cfg)
    assert first.errors_file is not None and first.errors_file.exists()

    # repair the media, re-export: the old skip list must not linger
    img_bytes = (media / good[:2] / good).read_bytes()
    broken_path.write_bytes(img_bytes)
    second = export_features(cfg)
    assert second.written == 2
    assert second.errors_file is None
    assert not first.errors_file.exists()


def test_image_dim_must_match_backbone(corpus, tmp_path):
    with pytest.raises(ExportError, match="does not match resnext101_32x8d"):
        export_features(image_cfg(corpus, tmp_path, image_dim=1024))


def test_missing_media_dir_rejected(corpus, tmp_path):
    cfg = image_cfg(corpus, tmp_path, media_dir=tmp_path / "nowhere")
    with pytest.raises(ExportError, match="not a directory"):
        export_features(cfg)


def test_unknown_image_backbone_rejected(corpus, tmp_path):
    with pytest.raises(ExportError, match="unsupported image backbone"):
        export_features(image_cfg(corpus, tmp_path, backbone="resnet18"))


# -- text exports ----------------------------------------------------------


def test_text_export_covers_every_example(corpus, tmp_path):
    result = export_features(text_cfg(corpus, tmp_path))
    assert result.written == 4
    modality, dim, rows = read_kenyfeat_raw(result.out)
    assert (modality, dim) == (1, 768)
    assert list(rows) == ["e0", "e1", "e2", "e3"]


def test_empty_caption_row_is_zero(corpus, tmp_path):
    result = export_features(text_cfg(corpus, tmp_path))
    _, _, rows = read_kenyfeat_raw(result.out)
    assert not np.any(rows["e1"])  # e1 has no caption
    for eid in ("e0", "e2", "e3"):
        assert np.any(rows[eid])


def test_class_hashtags_do_not_reach_the_encoder(tmp_path):
    # captions identical except for a class-name hashtag must encode equally
    media = tmp_path / "media"
    digest = add_media(media, Image.new("RGB", (30, 30), "white"))
    manifest = tmp_path / "m.jsonl"
    write_manifest(
        manifest,
        ["ugali"],
        [("tagged", digest, "lunch today #ugali", 0),
         ("plain", digest + "", "lunch today", 0)],
    )
    result = export_features(
        ExportConfig(manifest=manifest, media_dir=media, modality="text",
                     out=tmp_path / "t.kenyfeat")
    )
    _, _, rows = read_kenyfeat_raw(result.out)
    assert np.array_equal(rows["tagged"], rows["plain"])


def test_text_export_deterministic(corpus, tmp_path):
    a = export_features(text_cfg(corpus, tmp_path, out=tmp_path / "a"))
    b = export_features(text_cfg(corpus, tmp_path, out=tmp_path / "b"))
    assert a.out.read_bytes() == b.out.read_bytes()


def test_text_dim_must_match_encoder(corpus, tmp_path):
    with pytest.raises(ExportError, match="does not match hashed-bow"):
        export_features(text_cfg(corpus, tmp_path, text_dim=512))


# -- config validation -----------------------------------------------------


def test_bad_modality_rejected(tmp_path):
    with pytest.raises(ExportError, match="modality must be one of"):
        ExportConfig(manifest=tmp_path / "m", media_dir=tmp_path, modality="audio",
                     out=tmp_path / "o")


def test_augmented_text_rejected(tmp_path):
    with pytest.raises(ExportError, match="image-space"):
        ExportConfig(manifest=tmp_path / "m", media_dir=tmp_path, modality="text",
                     out=tmp_path / "o", augment=True)


def test_nonpositive_dims_rejected(tmp_path):
    with pytest.raises(ExportError, match="dims must be positive"):
        ExportConfig(manifest=tmp_path / "m", media_dir=tmp_path, modality="image",
                     out=tmp_path / "o", image_dim=0)
