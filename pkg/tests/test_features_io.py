import hashlib
import struct

import numpy as np
import pytest

from foodtrends.errors import FormatError, ValidationError
from foodtrends.fusion.features import (
    MAGIC,
    VERSION,
    FeatureTable,
    Modality,
    read_feature_file,
    stub_feature_table,
    write_feature_file,
    zero_filled_table,
)


def table(rows, modality=Modality.IMAGE, dim=4):
    return FeatureTable(modality, dim, rows)


def two_row_table():
    return table(
        {
            "ex-1": np.array([1.0, 2.0, 3.0, 4.0], dtype=np.float32),
            "ex-2": np.array([-1.5, 0.0, 0.25, 8.0], dtype=np.float32),
        }
    )


def hand_packed(modality_code, dim, records):
    """Independent serializer used as the byte-level oracle."""
    out = [struct.pack("<8sIBIQ", MAGIC, VERSION, modality_code, dim, len(records))]
    for example_id, values in records:
        encoded = example_id.encode("utf-8")
        out.append(struct.pack("<I", len(encoded)))
        out.append(encoded)
        out.append(struct.pack(f"<{dim}f", *values))
    return b"".join(out)


def test_written_bytes_match_hand_packed_oracle(tmp_path):
    path = tmp_path / "img.feat"
    write_feature_file(two_row_table(), path)
    expected = hand_packed(
        0, 4, [("ex-1", [1.0, 2.0, 3.0, 4.0]), ("ex-2", [-1.5, 0.0, 0.25, 8.0])]
    )
    assert path.read_bytes() == expected
    # header is exactly 25 bytes: 8s magic + u32 + u8 + u32 + u64, no padding
    assert len(expected) == 25 + 2 * (4 + 4 + 16)


def test_round_trip_preserves_table(tmp_path):
    path = tmp_path / "img.feat"
    original = two_row_table()
    write_feature_file(original, path)
    loaded = read_feature_file(path)
    assert loaded.modality is Modality.IMAGE
    assert loaded.dim == 4
    assert loaded.ids() == original.ids()
    for eid in original.ids():
        assert np.array_equal(loaded.get(eid), original.get(eid))


def test_round_trip_is_bit_exact_at_image_dims(tmp_path):
    rng = np.random.default_rng(0)
    rows = {f"img-{i}": rng.standard_normal(2048, dtype=np.float32) for i in range(5)}
    path1, path2 = tmp_path / "a.feat", tmp_path / "b.feat"
    write_feature_file(table(rows, dim=2048), path1)
    write_feature_file(read_feature_file(path1), path2)
    assert hashlib.sha256(path1.read_bytes()).hexdigest() == hashlib.sha256(
        path2.read_bytes()
    ).hexdigest()


def test_text_modality_code(tmp_path):
    path = tmp_path / "txt.feat"
    write_feature_file(table({"t": [0, 0, 0, 0]}, modality=Modality.TEXT), path)
    assert path.read_bytes()[12] == 1
    assert read_feature_file(path).modality is Modality.TEXT


def test_truncated_header(tmp_path):
    path = tmp_path / "bad.feat"
    path.write_bytes(b"KENYFEAT\x01")
    with pytest.raises(FormatError, match="truncated header at byte 9"):
        read_feature_file(path)


def test_truncation_errors_name_byte_offsets(tmp_path):
    full = hand_packed(0, 2, [("ab", [1.0, 2.0])])
    # layout: header 25, id_len 25..29, id 29..31, values 31..39
    path = tmp_path / "bad.feat"

    path.write_bytes(full[:27])
    with pytest.raises(FormatError, match="byte 25 reading id length of record 0"):
        read_feature_file(path)

    path.write_bytes(full[:30])
    with pytest.raises(FormatError, match="byte 29 reading id of record 0"):
        read_feature_file(path)

    path.write_bytes(full[:35])
    with pytest.raises(FormatError, match="byte 31 reading values of record 0"):
        read_feature_file(path)


def test_bad_magic_and_version(tmp_path):
    path = tmp_path / "bad.feat"
    good = hand_packed(0, 1, [("a", [1.0])])

    path.write_bytes(b"NOTMAGIC" + good[8:])
    with pytest.raises(FormatError, match="bad magic"):
        read_feature_file(path)

    path.write_bytes(good[:8] + struct.pack("<I", 2) + good[12:])
    with pytest.raises(FormatError, match="unsupported version 2"):
        read_feature_file(path)


def test_unknown_modality_and_zero_dim(tmp_path):
    path = tmp_path / "bad.feat"

    path.write_bytes(struct.pack("<8sIBIQ", MAGIC, VERSION, 7, 1, 0))
    with pytest.raises(FormatError, match="unknown modality code 7"):
        read_feature_file(path)

    path.write_bytes(struct.pack("<8sIBIQ", MAGIC, VERSION, 0, 0, 0))
    with pytest.raises(FormatError, match="dim must be positive"):
        read_feature_file(path)


def test_duplicate_ids_rejected(tmp_path):
    path = tmp_path / "bad.feat"
    path.write_bytes(hand_packed(0, 1, [("a", [1.0]), ("a", [2.0])]))
    with pytest.raises(FormatError, match="duplicate id 'a' at record 1"):
        read_feature_file(path)


def test_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "bad.feat"
    path.write_bytes(hand_packed(0, 1, [("a", [1.0])]) + b"junk")
    with pytest.raises(FormatError, match="4 trailing bytes after 1 records"):
        read_feature_file(path)


def test_non_finite_values_rejected(tmp_path):
    path = tmp_path / "bad.feat"
    path.write_bytes(hand_packed(0, 2, [("a", [1.0, float("nan")])]))
    with pytest.raises(FormatError, match="non-finite"):
        read_feature_file(path)


def test_invalid_utf8_id_rejected(tmp_path):
    path = tmp_path / "bad.feat"
    header = struct.pack("<8sIBIQ", MAGIC, VERSION, 0, 1, 1)
    record = struct.pack("<I", 2) + b"\xff\xfe" + struct.pack("<f", 1.0)
    path.write_bytes(header + record)
    with pytest.raises(FormatError, match="not valid UTF-8"):
        read_feature_file(path)


def test_missing_file(tmp_path):
    with pytest.raises(FormatError, match="cannot read feature file"):
        read_feature_file(tmp_path / "nope.feat")


def test_empty_table_round_trips(tmp_path):
    path = tmp_path / "empty.feat"
    write_feature_file(table({}, dim=16), path)
    loaded = read_feature_file(path)
    assert len(loaded) == 0 and loaded.dim == 16


# -- FeatureTable validation -----------------------------------------------------


def test_table_validation():
    with pytest.raises(ValidationError, match="dim must be positive"):
        FeatureTable(Modality.IMAGE, 0, {})
    with pytest.raises(ValidationError, match="shape"):
        FeatureTable(Modality.IMAGE, 3, {"a": [1.0, 2.0]})
    with pytest.raises(ValidationError, match="non-finite"):
        FeatureTable(Modality.IMAGE, 1, {"a": [float("inf")]})
    with pytest.raises(ValidationError, match="non-empty"):
        FeatureTable(Modality.IMAGE, 1, {"": [1.0]})


def test_table_normalizes_to_float32():
    t = FeatureTable(Modality.IMAGE, 2, {"a": [1, 2]})
    assert t.get("a").dtype == np.float32


# -- stubs -------------------------------------------------------------------------


def test_stub_rows_depend_only_on_identity():
    a = stub_feature_table(["x", "y"], Modality.IMAGE, 8, seed=3)
    b = stub_feature_table(["y"], Modality.IMAGE, 8, seed=3)
    assert np.array_equal(a.get("y"), b.get("y"))
    # modality and seed both separate the streams
    c = stub_feature_table(["y"], Modality.TEXT, 8, seed=3)
    d = stub_feature_table(["y"], Modality.IMAGE, 8, seed=4)
    assert not np.array_equal(a.get("y"), c.get("y"))
    assert not np.array_equal(a.get("y"), d.get("y"))


def test_stub_rows_are_unit_scale():
    t = stub_feature_table([f"e{i}" for i in range(200)], Modality.IMAGE, 32, seed=0)
    values = np.concatenate([t.get(e) for e in t.ids()])
    assert abs(float(values.mean())) < 0.05
    assert 0.9 < float(values.std()) < 1.1


def test_zero_filled_table():
    t = zero_filled_table(["a", "b"], Modality.TEXT, 4)
    assert np.array_equal(t.get("a"), np.zeros(4, dtype=np.float32))
    assert t.ids() == ["a", "b"]
