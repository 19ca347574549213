import io
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warmup import ComplexityRecord, PrototypeModel, TokenEmbeddingSet, formats
from warmup.errors import (
    ArgumentError,
    FormatError,
    TruncatedError,
    ValidationError,
)
from tests.conftest import random_set


def roundtrip(tset: TokenEmbeddingSet) -> TokenEmbeddingSet:
    buf = io.BytesIO()
    formats.write_embeddings(tset, buf)
    buf.seek(0)
    return formats.read_embeddings(buf)


def test_smallest_legal_set_layout():
    tset = TokenEmbeddingSet(
        data=np.zeros((1, 1, 2), dtype=np.float32), image_ids=("only",)
    )
    buf = io.BytesIO()
    formats.write_embeddings(tset, buf)
    raw = buf.getvalue()
    # 8 magic + 8 N + 4 L + 4 d + 8 data, then the id block
    assert raw[:8] == b"TOKEMB01"
    assert struct.unpack_from("<QII", raw, 8) == (1, 1, 2)
    assert len(raw) == 8 + 8 + 4 + 4 + 8 + 4 + len(b"only")
    assert roundtrip(tset) == tset


def test_random_roundtrip_is_bit_exact(rng):
    tset = random_set(rng, n=2, l=4, d=3)
    back = roundtrip(tset)
    assert back == tset
    assert back.data.tobytes() == tset.data.tobytes()


def test_nan_payload_writes_but_read_rejects():
    data = np.zeros((2, 1, 2), dtype=np.float32)
    data[1, 0, 1] = np.nan
    tset = TokenEmbeddingSet(data=data, image_ids=("a", "b"))
    buf = io.BytesIO()
    formats.write_embeddings(tset, buf)  # write succeeds
    buf.seek(0)
    with pytest.raises(ValidationError, match="image 1"):
        formats.read_embeddings(buf)


def test_inf_injected_by_bit_pattern_rejected(rng):
    tset = random_set(rng, n=3, l=2, d=2)
    buf = io.BytesIO()
    formats.write_embeddings(tset, buf)
    raw = bytearray(buf.getvalue())
    # overwrite the first float of image 2 with +inf bits
    offset = 8 + 16 + 2 * 2 * 2 * 4
    raw[offset : offset + 4] = struct.pack("<f", np.inf)
    with pytest.raises(ValidationError, match="image 2"):
        formats.read_embeddings(io.BytesIO(bytes(raw)))


def test_bad_magic_is_a_format_error():
    stream = io.BytesIO(b"TOKEMB99" + b"\x00" * 64)
    with pytest.raises(FormatError, match="magic"):
        formats.read_embeddings(stream)


def test_truncation_reports_the_shortfall(rng):
    tset = random_set(rng, n=2, l=3, d=4)
    buf = io.BytesIO()
    formats.write_embeddings(tset, buf)
    cut = 8 + 16 + 10  # mid-way into the token data
    stream = io.BytesIO(buf.getvalue()[:cut])
    with pytest.raises(TruncatedError, match=r"expected 96 bytes, got 10"):
        formats.read_embeddings(stream)


def test_declared_shape_must_match_payload(rng):
    tset = random_set(rng, n=2, l=2, d=2)
    buf = io.BytesIO()
    formats.write_embeddings(tset, buf)
    raw = bytearray(buf.getvalue())
    struct.pack_into("<Q", raw, 8, 5)  # claim 5 images, payload has 2
    with pytest.raises(TruncatedError):
        formats.read_embeddings(io.BytesIO(bytes(raw)))


def test_trailing_garbage_rejected(rng):
    tset = random_set(rng, n=1, l=1, d=1)
    buf = io.BytesIO()
    formats.write_embeddings(tset, buf)
    stream = io.BytesIO(buf.getvalue() + b"x")
    with pytest.raises(FormatError, match="trailing"):
        formats.read_embeddings(stream)


def test_duplicate_ids_rejected_at_construction():
    with pytest.raises(ValidationError, match="unique"):
        TokenEmbeddingSet(data=np.zeros((2, 1, 1), dtype=np.float32), image_ids=("a", "a"))


def test_empty_shape_rejected():
    with pytest.raises(ArgumentError):
        TokenEmbeddingSet(data=np.zeros((0, 1, 1), dtype=np.float32))


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(1, 5),
    l=st.integers(1, 4),
    d=st.integers(1, 6),
    seed=st.integers(0, 2**31),
)
def test_roundtrip_property(n, l, d, seed):
    gen = np.random.default_rng(seed)
    data = (gen.standard_normal((n, l, d)) * 100).astype(np.float32)
    ids = tuple(f"id-{seed}-{i}" for i in range(n))
    tset = TokenEmbeddingSet(data=data, image_ids=ids)
    assert roundtrip(tset) == tset


def make_records():
    return [
        ComplexityRecord("a", 0.5, 0.4, 2.0, 0, 0.8, 0.0),
        ComplexityRecord("b", 0.25, 0.1, 3.0, 0, 0.30000000000000004, 1.0),
        ComplexityRecord("c", 1.0, 0.9, 0.0, 1, 0.0, 0.0),
    ]


def test_scores_roundtrip(tmp_path):
    path = tmp_path / "scores.jsonl"
    records = make_records()
    formats.write_scores(records, path)
    back = formats.read_scores(path, expected_count=3)
    assert back == records


def test_scores_product_invariant_checked(tmp_path):
    path = tmp_path / "scores.jsonl"
    path.write_text(
        '{"image_id":"a","r_bg":0.5,"omega_dom":0.4,"omega_prot":2.0,'
        '"cluster_id":0,"omega":0.9,"omega_norm":0.0}\n'
    )
    with pytest.raises(ValidationError, match="omega"):
        formats.read_scores(path)


def test_scores_count_mismatch(tmp_path):
    path = tmp_path / "scores.jsonl"
    formats.write_scores(make_records(), path)
    with pytest.raises(ValidationError, match="expected 5"):
        formats.read_scores(path, expected_count=5)


def test_scores_empty_file_rejected(tmp_path):
    path = tmp_path / "scores.jsonl"
    path.write_text("")
    with pytest.raises(ValidationError, match="no records"):
        formats.read_scores(path)


def test_scores_bad_json_names_the_line(tmp_path):
    path = tmp_path / "scores.jsonl"
    formats.write_scores(make_records()[:1], path)
    with open(path, "a") as out:
        out.write("not json\n")
    with pytest.raises(FormatError, match="line 2"):
        formats.read_scores(path)


def test_prototype_dump_roundtrip(tmp_path):
    centroids = np.arange(12, dtype=np.float64).reshape(4, 3)
    model = PrototypeModel(centroids=centroids)
    path = tmp_path / "protos.bin"
    formats.write_prototypes(model, path)
    raw = path.read_bytes()
    assert raw[:7] == b"PROTO01"
    assert struct.unpack_from("<II", raw, 7) == (4, 3)
    back = formats.read_prototypes(path)
    # values pass through float32 on disk
    assert np.array_equal(back.centroids, centroids.astype(np.float32).astype(np.float64))


def test_prototype_dump_bad_magic(tmp_path):
    path = tmp_path / "protos.bin"
    path.write_bytes(b"PROTO99" + b"\x00" * 16)
    with pytest.raises(FormatError, match="magic"):
        formats.read_prototypes(path)


def test_masks_dump(tmp_path, planted):
    from warmup import fit_saliency, foreground_mask, saliency_scores

    embeddings, _ = planted
    model = fit_saliency(embeddings)
    masks = foreground_mask(saliency_scores(embeddings, model), model.threshold)
    path = tmp_path / "masks.jsonl"
    formats.write_masks(masks, embeddings.image_ids, path)
    import json

    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert len(rows) == embeddings.n_images
    first = rows[0]
    assert set(first) == {"image_id", "mask", "r_bg"}
    assert len(first["mask"]) == embeddings.tokens_per_image
    assert first["r_bg"] == pytest.approx(1 - first["mask"].count("1") / embeddings.tokens_per_image)
