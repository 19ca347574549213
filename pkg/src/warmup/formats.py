"""Bit-exact file formats.

``.tokemb`` token embedding sets
    magic ``TOKEMB01`` (8 bytes), then N as u64, L and d as u32 (all
    little-endian), then N*L*d little-endian float32 values laid out
    image-major / token-major / dimension-minor, then one length-prefixed
    UTF-8 entry per image id (u32 byte length + bytes). Image ids trail the
    numeric payload so the latter can be streamed.

``.scores.jsonl`` complexity records
    One JSON object per line with keys image_id, r_bg, omega_dom,
    omega_prot, cluster_id, omega, omega_norm. Human-inspectable and
    diff-friendly.

``.protos.bin`` centroid dumps
    magic ``PROTO01`` (7 bytes), K as u32, d as u32, then K*d little-endian
    float32 centroid values.

``.masks.jsonl`` debug dumps
    One JSON object per line: image_id, mask as a 0/1 string, r_bg.

Loaders validate eagerly: every downstream formula silently corrupts on
NaN, so non-finite values are rejected at read time.
"""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path
from typing import BinaryIO, Iterable

import numpy as np

from .complexity import ComplexityRecord, PrototypeModel
from .embeddings import TokenEmbeddingSet
from .errors import DataError, FormatError, TruncatedError, ValidationError
from .saliency import ForegroundMasks

TOKEMB_MAGIC = b"TOKEMB01"
PROTO_MAGIC = b"PROTO01"

_HEADER = struct.Struct("<QII")  # N, L, d
_U32 = struct.Struct("<I")

SCORE_KEYS = ("image_id", "r_bg", "omega_dom", "omega_prot", "cluster_id", "omega", "omega_norm")


class _CountingWriter:
    """Wraps a sink so write failures can report the byte offset."""

    def __init__(self, sink: BinaryIO):
        self._sink = sink
        self.offset = 0

    def write(self, payload: bytes):
        try:
            self._sink.write(payload)
        except OSError as exc:
            raise DataError(f"write failed at byte offset {self.offset}: {exc}") from exc
        self.offset += len(payload)


def _read_exact(stream: BinaryIO, count: int, what: str) -> bytes:
    try:
        payload = stream.read(count)
    except OSError as exc:
        raise DataError(f"read failed while loading {what}: {exc}") from exc
    if payload is None or len(payload) < count:
        got = 0 if payload is None else len(payload)
        raise TruncatedError(f"stream truncated in {what}: expected {count} bytes, got {got}")
    return payload


def write_embeddings(embeddings: TokenEmbeddingSet, destination) -> None:
    """Serialize a token embedding set to a path or binary sink."""
    if isinstance(destination, (str, Path)):
        with open(destination, "wb") as sink:
            write_embeddings(embeddings, sink)
        return
    out = _CountingWriter(destination)
    n, l, d = embeddings.data.shape
    out.write(TOKEMB_MAGIC)
    out.write(_HEADER.pack(n, l, d))
    out.write(embeddings.data.astype("<f4", copy=False).tobytes(order="C"))
    for image_id in embeddings.image_ids:
        raw = image_id.encode("utf-8")
        out.write(_U32.pack(len(raw)))
        out.write(raw)


def read_embeddings(source) -> TokenEmbeddingSet:
    """Load and validate a token embedding set from a path or binary stream."""
    if isinstance(source, (str, Path)):
        with open(source, "rb") as stream:
            return read_embeddings(stream)
    magic = _read_exact(source, len(TOKEMB_MAGIC), "magic")
    if magic != TOKEMB_MAGIC:
        raise FormatError(f"bad magic: expected {TOKEMB_MAGIC!r}, got {magic!r}")
    n, l, d = _HEADER.unpack(_read_exact(source, _HEADER.size, "header"))
    if n < 1 or l < 1 or d < 1:
        raise ValidationError(f"header declares empty set: N={n}, L={l}, d={d}")
    payload_bytes = n * l * d * 4
    raw = _read_exact(source, payload_bytes, "token data")
    data = np.frombuffer(raw, dtype="<f4").reshape(n, l, d)
    image_ids = []
    for i in range(n):
        (length,) = _U32.unpack(_read_exact(source, 4, f"id length of image {i}"))
        raw_id = _read_exact(source, length, f"id of image {i}")
        try:
            image_ids.append(raw_id.decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise FormatError(f"image id {i} is not valid UTF-8") from exc
    if source.read(1):
        raise FormatError("trailing bytes after image id block")
    loaded = TokenEmbeddingSet(data=data, image_ids=tuple(image_ids))
    loaded.check_finite()
    return loaded


def _require(record: dict, key: str, line_no: int):
    if key not in record:
        raise FormatError(f"score record on line {line_no} is missing {key!r}")
    return record[key]


def write_scores(records: Iterable[ComplexityRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as out:
        for rec in records:
            out.write(
                json.dumps(
                    {
                        "image_id": rec.image_id,
                        "r_bg": rec.r_bg,
                        "omega_dom": rec.omega_dom,
                        "omega_prot": rec.omega_prot,
                        "cluster_id": rec.cluster_id,
                        "omega": rec.omega,
                        "omega_norm": rec.omega_norm,
                    },
                    separators=(",", ":"),
                )
            )
            out.write("\n")


def read_scores(path, expected_count: int | None = None) -> list[ComplexityRecord]:
    """Load a score file, re-checking every record-level invariant."""
    records = []
    seen_ids = set()
    with open(path, "r", encoding="utf-8") as stream:
        for line_no, line in enumerate(stream, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"line {line_no} is not valid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise FormatError(f"line {line_no} is not a JSON object")
            try:
                rec = ComplexityRecord(
                    image_id=str(_require(obj, "image_id", line_no)),
                    r_bg=float(_require(obj, "r_bg", line_no)),
                    omega_dom=float(_require(obj, "omega_dom", line_no)),
                    omega_prot=float(_require(obj, "omega_prot", line_no)),
                    cluster_id=int(_require(obj, "cluster_id", line_no)),
                    omega=float(_require(obj, "omega", line_no)),
                    omega_norm=float(_require(obj, "omega_norm", line_no)),
                )
            except (TypeError, ValueError) as exc:
                raise FormatError(f"line {line_no} has a malformed field: {exc}") from exc
            _validate_record(rec, line_no)
            if rec.image_id in seen_ids:
                raise ValidationError(f"duplicate image id {rec.image_id!r} on line {line_no}")
            seen_ids.add(rec.image_id)
            records.append(rec)
    if not records:
        raise ValidationError(f"score file {path} holds no records")
    if expected_count is not None and len(records) != expected_count:
        raise ValidationError(
            f"score file holds {len(records)} records, expected {expected_count}"
        )
    return records


def _validate_record(rec: ComplexityRecord, line_no: int):
    for key, value in (
        ("r_bg", rec.r_bg),
        ("omega_dom", rec.omega_dom),
        ("omega_prot", rec.omega_prot),
        ("omega", rec.omega),
        ("omega_norm", rec.omega_norm),
    ):
        if not math.isfinite(value):
            raise ValidationError(f"{key} is not finite on line {line_no}")
    if not 0.0 <= rec.r_bg <= 1.0:
        raise ValidationError(f"r_bg out of [0,1] on line {line_no}: {rec.r_bg}")
    if not 0.0 < rec.omega_dom < 1.0:
        raise ValidationError(f"omega_dom out of (0,1) on line {line_no}: {rec.omega_dom}")
    if rec.omega_prot < 0.0:
        raise ValidationError(f"omega_prot negative on line {line_no}: {rec.omega_prot}")
    if rec.cluster_id < 0:
        raise ValidationError(f"cluster_id negative on line {line_no}: {rec.cluster_id}")
    if not 0.0 <= rec.omega_norm <= 1.0:
        raise ValidationError(f"omega_norm out of [0,1] on line {line_no}: {rec.omega_norm}")
    product = rec.omega_dom * rec.omega_prot
    tol = 1e-6 * max(abs(rec.omega), abs(product), 1e-300)
    if abs(rec.omega - product) > tol:
        raise ValidationError(
            f"omega != omega_dom * omega_prot on line {line_no}: "
            f"{rec.omega} vs {product}"
        )


def write_prototypes(model: PrototypeModel, path) -> None:
    """Dump centroids as float32; metadata is not persisted."""
    centroids = np.asarray(model.centroids, dtype="<f4")
    with open(path, "wb") as sink:
        out = _CountingWriter(sink)
        out.write(PROTO_MAGIC)
        out.write(_U32.pack(centroids.shape[0]))
        out.write(_U32.pack(centroids.shape[1]))
        out.write(centroids.tobytes(order="C"))


def read_prototypes(path) -> PrototypeModel:
    with open(path, "rb") as stream:
        magic = _read_exact(stream, len(PROTO_MAGIC), "magic")
        if magic != PROTO_MAGIC:
            raise FormatError(f"bad magic: expected {PROTO_MAGIC!r}, got {magic!r}")
        (k,) = _U32.unpack(_read_exact(stream, 4, "centroid count"))
        (d,) = _U32.unpack(_read_exact(stream, 4, "dimension"))
        if k < 1 or d < 1:
            raise ValidationError(f"header declares empty model: K={k}, d={d}")
        raw = _read_exact(stream, k * d * 4, "centroid data")
        if stream.read(1):
            raise FormatError("trailing bytes after centroid data")
    centroids = np.frombuffer(raw, dtype="<f4").reshape(k, d).astype(np.float64)
    if not np.isfinite(centroids).all():
        raise ValidationError("centroid dump holds non-finite values")
    return PrototypeModel(centroids=centroids)


def write_masks(masks: ForegroundMasks, image_ids: Iterable[str], path) -> None:
    ratios = masks.bg_ratios
    with open(path, "w", encoding="utf-8") as out:
        for i, image_id in enumerate(image_ids):
            bits = "".join("1" if v else "0" for v in masks.mask[i])
            out.write(
                json.dumps(
                    {"image_id": image_id, "mask": bits, "r_bg": float(ratios[i])},
                    separators=(",", ":"),
                )
            )
            out.write("\n")
