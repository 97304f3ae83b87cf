"""Flat binary dataset format for labeled vibration records.

Layout, all little-endian:

    magic  4 bytes  b"FDDB"
    u16    version (1)
    u32    sample rate in Hz
    u16    channel count
    u16    label-table entry count
    per entry:
        u16    label id
        u16    name length in bytes
        bytes  UTF-8 name
    u32    record length in samples (per channel)
    u32    record count
    per record:
        u16    label id
        f64[]  channel-count x record-length samples, channel-major

A record may be a single burst or a longer recording; ingestion re-cuts
records into bursts of the configured length and stride, dropping any
trailing remainder.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .scenario import assign_splits
from .types import Burst, ConditionClass, LabeledDataset

MAGIC = b"FDDB"
VERSION = 1


class DataFormatError(Exception):
    """Base class for dataset-file problems."""

    code = "data-error"


class BadMagicError(DataFormatError):
    code = "bad-magic"


class TruncatedPayloadError(DataFormatError):
    code = "truncated"


class UnknownLabelError(DataFormatError):
    code = "unknown-label"


@dataclass
class FlatFile:
    sample_rate: float
    channels: int
    labels: dict[int, str]
    record_len: int
    records: list[tuple[int, np.ndarray]]  # (label id, [channels, record_len])


def write_flat(
    path,
    records: list[tuple[int, np.ndarray]],
    labels: dict[int, str],
    sample_rate: float,
) -> None:
    if not records:
        raise ValueError("cannot write an empty dataset file")
    first = np.asarray(records[0][1], dtype=np.float64)
    if first.ndim != 2:
        raise ValueError("records must be [channels, length] arrays")
    channels, record_len = first.shape
    chunks = [
        MAGIC,
        struct.pack("<HIHH", VERSION, int(round(sample_rate)), channels, len(labels)),
    ]
    for label_id, name in sorted(labels.items()):
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<HH", label_id, len(raw)))
        chunks.append(raw)
    chunks.append(struct.pack("<II", record_len, len(records)))
    for label_id, samples in records:
        samples = np.ascontiguousarray(samples, dtype=np.float64)
        if samples.shape != (channels, record_len):
            raise ValueError(
                f"record shape {samples.shape} differs from file shape {(channels, record_len)}"
            )
        chunks.append(struct.pack("<H", label_id))
        chunks.append(samples.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def read_flat(path) -> FlatFile:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    if blob[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {blob[:4]!r}, expected {MAGIC!r}")
    off = 4
    try:
        version, rate, channels, n_labels = struct.unpack_from("<HIHH", blob, off)
        off += 10
        if version != VERSION:
            raise DataFormatError(f"{path}: unsupported version {version}")
        labels: dict[int, str] = {}
        for _ in range(n_labels):
            label_id, name_len = struct.unpack_from("<HH", blob, off)
            off += 4
            if off + name_len > len(blob):
                raise TruncatedPayloadError(f"{path}: truncated label table")
            labels[label_id] = blob[off : off + name_len].decode("utf-8")
            off += name_len
        record_len, n_records = struct.unpack_from("<II", blob, off)
        off += 8
    except struct.error as exc:
        raise TruncatedPayloadError(f"{path}: truncated header ({exc})") from exc
    records = []
    stride_bytes = 2 + 8 * channels * record_len
    expected_end = off + n_records * stride_bytes
    if expected_end > len(blob):
        raise TruncatedPayloadError(
            f"{path}: payload ends at byte {len(blob)}, header promises {expected_end}"
        )
    for _ in range(n_records):
        (label_id,) = struct.unpack_from("<H", blob, off)
        off += 2
        n = channels * record_len
        values = np.frombuffer(blob[off : off + 8 * n], dtype="<f8").astype(np.float64)
        off += 8 * n
        records.append((label_id, values.reshape(channels, record_len)))
    return FlatFile(float(rate), channels, labels, record_len, records)


def write_bursts(path, bursts: list[Burst], sample_rate: float | None = None) -> None:
    """Write equal-length bursts as one record each, labels by class index."""
    if not bursts:
        raise ValueError("no bursts to write")
    rate = sample_rate if sample_rate is not None else bursts[0].sample_rate
    class_ids = {cls: i for i, cls in enumerate(ConditionClass)}
    labels = {i: cls.value for cls, i in class_ids.items()}
    records = [(class_ids[b.label], b.samples) for b in bursts]
    write_flat(path, records, labels, rate)


def ingest_flat(
    path,
    manifest: dict[int, ConditionClass],
    burst_len: int,
    stride: int | None = None,
    split_fracs: tuple[float, float, float] = (0.7, 0.15, 0.15),
    seed: int = 0,
) -> LabeledDataset:
    """Read a flat file and window its records into labeled bursts.

    Windows start every ``stride`` samples (default: non-overlapping) and a
    trailing remainder shorter than ``burst_len`` is discarded.  A record
    whose label id is missing from ``manifest`` is a distinct error.
    """
    stride = burst_len if stride is None else stride
    if burst_len < 1 or stride < 1:
        raise ValueError("burst length and stride must be positive")
    flat = read_flat(path)
    bursts: list[Burst] = []
    burst_id = 0
    for label_id, samples in flat.records:
        if label_id not in manifest:
            raise UnknownLabelError(
                f"{path}: record label id {label_id} not in manifest "
                f"(file calls it {flat.labels.get(label_id, '?')!r})"
            )
        cls = manifest[label_id]
        start = 0
        while start + burst_len <= flat.record_len:
            bursts.append(
                Burst(
                    samples=samples[:, start : start + burst_len].copy(),
                    label=cls,
                    sample_rate=flat.sample_rate,
                    burst_id=burst_id,
                    provenance="real",
                )
            )
            burst_id += 1
            start += stride
    split = assign_splits(bursts, split_fracs, np.random.default_rng(seed))
    return LabeledDataset(bursts, split)
