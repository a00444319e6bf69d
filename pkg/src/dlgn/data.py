"""Dataset ingestion: ``parity:<n>``, ``idx:<images>,<labels>`` and ``csv:<path>``."""

from __future__ import annotations

import csv
import gzip
import itertools
import struct

import numpy as np

from .train import Dataset

MAX_PARITY_BITS = 20
IDX_UBYTE = 0x08


class DatasetError(ValueError):
    pass


def parity_dataset(n: int) -> Dataset:
    if not 1 <= n <= MAX_PARITY_BITS:
        raise DatasetError(f"parity width must be in 1..{MAX_PARITY_BITS}, got {n}")
    x = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.float64)
    return Dataset(x, x.sum(axis=1).astype(np.int64) % 2, 2)


def _open(path: str):
    return gzip.open(path, "rb") if path.endswith(".gz") else open(path, "rb")


def read_idx(path: str) -> np.ndarray:
    """Read an IDX file of unsigned bytes (big-endian header)."""
    with _open(path) as fh:
        data = fh.read()
    if len(data) < 4:
        raise DatasetError(f"{path}: truncated IDX header")
    zero, dtype, ndim = struct.unpack(">HBB", data[:4])
    if zero != 0 or dtype != IDX_UBYTE or ndim < 1:
        raise DatasetError(f"{path}: bad IDX magic number 0x{int.from_bytes(data[:4], 'big'):08x}")
    head = 4 + 4 * ndim
    if len(data) < head:
        raise DatasetError(f"{path}: truncated IDX dimensions")
    dims = struct.unpack(f">{ndim}I", data[4:head])
    count = int(np.prod(dims))
    if len(data) - head != count:
        raise DatasetError(f"{path}: expected {count} data bytes for shape {dims}, "
                           f"found {len(data) - head}")
    return np.frombuffer(data, dtype=np.uint8, offset=head).reshape(dims)


def idx_dataset(images_path: str, labels_path: str) -> Dataset:
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if images.ndim < 2 or labels.ndim != 1:
        raise DatasetError("IDX images need >= 2 dimensions and labels exactly 1")
    if images.shape[0] != labels.shape[0]:
        raise DatasetError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    x = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    y = labels.astype(np.int64)
    return Dataset(x, y, int(y.max()) + 1 if len(y) else 1)


def csv_dataset(path: str) -> Dataset:
    rows, labels = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise DatasetError(f"{path}: need a header with at least one feature and a label")
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise DatasetError(f"{path}: row {lineno} has {len(rec)} fields, expected {len(header)}")
            try:
                label = int(rec[-1])
            except ValueError:
                raise DatasetError(f"{path}: row {lineno}: label {rec[-1]!r} is not an integer") from None
            if label < 0:
                raise DatasetError(f"{path}: row {lineno}: negative label")
            try:
                feats = [float(v) for v in rec[:-1]]
            except ValueError:
                raise DatasetError(f"{path}: row {lineno}: non-numeric feature") from None
            if any(not 0.0 <= f <= 1.0 for f in feats):
                raise DatasetError(f"{path}: row {lineno}: feature outside [0, 1]")
            rows.append(feats)
            labels.append(label)
    x = np.array(rows, dtype=np.float64).reshape(len(rows), len(header) - 1)
    y = np.array(labels, dtype=np.int64)
    return Dataset(x, y, int(y.max()) + 1 if len(y) else 1)


def load_dataset(spec: str) -> Dataset:
    kind, sep, arg = spec.partition(":")
    if not sep:
        raise DatasetError(f"dataset spec {spec!r} lacks a '<kind>:' prefix")
    if kind == "parity":
        try:
            n = int(arg)
        except ValueError:
            raise DatasetError(f"parity width {arg!r} is not an integer") from None
        return parity_dataset(n)
    if kind == "idx":
        parts = arg.split(",")
        if len(parts) != 2:
            raise DatasetError("idx spec is idx:<images_path>,<labels_path>")
        return idx_dataset(*parts)
    if kind == "csv":
        return csv_dataset(arg)
    raise DatasetError(f"unknown dataset kind {kind!r}")


def split(data: Dataset, train_fraction: float, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Deterministic split; ``train_fraction=1`` trains and tests on everything."""
    if not 0.0 < train_fraction <= 1.0:
        raise DatasetError("train_fraction must lie in (0, 1]")
    if train_fraction == 1.0:
        return data, data
    perm = np.random.default_rng(seed).permutation(len(data))
    k = int(round(train_fraction * len(data)))
    tr, te = np.sort(perm[:k]), np.sort(perm[k:])
    return (Dataset(data.features[tr], data.labels[tr], data.n_classes),
            Dataset(data.features[te], data.labels[te], data.n_classes))


def ingest_dataset(spec: str, train_fraction: float = 0.8,
                   test_spec: str | None = None) -> tuple[Dataset, Dataset]:
    """Train/test sets for ``spec``; a separate ``test_spec`` replaces the split."""
    data = load_dataset(spec)
    if test_spec:
        test = load_dataset(test_spec)
        if test.width != data.width:
            raise DatasetError("test dataset feature width differs from training data")
        n_cls = max(data.n_classes, test.n_classes)
        return (Dataset(data.features, data.labels, n_cls),
                Dataset(test.features, test.labels, n_cls))
    return split(data, train_fraction)
