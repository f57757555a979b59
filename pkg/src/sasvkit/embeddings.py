"""Embedding storage and file formats.

An :class:`EmbeddingStore` maps string utterance/model ids to fixed-width
float32 vectors. Two on-disk formats are supported:

* binary: magic ``SEMB`` | u32 LE version=1 | u32 LE dim | u32 LE count,
  then per record u16 LE id length, UTF-8 id bytes, dim float32 LE values.
  Write-then-read is bit-exact.
* TSV: ``<id>\\t<v1>\\t...\\t<vdim>`` with an optional ``#dim=<n>`` header
  line. Values are written with 9 significant digits, which round-trips
  float32 exactly (well within the 1e-6 contract).

Stores are immutable after construction and safe for concurrent reads;
vectors are float32 to match the binary format, and all scoring math
widens to float64.
"""

import struct
from pathlib import Path

import numpy as np

from .exceptions import (
    BadMagicError,
    DimMismatchError,
    DuplicateIdError,
    TruncatedRecordError,
)

MAGIC = b"SEMB"
VERSION = 1


class EmbeddingStore:
    """Immutable id -> vector map with a single shared dimension."""

    def __init__(self, dim, entries=None):
        if int(dim) <= 0:
            raise DimMismatchError(f"dim must be positive, got {dim}")
        self.dim = int(dim)
        self._entries = {}
        if entries:
            for key, vec in entries.items() if isinstance(entries, dict) else entries:
                self.add(key, vec)

    def add(self, key, vec):
        if key in self._entries:
            raise DuplicateIdError(key)
        arr = np.asarray(vec, dtype=np.float32)
        if arr.ndim != 1 or arr.shape[0] != self.dim:
            raise DimMismatchError(
                f"vector for id {key!r} has shape {arr.shape}, expected ({self.dim},)"
            )
        if not np.all(np.isfinite(arr)):
            raise DimMismatchError(f"vector for id {key!r} contains non-finite values")
        arr.flags.writeable = False
        self._entries[key] = arr

    def __contains__(self, key):
        return key in self._entries

    def __len__(self):
        return len(self._entries)

    def __getitem__(self, key):
        return self._entries[key]

    def ids(self):
        return list(self._entries.keys())

    def items(self):
        return self._entries.items()

    def matrix(self, keys):
        """Stack the given ids into an (n, dim) float64 matrix."""
        missing = [k for k in keys if k not in self._entries]
        if missing:
            raise KeyError(f"ids not in store: {missing[:5]}")
        return np.stack([self._entries[k] for k in keys]).astype(np.float64)


def write_embedding_store(store, path):
    path = Path(path)
    if path.suffix.lower() in (".tsv", ".txt"):
        _write_tsv(store, path)
    else:
        _write_binary(store, path)


def read_embedding_store(path):
    path = Path(path)
    if path.suffix.lower() in (".tsv", ".txt"):
        return _read_tsv(path)
    return _read_binary(path)


def _write_binary(store, path):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, store.dim, len(store)))
        for key, vec in store.items():
            raw = key.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise DuplicateIdError(f"id too long to serialize: {key[:32]!r}...")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(vec.astype("<f4").tobytes())


def _read_exact(fh, n, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise TruncatedRecordError(f"file ended while reading {what}")
    return buf


def _read_binary(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise BadMagicError(f"expected magic {MAGIC!r}, got {magic!r}")
        version, dim, count = struct.unpack("<III", _read_exact(fh, 12, "header"))
        if version != VERSION:
            raise BadMagicError(f"unsupported format version {version}")
        store = EmbeddingStore(dim)
        for _ in range(count):
            (id_len,) = struct.unpack("<H", _read_exact(fh, 2, "id length"))
            key = _read_exact(fh, id_len, "id bytes").decode("utf-8")
            vec = np.frombuffer(_read_exact(fh, 4 * dim, f"vector for {key!r}"), dtype="<f4")
            store.add(key, vec)
        return store


def _write_tsv(store, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#dim={store.dim}\n")
        for key, vec in store.items():
            values = "\t".join(f"{v:.8e}" for v in vec)
            fh.write(f"{key}\t{values}\n")


def _read_tsv(path):
    store = None
    declared_dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                if line.startswith("#dim="):
                    declared_dim = int(line[len("#dim=") :])
                continue
            fields = line.split("\t")
            key, values = fields[0], fields[1:]
            if not values:
                raise TruncatedRecordError(f"line {line_no}: no vector values")
            vec = np.array([float(v) for v in values], dtype=np.float32)
            if store is None:
                dim = declared_dim if declared_dim is not None else len(vec)
                store = EmbeddingStore(dim)
            if len(vec) != store.dim:
                raise DimMismatchError(
                    f"line {line_no}: id {key!r} has dim {len(vec)}, expected {store.dim}"
                )
            store.add(key, vec)
    if store is None:
        if declared_dim is None:
            raise TruncatedRecordError("empty embedding file with no #dim header")
        store = EmbeddingStore(declared_dim)
    return store
