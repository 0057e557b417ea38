"""Layer-wise representation files, rated-pair manifests, and dataset loading.

The on-disk interchange format ("LRP1") stores one utterance's frozen
layer-wise encoder output as a dense L x T x D float32 tensor:

    bytes 0..3   magic "LRP1"
    u32          format version (currently 1)
    u32          byte length of the UTF-8 utterance id
    ...          utterance id bytes
    u32 x 3      L (layers), T (frames), D (dims)
    f32 x L*T*D  payload, layer-major then time then dim

All integers and floats are little-endian. Values must be finite; readers
and writers both enforce this so a file on disk is always loadable.

Manifests are UTF-8 newline-delimited JSON, one rated pair per line with
keys pair_id, test_path, ref_path, score, system_id. Scores are real
numbers in [1, 4]; corpora that average multiple ratings per pair may use
fractional scores, corpora with per-rating records use one line per rating
(distinct pair_ids sharing the same paths).
"""

from __future__ import annotations

import json
import math
import struct
from collections import OrderedDict
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError, ManifestError

LRP_MAGIC = b"LRP1"
LRP_VERSION = 1

_U32 = struct.Struct("<I")


@dataclass(frozen=True)
class LayerwiseRepr:
    """One utterance's layer-wise representation: (L, T, D) float32."""

    utterance_id: str
    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        object.__setattr__(self, "data", arr)

    @property
    def num_layers(self) -> int:
        return self.data.shape[0]

    @property
    def num_frames(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[2]

    @cached_property
    def data64(self) -> np.ndarray:
        """Float64 view of the payload, widened once per instance."""
        return self.data.astype(np.float64)

    def validate(self) -> None:
        if self.data.ndim != 3:
            raise FormatError(
                f"repr '{self.utterance_id}': expected 3 axes (L, T, D), "
                f"got shape {self.data.shape}"
            )
        if min(self.data.shape) < 1:
            raise FormatError(
                f"repr '{self.utterance_id}': L, T, D must all be >= 1, "
                f"got shape {self.data.shape}"
            )
        if not np.isfinite(self.data).all():
            raise FormatError(
                f"repr '{self.utterance_id}': payload contains NaN or Inf"
            )


def write_lrp(path, repr: LayerwiseRepr) -> None:
    """Write `repr` to `path` in the LRP1 format.

    Validates the repr first; an invalid repr raises without creating
    or touching the file.
    """
    repr.validate()
    num_layers, num_frames, dim = repr.data.shape
    id_bytes = repr.utterance_id.encode("utf-8")
    header = b"".join(
        (
            LRP_MAGIC,
            _U32.pack(LRP_VERSION),
            _U32.pack(len(id_bytes)),
            id_bytes,
            _U32.pack(num_layers),
            _U32.pack(num_frames),
            _U32.pack(dim),
        )
    )
    payload = repr.data.astype("<f4", copy=False).tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated file: expected {n} bytes for {what}, got {len(buf)}")
    return buf


def _read_u32(fh, what: str) -> int:
    return _U32.unpack(_read_exact(fh, 4, what))[0]


def read_lrp(path) -> LayerwiseRepr:
    """Read an LRP1 file. Exact inverse of write_lrp."""
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != LRP_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {LRP_MAGIC!r}")
        version = _read_u32(fh, "version")
        if version != LRP_VERSION:
            raise FormatError(f"unsupported version {version}")
        id_len = _read_u32(fh, "id length")
        try:
            utterance_id = _read_exact(fh, id_len, "utterance id").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"utterance id is not valid UTF-8: {exc}") from exc
        num_layers = _read_u32(fh, "layer count")
        num_frames = _read_u32(fh, "frame count")
        dim = _read_u32(fh, "dim")
        if min(num_layers, num_frames, dim) < 1:
            raise FormatError(
                f"L, T, D must all be >= 1, got ({num_layers}, {num_frames}, {dim})"
            )
        count = num_layers * num_frames * dim
        payload = _read_exact(fh, 4 * count, "payload")
        if fh.read(1):
            raise FormatError("trailing data after payload")
    data = np.frombuffer(payload, dtype="<f4", count=count).reshape(
        num_layers, num_frames, dim
    )
    if not np.isfinite(data).all():
        raise FormatError(f"repr '{utterance_id}': payload contains NaN or Inf")
    return LayerwiseRepr(utterance_id=utterance_id, data=data.copy())


@dataclass(frozen=True)
class RatedPair:
    """A test/reference utterance pair with its human similarity score."""

    pair_id: str
    test_path: str
    ref_path: str
    score: float
    system_id: str

    def validate(self) -> None:
        if not self.pair_id:
            raise ManifestError("pair_id must be non-empty")
        if not (1.0 <= self.score <= 4.0) or math.isnan(self.score):
            raise ManifestError(
                f"pair '{self.pair_id}': score {self.score} outside [1, 4]"
            )
        if not self.system_id:
            raise ManifestError(f"pair '{self.pair_id}': system_id must be non-empty")


class Dataset:
    """An ordered collection of rated pairs plus the representation root.

    Representation files are loaded on demand through a small LRU cache,
    since corpora reuse reference utterances heavily.
    """

    def __init__(self, pairs, repr_dir, num_layers=None, dim=None, cache_size=128):
        self.pairs: list[RatedPair] = list(pairs)
        self.repr_dir = Path(repr_dir)
        self.num_layers = num_layers
        self.dim = dim
        self._cache: OrderedDict[Path, LayerwiseRepr] = OrderedDict()
        self._cache_size = cache_size

    def __len__(self) -> int:
        return len(self.pairs)

    def repr_path(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.repr_dir / p

    def load_repr(self, rel: str) -> LayerwiseRepr:
        path = self.repr_path(rel)
        cached = self._cache.get(path)
        if cached is not None:
            self._cache.move_to_end(path)
            return cached
        repr = read_lrp(path)
        self._cache[path] = repr
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return repr

    def test_repr(self, pair: RatedPair) -> LayerwiseRepr:
        return self.load_repr(pair.test_path)

    def ref_repr(self, pair: RatedPair) -> LayerwiseRepr:
        return self.load_repr(pair.ref_path)


_MANIFEST_KEYS = ("pair_id", "test_path", "ref_path", "score", "system_id")


def _parse_manifest_line(line: str, line_no: int) -> RatedPair:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"line {line_no}: invalid JSON: {exc}") from exc
    if not isinstance(record, dict):
        raise ManifestError(f"line {line_no}: expected a JSON object")
    missing = [k for k in _MANIFEST_KEYS if k not in record]
    if missing:
        raise ManifestError(f"line {line_no}: missing keys {missing}")
    for key in ("pair_id", "test_path", "ref_path", "system_id"):
        if not isinstance(record[key], str):
            raise ManifestError(f"line {line_no}: '{key}' must be a string")
    if not isinstance(record["score"], (int, float)) or isinstance(record["score"], bool):
        raise ManifestError(f"line {line_no}: 'score' must be a number")
    return RatedPair(
        pair_id=record["pair_id"],
        test_path=record["test_path"],
        ref_path=record["ref_path"],
        score=float(record["score"]),
        system_id=record["system_id"],
    )


def _iter_manifest(path):
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if line.strip():
                yield line_no, line


def load_manifest(path, repr_dir) -> Dataset:
    """Load and fully validate a manifest, preserving record order.

    Every referenced representation file must exist and parse, and all
    files in one dataset must agree on (L, D); frame counts may vary.
    """
    ds = Dataset([], repr_dir)
    seen: set[str] = set()
    for line_no, line in _iter_manifest(path):
        pair = _parse_manifest_line(line, line_no)
        pair.validate()
        if pair.pair_id in seen:
            raise ManifestError(f"duplicate pair_id '{pair.pair_id}' (line {line_no})")
        seen.add(pair.pair_id)
        ds.pairs.append(pair)
    if not ds.pairs:
        raise ManifestError(f"manifest '{path}' contains no records")
    for pair in ds.pairs:
        for rel in (pair.test_path, pair.ref_path):
            full = ds.repr_path(rel)
            if not full.is_file():
                raise ManifestError(f"pair '{pair.pair_id}': missing file {full}")
            repr = ds.load_repr(rel)
            if ds.num_layers is None:
                ds.num_layers, ds.dim = repr.num_layers, repr.dim
            elif (repr.num_layers, repr.dim) != (ds.num_layers, ds.dim):
                raise DimensionError(
                    f"pair '{pair.pair_id}': file {full} has (L, D) = "
                    f"({repr.num_layers}, {repr.dim}), dataset has "
                    f"({ds.num_layers}, {ds.dim})"
                )
    return ds


def validate_manifest(path, repr_dir) -> list[str]:
    """Collect every validation problem instead of stopping at the first.

    Returns a list of human-readable diagnostics; empty means clean.
    """
    problems: list[str] = []
    ds = Dataset([], repr_dir)
    seen: set[str] = set()
    try:
        entries = list(_iter_manifest(path))
    except OSError as exc:
        return [f"cannot read manifest: {exc}"]
    if not entries:
        return ["manifest contains no records"]
    for line_no, line in entries:
        try:
            pair = _parse_manifest_line(line, line_no)
            pair.validate()
        except ManifestError as exc:
            problems.append(str(exc))
            continue
        if pair.pair_id in seen:
            problems.append(f"duplicate pair_id '{pair.pair_id}' (line {line_no})")
            continue
        seen.add(pair.pair_id)
        ds.pairs.append(pair)
    for pair in ds.pairs:
        for role, rel in (("test", pair.test_path), ("ref", pair.ref_path)):
            full = ds.repr_path(rel)
            if not full.is_file():
                problems.append(f"pair '{pair.pair_id}': missing {role} file {full}")
                continue
            try:
                repr = ds.load_repr(rel)
            except FormatError as exc:
                problems.append(f"pair '{pair.pair_id}': {role} file {full}: {exc}")
                continue
            if ds.num_layers is None:
                ds.num_layers, ds.dim = repr.num_layers, repr.dim
            elif (repr.num_layers, repr.dim) != (ds.num_layers, ds.dim):
                problems.append(
                    f"pair '{pair.pair_id}': {role} file {full} has (L, D) = "
                    f"({repr.num_layers}, {repr.dim}), dataset has "
                    f"({ds.num_layers}, {ds.dim})"
                )
    return problems


def split_dataset(ds: Dataset, train_fraction: float, seed: int):
    """Deterministically partition `ds` into (train, held-out) datasets.

    The split is a pure function of (ds, train_fraction, seed); manifest
    order is preserved within each side.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ManifestError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(ds.pairs)
    n_train = int(train_fraction * n)
    if n_train == 0 or n_train == n:
        raise ManifestError(
            f"split of {n} pairs at fraction {train_fraction} leaves one side empty"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    train_idx = sorted(order[:n_train].tolist())
    held_idx = sorted(order[n_train:].tolist())

    def subset(indices):
        return Dataset(
            [ds.pairs[i] for i in indices],
            ds.repr_dir,
            num_layers=ds.num_layers,
            dim=ds.dim,
        )

    return subset(train_idx), subset(held_idx)
