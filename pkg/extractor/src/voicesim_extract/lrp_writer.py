"""Writer for the LRP1 representation interchange format.

This is an independent implementation of the consumer's documented byte
layout, kept dependency-free so the extractor can be deployed without the
scoring engine installed:

    bytes 0..3   magic "LRP1"
    u32          format version (currently 1)
    u32          byte length of the UTF-8 utterance id
    ...          utterance id bytes
    u32 x 3      L (layers), T (frames), D (dims)
    f32 x L*T*D  payload, layer-major then time then dim

All integers and floats are little-endian; every value must be finite.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ModelError

LRP_MAGIC = b"LRP1"
LRP_VERSION = 1

_U32 = struct.Struct("<I")


def write_lrp(path, utterance_id: str, data: np.ndarray) -> None:
    """Write one utterance's (L, T, D) representation to `path`.

    Refuses non-finite or wrongly shaped data without touching the file.
    """
    arr = np.ascontiguousarray(data, dtype="<f4")
    if arr.ndim != 3:
        raise ModelError(f"representation must have 3 axes, got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise ModelError(f"representation has an empty axis: shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ModelError("representation contains NaN or Inf")
    id_bytes = utterance_id.encode("utf-8")
    num_layers, num_frames, dim = arr.shape
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
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes())
