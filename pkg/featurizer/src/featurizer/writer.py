"""Writers for the shared feature-file formats.

The binary layout is the pipeline's wire format: magic ELVF, version and
dimension as little-endian u32, then per record a u16 id length, the
UTF-8 photo id, and the float32 vector.  A JSON-lines twin carries the
same records as {"photo_id": ..., "features": [...]}.
"""

from __future__ import annotations

import json
import struct

import numpy as np

FEATURE_MAGIC = b"ELVF"
FEATURE_VERSION = 1


def write_feature_file(records, dim: int, path, fmt: str = "elvf") -> int:
    """Write (photo_id, vector) records in input order; returns the count."""
    count = 0
    if fmt == "elvf":
        with open(path, "wb") as fh:
            fh.write(FEATURE_MAGIC)
            fh.write(struct.pack("<II", FEATURE_VERSION, dim))
            for photo_id, vec in records:
                vec = np.asarray(vec, dtype="<f4")
                if vec.shape != (dim,):
                    raise ValueError(
                        f"photo {photo_id!r}: vector has shape {vec.shape}, expected ({dim},)"
                    )
                id_bytes = photo_id.encode("utf-8")
                fh.write(struct.pack("<H", len(id_bytes)))
                fh.write(id_bytes)
                fh.write(vec.tobytes())
                count += 1
    elif fmt == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for photo_id, vec in records:
                vec = np.asarray(vec, dtype=np.float32)
                if vec.shape != (dim,):
                    raise ValueError(
                        f"photo {photo_id!r}: vector has shape {vec.shape}, expected ({dim},)"
                    )
                fh.write(json.dumps(
                    {"photo_id": photo_id, "features": [float(x) for x in vec]}
                ) + "\n")
                count += 1
    else:
        raise ValueError(f"unknown output format {fmt!r}")
    return count
