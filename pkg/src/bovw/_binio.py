"""Shared binary container: one ASCII header line, then float32 little-endian data."""

import numpy as np

_VERSION = "v1"


def write_tagged_floats(path, magic, header_fields, matrix):
    """Write ``<magic> v1 <f1> <f2>\\n`` followed by row-major float32 LE values."""
    fields = " ".join(str(int(f)) for f in header_fields)
    data = np.ascontiguousarray(matrix, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(f"{magic} {_VERSION} {fields}\n".encode("ascii"))
        fh.write(data.tobytes())


def read_tagged_floats(path, magic):
    """Read a tagged container; returns (header_fields, flat float32 array)."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").strip()
        raw = fh.read()
    parts = header.split()
    if len(parts) < 2 or parts[0] != magic or parts[1] != _VERSION:
        raise ValueError(f"{path}: expected '{magic} {_VERSION}' header, got {header!r}")
    fields = tuple(int(p) for p in parts[2:])
    return fields, np.frombuffer(raw, dtype="<f4")
