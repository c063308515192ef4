"""CSV emission with byte-stable formatting (repr round-trip for floats)."""

from __future__ import annotations

import csv


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if hasattr(v, "item"):  # numpy scalar
        v = v.item()
        return repr(v) if isinstance(v, float) else str(v)
    return str(v)


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_rows(path):
    """(header, rows-of-strings) for a comma CSV with a header line."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, [])
        return header, [row for row in reader if row]
