"""CSV emission and parsing with full float round-tripping.

Every float is written with 17 significant digits, which is enough for
an exact double round trip, so parse(emit(x)) == x bitwise. One file per
array output; the header row carries column names (units in brackets
where meaningful); row order is deterministic.
"""

from __future__ import annotations

import csv
import os

from .errors import SchemaError


def format_float(x: float) -> str:
    return "%.17g" % x


def write_csv(path: str, header: list[str], rows: list[list[float]]) -> str:
    """Write one table; empty rows produce a header-only file."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else format_float(v)
                             for v in row])
    return path


def read_csv(path: str) -> tuple[list[str], list[list[float]]]:
    """Parse a file written by write_csv; numeric cells become floats,
    anything unparsable is kept as a string."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row")
        rows = []
        for row in reader:
            parsed = []
            for cell in row:
                try:
                    parsed.append(float(cell))
                except ValueError:
                    parsed.append(cell)
            rows.append(parsed)
    return header, rows


def column(header: list[str], rows: list[list[float]], name: str) -> list[float]:
    try:
        i = header.index(name)
    except ValueError:
        raise SchemaError(f"column {name!r} not found; have {header}")
    return [row[i] for row in rows]
