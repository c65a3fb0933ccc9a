"""Delimited report files: CSV with a provenance comment line.

Every emitted CSV starts with ``# config_hash=<hash> seed=<seed>`` followed by
a header row; floats are written with repr so re-reading round-trips exactly.
"""

from __future__ import annotations

import csv


def format_value(v):
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows(path, fieldnames, rows, cfg_hash, seed):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# config_hash={cfg_hash} seed={seed}\n")
        f.write(",".join(fieldnames) + "\n")
        for row in rows:
            f.write(",".join(format_value(row[k]) for k in fieldnames) + "\n")


def read_rows(path):
    """Read a report CSV back into (comment, list of dict rows of strings)."""
    with open(path, "r", encoding="utf-8") as f:
        comment = f.readline().rstrip("\n")
        if not comment.startswith("#"):
            raise ValueError(f"{path}: missing provenance comment line")
        reader = csv.DictReader(f)
        return comment, list(reader)
