"""Deterministic CSV output with documented columns."""

from __future__ import annotations

import csv

import numpy as np


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, columns, rows, config_hash=None, comments=()):
    """Write ``rows`` under a header block.

    ``columns`` is a list of ``(name, description)`` pairs; the
    descriptions go in a ``# columns:`` comment line. Floats are written
    with 17 significant digits so the body is byte-stable across runs.
    """
    with open(path, "w", newline="") as fh:
        if config_hash is not None:
            fh.write(f"# config_hash: {config_hash}\n")
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write("# columns: " + "; ".join(f"{n} = {d}" for n, d in columns) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([n for n, _ in columns])
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def read_csv(path):
    """``(column names, float array)`` of a file written by :func:`write_csv`."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    names = lines[0].strip().split(",")
    data = np.loadtxt(lines[1:], delimiter=",", ndmin=2) if len(lines) > 1 else np.empty((0, len(names)))
    return names, data


def csv_body(path):
    """Everything after the comment header, for byte comparisons."""
    with open(path) as fh:
        return "".join(ln for ln in fh if not ln.startswith("#"))
