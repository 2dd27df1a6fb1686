"""CSV artifacts with '#'-prefixed metadata headers.

Bodies are deterministic for fixed inputs: floats are written with repr
(shortest round-trip form) and row order is the caller's.  Metadata lines
may carry timestamps and are excluded from reproducibility comparisons.
"""

from __future__ import annotations

import datetime
import os

import numpy as np


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, columns, rows, metadata=None):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as handle:
        stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
        handle.write(f"# generated_at: {stamp}\n")
        for key, value in (metadata or []):
            handle.write(f"# {key}: {format_value(value)}\n")
        handle.write(",".join(columns) + "\n")
        for row in rows:
            handle.write(",".join(format_value(v) for v in row) + "\n")


def body_lines(path):
    """Non-metadata lines of a CSV artifact (for byte-level comparisons)."""
    with open(path, "r") as handle:
        return [line for line in handle if not line.startswith("#")]
