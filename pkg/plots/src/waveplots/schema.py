"""Readers for the simulator's interchange files.

Each CSV contract is a fixed set of named columns.  Lines starting with
'#' are comments (the simulator stamps a config hash there).  Missing
required columns raise SchemaError naming the column; unknown columns are
skipped with a warning; a file with a header but no rows is an explicit
empty-input error.
"""

import csv
import json
import warnings

import numpy as np

REQUIRED = {
    "covariance": ("r", "re", "im", "stderr", "kernel_reference"),
    "field": ("x_u", "x_v", "seed", "y1", "y2", "re", "im"),
    "decay": ("t", "b0"),
    "meanphase_panel": ("x_u", "x_v", "raw", "debiased", "stderr"),
}


class SchemaError(ValueError):
    """An input file does not match its documented contract."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


def read_table(path, kind):
    """Parse one CSV contract into a dict of float column arrays."""
    required = REQUIRED[kind]
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise SchemaError(f"{path}: no header row")
    header, data = rows[0], rows[1:]
    for col in required:
        if col not in header:
            raise SchemaError(
                f"{path}: missing column {col!r} required by the {kind} contract",
                column=col,
            )
    extra = [c for c in header if c not in required]
    if extra:
        warnings.warn(f"{path}: ignoring unknown column(s) {', '.join(extra)}")
    if not data:
        raise SchemaError(f"{path}: empty input, header but no data rows")
    idx = {col: header.index(col) for col in required}
    out = {}
    for col in required:
        try:
            out[col] = np.array([float(row[idx[col]]) for row in data])
        except (ValueError, IndexError) as exc:
            raise SchemaError(
                f"{path}: column {col!r} is not numeric: {exc}", column=col
            ) from exc
    return out


def read_meanphase_json(path):
    """Parse the per-h mean-phase summary JSON.

    Returns h (descending), the debiased panel means in that order, and the
    simulator's own monotonicity verdict.  Never recomputes the verdict.
    """
    with open(path) as fh:
        doc = json.load(fh)
    if "mean_debiased" not in doc:
        raise SchemaError(f"{path}: missing key 'mean_debiased'", column="mean_debiased")
    vals = doc["mean_debiased"]
    if not vals:
        raise SchemaError(f"{path}: empty input, no per-h means")
    try:
        items = sorted(((float(k), float(v)) for k, v in vals.items()), reverse=True)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: mean_debiased is not an h -> value map") from exc
    return {
        "h": np.array([k for k, _ in items]),
        "mean": np.array([v for _, v in items]),
        "decreasing": doc.get("decreasing_in_h"),
    }
