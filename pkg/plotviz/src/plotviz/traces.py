"""Reading and validation of convergence-trace CSVs.

The input schema is the one the solver harness documents for its outputs:
a header row starting with ``iter``, an ``objective`` column, and any
number of ``err_rel_<g>`` block-error columns, optionally followed by
``weighted_err``. Files are only ever opened for reading.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass

import numpy as np

_BLOCK_RE = re.compile(r"^err_rel_(\d+)$")


class TraceFormatError(ValueError):
    """A trace CSV does not follow the documented schema.

    path and row (1-based line number, header is row 1) locate the
    offending input; row is None for file-level problems.
    """

    def __init__(self, path, message, row=None):
        self.path = str(path)
        self.row = row
        where = self.path if row is None else f"{self.path} row {row}"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class PanelTrace:
    """One panel's worth of curves: iteration grid plus per-block errors."""

    name: str
    path: str
    iterations: np.ndarray
    block_errors: np.ndarray  # (T, number of blocks), column g is block g
    block_ids: tuple


@dataclass(frozen=True)
class TraceFileSet:
    """The panels of one figure and an optional (rows, cols) layout."""

    panels: tuple
    layout: tuple | None = None

    def __post_init__(self):
        if not self.panels:
            raise ValueError("a trace file set needs at least one panel")
        if self.layout is not None:
            rows, cols = self.layout
            if rows < 1 or cols < 1:
                raise ValueError("layout rows and cols must be positive")
            if rows * cols < len(self.panels):
                raise ValueError(
                    f"layout {rows}x{cols} cannot hold {len(self.panels)} panels"
                )


def read_trace(path, name=None):
    """Parse one trace CSV into a PanelTrace.

    Raises TraceFormatError naming the file and row on any schema
    violation: wrong header, ragged rows, non-numeric fields, or a file
    with no block-error columns.
    """
    display = name if name is not None else os.path.basename(str(path))
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as e:
        raise TraceFormatError(path, f"cannot open: {e.strerror}") from e
    with fh:
        header = fh.readline().strip()
        fields = header.split(",")
        if not fields or fields[0] != "iter":
            raise TraceFormatError(
                path, "first header column must be 'iter'", row=1
            )
        block_cols = {}
        for j, col in enumerate(fields):
            m = _BLOCK_RE.match(col)
            if m:
                block_cols[int(m.group(1))] = j
        if not block_cols:
            raise TraceFormatError(
                path, "no err_rel_<g> block columns in header", row=1
            )
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(fields):
                raise TraceFormatError(
                    path,
                    f"{len(parts)} fields, header has {len(fields)}",
                    row=lineno,
                )
            try:
                rows.append([float(v) for v in parts])
            except ValueError as e:
                raise TraceFormatError(path, str(e), row=lineno) from e
    if not rows:
        raise TraceFormatError(path, "no data rows")
    data = np.asarray(rows, dtype=np.float64)
    ids = tuple(sorted(block_cols))
    errors = np.column_stack([data[:, block_cols[g]] for g in ids])
    return PanelTrace(
        name=display,
        path=str(path),
        iterations=data[:, 0].astype(np.int64),
        block_errors=errors,
        block_ids=ids,
    )


def load_panels(root, names, layout=None):
    """Read <root>/<name>/trace_avg.csv for each panel name."""
    panels = tuple(
        read_trace(os.path.join(root, n, "trace_avg.csv"), name=n)
        for n in names
    )
    return TraceFileSet(panels=panels, layout=layout)
