"""Per-iteration trace records and their CSV schema.

The CSV carries one row per iteration with every audited quantity, plus a
header block of ``# key=value`` lines echoing all parameters so audits can
be re-run from the trace file alone.  Floats are written with 17 significant
digits.  A trace accepts appends from a single producer.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional

__all__ = ["TraceRow", "Trace", "read_trace_csv", "format_float"]

COLUMNS = [
    "j", "k", "serious", "t_j", "theta_j", "delta", "dist_x_center",
    "eps_hat", "w_hat_norm", "Delta_k", "cycle_len",
    "dist_y_center", "dist_y_xnew", "phi_mtilde_y", "wall_time",
]


def format_float(x):
    return f"{float(x):.17g}"


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return format_float(value)


@dataclass(frozen=True)
class TraceRow:
    j: int
    k: Optional[int] = None
    serious: Optional[bool] = None
    t_j: Optional[float] = None
    theta_j: Optional[float] = None
    delta: Optional[float] = None
    dist_x_center: Optional[float] = None
    eps_hat: Optional[float] = None
    w_hat_norm: Optional[float] = None
    Delta_k: Optional[float] = None
    cycle_len: Optional[int] = None
    dist_y_center: Optional[float] = None
    dist_y_xnew: Optional[float] = None
    phi_mtilde_y: Optional[float] = None
    wall_time: float = 0.0


@dataclass
class Trace:
    """Ordered trace rows with a full parameter echo in the header."""

    header: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)

    def append(self, row):
        self.rows.append(row)

    def to_csv(self):
        buf = io.StringIO()
        for key in sorted(self.header):
            value = self.header[key]
            if isinstance(value, float):
                value = format_float(value)
            buf.write(f"# {key}={value}\n")
        buf.write(",".join(COLUMNS) + "\n")
        for row in self.rows:
            buf.write(",".join(_cell(getattr(row, col)) for col in COLUMNS) + "\n")
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())


def _parse_cell(col, cell):
    if cell == "":
        return None
    if col in ("j", "k", "cycle_len"):
        return int(cell)
    if col == "serious":
        return cell == "1"
    return float(cell)


def read_trace_csv(path):
    """Read a trace CSV back as (header dict of strings, list of TraceRow)."""
    header = {}
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body_start = 0
    for i, line in enumerate(lines):
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            header[key] = value
        else:
            body_start = i
            break
    cols = lines[body_start].split(",")
    if cols != COLUMNS:
        raise ValueError("trace file column schema mismatch")
    for line in lines[body_start + 1:]:
        if not line:
            continue
        cells = line.split(",")
        kwargs = {col: _parse_cell(col, cell) for col, cell in zip(cols, cells)}
        kwargs["wall_time"] = kwargs.get("wall_time") or 0.0
        rows.append(TraceRow(**kwargs))
    return header, rows
