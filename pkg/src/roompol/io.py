"""CSV formats: full-precision PDP traces and formatted report tables.

Conventions shared by every file: comma separation, '.' decimal separator,
a header row after '#' comment lines, delays in nanoseconds, and non-finite
power values (notably -inf dB for zero power) written as empty fields.
0 dB corresponds to a normalized power density of 1 per second.
"""

from __future__ import annotations

import math

import numpy as np

from .measurement import PdpTrace

_DB_REFERENCE_NOTE = "# power reference: 0 dB = 1 (1/s), transmit-power normalized"


class TraceFormatError(ValueError):
    """A CSV file did not parse as a PDP trace; message names the row."""


def format_delay_ns(value: float) -> str:
    return f"{value:.6g}"


def format_db(value: float) -> str:
    return "" if not math.isfinite(value) else f"{value:.4f}"


def write_trace_csv(path: str, trace: PdpTrace) -> None:
    """Write a PDP trace at full precision so a read round-trips exactly."""
    unit = "power_db" if trace.scale == "db" else "power_linear"
    lines = ["# roompol pdp trace", f"# scale: {trace.scale}", _DB_REFERENCE_NOTE]
    lines.append(f"delay_ns,{unit}")
    for delay, value in zip(trace.delays, trace.values):
        v = "" if not math.isfinite(value) else f"{value:.17g}"
        lines.append(f"{delay * 1e9:.17g},{v}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trace_csv(path: str) -> PdpTrace:
    """Read a trace written by `write_trace_csv`; empty fields become -inf."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read().splitlines()
    header = None
    delays: list[float] = []
    values: list[float] = []
    scale = None
    for row_no, line in enumerate(raw, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            if stripped.lower().startswith("# scale:"):
                scale = stripped.split(":", 1)[1].strip()
            continue
        if header is None:
            header = [f.strip() for f in stripped.split(",")]
            if len(header) != 2 or header[0] != "delay_ns" or header[1] not in (
                "power_db", "power_linear"
            ):
                raise TraceFormatError(f"{path}: row {row_no}: unexpected header {stripped!r}")
            if scale is None:
                scale = "db" if header[1] == "power_db" else "linear"
            continue
        fields = stripped.split(",")
        if len(fields) != 2:
            raise TraceFormatError(
                f"{path}: row {row_no}: expected 2 fields, got {len(fields)}"
            )
        try:
            delay = float(fields[0])
        except ValueError:
            raise TraceFormatError(
                f"{path}: row {row_no}: bad delay value {fields[0]!r}"
            ) from None
        if fields[1].strip() == "":
            value = -math.inf
        else:
            try:
                value = float(fields[1])
            except ValueError:
                raise TraceFormatError(
                    f"{path}: row {row_no}: bad power value {fields[1]!r}"
                ) from None
        delays.append(delay * 1e-9)
        values.append(value)
    if header is None or not delays:
        raise TraceFormatError(f"{path}: no trace rows found")
    try:
        return PdpTrace(delays=np.array(delays), values=np.array(values), scale=scale)
    except ValueError as exc:
        raise TraceFormatError(f"{path}: {exc}") from exc


def write_report_csv(path: str, columns: list[tuple[str, np.ndarray]], formatters) -> None:
    """Write a plot-ready table; `formatters` maps one callable per column."""
    names = [name for name, _ in columns]
    n = len(columns[0][1])
    lines = ["# roompol report", _DB_REFERENCE_NOTE, ",".join(names)]
    for i in range(n):
        lines.append(",".join(fmt(col[i]) for (_, col), fmt in zip(columns, formatters)))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
