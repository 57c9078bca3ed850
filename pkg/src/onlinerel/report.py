"""Number formatting and report emission (JSON / CSV)."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
import tempfile
from typing import IO, Iterable, Sequence

from .ftree import natural_key

__all__ = ["format_bsfp", "format_pct", "emit_report", "reports_to_rows", "atomic_write"]


def format_bsfp(p: float) -> str:
    """Four significant digits, capital E, unpadded exponent: ``2.114E-4``."""
    if math.isnan(p) or math.isinf(p):
        return str(p)
    mantissa, exp = f"{p:.3E}".split("E")
    return f"{mantissa}E{int(exp)}"


def format_pct(pct: float) -> str:
    """Signed fixed two decimals, e.g. ``+409.46`` or ``-14.47``."""
    if math.isinf(pct) or math.isnan(pct):
        return str(pct)
    text = f"{pct:+.2f}"
    return "+0.00" if text == "-0.00" and pct == 0 else text


def _observed_targets(reports) -> list[str]:
    targets = {o["target"] for r in reports for o in getattr(r, "echo", ())}
    return sorted(targets, key=natural_key)


def _cell(echo: dict) -> str:
    kind = echo["kind"]
    if kind == "hard":
        return "T" if echo["value"] else "F"
    if kind == "scaled":
        return f"+{echo['value']:g}%" if echo["value"] >= 0 else f"{echo['value']:g}%"
    return f"p={echo['value']:g}"


def reports_to_rows(reports: Sequence) -> tuple[list[str], list[list[str]]]:
    """Tabular view mirroring the published case tables."""
    targets = _observed_targets(reports)
    header = ["case", *targets, "bsfp", "pct_change", "direction"]
    rows = []
    for r in reports:
        if not hasattr(r, "posterior"):
            rows.append([r.label, *[""] * len(targets), "", "", "error"])
            continue
        by_target = {o["target"]: _cell(o) for o in r.echo}
        rows.append([
            r.label,
            *[by_target.get(t, "") for t in targets],
            format_bsfp(r.posterior),
            format_pct(r.pct_change),
            r.direction,
        ])
    return header, rows


def emit_report(reports: Sequence, fmt: str = "json", sink: IO[str] | None = None) -> None:
    """Write reports as JSON (list of objects) or CSV to ``sink`` (stdout by default)."""
    if fmt not in ("json", "csv"):
        raise ValueError(f"unknown format {fmt!r}")
    sink = sink if sink is not None else sys.stdout
    if fmt == "json":
        json.dump([r.to_dict() for r in reports], sink, indent=2)
        sink.write("\n")
        return
    header, rows = reports_to_rows(reports)
    writer = csv.writer(sink, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(header)
    writer.writerows(rows)


def atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write via a temp file in the same directory and rename into place."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render(reports: Iterable, fmt: str) -> str:
    buf = io.StringIO()
    emit_report(list(reports), fmt, buf)
    return buf.getvalue()
