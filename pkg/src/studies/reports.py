"""Deterministic CSV, JSON and gnuplot writers for study outputs."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

from studies.simulate import RiskReport


def format_value(value: Any) -> str:
    """Render one CSV cell; floats use ``%.17g`` and ``None`` is empty."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.17g}"
    if hasattr(value, "item"):  # numpy scalars
        return format_value(value.item())
    return str(value)


def write_table(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write a header plus rows as comma-separated text with ``\\n`` line ends."""
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row has {len(row)} cells, header has {len(header)}")
            writer.writerow([format_value(v) for v in row])
    return path


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "item"):
        return value.item()
    return value


def write_json(path: Path, payload: dict[str, Any]) -> Path:
    """Sorted keys, two-space indent, trailing newline."""
    with path.open("w", encoding="utf-8") as fh:
        json.dump(_plain(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_gnuplot(path: Path, report: RiskReport, data_file: str = "rates.csv") -> Path:
    """Script plotting Monte Carlo risk, the fitted line and the theory line."""
    lines = [
        "set datafile separator ','",
        "set logscale xy",
        "set key top right",
        "set xlabel 'n'",
        "set ylabel 'risk'",
        "set grid",
        f"set title 'slope {report.slope:.4f} +/- {report.slope_se:.4f} "
        f"(theory {report.theory_slope:.4f})'",
        f"plot '{data_file}' using 1:2 skip 1 with points pt 7 title 'MC MSE', \\",
        f"     '{data_file}' using 1:4 skip 1 with lines lw 2 title 'fit', \\",
        f"     '{data_file}' using 1:5 skip 1 with lines dt 2 title 'theory'",
        "",
    ]
    path.write_text("\n".join(lines), encoding="utf-8")
    return path


__all__ = ["format_value", "write_gnuplot", "write_json", "write_table"]
