"""Versioned CSV tables and deterministic SVG line charts."""

from __future__ import annotations

import csv
import io
import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

CSV_VERSION = "plap-lab-csv v1"


def _cell(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _atomic_write(path: Path, data: str | bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(tmp, mode, **({} if isinstance(data, bytes) else {"newline": ""})) as fh:
        fh.write(data)
    os.replace(tmp, path)


def write_csv(path, kind: str, columns, rows) -> Path:
    buf = io.StringIO()
    buf.write(f"# {CSV_VERSION} {kind}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row[c]) if isinstance(row, dict) else _cell(v) for c, v in zip(columns, row if not isinstance(row, dict) else columns)])
    path = Path(path)
    _atomic_write(path, buf.getvalue())
    return path


def read_csv(path):
    """Return (kind, columns, rows as lists of strings)."""
    with open(path, newline="") as fh:
        head = fh.readline().strip()
        if not head.startswith(f"# {CSV_VERSION}"):
            raise ValueError("not a versioned lab CSV")
        kind = head[len(f"# {CSV_VERSION}"):].strip()
        reader = csv.reader(fh)
        columns = next(reader)
        return kind, columns, list(reader)


def line_chart(path, series: dict, xlabel: str, ylabel: str, title: str = "", logx=False, logy=False) -> Path:
    """``series`` maps a label to (x, y). Output is byte-stable across runs."""
    with plt.rc_context({"svg.hashsalt": "plap-lab", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for label, (x, y) in series.items():
            ax.plot(x, y, marker="o", label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        if len(series) > 1:
            ax.legend()
        fig.tight_layout()
        buf = io.BytesIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    path = Path(path)
    _atomic_write(path, buf.getvalue())
    return path
