"""
Artifact writers: CSV with '#' metadata lines, JSON, SVG line charts.
Everything goes to a staging directory first and is moved into place only
when the whole run succeeded.
"""

from __future__ import annotations

import contextlib
import json
import logging
import os
import shutil
import tempfile
from pathlib import Path
from typing import Iterator, Mapping, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

logger = logging.getLogger(__name__)

CSV_FORMAT = "%.12e"
SVG_SALT = "qzt"


# ---------------------------- CSV / JSON -----------------------------
def write_csv(path, rows: np.ndarray, columns: Sequence[str], config_sha256: str,
              meta: Optional[Mapping[str, object]] = None) -> Path:
    path = Path(path)
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.size and rows.shape[1] != len(columns):
        raise ValueError(f"{path.name}: {rows.shape[1]} columns of data, {len(columns)} headers")
    lines = [f"# config_sha256: {config_sha256}"]
    for key, value in (meta or {}).items():
        lines.append(f"# {key}: {value}")
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
        fh.write(",".join(columns) + "\n")
        if rows.size:
            np.savetxt(fh, rows, delimiter=",", fmt=CSV_FORMAT)
    logger.info(f"wrote {path.name} ({rows.shape[0] if rows.size else 0} rows)")
    return path


def read_csv(path) -> np.ndarray:
    """Data block of a CSV written by write_csv."""
    with open(path, encoding="utf-8") as fh:
        header = 0
        for line in fh:
            header += 1
            if not line.startswith("#"):
                break
    return np.loadtxt(path, delimiter=",", skiprows=header, ndmin=2)


def write_json(path, payload: Mapping, config_sha256: str) -> Path:
    path = Path(path)
    body = {"config_sha256": config_sha256, **payload}
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"wrote {path.name}")
    return path


# ---------------------------- SVG ------------------------------------
def write_svg(path, x: np.ndarray, series: Mapping[str, np.ndarray], xlabel: str, ylabel: str,
              title: str = "", logx: bool = False, markers: Sequence[float] = ()) -> Path:
    path = Path(path)
    with plt.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for label, y in series.items():
            ax.plot(x, y, label=label, linewidth=1.2)
        for m in markers:
            ax.axvline(m, color="0.7", linewidth=0.6, linestyle=":")
        if logx:
            ax.set_xscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(series) > 1:
            ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    logger.info(f"wrote {path.name}")
    return path


# ---------------------------- Staging --------------------------------
@contextlib.contextmanager
def staged_output(out_dir) -> Iterator[Path]:
    """Yield a scratch directory; its files land in out_dir only if the block succeeds."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".qzt-", dir=out_dir))
    try:
        yield scratch
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise
    for item in sorted(scratch.iterdir()):
        os.replace(item, out_dir / item.name)
    scratch.rmdir()
