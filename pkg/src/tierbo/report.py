"""Result serialization: trajectory CSV, summary and manifest JSON, SVG plot.

Floats are written in shortest round-trip form (``repr``), so reading a
trajectory back yields bit-identical numbers. Every file is UTF-8 with LF
line endings.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np

from .campaign import CampaignResult, RepeatTrace

INT_COLUMNS = ("repeat", "iter", "n_satisfied_best", "cum_max_n")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def trajectory_header(d: int, m: int, n: int) -> list[str]:
    return (
        ["repeat", "iter"]
        + [f"x_{i}" for i in range(d)]
        + [f"y_{i}" for i in range(m)]
        + [f"psi_{i}" for i in range(n)]
        + ["xi_exact", "best_xi", "n_satisfied_best", "cum_max_n"]
    )


def trajectory_rows(traces: list[RepeatTrace]):
    for tr in traces:
        for i in range(tr.n_iter):
            yield (
                [tr.repeat, i + 1]
                + list(tr.X[i])
                + list(tr.Y[i])
                + list(tr.psi[i])
                + [tr.xi[i], tr.best_xi[i], int(tr.n_satisfied_best[i]), int(tr.cum_max_n[i])]
            )


def trajectory_csv(traces: list[RepeatTrace]) -> str:
    if not traces:
        raise ValueError("no traces to serialize")
    tr = traces[0]
    header = trajectory_header(tr.X.shape[1], tr.Y.shape[1], tr.psi.shape[1])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in trajectory_rows(traces):
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def read_trajectory(path_or_text) -> dict[str, np.ndarray]:
    """Columns of a trajectory CSV keyed by header name."""
    text = path_or_text
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        text = Path(path_or_text).read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    out = {}
    for j, name in enumerate(header):
        if name in INT_COLUMNS:
            out[name] = np.array([int(r[j]) for r in body], dtype=int)
        else:
            out[name] = np.array([float(r[j]) for r in body], dtype=float)
    return out


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_json_safe(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def run_dir(out: Path, label: str, strategy: str) -> Path:
    return Path(out) / label.replace("*", "-star") / strategy


def convergence_svg(mean, se, title: str, width: int = 480, height: int = 320) -> str:
    """Mean best-so-far score with a one standard error band."""
    mean = np.asarray(mean, dtype=float)
    se = np.nan_to_num(np.asarray(se, dtype=float))
    n = mean.shape[0]
    pad = 40
    lo = float(np.min(mean - se))
    hi = float(np.max(mean + se))
    if hi <= lo:
        hi = lo + 1.0

    def px(i):
        return pad + (width - 2 * pad) * (i / max(n - 1, 1))

    def py(v):
        return height - pad - (height - 2 * pad) * (v - lo) / (hi - lo)

    line = " ".join(f"{px(i):.2f},{py(v):.2f}" for i, v in enumerate(mean))
    upper = [f"{px(i):.2f},{py(v):.2f}" for i, v in enumerate(mean + se)]
    lower = [f"{px(i):.2f},{py(v):.2f}" for i, v in reversed(list(enumerate(mean - se)))]
    band = " ".join(upper + lower)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
        f'<text x="{pad}" y="20" font-family="sans-serif" font-size="13">{title}</text>\n'
        f'<polygon points="{band}" fill="#4c72b0" fill-opacity="0.25"/>\n'
        f'<polyline points="{line}" fill="none" stroke="#4c72b0" stroke-width="2"/>\n'
        f'<text x="{pad}" y="{height - 10}" font-family="sans-serif" font-size="11">'
        f"experiments 1..{n}; best score {lo:.4g} to {hi:.4g}</text>\n"
        "</svg>\n"
    )


def write_run(result: CampaignResult, directory: Path, summary: dict | None, svg: bool = True) -> dict[str, str]:
    """Write one campaign's files and return their checksums by file name."""
    directory = Path(directory)
    files = {}
    path = directory / "trajectory.csv"
    write_text(path, trajectory_csv(result.traces))
    files["trajectory.csv"] = sha256_file(path)
    if summary is not None:
        path = directory / "summary.json"
        write_text(path, dumps_json(summary))
        files["summary.json"] = sha256_file(path)
        if svg:
            path = directory / "convergence.svg"
            write_text(path, convergence_svg(summary["best_xi_mean"], summary["best_xi_se"], f"{result.config.label} {result.config.strategy}"))
            files["convergence.svg"] = sha256_file(path)
    return files
