"""CSV and SVG writers for trajectories and experiment summaries."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .dynamics import Trajectory


class OutputError(OSError):
    pass


def _open_for_write(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def trajectory_columns(P: int) -> list:
    return (
        ["iter"]
        + [f"theta_{i}" for i in range(P)]
        + [f"psi_{i}" for i in range(P)]
        + ["loss", "grad_norm", "lyapunov", "coupling_residual"]
    )


def emit_csv(traj: Trajectory, path) -> None:
    """Write a trajectory; floats use ``repr`` so they re-parse exactly."""
    P = traj.thetas.shape[1]
    with _open_for_write(path) as fh:
        w = csv.writer(fh)
        w.writerow(trajectory_columns(P))
        for k in range(len(traj)):
            row = [k]
            row += [repr(float(x)) for x in traj.thetas[k]]
            row += [repr(float(x)) for x in traj.psis[k]]
            row += [repr(float(traj.losses[k])), repr(float(traj.grad_norms[k])),
                    repr(float(traj.lyapunov[k])), repr(float(traj.coupling_residuals[k]))]
            w.writerow(row)


def read_csv(path) -> dict:
    """Read a numeric CSV into ``{column: np.ndarray}``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {name: np.array([float(r[i]) for r in body]) for i, name in enumerate(header)}


def emit_rows_csv(rows: Sequence[Mapping], path) -> None:
    if not rows:
        raise ValueError("no rows to write")
    with _open_for_write(path) as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})


def emit_json(obj, path) -> None:
    with _open_for_write(path) as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


_PALETTE = ["#d62728", "#ff7f0e", "#1f77b4", "#2ca02c", "#9467bd", "#8c564b"]


def _nice(x: float) -> str:
    return f"{x:.3g}"


def emit_svg_lineplot(
    series: Mapping[str, tuple],
    path,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    width: int = 640,
    height: int = 420,
) -> None:
    """Self-contained SVG line plot, one polyline per ``label -> (x, y)``.

    Non-finite points are dropped. An empty mapping yields axes only.
    """
    ml, mr, mt, mb = 70, 150, 40, 50
    pw, ph = width - ml - mr, height - mt - mb

    clean = {}
    for label, (x, y) in series.items():
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        clean[label] = (x[ok], y[ok])

    xs = [x for x, _ in clean.values() if x.size]
    ys = [y for _, y in clean.values() if y.size]
    if xs:
        x0, x1 = float(min(a.min() for a in xs)), float(max(a.max() for a in xs))
        y0, y1 = float(min(a.min() for a in ys)), float(max(a.max() for a in ys))
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def sx(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>',
    ]
    for i in range(5):
        fx = x0 + (x1 - x0) * i / 4
        fy = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{sx(fx):.1f}" y="{mt + ph + 16}" font-size="11" text-anchor="middle">{_nice(fx)}</text>')
        out.append(f'<text x="{ml - 6}" y="{sy(fy) + 4:.1f}" font-size="11" text-anchor="end">{_nice(fy)}</text>')
    if title:
        out.append(f'<text x="{ml + pw / 2}" y="{mt - 15}" font-size="14" text-anchor="middle">{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{ml + pw / 2}" y="{height - 10}" font-size="12" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(
            f'<text x="16" y="{mt + ph / 2}" font-size="12" text-anchor="middle" '
            f'transform="rotate(-90 16 {mt + ph / 2})">{escape(ylabel)}</text>'
        )
    for i, (label, (x, y)) in enumerate(clean.items()):
        color = _PALETTE[i % len(_PALETTE)]
        if x.size:
            # thin out very long series; keep endpoints
            step = max(1, math.ceil(x.size / 4000))
            idx = np.unique(np.r_[np.arange(0, x.size, step), x.size - 1])
            pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x[idx], y[idx]))
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = mt + 14 + 18 * i
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly}" x2="{ml + pw + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 35}" y="{ly + 4}" font-size="11">{escape(label)}</text>')
    out.append("</svg>")

    with _open_for_write(path) as fh:
        fh.write("\n".join(out) + "\n")
