"""Reading and writing sets, traces and reports."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .starset import DirectionGrid, RadialSet

__all__ = [
    "TraceFormatError",
    "set_to_csv",
    "set_from_csv",
    "set_to_json",
    "set_from_json",
    "load_radii_file",
    "set_to_svg",
    "write_trace",
    "read_trace",
    "write_reports",
    "read_reports",
]


class TraceFormatError(ValueError):
    """A stored trace directory is missing files or has malformed content."""


def _fmt(x) -> str:
    return repr(float(x))


def set_to_csv(S: RadialSet, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "r"])
        for th, r in zip(S.grid.theta, S.radii):
            w.writerow([_fmt(th), _fmt(r)])


def set_from_csv(path, r_lo=None, R_hi=None) -> RadialSet:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["theta", "r"]:
        raise TraceFormatError(f"{path}: expected header 'theta,r'")
    try:
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    except ValueError as exc:
        raise TraceFormatError(f"{path}: {exc}") from exc
    if data.ndim != 2 or len(data) < 16:
        raise TraceFormatError(f"{path}: need at least 16 rows")
    M = len(data)
    if not np.allclose(data[:, 0], 2 * np.pi * np.arange(M) / M, atol=1e-9):
        raise TraceFormatError(f"{path}: theta column is not a uniform grid from 0")
    return RadialSet(DirectionGrid(M), data[:, 1], r_lo, R_hi)


def set_to_json(S: RadialSet) -> dict:
    return {"n": S.grid.n, "M": S.M, "r_lo": S.r_lo, "R_hi": S.R_hi, "radii": [float(r) for r in S.radii]}


def set_from_json(d: dict) -> RadialSet:
    radii = np.asarray(d["radii"], dtype=float)
    if int(d.get("M", len(radii))) != len(radii):
        raise ValueError("M does not match the number of radii")
    return RadialSet(DirectionGrid(len(radii), int(d.get("n", 2))), radii, d.get("r_lo"), d.get("R_hi"))


def load_radii_file(path) -> RadialSet:
    """Set from a ``.json`` wrapper or a ``theta,r`` CSV file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"radii file not found: {path}")
    if path.suffix.lower() == ".json":
        return set_from_json(json.loads(path.read_text()))
    return set_from_csv(path)


def set_to_svg(S: RadialSet, path, size: int = 400, extent: float | None = None, label: str = "") -> None:
    """Boundary as a closed SVG polyline, origin at the image centre."""
    extent = extent or 1.1 * float(np.max(S.radii))
    sc = 0.5 * size / extent
    P = S.points
    pts = " ".join(f"{size / 2 + sc * x:.3f},{size / 2 - sc * y:.3f}" for x, y in P)
    txt = f'<text x="8" y="18" font-size="12">{label}</text>' if label else ""
    Path(path).write_text(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">'
        f'<rect width="100%" height="100%" fill="white"/>'
        f'<polygon points="{pts}" fill="none" stroke="black" stroke-width="1"/>{txt}</svg>\n'
    )


def write_reports(reports, path) -> None:
    data = [r.to_dict() for r in reports]
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def read_reports(path):
    from .geochecks import CheckReport

    return [CheckReport.from_dict(d) for d in json.loads(Path(path).read_text())]


def write_trace(trace, directory, svg: bool = False, reports=None) -> Path:
    """Write ``trace.csv``, ``sets/E_%06d.csv``, ``params.json`` and optional
    ``report.json`` and ``frames/%06d.svg``."""
    from .flow import TRACE_COLUMNS

    d = Path(directory)
    (d / "sets").mkdir(parents=True, exist_ok=True)
    with open(d / "trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in trace.table():
            w.writerow([_fmt(v) if j not in (7,) else str(int(v)) for j, v in enumerate(row)])
    for k, S in enumerate(trace.sets):
        set_to_csv(S, d / "sets" / f"E_{k:06d}.csv")
    (d / "params.json").write_text(json.dumps(trace.params.to_dict(), indent=2, sort_keys=True) + "\n")
    if svg:
        (d / "frames").mkdir(exist_ok=True)
        extent = 1.1 * max(float(np.max(S.radii)) for S in trace.sets)
        for k, S in enumerate(trace.sets):
            set_to_svg(S, d / "frames" / f"{k:06d}.svg", extent=extent, label=f"t = {k * trace.params.h:.4f}")
    if reports is not None:
        write_reports(reports, d / "report.json")
    return d


def read_trace(directory):
    """Inverse of :func:`write_trace`; raises :class:`TraceFormatError`."""
    from .flow import TRACE_COLUMNS, FlowParams, FlowTrace

    d = Path(directory)
    for name in ("trace.csv", "params.json"):
        if not (d / name).is_file():
            raise TraceFormatError(f"missing {name} in {d}")
    try:
        params = FlowParams.from_dict(json.loads((d / "params.json").read_text()))
    except (ValueError, TypeError) as exc:
        raise TraceFormatError(f"bad params.json: {exc}") from exc
    with open(d / "trace.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != TRACE_COLUMNS:
        raise TraceFormatError("trace.csv header mismatch")
    try:
        table = np.array([[float(v) for v in row] for row in rows[1:]])
    except ValueError as exc:
        raise TraceFormatError(f"trace.csv: {exc}") from exc
    if table.ndim != 2 or table.shape[1] != len(TRACE_COLUMNS) or len(table) == 0:
        raise TraceFormatError("trace.csv has no data rows or wrong column count")
    if not np.all(np.isfinite(table)):
        raise TraceFormatError("trace.csv contains non-finite values")
    trace = FlowTrace(params)
    for k, row in enumerate(table):
        p = d / "sets" / f"E_{k:06d}.csv"
        if not p.is_file():
            raise TraceFormatError(f"missing snapshot {p.name}")
        try:
            S = set_from_csv(p)
        except ValueError as exc:
            raise TraceFormatError(str(exc)) from exc
        trace.sets.append(S)
    # stored diagnostics are kept as written so verification sees tampering
    trace.volume = list(table[:, 1])
    trace.perimeter = list(table[:, 2])
    trace.energy = list(table[:, 3])
    trace.lam = list(table[:, 4])
    trace.dtilde_step = list(table[:, 5])
    trace.dH_step = list(table[:, 6])
    trace.iters = [int(v) for v in table[:, 7]]
    trace.residual = list(table[:, 8])
    return trace
