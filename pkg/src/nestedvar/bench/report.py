"""Summaries, slope fits and CSV / JSON / SVG output."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

from .._validation import DegenerateInputError
from ..numerics import fit_loglog
from .runner import ResultRow

__all__ = ["CSV_COLUMNS", "SCHEMA", "SummaryRow", "Slope", "Summary", "summarize",
           "write_csv", "read_csv", "write_json", "read_summary_json", "write_svg", "emit"]

CSV_COLUMNS = ("scheme", "epsilon", "run", "estimate", "abs_error", "inner_evals", "wall_time_s")
SCHEMA = 1
# (name, x field, y field) of every fitted slope
SLOPES = (
    ("time_vs_eps", "epsilon", "mean_time"),
    ("time_vs_rmse", "rmse", "mean_time"),
    ("evals_vs_eps", "epsilon", "mean_evals"),
    ("evals_vs_rmse", "rmse", "mean_evals"),
)


@dataclass(frozen=True)
class SummaryRow:
    scheme: str
    epsilon: float
    replications: int
    rmse: float
    mean_time: float
    mean_evals: float


@dataclass(frozen=True)
class Slope:
    scheme: str
    metric: str
    slope: Optional[float]
    intercept: Optional[float]
    r2: Optional[float]
    note: str = ""


@dataclass
class Summary:
    rows: List[SummaryRow]
    slopes: List[Slope]

    def slope(self, scheme: str, metric: str = "evals_vs_eps") -> Optional[float]:
        for s in self.slopes:
            if s.scheme == scheme and s.metric == metric:
                return s.slope
        raise KeyError((scheme, metric))

    def rows_for(self, scheme: str) -> List[SummaryRow]:
        return [r for r in self.rows if r.scheme == scheme]

    def to_dict(self):
        return {"schema": SCHEMA, "summary": [asdict(r) for r in self.rows],
                "slopes": [asdict(s) for s in self.slopes]}


def _ordered(values):
    seen = {}
    for v in values:
        seen.setdefault(v, None)
    return list(seen)


def summarize(rows: Iterable[ResultRow]) -> Summary:
    """Per (scheme, epsilon) RMSE, mean time and mean cost, plus log-log slopes."""
    rows = list(rows)
    groups: Dict[Tuple[str, float], List[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.scheme, r.epsilon), []).append(r)
    out = []
    for (scheme, eps), grp in groups.items():
        err = np.array([g.abs_error for g in grp])
        out.append(SummaryRow(
            scheme=scheme, epsilon=eps, replications=len(grp),
            rmse=float(math.sqrt(np.mean(err * err))),
            mean_time=float(np.mean([g.wall_time_s for g in grp])),
            mean_evals=float(np.mean([g.inner_evals for g in grp]))))
    slopes = []
    for scheme in _ordered(r.scheme for r in out):
        mine = [r for r in out if r.scheme == scheme]
        for metric, xf, yf in SLOPES:
            pts = [(getattr(r, xf), getattr(r, yf)) for r in mine]
            if len(pts) < 2:
                slopes.append(Slope(scheme, metric, None, None, None, "fewer than 2 accuracies"))
                continue
            try:
                fit = fit_loglog(pts)
            except DegenerateInputError as exc:
                slopes.append(Slope(scheme, metric, None, None, None, str(exc)))
                continue
            slopes.append(Slope(scheme, metric, fit.slope, fit.intercept, fit.r2))
    return Summary(out, slopes)


def _check_parent(path: Path):
    if not path.parent.exists():
        raise OSError(f"cannot write {path}: directory {path.parent} does not exist")


def write_csv(rows: Iterable[ResultRow], path) -> Path:
    path = Path(path)
    _check_parent(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in rows:
                w.writerow([r.scheme, repr(float(r.epsilon)), r.run, repr(float(r.estimate)),
                            repr(float(r.abs_error)), r.inner_evals, f"{r.wall_time_s:.6f}"])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path) -> List[ResultRow]:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader, ()))
            if header != CSV_COLUMNS:
                raise ValueError(f"{path}: unexpected header {header!r}")
            return [ResultRow(s, float(e), int(n), float(x), float(a), int(c), float(t))
                    for s, e, n, x, a, c, t in reader]
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc


def write_json(path, rows: Optional[Iterable[ResultRow]] = None,
               summary: Optional[Summary] = None) -> Path:
    """Versioned JSON with the raw rows and/or the summary."""
    path = Path(path)
    _check_parent(path)
    doc = {"schema": SCHEMA}
    if rows is not None:
        doc["rows"] = [asdict(r) for r in rows]
    if summary is not None:
        doc.update(summary.to_dict())
    try:
        path.write_text(json.dumps(doc, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_summary_json(path) -> Summary:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    if doc.get("schema") != SCHEMA or "summary" not in doc:
        raise ValueError(f"{path}: not a schema-{SCHEMA} summary document")
    return Summary([SummaryRow(**r) for r in doc["summary"]],
                   [Slope(**s) for s in doc.get("slopes", [])])


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2",
            "#17becf", "#7f7f7f", "#bcbd22")
_AXES = {"epsilon": "prescribed accuracy", "rmse": "RMSE",
         "mean_time": "mean time (s)", "mean_evals": "mean inner evaluations"}


def _svg_document(summary: Summary, x: str, y: str, title: str) -> str:
    W, H, pad = 720, 480, 70
    pts = [(getattr(r, x), getattr(r, y)) for r in summary.rows]
    pts = [(a, b) for a, b in pts if a > 0 and b > 0]
    if not pts:
        raise ValueError("nothing to plot: no positive (x, y) pairs")
    lx = np.log10([p[0] for p in pts])
    ly = np.log10([p[1] for p in pts])
    x0, x1 = math.floor(lx.min()), math.ceil(lx.max())
    y0, y1 = math.floor(ly.min()), math.ceil(ly.max())
    x1, y1 = max(x1, x0 + 1), max(y1, y0 + 1)

    def px(v):
        return pad + (math.log10(v) - x0) / (x1 - x0) * (W - 2 * pad)

    def py(v):
        return H - pad - (math.log10(v) - y0) / (y1 - y0) * (H - 2 * pad)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
             f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
             f'<title>{escape(title)}</title>',
             f'<rect x="{pad}" y="{pad}" width="{W - 2 * pad}" height="{H - 2 * pad}" '
             f'fill="none" stroke="#333"/>']
    for d in range(x0, x1 + 1):
        xx = px(10.0 ** d)
        parts.append(f'<text x="{xx:.1f}" y="{H - pad + 18}" text-anchor="middle">1e{d}</text>')
    for d in range(y0, y1 + 1):
        yy = py(10.0 ** d)
        parts.append(f'<text x="{pad - 8}" y="{yy + 4:.1f}" text-anchor="end">1e{d}</text>')
    parts.append(f'<text x="{W / 2}" y="{H - 20}" text-anchor="middle">'
                 f'{escape(_AXES.get(x, x))}</text>')
    parts.append(f'<text x="18" y="{H / 2}" text-anchor="middle" '
                 f'transform="rotate(-90 18 {H / 2})">{escape(_AXES.get(y, y))}</text>')
    metric = {(xf, yf): m for m, xf, yf in SLOPES}.get((x, y))
    schemes = _ordered(r.scheme for r in summary.rows)
    for i, scheme in enumerate(schemes):
        color = _PALETTE[i % len(_PALETTE)]
        mine = [(getattr(r, x), getattr(r, y)) for r in summary.rows_for(scheme)]
        mine = sorted((a, b) for a, b in mine if a > 0 and b > 0)
        parts.append(f'<g class="series" data-scheme="{escape(scheme)}">')
        for a, b in mine:
            parts.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3.5" fill="{color}"/>')
        if len(mine) >= 2:
            fit = fit_loglog(mine)
            xa, xb = mine[0][0], mine[-1][0]
            label = f"{scheme} (slope {fit.slope:.2f})"
            parts.append(
                f'<line class="fit" x1="{px(xa):.2f}" y1="{py(fit.predict(xa)):.2f}" '
                f'x2="{px(xb):.2f}" y2="{py(fit.predict(xb)):.2f}" stroke="{color}" '
                f'stroke-dasharray="6,4" data-metric="{metric or ""}" '
                f'data-slope="{fit.slope:.6g}"/>')
        else:
            label = scheme
        ly_ = pad + 16 + 16 * i
        parts.append(f'<rect x="{W - pad - 190}" y="{ly_ - 9}" width="10" height="10" '
                     f'fill="{color}"/>')
        parts.append(f'<text x="{W - pad - 175}" y="{ly_}">{escape(label)}</text>')
        parts.append('</g>')
    parts.append('</svg>')
    return "\n".join(parts) + "\n"


def write_svg(summary: Summary, path, x: str = "rmse", y: str = "mean_time",
              title: str = "") -> Path:
    """Log-log scatter with one series and one dashed fitted line per scheme."""
    for f in (x, y):
        if f not in _AXES:
            raise ValueError(f"unknown axis {f!r}; expected one of {sorted(_AXES)}")
    path = Path(path)
    _check_parent(path)
    doc = _svg_document(summary, x, y, title or f"{_AXES[y]} against {_AXES[x]}")
    try:
        path.write_text(doc)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def emit(rows: Sequence[ResultRow], summary: Optional[Summary], fmt: str, path) -> Path:
    fmt = fmt.lower()
    if fmt == "csv":
        return write_csv(rows, path)
    if fmt == "json":
        return write_json(path, rows=rows, summary=summary)
    if fmt == "svg":
        return write_svg(summary if summary is not None else summarize(rows), path)
    raise ValueError(f"unknown format {fmt!r}; expected csv, json or svg")
