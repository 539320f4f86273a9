"""Plot data (long CSV) and static SVG charts rendered from that CSV.

Every plot is first reduced to a CSV table; the SVG is drawn by parsing the CSV
text back, so both always carry the same numbers. Titles, axis labels and legend
entries are taken from component labels and stored as ``# key: value`` lines at
the top of the CSV.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from simstudy import store
from simstudy.components import MEAN, STANDARD_ERROR, AggregatorSpec
from simstudy.engine import Simulation, require_evals
from simstudy.reporting.records import sim_model_params
from simstudy.reporting.svg import DASHES, PALETTE, Figure


@dataclass
class Plot:
    kind: str
    csv: str
    svg: str

    def save(self, out_dir, stem: str) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path, svg_path = out / f"{stem}.csv", out / f"{stem}.svg"
        csv_path.write_text(self.csv)
        svg_path.write_text(self.svg)
        return csv_path, svg_path


def _num(v: float) -> str:
    return repr(float(v))


def _write_csv(meta: dict, header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def read_plot_csv(text: str) -> tuple[dict, list[dict]]:
    meta, lines = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = value
        else:
            lines.append(line)
    return meta, list(csv.DictReader(lines))


def _collect(sim: Simulation, metric: str):
    """(model labels in order, method names/labels in order, metric label, values)."""
    batches = require_evals(sim, metric)
    model_labels = {r.model_name: store.read_header(r)["meta"]["label"] for r in sim.refs["model"]}
    methods, method_labels, metric_label = [], {}, metric
    values: dict[tuple[str, str], list] = {}
    for b in batches:
        if b.method_name not in method_labels:
            methods.append(b.method_name)
            method_labels[b.method_name] = b.method_label
        metric_label = b.metric_labels[metric]
        cell = values.setdefault((b.model_name, b.method_name), [])
        for d, v in zip(b.draw_ids, b.values[metric]):
            cell.append((b.index, d, v))
    models = [m for m in sim.model_names() if any((m, k) in values for k in methods)]
    return models, model_labels, methods, method_labels, metric_label, values


# -- box plots ---------------------------------------------------------------

def box_stats(values) -> dict:
    """Tukey box statistics: linear-interpolation quartiles, whiskers at 1.5 IQR."""
    v = np.sort(np.asarray(values, dtype=float))
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    return {
        "q1": float(q1), "median": float(med), "q3": float(q3),
        "whisker_lo": float(inside.min()), "whisker_hi": float(inside.max()),
        "outliers": [float(x) for x in v[(v < lo_fence) | (v > hi_fence)]],
    }


def plot_eval(sim: Simulation, metric: str, title: str | None = None) -> Plot:
    models, mlabels, methods, meth_labels, metric_label, values = _collect(sim, metric)
    rows = []
    for m in models:
        for pos, meth in enumerate(methods, start=1):
            vals = []
            for _, _, v in values.get((m, meth), []):
                arr = np.asarray(v, dtype=float)
                if arr.size != 1:
                    raise ValueError(f"plot_eval needs a scalar metric; {metric!r} is a vector")
                vals.append(float(arr.reshape(-1)[0]))
            st = box_stats(vals)
            for key in ("whisker_lo", "q1", "median", "q3", "whisker_hi"):
                rows.append([mlabels[m], meth_labels[meth], pos, key, st[key]])
            for o in st["outliers"]:
                rows.append([mlabels[m], meth_labels[meth], pos, "outlier", o])
    meta = {"kind": "eval_box", "title": title or "", "ylabel": metric_label, "xlabel": "Method"}
    text = _write_csv(meta, ["facet", "method", "position", "stat", "value"], rows)
    return Plot("eval_box", text, render_svg(text))


# -- curves of one vector metric against another -----------------------------

def plot_evals(sim: Simulation, metric_x: str, metric_y: str, title: str | None = None) -> Plot:
    models, mlabels, methods, meth_labels, xlabel, xvals = _collect(sim, metric_x)
    _, _, _, _, ylabel, yvals = _collect(sim, metric_y)
    rows = []
    for m in models:
        for meth in methods:
            for (idx, d, vx), (_, _, vy) in zip(xvals.get((m, meth), []), yvals.get((m, meth), [])):
                ax = np.atleast_1d(np.asarray(vx, dtype=float))
                ay = np.atleast_1d(np.asarray(vy, dtype=float))
                if ax.shape != ay.shape:
                    raise ValueError(
                        f"{metric_x} and {metric_y} have different lengths for {m} {meth} {d}")
                for i, (x, y) in enumerate(zip(ax, ay), start=1):
                    rows.append([mlabels[m], meth_labels[meth], d, i, float(x), float(y)])
    meta = {"kind": "evals_curve", "title": title or "", "xlabel": xlabel, "ylabel": ylabel}
    text = _write_csv(meta, ["facet", "method", "draw", "point", "x", "y"], rows)
    return Plot("evals_curve", text, render_svg(text))


# -- a metric against a varied model parameter -------------------------------

def plot_eval_by(sim: Simulation, metric: str, varying: str, type: str = "aggregate",
                 center: AggregatorSpec = MEAN, spread: AggregatorSpec = STANDARD_ERROR,
                 title: str | None = None) -> Plot:
    if type not in ("aggregate", "raw"):
        raise ValueError("type must be 'aggregate' or 'raw'")
    models, _, methods, meth_labels, metric_label, values = _collect(sim, metric)
    params = sim_model_params(sim)
    for m in models:
        if varying not in params[m]:
            raise KeyError(f"model {m} has no scalar parameter {varying!r}")
    rows = []
    for meth in methods:
        pts = sorted((float(params[m][varying]), m) for m in models if (m, meth) in values)
        for x, m in pts:
            vals = [float(np.asarray(v, dtype=float).reshape(-1)[0])
                    for _, _, v in values[(m, meth)]]
            if type == "raw":
                for (_, d, _), v in zip(values[(m, meth)], vals):
                    rows.append([meth_labels[meth], x, v, "", d])
                continue
            if len(vals) < 2:
                warnings.warn(f"{meth} at {varying}={x:g} has a single draw; "
                              "error bar width set to 0", stacklevel=2)
            rows.append([meth_labels[meth], x, center(vals), spread(vals), ""])
    meta = {"kind": f"eval_by_{type}", "title": title or "", "xlabel": varying,
            "ylabel": metric_label}
    text = _write_csv(meta, ["method", "x", "y", "halfwidth", "draw"], rows)
    return Plot(f"eval_by_{type}", text, render_svg(text))


# -- rendering ---------------------------------------------------------------

def _ordered(seq):
    out = []
    for s in seq:
        if s not in out:
            out.append(s)
    return out


def render_svg(csv_text: str) -> str:
    """Draw the chart described by a plot CSV produced in this module."""
    meta, rows = read_plot_csv(csv_text)
    kind = meta["kind"]
    fig = Figure(title=meta.get("title", ""))
    if kind == "eval_box":
        facets = _ordered(r["facet"] for r in rows)
        methods = _ordered(r["method"] for r in rows)
        ys = [float(r["value"]) for r in rows] or [0.0]
        panels = fig.panels(len(facets) or 1, [(0.5, len(methods) + 0.5)] * max(len(facets), 1),
                            (min(ys), max(ys)), facets or [""])
        for panel, facet in zip(panels, facets):
            panel.axes(meta.get("xlabel", ""), meta.get("ylabel", ""),
                       xticks=list(range(1, len(methods) + 1)), xticklabels=methods)
            for i, meth in enumerate(methods):
                sub = [r for r in rows if r["facet"] == facet and r["method"] == meth]
                st = {r["stat"]: float(r["value"]) for r in sub if r["stat"] != "outlier"}
                color = PALETTE[i % len(PALETTE)]
                if st:
                    panel.box(i + 1, (st["q1"], st["median"], st["q3"], st["whisker_lo"],
                                      st["whisker_hi"]), color)
                for r in sub:
                    if r["stat"] == "outlier":
                        panel.point(i + 1, float(r["value"]), color)
        fig.legend([(m, PALETTE[i % len(PALETTE)], "") for i, m in enumerate(methods)])
    elif kind == "evals_curve":
        facets = _ordered(r["facet"] for r in rows)
        methods = _ordered(r["method"] for r in rows)
        xs = [float(r["x"]) for r in rows] or [0.0]
        ys = [float(r["y"]) for r in rows] or [0.0]
        panels = fig.panels(len(facets) or 1, [(min(xs), max(xs))] * max(len(facets), 1),
                            (min(ys), max(ys)), facets or [""])
        for panel, facet in zip(panels, facets):
            panel.axes(meta.get("xlabel", ""), meta.get("ylabel", ""))
            for i, meth in enumerate(methods):
                color, dash = PALETTE[i % len(PALETTE)], DASHES[i % len(DASHES)]
                sub = [r for r in rows if r["facet"] == facet and r["method"] == meth]
                for d in _ordered(r["draw"] for r in sub):
                    pts = [r for r in sub if r["draw"] == d]
                    panel.polyline([float(r["x"]) for r in pts], [float(r["y"]) for r in pts],
                                   color, dash, width=1.0, opacity=0.7)
        fig.legend([(m, PALETTE[i % len(PALETTE)], DASHES[i % len(DASHES)])
                    for i, m in enumerate(methods)])
    elif kind.startswith("eval_by"):
        methods = _ordered(r["method"] for r in rows)
        xs = [float(r["x"]) for r in rows] or [0.0]
        lows, highs = [], []
        for r in rows:
            y = float(r["y"])
            hw = float(r["halfwidth"]) if r["halfwidth"] else 0.0
            lows.append(y - hw)
            highs.append(y + hw)
        panel = fig.panels(1, [(min(xs), max(xs))], (min(lows or [0]), max(highs or [1])),
                           [""])[0]
        panel.axes(meta.get("xlabel", ""), meta.get("ylabel", ""))
        for i, meth in enumerate(methods):
            color, dash = PALETTE[i % len(PALETTE)], DASHES[i % len(DASHES)]
            sub = [r for r in rows if r["method"] == meth]
            if kind == "eval_by_raw":
                for r in sub:
                    panel.point(float(r["x"]), float(r["y"]), color)
                continue
            panel.polyline([float(r["x"]) for r in sub], [float(r["y"]) for r in sub], color, dash)
            for r in sub:
                y, hw = float(r["y"]), float(r["halfwidth"])
                panel.point(float(r["x"]), y, color)
                if hw > 0:
                    panel.errorbar(float(r["x"]), y - hw, y + hw, color)
        fig.legend([(m, PALETTE[i % len(PALETTE)], DASHES[i % len(DASHES)])
                    for i, m in enumerate(methods)])
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    return fig.render()
