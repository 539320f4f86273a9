"""Aggregate tables: one row per model, one column per method."""

from __future__ import annotations

import html
from dataclasses import dataclass, field

import numpy as np

from simstudy import store
from simstudy.components import MEAN, STANDARD_ERROR, AggregatorSpec
from simstudy.engine import Simulation, require_evals
from simstudy.errors import NotComputedError

FORMATS = ("latex", "markdown", "html")


@dataclass
class TableSpec:
    metric_name: str
    center: AggregatorSpec = MEAN
    spread: AggregatorSpec = STANDARD_ERROR
    format: str = "markdown"
    nsmall: int = 2
    digits: int = 0


@dataclass
class Table:
    caption: str
    row_labels: list[str]
    col_labels: list[str]
    cells: list[list[str]]
    centers: np.ndarray = field(repr=False)
    spreads: np.ndarray = field(repr=False)


def format_number(x: float, nsmall: int = 2, digits: int = 0) -> str:
    """Round to ``digits`` significant digits (skipped when ``digits <= 0``), then
    print fixed-point with ``nsmall`` decimals."""
    if not np.isfinite(x):
        return str(x)
    if digits > 0 and x != 0:
        x = float(f"{x:.{digits}g}")
    text = f"{x:.{nsmall}f}"
    if text.startswith("-") and float(text) == 0:
        text = text[1:]
    return text


def build_table(sim: Simulation, spec: TableSpec) -> Table:
    batches = require_evals(sim, spec.metric_name)
    model_names = sim.model_names()
    model_labels = {r.model_name: store.read_header(r)["meta"]["label"] for r in sim.refs["model"]}
    methods: list[str] = []
    method_labels: dict[str, str] = {}
    values: dict[tuple[str, str], list] = {}
    metric_label = None
    for b in batches:
        if b.method_name not in method_labels:
            methods.append(b.method_name)
            method_labels[b.method_name] = b.method_label
        metric_label = metric_label or b.metric_labels[spec.metric_name]
        cell = values.setdefault((b.model_name, b.method_name), [])
        for j, v in enumerate(b.values[spec.metric_name]):
            arr = np.asarray(v, dtype=float)
            if arr.size != 1:
                raise ValueError(
                    f"metric {spec.metric_name!r} is a vector; tables need scalar metrics")
            cell.append(((b.index, j), float(arr.reshape(-1)[0])))
    rows = [m for m in model_names if any((m, meth) in values for meth in methods)]
    centers = np.full((len(rows), len(methods)), np.nan)
    spreads = np.full_like(centers, np.nan)
    cells, counts = [], set()
    for i, m in enumerate(rows):
        row = []
        for j, meth in enumerate(methods):
            if (m, meth) not in values:
                raise NotComputedError(f"no evals for {m} / {meth}; run evaluate first",
                                       "evaluate")
            vals = np.array([v for _, v in sorted(values[(m, meth)])])
            counts.add(len(vals))
            centers[i, j] = spec.center(vals)
            spreads[i, j] = spec.spread(vals)
            row.append(f"{format_number(centers[i, j], spec.nsmall, spec.digits)} "
                       f"({format_number(spreads[i, j], spec.nsmall, spec.digits)})")
        cells.append(row)
    nrep = (str(counts.pop()) if len(counts) == 1
            else f"{min(counts)}-{max(counts)}" if counts else "0")
    caption = f"A comparison of {metric_label} (averaged over {nrep} replicates)."
    return Table(caption, [model_labels[m] for m in rows], [method_labels[m] for m in methods],
                 cells, centers, spreads)


def render_table(table: Table, format: str = "markdown") -> str:
    if format == "latex":
        spec = "|".join(["l"] * (len(table.col_labels) + 1))
        lines = ["\\begin{table}", "", f"\\caption{{{table.caption}}}", "\\centering",
                 f"\\begin{{tabular}}[t]{{{spec}}}", "\\hline",
                 "  & " + " & ".join(table.col_labels) + "\\\\", "\\hline"]
        for label, row in zip(table.row_labels, table.cells):
            lines += [label + " & " + " & ".join(row) + "\\\\", "\\hline"]
        lines += ["\\end{tabular}", "\\end{table}"]
        return "\n".join(lines) + "\n"
    if format == "markdown":
        header = "|   | " + " | ".join(table.col_labels) + " |"
        rule = "|:--|" + "|".join([":--"] * len(table.col_labels)) + "|"
        body = ["| " + label + " | " + " | ".join(row) + " |"
                for label, row in zip(table.row_labels, table.cells)]
        return "\n".join([f"Table: {table.caption}", "", header, rule, *body]) + "\n"
    if format == "html":
        esc = html.escape
        lines = ["<table>", f"<caption>{esc(table.caption)}</caption>",
                 "<thead><tr><th></th>" + "".join(f"<th>{esc(c)}</th>" for c in table.col_labels)
                 + "</tr></thead>", "<tbody>"]
        for label, row in zip(table.row_labels, table.cells):
            lines.append(f"<tr><td>{esc(label)}</td>" + "".join(f"<td>{esc(c)}</td>" for c in row)
                         + "</tr>")
        lines += ["</tbody>", "</table>"]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown table format {format!r}; choose from {FORMATS}")


def tabulate_eval(sim: Simulation, metric: str, format: str = "markdown", nsmall: int = 2,
                  digits: int = 0, center: AggregatorSpec = MEAN,
                  spread: AggregatorSpec = STANDARD_ERROR) -> str:
    spec = TableSpec(metric, center, spread, format, nsmall, digits)
    return render_table(build_table(sim, spec), format)
