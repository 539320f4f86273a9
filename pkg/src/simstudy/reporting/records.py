"""Long-format extraction of evaluations."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from simstudy import store
from simstudy.batches import EvalsBatch


@dataclass(frozen=True)
class EvalRecord:
    model_name: str
    method_name: str
    method_label: str
    draw_id: str
    metric_name: str
    value: float
    value_index: int | None = None
    params: dict = field(default_factory=dict)


def varied_params(model_params: dict[str, dict]) -> list[str]:
    """Scalar parameters that take more than one value across the given models."""
    names: list[str] = []
    for params in model_params.values():
        for k in params:
            if k not in names:
                names.append(k)
    varied = []
    for k in names:
        values = {repr(p.get(k)) for p in model_params.values()}
        if len(values) > 1:
            varied.append(k)
    return varied


def evals_to_records(batches: list[EvalsBatch], model_params: dict[str, dict] | None = None,
                     varied: list[str] | None = None) -> list[EvalRecord]:
    """One record per (draw, method, metric), vectors unrolled with 1-based value_index."""
    model_params = model_params or {}
    if varied is None:
        varied = varied_params(model_params)
    rows = []
    for b in batches:
        params = {k: model_params.get(b.model_name, {}).get(k) for k in varied}
        for metric in b.metric_names:
            for draw, value in zip(b.draw_ids, b.values[metric]):
                arr = np.asarray(value, dtype=float)
                if arr.ndim == 0:
                    rows.append(EvalRecord(b.model_name, b.method_name, b.method_label, draw,
                                           metric, float(arr), None, params))
                else:
                    for i, v in enumerate(arr.reshape(-1), start=1):
                        rows.append(EvalRecord(b.model_name, b.method_name, b.method_label,
                                               draw, metric, float(v), i, params))
    return rows


def sim_model_params(sim) -> dict[str, dict]:
    return {r.model_name: store.read_header(r)["meta"]["scalars"] for r in sim.refs["model"]}


def sim_records(sim, metrics: list[str] | None = None) -> tuple[list[EvalRecord], list[str]]:
    params = sim_model_params(sim)
    varied = varied_params(params)
    batches = [store.load_object(r) for r in sim.refs["evals"]]
    rows = evals_to_records(batches, params, varied)
    if metrics is not None:
        rows = [r for r in rows if r.metric_name in metrics]
    return rows, varied


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(rows: list[EvalRecord], varied: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model_name", *varied, "method", "draw", "metric", "value_index", "value"])
    for r in rows:
        w.writerow([r.model_name, *(_fmt(r.params.get(k)) for k in varied), r.method_name,
                    r.draw_id, r.metric_name, _fmt(r.value_index), repr(r.value)])
    return buf.getvalue()
