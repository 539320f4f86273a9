"""Per-chunk result objects: draws, method outputs and evaluations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from simstudy.components import TIME_LABEL, TIME_METRIC
from simstudy.rng import RngState


def draw_id(index: int, j: int) -> str:
    return f"r{index}.{j}"


@dataclass(eq=False)
class DrawsBatch:
    model_name: str
    model_label: str
    index: int
    draws: list
    rng_end_state: RngState

    @property
    def nsim(self) -> int:
        return len(self.draws)

    @property
    def draw_ids(self) -> list[str]:
        return [draw_id(self.index, j) for j in range(1, self.nsim + 1)]

    @property
    def label(self) -> str:
        return f"(Block {self.index}:) {self.nsim} draws from {self.model_label}"

    def __repr__(self) -> str:
        return f"Draws Component\n name: {self.model_name}\n label: {self.label}"


@dataclass(eq=False)
class OutputBatch:
    model_name: str
    index: int
    method_name: str
    method_label: str
    out: list[dict]
    time_sec: np.ndarray
    settings: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.time_sec = np.asarray(self.time_sec, dtype=float)
        if len(self.out) != len(self.time_sec):
            raise ValueError("out and time_sec must have one entry per draw")
        if np.any(self.time_sec < 0):
            raise ValueError("time_sec entries must be nonnegative")

    @property
    def nsim(self) -> int:
        return len(self.out)

    @property
    def draw_ids(self) -> list[str]:
        return [draw_id(self.index, j) for j in range(1, self.nsim + 1)]

    def __repr__(self) -> str:
        keys = list(self.out[0]) if self.out else []
        return (
            "Output Component\n"
            f" model_name: {self.model_name}\n"
            f" index: {self.index}\n"
            f" nsim: {self.nsim}\n"
            f" method_name: {self.method_name}\n"
            f" method_label: {self.method_label}\n"
            f" out: {', '.join(keys + ['time'])}"
        )


@dataclass(eq=False)
class EvalsBatch:
    """Metric values of one method on one chunk.

    ``values[metric_name]`` is a list with one entry per draw, in draw order.
    The automatic ``time`` metric is always last.
    """

    model_name: str
    index: int
    method_name: str
    method_label: str
    metric_labels: dict[str, str]
    values: dict[str, list]

    @property
    def metric_names(self) -> list[str]:
        return list(self.metric_labels)

    @property
    def nsim(self) -> int:
        return len(self.values[TIME_METRIC])

    @property
    def draw_ids(self) -> list[str]:
        return [draw_id(self.index, j) for j in range(1, self.nsim + 1)]

    def value(self, method_name: str, draw: str, metric_name: str):
        if method_name != self.method_name:
            raise KeyError(method_name)
        return self.values[metric_name][self.draw_ids.index(draw)]

    def with_time_last(self) -> EvalsBatch:
        labels = {k: v for k, v in self.metric_labels.items() if k != TIME_METRIC}
        labels[TIME_METRIC] = TIME_LABEL
        values = {k: self.values[k] for k in labels}
        return EvalsBatch(self.model_name, self.index, self.method_name, self.method_label,
                          labels, values)

    def __repr__(self) -> str:
        return (
            "Evals Component\n"
            f" model_name: {self.model_name}    index: {self.index} ({self.nsim} nsim)\n"
            f" method_name(s): {self.method_name} (labeled: {self.method_label})\n"
            f" metric_name(s): {', '.join(self.metric_names)}\n"
            f" metric_label(s): {', '.join(self.metric_labels.values())}"
        )
