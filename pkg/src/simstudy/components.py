"""Component families of a simulation study and the objects passed between stages.

A study is assembled from four kinds of components:

- models (:class:`ModelSpec`), which hold parameters and know how to simulate draws,
- methods (:class:`MethodSpec`, :class:`ExtendedMethodSpec`), which map a draw to an
  output map,
- metrics (:class:`MetricSpec`), which map an output map to numbers,
- aggregators (:class:`AggregatorSpec`), which summarise per-draw metric values.

Every component carries a short ``name`` (used in file names) and a human readable
``label`` (used in tables and plots).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np

from simstudy.errors import ComponentError

_NAME_RE = re.compile(r"^[a-zA-Z0-9_.-]+$")
_MODEL_NAME_RE = re.compile(r"^[a-zA-Z0-9_./-]+$")

TIME_METRIC = "time"
TIME_LABEL = "Computing time"


@dataclass(frozen=True)
class ComponentId:
    name: str
    label: str

    def __post_init__(self):
        if not isinstance(self.name, str) or not _MODEL_NAME_RE.match(self.name):
            raise ComponentError(f"invalid name {self.name!r}: must match [a-zA-Z0-9_./-]+")
        if not isinstance(self.label, str) or not self.label:
            raise ComponentError(f"label for {self.name!r} must be a nonempty string")


def _check_slug(name: str) -> None:
    # '/' only appears in generated model names
    if not isinstance(name, str) or not _NAME_RE.match(name):
        raise ComponentError(f"invalid name {name!r}: must match [a-zA-Z0-9_.-]+")


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A parameterised distribution.

    ``simulate(params, nsim, rng)`` must return a list of exactly ``nsim`` draws.
    """

    id: ComponentId
    params: dict[str, Any]
    simulate: Callable[..., list] | None = field(repr=False, default=None)

    @property
    def name(self) -> str:
        return self.id.name

    @property
    def label(self) -> str:
        return self.id.label

    def __getitem__(self, key: str) -> Any:
        return self.params[key]

    def with_params(self, **updates) -> ModelSpec:
        """Copy of this model with some parameters replaced."""
        params = dict(self.params)
        params.update(updates)
        return replace(self, params=params)

    def draw(self, nsim: int, rng) -> list:
        if self.simulate is None:
            raise ComponentError(
                f"model {self.name!r} has no simulate procedure; register it before "
                "calling simulate_from_model"
            )
        draws = list(self.simulate(self.params, nsim, rng))
        if len(draws) != nsim:
            raise ComponentError(
                f"simulate for model {self.name!r} returned {len(draws)} draws, expected {nsim}"
            )
        return draws

    def __repr__(self) -> str:
        return (
            "Model Component\n"
            f" name: {self.name}\n"
            f" label: {self.label}\n"
            f" params: {' '.join(self.params)}"
        )


@dataclass(frozen=True, eq=False)
class MethodSpec:
    """A procedure ``apply(model, draw, rng, **extra_args) -> dict``."""

    id: ComponentId
    apply: Callable[..., dict] = field(repr=False)
    settings: dict[str, Any] = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.id.name

    @property
    def label(self) -> str:
        return self.id.label

    def run(self, model: ModelSpec, draw, rng, **extra_args) -> dict:
        out = self.apply(model, draw, rng, **extra_args)
        if not isinstance(out, dict):
            raise ComponentError(
                f"method {self.name!r} must return a dict, got {type(out).__name__}"
            )
        return out

    def __add__(self, other):
        if isinstance(other, MethodExtensionSpec):
            return compose_extended(self, other)
        return NotImplemented


@dataclass(frozen=True, eq=False)
class MethodExtensionSpec:
    """``extend(model, draw, base_out, base_method, rng) -> dict``."""

    id: ComponentId
    extend: Callable[..., dict] = field(repr=False)

    @property
    def name(self) -> str:
        return self.id.name

    @property
    def label(self) -> str:
        return self.id.label


@dataclass(frozen=True, eq=False)
class ExtendedMethodSpec:
    base: MethodSpec
    extension: MethodExtensionSpec
    id: ComponentId = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self,
            "id",
            ComponentId(
                f"{self.base.name}_{self.extension.name}",
                f"{self.base.label} {self.extension.label}",
            ),
        )

    @property
    def name(self) -> str:
        return self.id.name

    @property
    def label(self) -> str:
        return self.id.label

    @property
    def settings(self) -> dict[str, Any]:
        return {"base": self.base.name, "extension": self.extension.name, **self.base.settings}

    def run_extension(self, model: ModelSpec, draw, base_out: dict, rng) -> dict:
        out = self.extension.extend(model, draw, base_out, self.base, rng)
        if not isinstance(out, dict):
            raise ComponentError(
                f"extension {self.extension.name!r} must return a dict, got {type(out).__name__}"
            )
        return out


@dataclass(frozen=True, eq=False)
class MetricSpec:
    """A pure function ``compute(model, out)`` returning a scalar or a vector."""

    id: ComponentId
    compute: Callable[[ModelSpec, dict], Any] = field(repr=False)

    @property
    def name(self) -> str:
        return self.id.name

    @property
    def label(self) -> str:
        return self.id.label


@dataclass(frozen=True, eq=False)
class AggregatorSpec:
    label: str
    aggregate: Callable[[np.ndarray], float] = field(repr=False)

    def __call__(self, values) -> float:
        values = np.asarray(values, dtype=float)
        if values.size < 1:
            raise ValueError(f"aggregator {self.label!r} needs at least one value")
        return float(self.aggregate(values))


def new_model_spec(name: str, label: str, params: dict | None = None,
                   simulate: Callable[..., list] | None = None) -> ModelSpec:
    _check_slug(name)
    if simulate is None or not callable(simulate):
        raise ComponentError(f"model {name!r} needs a callable simulate procedure")
    return ModelSpec(ComponentId(name, label), dict(params or {}), simulate)


def new_method_spec(name: str, label: str, apply: Callable[..., dict],
                    settings: dict | None = None) -> MethodSpec:
    _check_slug(name)
    if not callable(apply):
        raise ComponentError(f"method {name!r} needs a callable apply procedure")
    return MethodSpec(ComponentId(name, label), apply, dict(settings or {}))


def new_metric_spec(name: str, label: str, compute: Callable[[ModelSpec, dict], Any]) -> MetricSpec:
    _check_slug(name)
    if name == TIME_METRIC:
        raise ComponentError("metric name 'time' is reserved for the automatic timing metric")
    if not callable(compute):
        raise ComponentError(f"metric {name!r} needs a callable compute procedure")
    return MetricSpec(ComponentId(name, label), compute)


def new_method_extension(name: str, label: str, extend: Callable[..., dict]) -> MethodExtensionSpec:
    _check_slug(name)
    if not callable(extend):
        raise ComponentError(f"extension {name!r} needs a callable extend procedure")
    return MethodExtensionSpec(ComponentId(name, label), extend)


def compose_extended(base: MethodSpec, ext: MethodExtensionSpec) -> ExtendedMethodSpec:
    if not isinstance(base, MethodSpec) or not isinstance(ext, MethodExtensionSpec):
        raise ComponentError("compose_extended needs a MethodSpec and a MethodExtensionSpec")
    return ExtendedMethodSpec(base, ext)


def new_aggregator(label: str, aggregate: Callable[[np.ndarray], float]) -> AggregatorSpec:
    if not label:
        raise ComponentError("aggregator label must be nonempty")
    return AggregatorSpec(label, aggregate)


def _sum_in_order(values: np.ndarray) -> float:
    total = 0.0
    for v in values:
        total += float(v)
    return total


def _mean(values: np.ndarray) -> float:
    return _sum_in_order(values) / len(values)


def _se(values: np.ndarray) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    m = _mean(values)
    ss = _sum_in_order((values - m) ** 2)
    return math.sqrt(ss / (n - 1)) / math.sqrt(n)


# Sums run left to right in draw order so independent recomputations agree exactly.
MEAN = new_aggregator("Mean", _mean)
STANDARD_ERROR = new_aggregator("Standard error", _se)
MEDIAN = new_aggregator("Median", lambda v: float(np.median(v)))
