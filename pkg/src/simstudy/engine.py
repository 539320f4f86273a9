"""The simulation pipeline: models, draws, method outputs and evaluations.

A :class:`Simulation` holds references to stored objects, never the objects
themselves. Every stage writes its results through :mod:`simstudy.store`, skips
work whose result file already exists, and saves the updated record.

Parallel execution runs one task per (model, chunk) or (model, chunk, method)
in a forked process pool. Every task draws its randomness from a stream keyed
by its chunk, so the files written do not depend on the number of workers or on
the order tasks finish in.
"""

from __future__ import annotations

import inspect
import itertools
import logging
import multiprocessing
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from simstudy import store
from simstudy.batches import DrawsBatch, EvalsBatch, OutputBatch
from simstudy.components import (
    TIME_LABEL,
    TIME_METRIC,
    ComponentId,
    ExtendedMethodSpec,
    MethodSpec,
    MetricSpec,
    ModelSpec,
)
from simstudy.errors import (
    CollisionError,
    ComponentError,
    NotComputedError,
    StageFailure,
    StageOrderError,
)
from simstudy.predicates import as_predicate
from simstudy.rng import (
    DEFAULT_SEED,
    StreamKey,
    capture_state,
    derive_chunk_stream,
    derive_model_stream,
    method_stream_for,
)
from simstudy.store import Ref

log = logging.getLogger(__name__)

_KINDS = ("model", "draws", "output", "evals")

# Registered model specs (with their simulate procedures) keyed by (dir, model name).
# Forked workers inherit this, which is how closures reach them without pickling.
_MODEL_CACHE: dict[tuple[str, str], ModelSpec] = {}
_TASK_CONTEXT: dict = {}


@dataclass(frozen=True)
class ParallelOptions:
    worker_count: int = 1

    def __post_init__(self):
        if self.worker_count < 1:
            raise ValueError("worker_count must be a positive integer")


def _workers(parallel) -> int:
    if parallel is None:
        return 1
    if isinstance(parallel, ParallelOptions):
        return parallel.worker_count
    return ParallelOptions(int(parallel)).worker_count


@dataclass
class Simulation:
    name: str
    label: str
    dir: str
    global_seed: int = DEFAULT_SEED
    refs: dict[str, list[Ref]] = field(default_factory=lambda: {k: [] for k in _KINDS})

    def __post_init__(self):
        ComponentId(self.name, self.label or self.name)
        self.dir = str(self.dir)

    @property
    def record_path(self) -> Path:
        return store.simulation_path(self.dir, self.name)

    def to_record(self) -> dict:
        return {
            "format": "simstudy-simulation/1",
            "name": self.name,
            "label": self.label,
            "global_seed": self.global_seed,
            "refs": {k: [r.to_record() for r in self.refs[k]] for k in _KINDS},
        }

    def add_ref(self, ref: Ref) -> None:
        bucket = self.refs[ref.kind]
        if ref not in bucket:
            bucket.append(ref)

    def model_names(self) -> list[str]:
        return [r.model_name for r in self.refs["model"]]

    def method_names(self) -> list[str]:
        seen = []
        for r in self.refs["output"]:
            if r.method_name not in seen:
                seen.append(r.method_name)
        return seen

    def copy(self, **changes) -> Simulation:
        refs = {k: list(v) for k, v in self.refs.items()}
        params = dict(name=self.name, label=self.label, dir=self.dir,
                      global_seed=self.global_seed, refs=refs)
        params.update(changes)
        return Simulation(**params)

    # chaining helpers
    def generate_model(self, model_fn, vary_along=None, **args):
        return generate_model(self, model_fn, vary_along=vary_along, **args)

    def simulate_from_model(self, nsim, index=1, parallel=None):
        return simulate_from_model(self, nsim, index, parallel=parallel)

    def run_method(self, methods, parallel=None):
        return run_method(self, methods, parallel=parallel)

    def evaluate(self, metrics, parallel=None):
        return evaluate(self, metrics, parallel=parallel)

    def subset(self, models=None, methods=None, index=None):
        return subset_simulation(self, models, methods=methods, index=index)

    def rename(self, new_name):
        return rename(self, new_name)

    def relabel(self, new_label):
        return relabel(self, new_label)

    def __repr__(self) -> str:
        counts = ", ".join(f"{len(self.refs[k])} {k}" for k in _KINDS)
        return f"Simulation Component\n name: {self.name}\n label: {self.label}\n refs: {counts}"


# -- records -----------------------------------------------------------------

def save_simulation(sim: Simulation) -> Simulation:
    store.save_record(sim.record_path, sim.to_record())
    return sim


def load_simulation(name: str, dir=".") -> Simulation:
    path = store.simulation_path(dir, name)
    if not path.exists():
        raise FileNotFoundError(f"no simulation named {name!r} in {dir}")
    rec = store.load_record(path)
    sim = Simulation(rec["name"], rec["label"], str(dir), rec["global_seed"])
    for kind in _KINDS:
        sim.refs[kind] = [Ref.from_record(r, str(dir)) for r in rec["refs"][kind]]
    return sim


def new_simulation(name: str, label: str, dir=".", seed: int | None = None,
                   exist_ok: bool = False) -> Simulation:
    """Create a simulation and save its (empty) record immediately.

    With ``exist_ok`` an existing record of the same name is loaded instead.
    """
    path = store.simulation_path(dir, name)
    if path.exists():
        if exist_ok:
            sim = load_simulation(name, dir)
            if seed is not None and seed != sim.global_seed:
                raise CollisionError(
                    f"simulation {name!r} exists with seed {sim.global_seed}, not {seed}")
            return sim
        raise CollisionError(f"simulation {name!r} already exists in {dir}")
    sim = Simulation(name, label, str(dir), DEFAULT_SEED if seed is None else int(seed))
    Path(dir).mkdir(parents=True, exist_ok=True)
    return save_simulation(sim)


def check_integrity(sim: Simulation) -> None:
    """Raise if a ref lacks the upstream ref it was computed from."""
    models = set(sim.model_names())
    draws = {(r.model_name, r.index) for r in sim.refs["draws"]}
    outputs = {(r.model_name, r.index, r.method_name) for r in sim.refs["output"]}
    for r in sim.refs["draws"]:
        if r.model_name not in models:
            raise StageOrderError(f"draws ref {r} has no model ref")
    for r in sim.refs["output"]:
        if (r.model_name, r.index) not in draws:
            raise StageOrderError(f"output ref {r} has no draws ref")
    for r in sim.refs["evals"]:
        if (r.model_name, r.index, r.method_name) not in outputs:
            raise StageOrderError(f"evals ref {r} has no output ref")


# -- task execution ----------------------------------------------------------

def _run_tasks(fn, tasks: Sequence, workers: int, context: dict) -> list:
    """Run ``fn(task)`` for every task, returning results in task order.

    Failures are collected; a :class:`StageFailure` listing them is raised after
    every task has finished, so successful results are never lost.
    """
    _TASK_CONTEXT.clear()
    _TASK_CONTEXT.update(context)
    results, failures = [], []
    if workers <= 1 or len(tasks) <= 1 or "fork" not in multiprocessing.get_all_start_methods():
        for task in tasks:
            try:
                results.append(fn(task))
            except StageFailure as exc:
                failures.append(str(exc))
                results.append(None)
    else:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks)), mp_context=ctx) as pool:
            futures = [pool.submit(_call_in_worker, fn.__name__, task) for task in tasks]
            for fut in futures:
                try:
                    results.append(fut.result())
                except StageFailure as exc:
                    failures.append(str(exc))
                    results.append(None)
    if failures:
        raise StageFailure("; ".join(failures))
    return results


def _call_in_worker(fn_name: str, task):
    return globals()[fn_name](task)


def _load_model(dir: str, model_name: str) -> ModelSpec:
    cached = _MODEL_CACHE.get((os.path.abspath(dir), model_name))
    ref = Ref("model", model_name, dir=dir)
    if cached is not None and cached.simulate is not None:
        model = store.load_object(ref, simulate=cached.simulate)
    else:
        model = store.load_object(ref)
    return model


# -- generate_model ----------------------------------------------------------

def _accepts(fn, name: str) -> bool:
    try:
        params = inspect.signature(fn).parameters
    except (TypeError, ValueError):
        return False
    return name in params or any(p.kind is p.VAR_KEYWORD for p in params.values())


def generate_model(sim: Simulation, model_fn, vary_along: str | Iterable[str] | None = None,
                   **args) -> Simulation:
    """Build one model per combination of the ``vary_along`` argument lists.

    ``model_fn(**args)`` must return a :class:`ModelSpec`. If it takes an ``rng``
    argument it receives a stream reserved for that model, keyed by the global
    seed, the factory's name and the generation arguments.
    """
    if vary_along is None:
        vary = []
    elif isinstance(vary_along, str):
        vary = [vary_along]
    else:
        vary = list(vary_along)
    for name in vary:
        if name not in args:
            raise ComponentError(f"vary_along names {name!r}, which is not an argument")
        if not isinstance(args[name], (list, tuple)):
            raise ComponentError(f"vary_along argument {name!r} must be a list of values")
    fixed = {k: v for k, v in args.items() if k not in vary}
    combos = itertools.product(*(list(args[name]) for name in vary))
    factory_name = re.sub(r"[^a-zA-Z0-9_.-]", "_", getattr(model_fn, "__name__", "") or "model")
    for combo in combos:
        gen_args = dict(fixed, **dict(zip(vary, combo)))
        call_args = dict(gen_args)
        if _accepts(model_fn, "rng"):
            key = store.encode_model_dirname(factory_name, gen_args)
            call_args["rng"] = derive_model_stream(sim.global_seed, key)
        spec = model_fn(**call_args)
        if not isinstance(spec, ModelSpec):
            raise TypeError(f"{factory_name} returned {type(spec).__name__}, not a ModelSpec")
        name = store.encode_model_dirname(spec.name, gen_args)
        model = ModelSpec(ComponentId(name, spec.label), spec.params, spec.simulate)
        ref = Ref("model", name, dir=sim.dir)
        store.save_object(ref, model)
        _MODEL_CACHE[(os.path.abspath(sim.dir), name)] = model
        sim.add_ref(ref)
    return save_simulation(sim)


def register_model(sim: Simulation, model: ModelSpec) -> None:
    """Make an in-memory simulate procedure available for a stored model."""
    _MODEL_CACHE[(os.path.abspath(sim.dir), model.name)] = model


# -- simulate_from_model -----------------------------------------------------

def _index_list(index) -> list[int]:
    if isinstance(index, (int, np.integer)):
        idx = [int(index)]
    else:
        idx = [int(i) for i in index]
    if not idx or any(i < 1 for i in idx):
        raise ValueError("chunk indices must be positive integers")
    return sorted(set(idx))


def _draws_task(task):
    dir, seed, model_name, index, nsim = task
    ref = Ref("draws", model_name, index, dir=dir)
    if store.is_stored(ref):
        return ref
    model = _load_model(dir, model_name)
    stream = derive_chunk_stream(StreamKey(seed, model_name, index))
    try:
        draws = model.draw(nsim, stream)
    except Exception as exc:
        raise StageFailure(f"simulate failed for model {model_name} chunk {index}: {exc!r}") from exc
    batch = DrawsBatch(model_name, model.label, index, draws, capture_state(stream))
    store.save_object(ref, batch)
    return ref


def simulate_from_model(sim: Simulation, nsim: int, index=1, parallel=None) -> Simulation:
    """Draw ``nsim`` realisations per model for every chunk in ``index``."""
    if int(nsim) <= 0:
        raise ValueError("nsim must be a positive integer")
    if not sim.refs["model"]:
        raise StageOrderError("no models in simulation; run generate_model first")
    tasks = []
    for mref in sim.refs["model"]:
        for i in _index_list(index):
            ref = Ref("draws", mref.model_name, i, dir=sim.dir)
            if store.is_stored(ref):
                have = store.read_header(ref)["meta"]["nsim"]
                if have != nsim:
                    log.warning("chunk %s of %s exists with nsim=%d; keeping it",
                                i, mref.model_name, have)
                sim.add_ref(ref)
                continue
            tasks.append((sim.dir, sim.global_seed, mref.model_name, i, int(nsim)))
    for ref in _run_tasks(_draws_task, tasks, _workers(parallel), {}):
        sim.add_ref(ref)
    return save_simulation(sim)


# -- run_method --------------------------------------------------------------

def _time_call(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, max(time.perf_counter() - t0, 0.0)


def _base_outputs(method: MethodSpec, model: ModelSpec, draws: DrawsBatch, dir: str):
    """Per-draw outputs of ``method``, loaded if stored, computed otherwise."""
    ref = Ref("output", draws.model_name, draws.index, method.name, dir=dir)
    if store.is_stored(ref):
        batch = store.load_object(ref)
        return batch.out, batch.time_sec
    stream = method_stream_for(draws)
    outs, times = [], []
    for d in draws.draws:
        out, dt = _time_call(method.run, model, d, stream)
        outs.append(out)
        times.append(dt)
    return outs, np.array(times)


def _method_task(task):
    dir, model_name, index, midx = task
    method = _TASK_CONTEXT["methods"][midx]
    ref = Ref("output", model_name, index, method.name, dir=dir)
    if store.is_stored(ref):
        return ref
    model = _load_model(dir, model_name)
    draws = store.load_object(Ref("draws", model_name, index, dir=dir))
    outs, times = [], []
    j = 0
    try:
        if isinstance(method, ExtendedMethodSpec):
            base_out, base_time = _base_outputs(method.base, model, draws, dir)
            chunk_stream = method_stream_for(draws)
            for j, d in enumerate(draws.draws, start=1):
                sub = chunk_stream.substream("draw", j)
                out, dt = _time_call(method.run_extension, model, d, base_out[j - 1], sub)
                outs.append(out)
                times.append(dt + float(base_time[j - 1]))
        else:
            stream = method_stream_for(draws)
            for j, d in enumerate(draws.draws, start=1):
                out, dt = _time_call(method.run, model, d, stream)
                outs.append(out)
                times.append(dt)
    except Exception as exc:
        raise StageFailure(
            f"method {method.name} failed on model {model_name} chunk {index} "
            f"draw r{index}.{j}: {exc!r}") from exc
    batch = OutputBatch(model_name, index, method.name, method.label, outs,
                        np.array(times), dict(method.settings))
    store.save_object(ref, batch)
    return ref


def run_method(sim: Simulation, methods, parallel=None) -> Simulation:
    """Run each method on every draws batch of the simulation."""
    if isinstance(methods, (MethodSpec, ExtendedMethodSpec)):
        methods = [methods]
    methods = list(methods)
    names = [m.name for m in methods]
    if len(set(names)) != len(names):
        raise ComponentError(f"duplicate method names in {names}")
    if not sim.refs["draws"]:
        raise StageOrderError("no draws in simulation; run simulate_from_model first")
    tasks = []
    for dref in sim.refs["draws"]:
        for midx, m in enumerate(methods):
            ref = Ref("output", dref.model_name, dref.index, m.name, dir=sim.dir)
            if store.is_stored(ref):
                sim.add_ref(ref)
            else:
                tasks.append((sim.dir, dref.model_name, dref.index, midx))
    try:
        for ref in _run_tasks(_method_task, tasks, _workers(parallel), {"methods": methods}):
            sim.add_ref(ref)
    finally:
        # keep refs of batches that did finish
        for dref in sim.refs["draws"]:
            for m in methods:
                ref = Ref("output", dref.model_name, dref.index, m.name, dir=sim.dir)
                if ref not in sim.refs["output"] and store.is_stored(ref):
                    sim.add_ref(ref)
        _sort_refs(sim)
        save_simulation(sim)
    return sim


def _sort_refs(sim: Simulation) -> None:
    order = {name: i for i, name in enumerate(sim.model_names())}
    methods = sim.method_names()
    morder = {name: i for i, name in enumerate(methods)}
    for kind in ("draws", "output", "evals"):
        sim.refs[kind].sort(key=lambda r: (order.get(r.model_name, len(order)), r.index,
                                           morder.get(r.method_name, len(morder))))


# -- evaluate ----------------------------------------------------------------

def _metric_value(value):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(arr)
    return arr.reshape(-1)


def _evals_task(task):
    dir, model_name, index, method_name = task
    metrics: list[MetricSpec] = _TASK_CONTEXT["metrics"]
    ref = Ref("evals", model_name, index, method_name, dir=dir)
    existing = store.load_object(ref) if store.is_stored(ref) else None
    todo = [m for m in metrics if existing is None or m.name not in existing.metric_labels]
    if not todo:
        return ref
    model = _load_model(dir, model_name)
    output = store.load_object(Ref("output", model_name, index, method_name, dir=dir))
    labels = dict(existing.metric_labels) if existing else {}
    values = dict(existing.values) if existing else {}
    for metric in todo:
        vals = []
        for j, out in enumerate(output.out, start=1):
            try:
                vals.append(_metric_value(metric.compute(model, out)))
            except Exception as exc:
                raise StageFailure(
                    f"metric {metric.name} failed on model {model_name} method {method_name} "
                    f"draw r{index}.{j}: {exc!r}") from exc
        labels[metric.name] = metric.label
        values[metric.name] = vals
    labels[TIME_METRIC] = TIME_LABEL
    values[TIME_METRIC] = [float(t) for t in output.time_sec]
    batch = EvalsBatch(model_name, index, method_name, output.method_label,
                       labels, values).with_time_last()
    store.save_object(ref, batch, overwrite=existing is not None)
    return ref


def evaluate(sim: Simulation, metrics, parallel=None) -> Simulation:
    """Compute metrics on every output; the ``time`` metric is added automatically."""
    if isinstance(metrics, MetricSpec):
        metrics = [metrics]
    metrics = list(metrics)
    names = [m.name for m in metrics]
    if TIME_METRIC in names:
        raise ComponentError("metric name 'time' is reserved")
    if len(set(names)) != len(names):
        raise ComponentError(f"duplicate metric names in {names}")
    if not sim.refs["output"]:
        raise StageOrderError("no outputs in simulation; run run_method first")
    tasks = [(sim.dir, r.model_name, r.index, r.method_name) for r in sim.refs["output"]]
    for ref in _run_tasks(_evals_task, tasks, _workers(parallel), {"metrics": metrics}):
        sim.add_ref(ref)
    _sort_refs(sim)
    return save_simulation(sim)


# -- subsetting and accessors ------------------------------------------------

def model_params(ref: Ref) -> dict:
    """Scalar parameters of a stored model, read from its header."""
    return store.read_header(ref)["meta"]["scalars"]


def _method_filter(methods):
    if methods is None:
        return None
    if isinstance(methods, str):
        return set() if methods == "" else {methods}
    return {m if isinstance(m, str) else m.name for m in methods} - {""}


def subset_simulation(sim: Simulation, models=None, methods=None, index=None) -> Simulation:
    """A new in-memory simulation holding a filtered subset of the refs.

    ``models`` is a predicate (string or callable on model parameters);
    ``methods=""`` keeps models and draws only. No files are copied or removed.
    """
    pred = as_predicate(models)
    keep_models = [r for r in sim.refs["model"] if pred is None or pred(model_params(r))]
    names = {r.model_name for r in keep_models}
    idx = None if index is None else set(_index_list(index))
    mset = _method_filter(methods)

    def keep(r: Ref) -> bool:
        if r.model_name not in names:
            return False
        if idx is not None and r.index not in idx:
            return False
        if r.kind in ("output", "evals") and mset is not None and r.method_name not in mset:
            return False
        return True

    new = sim.copy()
    new.refs = {
        "model": keep_models,
        "draws": [r for r in sim.refs["draws"] if keep(r)],
        "output": [r for r in sim.refs["output"] if keep(r)],
        "evals": [r for r in sim.refs["evals"] if keep(r)],
    }
    return new


def rename(sim: Simulation, new_name: str) -> Simulation:
    path = store.simulation_path(sim.dir, new_name)
    if path.exists():
        raise CollisionError(f"simulation {new_name!r} already exists in {sim.dir}")
    return save_simulation(sim.copy(name=new_name))


def relabel(sim: Simulation, new_label: str) -> Simulation:
    return save_simulation(sim.copy(label=new_label))


def get_models(sim: Simulation, models=None) -> list[ModelSpec]:
    sub = subset_simulation(sim, models)
    return [_load_model(sim.dir, r.model_name) for r in sub.refs["model"]]


def get_draws(sim: Simulation, models=None, index=None) -> list[DrawsBatch]:
    sub = subset_simulation(sim, models, index=index)
    return [store.load_object(r) for r in sub.refs["draws"]]


def get_outputs(sim: Simulation, models=None, methods=None, index=None) -> list[OutputBatch]:
    sub = subset_simulation(sim, models, methods=methods, index=index)
    return [store.load_object(r) for r in sub.refs["output"]]


def get_evals(sim: Simulation, models=None, methods=None, index=None) -> list[EvalsBatch]:
    sub = subset_simulation(sim, models, methods=methods, index=index)
    return [store.load_object(r) for r in sub.refs["evals"]]


def require_evals(sim: Simulation, metric: str) -> list[EvalsBatch]:
    """All evals of the simulation, checking ``metric`` was computed everywhere."""
    if not sim.refs["evals"]:
        raise NotComputedError(f"no evals in simulation {sim.name}; run evaluate first",
                               "evaluate")
    batches = [store.load_object(r) for r in sim.refs["evals"]]
    for b in batches:
        if metric not in b.metric_labels:
            raise NotComputedError(
                f"metric {metric!r} missing for {b.model_name} chunk {b.index} method "
                f"{b.method_name}; run evaluate with it first", "evaluate")
    return batches
