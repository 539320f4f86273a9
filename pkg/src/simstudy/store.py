"""On-disk layout, references and exact serialization of pipeline objects.

Layout under a simulation directory ``dir``::

    sim_<name>.srec                               simulation record (refs only)
    files/<model_dirname>/model.cfg               model
    files/<model_dirname>/r<index>.draws          draws batch
    files/<model_dirname>/r<index>_<method>.out   output batch
    files/<model_dirname>/r<index>_<method>.evals evals batch

Object file grammar::

    SIMSTUDY-OBJECT/1 <kind>\\n
    <header: one line of JSON>\\n
    <payload: concatenated little-endian array bytes>

The header carries the object's metadata, a value tree in which arrays are
replaced by ``{"t": "array", "dtype", "shape", "offset", "nbytes"}`` pointers
into the payload and floats are written with ``float.hex``, plus a SHA-256
checksum over the tree and payload. Wall-clock timings are the only
nondeterministic values; they live in a ``<file>.timing`` sidecar so the main
files depend only on the seed and the components.
"""

from __future__ import annotations

import hashlib
import importlib
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from simstudy.batches import DrawsBatch, EvalsBatch, OutputBatch
from simstudy.components import TIME_METRIC, ComponentId, ModelSpec
from simstudy.errors import ChecksumError, CollisionError, NotComputedError
from simstudy.rng import RngState

MAGIC = "SIMSTUDY-OBJECT/1"
KINDS = ("model", "draws", "output", "evals")
STAGE_FOR_KIND = {
    "model": "generate_model",
    "draws": "simulate_from_model",
    "output": "run_method",
    "evals": "evaluate",
}
_DTYPES = {"f": "<f8", "i": "<i8", "u": "<u8", "b": "|b1"}


# -- value codec -------------------------------------------------------------

def encode_value(value: Any, chunks: list[bytes], offset: list[int]) -> dict:
    if value is None:
        return {"t": "null"}
    if isinstance(value, (bool, np.bool_)):
        return {"t": "bool", "v": bool(value)}
    if isinstance(value, (int, np.integer)):
        return {"t": "int", "v": int(value)}
    if isinstance(value, (float, np.floating)):
        return {"t": "float", "v": float(value).hex()}
    if isinstance(value, str):
        return {"t": "str", "v": value}
    if isinstance(value, np.ndarray):
        kind = value.dtype.kind
        if kind not in _DTYPES:
            raise TypeError(f"cannot store arrays of dtype {value.dtype}")
        dtype = _DTYPES[kind]
        data = np.ascontiguousarray(value, dtype=dtype).tobytes()
        node = {"t": "array", "dtype": dtype, "shape": list(value.shape),
                "offset": offset[0], "nbytes": len(data)}
        chunks.append(data)
        offset[0] += len(data)
        return node
    if isinstance(value, (list, tuple)):
        return {"t": "list", "v": [encode_value(v, chunks, offset) for v in value]}
    if isinstance(value, dict):
        items = []
        for k, v in value.items():
            if not isinstance(k, str):
                raise TypeError(f"map keys must be strings, got {k!r}")
            items.append([k, encode_value(v, chunks, offset)])
        return {"t": "map", "v": items}
    raise TypeError(f"cannot store value of type {type(value).__name__}")


def decode_value(node: dict, payload: bytes) -> Any:
    t = node["t"]
    if t == "null":
        return None
    if t in ("bool", "int", "str"):
        return node["v"]
    if t == "float":
        return float.fromhex(node["v"])
    if t == "array":
        start = node["offset"]
        buf = payload[start:start + node["nbytes"]]
        arr = np.frombuffer(buf, dtype=node["dtype"]).reshape(node["shape"])
        return arr.astype(arr.dtype.newbyteorder("="), copy=True)
    if t == "list":
        return [decode_value(v, payload) for v in node["v"]]
    if t == "map":
        return {k: decode_value(v, payload) for k, v in node["v"]}
    raise ValueError(f"unknown value tag {t!r}")


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode()


def serialize(kind: str, meta: dict, tree: Any) -> bytes:
    chunks: list[bytes] = []
    encoded = encode_value(tree, chunks, [0])
    payload = b"".join(chunks)
    body = {"kind": kind, "meta": meta, "tree": encoded}
    checksum = hashlib.sha256(_canonical(body) + b"\n" + payload).hexdigest()
    header = dict(body, payload_bytes=len(payload), checksum=f"sha256:{checksum}")
    return f"{MAGIC} {kind}\n".encode() + _canonical(header) + b"\n" + payload


def deserialize(data: bytes, source: str = "<bytes>") -> tuple[str, dict, Any]:
    try:
        first, rest = data.split(b"\n", 1)
        header_line, payload = rest.split(b"\n", 1)
        magic, kind = first.decode().split(" ", 1)
        header = json.loads(header_line)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ChecksumError(f"{source}: not a readable simstudy object file") from exc
    if magic != MAGIC:
        raise ChecksumError(f"{source}: unknown format {magic!r}")
    if len(payload) != header.get("payload_bytes"):
        raise ChecksumError(f"{source}: payload truncated")
    body = {"kind": header["kind"], "meta": header["meta"], "tree": header["tree"]}
    digest = hashlib.sha256(_canonical(body) + b"\n" + payload).hexdigest()
    if header.get("checksum") != f"sha256:{digest}":
        raise ChecksumError(f"{source}: checksum mismatch")
    return kind, header["meta"], decode_value(header["tree"], payload)


def content_digest(value: Any) -> str:
    """Hex SHA-256 of the canonical serialization of ``value``."""
    return hashlib.sha256(serialize("value", {}, value)).hexdigest()


# -- names and refs ----------------------------------------------------------

def _scalar_text(value) -> str | None:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return str(int(v)) if v.is_integer() and abs(v) < 2**53 else repr(v)
    if isinstance(value, str) and value and all(c.isalnum() or c in "_.-" for c in value):
        return value
    return None


def encode_model_dirname(base_name: str, generation_args: dict) -> str:
    """``base_name`` plus one ``/<param>_<value>`` segment per argument, sorted by name."""
    ComponentId(base_name, base_name)
    parts = [base_name]
    for key in sorted(generation_args):
        value = generation_args[key]
        text = _scalar_text(value)
        if text is None:
            text = content_digest(value)[:8]
        parts.append(f"{key}_{text}")
    return "/".join(parts)


@dataclass(frozen=True)
class Ref:
    kind: str
    model_name: str
    index: int | None = None
    method_name: str | None = None
    dir: str = "."

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown ref kind {self.kind!r}")
        if self.kind != "model" and (self.index is None or self.index < 1):
            raise ValueError(f"{self.kind} refs need an index >= 1")
        if self.kind in ("output", "evals") and not self.method_name:
            raise ValueError(f"{self.kind} refs need a method name")

    def key(self) -> tuple:
        return (self.kind, self.model_name, self.index or 0, self.method_name or "")

    def to_record(self) -> dict:
        rec = {"kind": self.kind, "model_name": self.model_name}
        if self.index is not None:
            rec["index"] = self.index
        if self.method_name is not None:
            rec["method_name"] = self.method_name
        return rec

    @classmethod
    def from_record(cls, rec: dict, dir: str) -> Ref:
        return cls(rec["kind"], rec["model_name"], rec.get("index"), rec.get("method_name"), dir)


def path_for(ref: Ref) -> Path:
    base = Path(ref.dir) / "files" / ref.model_name
    if ref.kind == "model":
        return base / "model.cfg"
    if ref.kind == "draws":
        return base / f"r{ref.index}.draws"
    if ref.kind == "output":
        return base / f"r{ref.index}_{ref.method_name}.out"
    return base / f"r{ref.index}_{ref.method_name}.evals"


def timing_path(ref: Ref) -> Path:
    p = path_for(ref)
    return p.with_name(p.name + ".timing")


def simulation_path(dir, name: str) -> Path:
    return Path(dir) / f"sim_{name}.srec"


# -- atomic file IO ----------------------------------------------------------

def write_atomic(path: Path, data: bytes, overwrite: bool = False) -> bool:
    """Write ``data`` to ``path`` via temp file + rename.

    Returns False when an identical file is already present. A different existing
    file raises :class:`CollisionError` unless ``overwrite`` is set.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.exists():
        if path.read_bytes() == data:
            return False
        if not overwrite:
            raise CollisionError(f"{path} already exists with different content")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return True


def _read(ref: Ref, path: Path | None = None) -> tuple[str, dict, Any]:
    path = path or path_for(ref)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        stage = STAGE_FOR_KIND[ref.kind]
        what = ref.model_name if ref.index is None else f"{ref.model_name} chunk {ref.index}"
        if ref.method_name:
            what += f" method {ref.method_name}"
        raise NotComputedError(
            f"{ref.kind} for {what} not yet computed ({path}); run {stage} first", stage
        ) from None
    kind, meta, tree = deserialize(data, str(path))
    if kind != ref.kind:
        raise ChecksumError(f"{path}: expected a {ref.kind} object, found {kind}")
    return kind, meta, tree


def read_header(ref: Ref) -> dict:
    """Header of a stored object, read without touching the payload."""
    path = path_for(ref)
    try:
        with open(path, "rb") as fh:
            fh.readline()
            return json.loads(fh.readline())
    except FileNotFoundError:
        stage = STAGE_FOR_KIND[ref.kind]
        raise NotComputedError(f"{path} not yet computed; run {stage} first", stage) from None


def is_stored(ref: Ref) -> bool:
    """True if the ref's file exists and passes its checksum."""
    path = path_for(ref)
    if not path.exists():
        return False
    try:
        deserialize(path.read_bytes(), str(path))
    except ChecksumError:
        return False
    return True


# -- object (de)serialization ------------------------------------------------

def _callable_path(fn) -> str | None:
    mod = getattr(fn, "__module__", None)
    qual = getattr(fn, "__qualname__", "")
    if not mod or "<" in qual:
        return None
    return f"{mod}:{qual}"


def resolve_callable(path: str):
    mod, qual = path.split(":", 1)
    obj = importlib.import_module(mod)
    for part in qual.split("."):
        obj = getattr(obj, part)
    return obj


def _encode(ref: Ref, obj) -> tuple[dict, Any, Any]:
    """Returns (meta, tree, volatile) for a storable object."""
    if ref.kind == "model":
        scalars = {k: (v.item() if isinstance(v, np.generic) else v)
                   for k, v in obj.params.items()
                   if isinstance(v, (bool, int, float, str, np.bool_, np.integer, np.floating))}
        meta = {"name": obj.name, "label": obj.label, "scalars": scalars,
                "simulate": _callable_path(obj.simulate)}
        return meta, obj.params, None
    if ref.kind == "draws":
        meta = {"model_name": obj.model_name, "model_label": obj.model_label,
                "index": obj.index, "nsim": obj.nsim,
                "rng_end_state": obj.rng_end_state.to_record()}
        return meta, {"draws": obj.draws}, None
    if ref.kind == "output":
        meta = {"model_name": obj.model_name, "index": obj.index, "nsim": obj.nsim,
                "method_name": obj.method_name, "method_label": obj.method_label}
        return meta, {"settings": obj.settings, "out": obj.out}, obj.time_sec
    labels = [[k, v] for k, v in obj.metric_labels.items() if k != TIME_METRIC]
    meta = {"model_name": obj.model_name, "index": obj.index, "nsim": obj.nsim,
            "method_name": obj.method_name, "method_label": obj.method_label,
            "metrics": labels}
    values = {k: obj.values[k] for k, _ in labels}
    return meta, {"values": values}, np.asarray(obj.values[TIME_METRIC], dtype=float)


def encode_object(ref: Ref, obj) -> bytes:
    meta, tree, _ = _encode(ref, obj)
    return serialize(ref.kind, meta, tree)


def save_object(ref: Ref, obj, overwrite: bool = False) -> bool:
    """Persist ``obj`` at ``ref``; returns True if the main file was written."""
    meta, tree, volatile = _encode(ref, obj)
    wrote = write_atomic(path_for(ref), serialize(ref.kind, meta, tree), overwrite=overwrite)
    if volatile is not None:
        tpath = timing_path(ref)
        if wrote or not tpath.exists():
            write_atomic(tpath, serialize("timing", {}, volatile), overwrite=True)
    return wrote


def _load_timing(ref: Ref, nsim: int) -> np.ndarray:
    path = timing_path(ref)
    if not path.exists():
        return np.zeros(nsim)
    _, _, arr = deserialize(path.read_bytes(), str(path))
    return np.asarray(arr, dtype=float)


def load_object(ref: Ref, simulate=None):
    _, meta, tree = _read(ref)
    if ref.kind == "model":
        if simulate is None and meta.get("simulate"):
            try:
                simulate = resolve_callable(meta["simulate"])
            except (ImportError, AttributeError):
                simulate = None
        return ModelSpec(ComponentId(meta["name"], meta["label"]), tree, simulate)
    if ref.kind == "draws":
        return DrawsBatch(meta["model_name"], meta["model_label"], meta["index"],
                          tree["draws"], RngState.from_record(meta["rng_end_state"]))
    if ref.kind == "output":
        return OutputBatch(meta["model_name"], meta["index"], meta["method_name"],
                           meta["method_label"], tree["out"],
                           _load_timing(ref, meta["nsim"]), tree["settings"])
    labels = {k: v for k, v in meta["metrics"]}
    evals = EvalsBatch(meta["model_name"], meta["index"], meta["method_name"],
                       meta["method_label"], labels, dict(tree["values"]))
    evals.values[TIME_METRIC] = list(_load_timing(ref, meta["nsim"]))
    return evals.with_time_last()


# -- simulation records ------------------------------------------------------

def save_record(path: Path, record: dict) -> None:
    data = json.dumps(record, indent=1, sort_keys=False).encode() + b"\n"
    write_atomic(path, data, overwrite=True)


def load_record(path: Path) -> dict:
    return json.loads(path.read_text())
