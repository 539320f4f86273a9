"""Static markdown reports with provenance checking.

When a study runs, :func:`record_provenance` stores SHA-256 digests of its source
files next to the simulation record. :func:`generate_report` renders a template
from stored results only. If a source no longer matches its recorded digest the
report gets a staleness warning; it never reruns any stage.

Template placeholders::

    {{simulation_label}}  {{simulation_name}}  {{staleness}}
    {{table METRIC [latex|markdown|html]}}
    {{plot_eval METRIC}}  {{plot_evals METRIC_X METRIC_Y}}
    {{plot_eval_by METRIC PARAM}}
    {{source FILE}}
"""

from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path

from simstudy import __version__
from simstudy.engine import Simulation
from simstudy.reporting.plots import plot_eval, plot_eval_by, plot_evals
from simstudy.reporting.tables import tabulate_eval

_PLACEHOLDER = re.compile(r"\{\{\s*([^}]*?)\s*\}\}")

DEFAULT_TEMPLATE = """# {{simulation_label}}

{{staleness}}
"""


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def provenance_path(sim: Simulation) -> Path:
    return Path(sim.dir) / f"sim_{sim.name}.provenance.json"


def record_provenance(sim: Simulation, sources, build_id: str | None = None) -> Path:
    record = {
        "simulation": sim.name,
        "build_id": build_id or f"simstudy-{__version__}",
        "sources": {str(Path(s).resolve()): file_digest(s) for s in sources},
    }
    path = provenance_path(sim)
    path.write_text(json.dumps(record, indent=1, sort_keys=True) + "\n")
    return path


def stale_sources(sim: Simulation) -> list[str] | None:
    """Sources whose digest changed since the run; None if no provenance was recorded."""
    path = provenance_path(sim)
    if not path.exists():
        return None
    record = json.loads(path.read_text())
    changed = []
    for src, digest in record["sources"].items():
        p = Path(src)
        if not p.exists() or file_digest(p) != digest:
            changed.append(src)
    return changed


def _staleness_block(sim: Simulation) -> str:
    changed = stale_sources(sim)
    if changed is None:
        return ("> **Warning:** no provenance was recorded for these results, so they "
                "cannot be checked against the current sources.")
    if not changed:
        return ""
    names = "\n".join(f"> - `{Path(c).name}`" for c in changed)
    return ("> **Warning: stale results.** These sources changed after the results were "
            "computed; rerun the study to refresh them.\n>\n" + names)


def generate_report(sim: Simulation, template=None, out=None) -> Path:
    """Render ``template`` (a path, or the built-in default) to a markdown file."""
    if template is None:
        text, base = DEFAULT_TEMPLATE, Path(sim.dir)
    else:
        text, base = Path(template).read_text(), Path(template).resolve().parent
    out = Path(out) if out else Path(sim.dir) / f"report_{sim.name}.md"
    fig_dir = out.parent / "figures"
    counter = {"n": 0}

    def figure(plot, stem):
        counter["n"] += 1
        _, svg = plot.save(fig_dir, f"{counter['n']:02d}_{stem}")
        return f"![{stem}]({svg.relative_to(out.parent).as_posix()})"

    def substitute(match):
        words = match.group(1).split()
        if not words:
            return match.group(0)
        cmd, args = words[0], words[1:]
        if cmd == "simulation_label":
            return sim.label
        if cmd == "simulation_name":
            return sim.name
        if cmd == "staleness":
            return _staleness_block(sim)
        if cmd == "table":
            fmt = args[1] if len(args) > 1 else "markdown"
            return tabulate_eval(sim, args[0], format=fmt).rstrip("\n")
        if cmd == "plot_eval":
            return figure(plot_eval(sim, args[0]), f"eval_{args[0]}")
        if cmd == "plot_evals":
            return figure(plot_evals(sim, args[0], args[1]), f"evals_{args[0]}_{args[1]}")
        if cmd == "plot_eval_by":
            return figure(plot_eval_by(sim, args[0], args[1]), f"eval_by_{args[0]}_{args[1]}")
        if cmd == "source":
            src = base / args[0]
            return f"```python\n{src.read_text().rstrip()}\n```"
        return match.group(0)

    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(_PLACEHOLDER.sub(substitute, text))
    return out
