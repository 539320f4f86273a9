"""Command line interface shared by every study program.

A study program builds a :class:`Study` and calls :func:`main` with it, which
adds the ``run`` subcommand. The other subcommands work on any saved simulation::

    simstudy --dir DIR ls NAME
    simstudy --dir DIR table NAME METRIC --format latex --nsmall 2 --digits 0
    simstudy --dir DIR plot eval-by NAME METRIC --varying k --out figs
    simstudy create PATH
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from simstudy import engine, store
from simstudy.errors import SimstudyError
from simstudy.reporting import (
    create_scaffold,
    generate_report,
    plot_eval,
    plot_eval_by,
    plot_evals,
    records_to_csv,
    sim_records,
    tabulate_eval,
)
from simstudy.rng import DEFAULT_SEED


@dataclass
class Study:
    name: str
    run: Callable
    sources: list = field(default_factory=list)


def parse_index(text: str) -> list[int]:
    """``"3"`` -> [3]; ``"1:10"`` -> [1..10]; ``"1,4,7:9"`` -> [1, 4, 7, 8, 9]."""
    out = []
    for part in text.split(","):
        if ":" in part:
            a, b = part.split(":", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError(f"bad chunk index {text!r}")
    return out


def _methods_arg(text):
    if text is None:
        return None
    return "" if text == "" else [m for m in text.split(",") if m]


def build_parser(study: Study | None = None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=study.name if study else "simstudy")
    parser.add_argument("--dir", default=".", help="simulation directory (default: cwd)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    if study is not None:
        p = sub.add_parser("run", help="run the study pipeline")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--nsim", type=int, default=5)
        p.add_argument("--index", type=parse_index, default=[1])

    p = sub.add_parser("ls", help="list the refs of a simulation")
    p.add_argument("name")

    p = sub.add_parser("subset", help="save a filtered copy of a simulation")
    p.add_argument("name")
    p.add_argument("new_name")
    p.add_argument("--models", help='predicate such as "k == 20 | k == 80"')
    p.add_argument("--methods", help='comma separated method names; "" keeps none')
    p.add_argument("--index", type=parse_index)

    p = sub.add_parser("rename")
    p.add_argument("name")
    p.add_argument("new_name")

    p = sub.add_parser("relabel")
    p.add_argument("name")
    p.add_argument("label")

    p = sub.add_parser("table", help="tabulate a scalar metric")
    p.add_argument("name")
    p.add_argument("metric")
    p.add_argument("--models")
    p.add_argument("--methods")
    p.add_argument("--format", choices=["latex", "markdown", "html"], default="markdown")
    p.add_argument("--nsmall", type=int, default=2)
    p.add_argument("--digits", type=int, default=0)

    p = sub.add_parser("plot", help="write plot CSV and SVG")
    p.add_argument("kind", choices=["eval", "evals", "eval-by"])
    p.add_argument("name")
    p.add_argument("metrics", nargs="+")
    p.add_argument("--varying")
    p.add_argument("--type", choices=["aggregate", "raw"], default="aggregate")
    p.add_argument("--models")
    p.add_argument("--methods")
    p.add_argument("--title")
    p.add_argument("--out", default="figures")

    p = sub.add_parser("records", help="export evaluations as long-format CSV")
    p.add_argument("name")
    p.add_argument("--out")

    p = sub.add_parser("report", help="render a markdown report from stored results")
    p.add_argument("name")
    p.add_argument("--template")
    p.add_argument("--out")

    p = sub.add_parser("create", help="create a new study skeleton")
    p.add_argument("path")
    return parser


def _load(args):
    sim = engine.load_simulation(args.name, args.dir)
    models = getattr(args, "models", None)
    methods = _methods_arg(getattr(args, "methods", None))
    if models or methods is not None:
        sim = engine.subset_simulation(sim, models, methods=methods)
    return sim


def main(argv=None, study: Study | None = None) -> int:
    args = build_parser(study).parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args, study)
    except (SimstudyError, FileNotFoundError, FileExistsError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args, study) -> int:
    cmd = args.command
    if cmd == "run":
        sims = study.run(args.dir, args.seed, args.workers, args.nsim, args.index)
        for sim in sims if isinstance(sims, (list, tuple)) else [sims]:
            print(f"{sim.name}: " + ", ".join(f"{len(v)} {k}" for k, v in sim.refs.items()))
    elif cmd == "ls":
        sim = engine.load_simulation(args.name, args.dir)
        print(f"{sim.name}: {sim.label} (seed {sim.global_seed})")
        for kind, refs in sim.refs.items():
            print(f"{kind} ({len(refs)})")
            for r in refs:
                print(f"  {store.path_for(r).relative_to(Path(args.dir))}")
    elif cmd == "subset":
        sim = engine.subset_simulation(engine.load_simulation(args.name, args.dir), args.models,
                                       methods=_methods_arg(args.methods), index=args.index)
        engine.rename(sim, args.new_name)
    elif cmd == "rename":
        engine.rename(engine.load_simulation(args.name, args.dir), args.new_name)
    elif cmd == "relabel":
        engine.relabel(engine.load_simulation(args.name, args.dir), args.label)
    elif cmd == "table":
        print(tabulate_eval(_load(args), args.metric, format=args.format, nsmall=args.nsmall,
                            digits=args.digits), end="")
    elif cmd == "plot":
        sim = _load(args)
        if args.kind == "eval":
            plot, stem = plot_eval(sim, args.metrics[0], args.title), f"eval_{args.metrics[0]}"
        elif args.kind == "evals":
            if len(args.metrics) != 2:
                raise SystemExit("plot evals needs two metrics")
            plot = plot_evals(sim, args.metrics[0], args.metrics[1], args.title)
            stem = f"evals_{args.metrics[0]}_{args.metrics[1]}"
        else:
            if not args.varying:
                raise SystemExit("plot eval-by needs --varying")
            plot = plot_eval_by(sim, args.metrics[0], args.varying, type=args.type,
                                title=args.title)
            stem = f"eval_by_{args.metrics[0]}_{args.varying}"
        for path in plot.save(args.out, stem):
            print(path)
    elif cmd == "records":
        rows, varied = sim_records(engine.load_simulation(args.name, args.dir))
        text = records_to_csv(rows, varied)
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
    elif cmd == "report":
        print(generate_report(engine.load_simulation(args.name, args.dir), args.template,
                              args.out))
    elif cmd == "create":
        for path in create_scaffold(args.path):
            print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
