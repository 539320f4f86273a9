"""Skeleton of a new simulation study."""

from __future__ import annotations

from pathlib import Path

SCAFFOLD_FILES = ("model_functions.py", "method_functions.py", "eval_functions.py",
                  "main.py", "writeup.md")

_MODEL = '''"""Models for this study."""

import numpy as np

from simstudy import new_model_spec


def simulate_normal_mean(params, nsim, rng):
    return [params["mu"] + rng.normal(params["n"]) for _ in range(nsim)]


def make_normal_mean_model(n, mu):
    return new_model_spec(
        "normal_mean",
        f"n = {n}, mu = {mu}",
        params={"n": n, "mu": float(mu)},
        simulate=simulate_normal_mean,
    )
'''

_METHOD = '''"""Methods for this study."""

import numpy as np

from simstudy import new_method_spec


def _sample_mean(model, draw, rng):
    return {"est": float(np.mean(draw))}


sample_mean = new_method_spec("mean", "Sample mean", _sample_mean)
'''

_EVAL = '''"""Metrics for this study."""

from simstudy import new_metric_spec


def _squared_error(model, out):
    return (out["est"] - model["mu"]) ** 2


squared_error = new_metric_spec("sqr_err", "Squared error", _squared_error)
'''

_MAIN = '''"""Main pipeline of this study. Run with ``python main.py``."""

from pathlib import Path

from simstudy import new_simulation, record_provenance, tabulate_eval

from eval_functions import squared_error
from method_functions import sample_mean
from model_functions import make_normal_mean_model

HERE = Path(__file__).resolve().parent
SOURCES = [HERE / name for name in
           ("model_functions.py", "method_functions.py", "eval_functions.py", "main.py")]


def main():
    sim = (
        new_simulation("my-simulation", "My simulation", dir=HERE, exist_ok=True)
        .generate_model(make_normal_mean_model, n=20, mu=1.0)
        .simulate_from_model(nsim=10, index=1)
        .run_method([sample_mean])
        .evaluate([squared_error])
    )
    record_provenance(sim, SOURCES)
    print(tabulate_eval(sim, "sqr_err"))
    return sim


if __name__ == "__main__":
    main()
'''

_WRITEUP = '''# {{simulation_label}}

{{staleness}}

## Results

{{table sqr_err}}

## Code

The main pipeline:

{{source main.py}}

Models, methods and metrics:

{{source model_functions.py}}

{{source method_functions.py}}

{{source eval_functions.py}}
'''

_CONTENTS = dict(zip(SCAFFOLD_FILES, (_MODEL, _METHOD, _EVAL, _MAIN, _WRITEUP)))


def create_scaffold(path) -> list[Path]:
    """Create ``path`` holding a runnable one-model, one-method, one-metric study."""
    root = Path(path)
    if root.exists() and (not root.is_dir() or any(root.iterdir())):
        raise FileExistsError(f"{root} already exists and is not empty; refusing to overwrite")
    root.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in _CONTENTS.items():
        target = root / name
        target.write_text(text)
        written.append(target)
    return written
