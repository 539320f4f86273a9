"""The bet-on-sparsity pipeline and its cross-validated follow-up.

Run from the command line with ``bet-on-sparsity run --nsim 5 --index 1``.
"""

from __future__ import annotations

from pathlib import Path

from simstudy.engine import (
    load_simulation,
    new_simulation,
    save_simulation,
    subset_simulation,
)
from simstudy.reporting.report import record_provenance
from simstudy.rng import DEFAULT_SEED
from simstudy.study.eval_functions import best_sqr_err, df, sqr_err
from simstudy.study.method_functions import cv, lasso, ridge
from simstudy.study.model_functions import make_sparse_linear_model

NAME = "bet-on-sparsity"
CV_NAME = "bet-on-sparsity-cv"
SOURCES = [Path(__file__).resolve().parent / f for f in
           ("model_functions.py", "method_functions.py", "eval_functions.py", "solvers.py",
            "main.py")]


def main_simulation(dir=".", seed=DEFAULT_SEED, nsim=5, index=1, workers=1, n=200, p=500,
                    ks=tuple(range(5, 81, 5))):
    sim = new_simulation(NAME, "Bet on sparsity", dir=dir, seed=seed, exist_ok=True)
    sim = (
        sim.generate_model(make_sparse_linear_model, n=n, p=p, k=list(ks), vary_along="k")
        .simulate_from_model(nsim=nsim, index=index, parallel=workers)
        .run_method([lasso, ridge], parallel=workers)
        .evaluate([sqr_err, best_sqr_err, df], parallel=workers)
    )
    record_provenance(sim, SOURCES)
    return sim


def cv_simulation(sim, workers=1, models=None):
    """Cross-validated lasso and ridge on the same models and draws as ``sim``."""
    base = subset_simulation(sim, models, methods="")
    try:
        sim2 = load_simulation(CV_NAME, sim.dir)
        for kind in ("model", "draws"):
            for ref in base.refs[kind]:
                sim2.add_ref(ref)
        save_simulation(sim2)
    except FileNotFoundError:
        sim2 = base.rename(CV_NAME)
    sim2 = (
        sim2.relabel("Bet on sparsity (with cross validation)")
        .run_method([lasso + cv, ridge + cv], parallel=workers)
        .evaluate([sqr_err], parallel=workers)
    )
    record_provenance(sim2, SOURCES)
    return sim2


def study_main(dir=".", seed=DEFAULT_SEED, nsim=5, index=1, workers=1, **model_args):
    sim = main_simulation(dir, seed, nsim, index, workers, **model_args)
    sim2 = cv_simulation(sim, workers)
    return sim, sim2


def cli(argv=None):
    from simstudy.cli import Study, main

    study = Study(
        name=NAME,
        run=lambda dir, seed, workers, nsim, index: study_main(dir, seed, nsim, index, workers),
        sources=SOURCES,
    )
    return main(argv, study=study)


if __name__ == "__main__":
    raise SystemExit(cli())
