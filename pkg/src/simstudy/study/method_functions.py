"""Lasso and ridge methods, and the cross-validation extension."""

from __future__ import annotations

import math

import numpy as np

from simstudy.components import new_method_extension, new_method_spec
from simstudy.errors import ComponentError
from simstudy.study.solvers import lasso_fit, ridge_fit

NFOLDS = 5


def _lasso(model, draw, rng, lam=None):
    fit = lasso_fit(model["x"], draw, lam)
    beta = fit["beta"]
    return {"beta": beta, "yhat": model["x"] @ beta, "lambda": fit["lambda"], "df": fit["df"]}


def _ridge(model, draw, rng, lam=None):
    fit = ridge_fit(model["x"], draw, lam)
    beta = fit["beta"]
    return {"beta": beta, "yhat": model["x"] @ beta, "lambda": fit["lambda"], "df": fit["df"]}


lasso = new_method_spec("lasso", "Lasso", _lasso,
                        settings={"nlambda": 50, "lambda_min_ratio": 1e-4, "intercept": False})
ridge = new_method_spec("ridge", "Ridge", _ridge, settings={"nlambda": 50})


def make_folds(n: int, nfolds: int, rng) -> list[np.ndarray]:
    """Split a random permutation of ``0..n-1`` into ``nfolds`` consecutive pieces.

    Every fold has ``round(n / nfolds)`` elements except the last, which takes up
    the remainder.
    """
    nn = round(n / nfolds)
    sizes = [nn] * nfolds
    sizes[-1] += n - nn * nfolds
    if min(sizes) < 1:
        raise ValueError(f"cannot split {n} observations into {nfolds} nonempty folds")
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    perm = rng.permutation(n)
    return [perm[bounds[i]:bounds[i + 1]] for i in range(nfolds)]


def cv_errors(model, draw, base_out, base_method, folds, rng) -> np.ndarray:
    """Held-out mean squared prediction error, one row per penalty, one column per fold."""
    if "lambda" not in base_out:
        raise ComponentError(f"base method {base_method.name!r} output has no 'lambda'")
    lam = np.asarray(base_out["lambda"])
    x = model["x"]
    y = np.asarray(draw)
    err = np.full((lam.size, len(folds)), np.nan)
    for i, test in enumerate(folds):
        train = np.setdiff1d(np.arange(x.shape[0]), test)
        train_model = model.with_params(x=x[train], n=int(train.size))
        fit = base_method.run(train_model, y[train], rng, lam=lam)
        yhat = x[test] @ np.asarray(fit["beta"]).reshape(x.shape[1], -1)
        err[:yhat.shape[1], i] = np.mean((yhat - y[test][:, None]) ** 2, axis=0)
    return err


def _cv(model, draw, out, base_method, rng):
    folds = make_folds(model["n"], NFOLDS, rng)
    err = cv_errors(model, draw, out, base_method, folds, rng)
    m = err.mean(axis=1)
    se = err.std(axis=1, ddof=1) / math.sqrt(NFOLDS)
    imin = int(np.argmin(m))
    ioneserule = int(np.max(np.nonzero(m <= m[imin] + se[imin])[0]))
    beta = np.asarray(out["beta"])[:, imin]
    return {
        "err": err, "m": m, "se": se, "imin": imin, "ioneserule": ioneserule,
        "beta": beta, "yhat": model["x"] @ beta,
    }


cv = new_method_extension("cv", "cross validated", _cv)
