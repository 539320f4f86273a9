"""Metrics for the sparse linear model study."""

from __future__ import annotations

import numpy as np

from simstudy.components import new_metric_spec


def _sqr_err(model, out):
    beta_hat = np.asarray(out["beta"], dtype=float)
    err = beta_hat - (model["beta"] if beta_hat.ndim == 1 else model["beta"][:, None])
    per_lambda = np.mean(err ** 2, axis=0)
    return float(per_lambda) if beta_hat.ndim == 1 else per_lambda


def _best_sqr_err(model, out):
    return float(np.min(_sqr_err(model, out)))


sqr_err = new_metric_spec("sqr_err", "Mean squared error", _sqr_err)
best_sqr_err = new_metric_spec("best_sqr_err", "Best mean squared error", _best_sqr_err)
df = new_metric_spec("df", "Degrees of freedom", lambda model, out: out["df"])
