"""Sparse linear regression model with fixed Gaussian design."""

from __future__ import annotations

import numpy as np

from simstudy.components import ModelSpec, new_model_spec


def simulate_slm(params: dict, nsim: int, rng) -> list[np.ndarray]:
    """``y = mu + sigma * eps`` with iid standard normal noise, one vector per draw."""
    n = params["n"]
    eps = rng.normal((nsim, n))
    return [params["mu"] + params["sigma"] * eps[j] for j in range(nsim)]


def make_sparse_linear_model(n: int, p: int, k: int, rng) -> ModelSpec:
    """Linear model with k unit coefficients and signal-to-noise ratio 2.

    The design ``x`` (n x p, iid N(0, 1)) is drawn once from ``rng`` and held fixed.
    """
    n, p, k = int(n), int(p), int(k)
    if n < 1 or p < 1:
        raise ValueError("n and p must be positive")
    if not 0 <= k <= p:
        raise ValueError(f"need 0 <= k <= p, got k={k}, p={p}")
    x = rng.normal((n, p))
    beta = np.concatenate([np.ones(k), np.zeros(p - k)])
    mu = x @ beta
    sigma = float(np.sqrt(np.sum(mu ** 2) / (n * 2)))
    return new_model_spec(
        "slm",
        f"n = {n}, p = {p}, k = {k}",
        params={"x": x, "beta": beta, "mu": mu, "sigma": sigma, "n": n, "p": p, "k": k},
        simulate=simulate_slm,
    )
