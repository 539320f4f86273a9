"""Regularisation path solvers used by the example study.

Lasso: cyclic coordinate descent with covariance updates and warm starts,
minimising ``(1/(2n)) ||y - X b||^2 + lam ||b||_1`` with no intercept and no
standardisation.

Ridge: closed form through the thin SVD of ``X``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

LASSO_NLAMBDA = 50
LASSO_MIN_RATIO = 1e-4
LASSO_TOL = 1e-7
LASSO_MAX_SWEEPS = 100_000
RIDGE_NLAMBDA = 50
RIDGE_DF_TOL = 1e-9


@njit(cache=True)
def _sweep(gram, grad, b, lam):
    """One pass of coordinate updates over all coordinates; returns the largest |change|.

    ``grad`` holds X'y/n - G b and is updated in place.
    """
    p = b.shape[0]
    biggest = 0.0
    for j in range(p):
        gjj = gram[j, j]
        if gjj <= 0.0:
            continue
        z = grad[j] + gjj * b[j]
        if z > lam:
            new = (z - lam) / gjj
        elif z < -lam:
            new = (z + lam) / gjj
        else:
            new = 0.0
        delta = new - b[j]
        if delta != 0.0:
            b[j] = new
            row = gram[j]
            for i in range(p):
                grad[i] -= row[i] * delta
            if abs(delta) > biggest:
                biggest = abs(delta)
    return biggest


@njit(cache=True)
def _cd_path(gram, xty, lambdas, tol, max_sweeps):
    p = xty.shape[0]
    nlam = lambdas.shape[0]
    betas = np.zeros((p, nlam))
    sweeps = np.zeros(nlam, dtype=np.int64)
    b = np.zeros(p)
    grad = xty.copy()
    for l in range(nlam):
        lam = lambdas[l]
        count = 0
        while count < max_sweeps:
            count += 1
            scale = max(1.0, np.max(np.abs(b)))
            if _sweep(gram, grad, b, lam) < tol * scale:
                break
            # iterate on the active set alone, using a contiguous copy of its Gram block
            active = np.nonzero(b)[0]
            k = active.shape[0]
            sub = np.empty((k, k))
            for a in range(k):
                for c in range(k):
                    sub[a, c] = gram[active[a], active[c]]
            b_act = b[active].copy()
            grad_act = grad[active].copy()
            while count < max_sweeps:
                count += 1
                scale = max(1.0, np.max(np.abs(b_act)))
                if _sweep(sub, grad_act, b_act, lam) < tol * scale:
                    break
            for a in range(k):
                b[active[a]] = b_act[a]
            # refresh the full gradient before the next full sweep
            grad[:] = xty
            for j in range(p):
                if b[j] != 0.0:
                    row = gram[j]
                    bj = b[j]
                    for i in range(p):
                        grad[i] -= row[i] * bj
        betas[:, l] = b
        sweeps[l] = count
    return betas, sweeps


def lasso_lambda_path(x: np.ndarray, y: np.ndarray, nlambda: int = LASSO_NLAMBDA,
                      min_ratio: float = LASSO_MIN_RATIO) -> np.ndarray:
    """Log-spaced decreasing path from ``max|X'y|/n`` down to ``min_ratio`` times that."""
    n = x.shape[0]
    lam_max = float(np.max(np.abs(x.T @ y))) / n
    if lam_max == 0.0:
        return np.zeros(nlambda)
    return np.exp(np.linspace(math.log(lam_max), math.log(lam_max * min_ratio), nlambda))


def lasso_fit(x: np.ndarray, y: np.ndarray, lambdas=None, tol: float = LASSO_TOL,
              max_sweeps: int = LASSO_MAX_SWEEPS) -> dict:
    """Lasso coefficients along a path of penalties (warm started in the given order).

    Returns a dict with ``beta`` (p x L), ``lambda`` (L,) and ``df`` (L,), the number
    of nonzero coefficients at each penalty.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("lasso inputs must be finite")
    n = x.shape[0]
    if lambdas is None:
        lambdas = lasso_lambda_path(x, y)
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=float))
    if np.any(lambdas < 0) or not np.all(np.isfinite(lambdas)):
        raise ValueError("lasso penalties must be finite and nonnegative")
    gram = x.T @ x / n
    xty = x.T @ y / n
    beta, sweeps = _cd_path(gram, xty, lambdas, tol, max_sweeps)
    return {
        "beta": beta,
        "lambda": lambdas,
        "df": np.count_nonzero(beta, axis=0).astype(np.int64),
        "sweeps": sweeps,
    }


class RidgeSVD:
    """Ridge fits and effective degrees of freedom from the thin SVD of ``X``."""

    def __init__(self, x: np.ndarray):
        u, d, vt = np.linalg.svd(np.asarray(x, dtype=float), full_matrices=False)
        keep = d > d[0] * max(x.shape) * np.finfo(float).eps if d.size else d > 0
        self.u, self.d, self.vt = u[:, keep], d[keep], vt[keep]
        self.d2 = self.d ** 2

    @property
    def rank(self) -> int:
        return int(self.d.size)

    def df(self, lam: float) -> float:
        return float(np.sum(self.d2 / (self.d2 + lam)))

    def lambda_for_df(self, target: float, tol: float = RIDGE_DF_TOL) -> float:
        """Penalty whose degrees of freedom equal ``target``, by bisection on
        ``[0, 100 max d^2]``."""
        lo, hi = 0.0, 100.0 * float(np.max(self.d2))
        f_lo, f_hi = self.df(lo) - target, self.df(hi) - target
        if abs(f_lo) <= tol:
            return lo
        if abs(f_hi) <= tol:
            return hi
        if f_lo < 0 or f_hi > 0:
            raise ValueError(
                f"df target {target} not bracketed by [0, {hi}] (df spans {self.df(hi)}..{self.rank})")
        for _ in range(2000):
            mid = 0.5 * (lo + hi)
            f_mid = self.df(mid) - target
            if abs(f_mid) <= tol or mid in (lo, hi):
                return mid
            if f_mid > 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def default_lambdas(self, n: int, nlambda: int = RIDGE_NLAMBDA) -> np.ndarray:
        """Penalties for df targets 1..n, capped at the rank when p < n."""
        top = float(min(n, self.rank))
        return self.lambdas_for_df(np.linspace(min(1.0, top), top, nlambda))

    def lambdas_for_df(self, targets, tol: float = RIDGE_DF_TOL) -> np.ndarray:
        """Vectorised :meth:`lambda_for_df` over an array of targets."""
        targets = np.atleast_1d(np.asarray(targets, dtype=float))
        hi0 = 100.0 * float(np.max(self.d2))
        if np.any(targets > self.df(0.0) + tol) or np.any(targets < self.df(hi0) - tol):
            bad = targets[(targets > self.df(0.0) + tol) | (targets < self.df(hi0) - tol)]
            raise ValueError(f"df targets {bad.tolist()} not bracketed by [0, {hi0}]")
        lo = np.zeros_like(targets)
        hi = np.full_like(targets, hi0)
        out = np.full_like(targets, np.nan)
        done = np.zeros(targets.shape, dtype=bool)
        for edge in (lo, hi):
            hit = ~done & (np.abs(self._df_many(edge) - targets) <= tol)
            out[hit], done = edge[hit], done | hit
        for _ in range(2000):
            if done.all():
                break
            mid = 0.5 * (lo + hi)
            f_mid = self._df_many(mid) - targets
            hit = ~done & ((np.abs(f_mid) <= tol) | (mid == lo) | (mid == hi))
            out[hit], done = mid[hit], done | hit
            up = f_mid > 0
            lo = np.where(up, mid, lo)
            hi = np.where(up, hi, mid)
        out[~done] = 0.5 * (lo + hi)[~done]
        return out

    def _df_many(self, lams: np.ndarray) -> np.ndarray:
        return np.sum(self.d2[None, :] / (self.d2[None, :] + lams[:, None]), axis=1)

    def coef(self, y: np.ndarray, lambdas) -> np.ndarray:
        uty = self.u.T @ np.asarray(y, dtype=float).reshape(-1)
        lambdas = np.atleast_1d(np.asarray(lambdas, dtype=float))
        shrink = self.d[:, None] / (self.d2[:, None] + lambdas[None, :])
        return self.vt.T @ (shrink * uty[:, None])


def ridge_fit(x: np.ndarray, y: np.ndarray, lambdas=None) -> dict:
    svd = RidgeSVD(x)
    if lambdas is None:
        lambdas = svd.default_lambdas(x.shape[0])
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=float))
    return {
        "beta": svd.coef(y, lambdas),
        "lambda": lambdas,
        "df": np.array([svd.df(lam) for lam in lambdas]),
    }
