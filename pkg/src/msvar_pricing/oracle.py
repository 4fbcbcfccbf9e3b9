"""Independent reference values: pricing-measure Monte Carlo and Gaussian quadrature.

The simulator recomputes the kernel at every step from the simulated lags
through the direct drift formulas, not through the stacked-system
representation, so agreement with the closed forms is a real cross-check.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy import integrate, linalg, stats

from .errors import McBudgetExceeded, ToleranceNotMet
from .girsanov import (
    _theta_loading,
    contract,
    lognormal_alpha,
    lognormal_theta_hat,
    normal_theta_hat,
)
from .markets import FxLayout, NormalLayout
from .model import MsVarModel, PathState, check_path, covariance_path, substream

CHUNK = 1 << 16
MAX_PATHS = 50_000_000


def zero_kernel(model: MsVarModel):
    def theta(time, regime, sigma, psi_t, lags):
        return np.zeros(lags.shape[:-2] + (model.dim,))
    return theta


def normal_kernel(model: MsVarModel, layout: NormalLayout):
    def theta(time, regime, sigma, psi_t, lags):
        return normal_theta_hat(model, regime, layout, psi_t, lags) @ _theta_loading(sigma, layout.n_z).T
    return theta


def lognormal_kernel(model: MsVarModel, layout: FxLayout):
    def theta(time, regime, sigma, psi_t, lags):
        target = lognormal_theta_hat(model, regime, layout, psi_t, lags) - lognormal_alpha(sigma, layout)
        return target @ _theta_loading(sigma, layout.n_z).T
    return theta


def linear_kernel(deltas: Sequence):
    """Kernel given by per-period linear blocks, as used for the term-structure kernel."""
    def theta(time, regime, sigma, psi_t, lags):
        return contract(deltas[time - 1], psi_t, lags)
    return theta


def simulate_under_Q(model: MsVarModel, state: PathState, path, theta_fn, rng: np.random.Generator,
                     n_paths: int, t: int = 0, antithetic: bool = False) -> np.ndarray:
    """Trajectories ``y_1..y_T`` (shape ``(n_paths, T, n)``) under the kernel-shifted law.

    The first ``t`` periods are pinned to the observed prefix.  With
    ``antithetic`` the second half of the draws mirrors the first.
    """
    path = check_path(model, path)
    T, n, p = len(path), model.dim, model.lag_order
    sigmas = covariance_path(model, path)
    chols = [linalg.cholesky(s, lower=True) for s in sigmas]
    if antithetic:
        half = rng.standard_normal(((n_paths + 1) // 2, T, n))
        eps = np.concatenate([half, -half])[:n_paths]
    else:
        eps = rng.standard_normal((n_paths, T, n))
    hist = np.empty((n_paths, p + T, n))
    hist[:, :p] = state.y_init
    for m in range(1, T + 1):
        if m <= t:
            hist[:, p + m - 1] = state.observed[m - 1]
            continue
        s = path[m - 1]
        lags = np.stack([hist[:, p + m - 1 - j] for j in range(1, p + 1)], axis=1)
        mean = model.a0(s) @ state.psi[m - 1] + sum(lags[:, j - 1] @ model.a(j, s).T for j in range(1, p + 1))
        mean = mean + theta_fn(m, s, sigmas[m - 1], state.psi[m - 1], lags)
        hist[:, p + m - 1] = mean + eps[:, m - 1] @ chols[m - 1].T
    return hist[:, p:]


def mc_price(model: MsVarModel, state: PathState, weighted_paths: list, kernel_for: Callable, payoff: Callable,
             n_paths: int, seed: int, t: int = 0, antithetic: bool = False) -> dict:
    """Mean of ``payoff(y, path)`` over simulated trajectories with its standard error.

    ``weighted_paths`` lists ``(regime path, probability)``; regime paths are
    drawn from it and trajectories simulated per path.  ``payoff`` returns
    shape ``(m,)`` or ``(m, k)`` for ``m`` trajectories; discounting is the
    payoff's job.  ``kernel_for(path)`` returns the per-step kernel callable.
    With ``antithetic`` each sample is the average over a mirrored pair, so
    ``n_paths`` counts pairs.
    """
    if n_paths > MAX_PATHS:
        raise McBudgetExceeded(f"{n_paths} paths exceed the budget of {MAX_PATHS}")
    probs = np.array([w for _, w in weighted_paths], dtype=float)
    counts = substream(seed, 0).multinomial(n_paths, probs / probs.sum())
    s1 = s2 = 0.0
    for idx, ((path, _), cnt) in enumerate(zip(weighted_paths, counts)):
        theta_fn = kernel_for(path)
        for chunk_no, done in enumerate(range(0, cnt, CHUNK)):
            m = min(CHUNK, cnt - done)
            rng = substream(seed, 1, idx, chunk_no)
            y = simulate_under_Q(model, state, path, theta_fn, rng, 2 * m if antithetic else m, t, antithetic)
            v = np.asarray(payoff(y, path), dtype=float).reshape(y.shape[0], -1)
            if antithetic:
                v = 0.5 * (v[:m] + v[m:])
            s1 = s1 + v.sum(axis=0)
            s2 = s2 + (v ** 2).sum(axis=0)
    mean = s1 / n_paths
    var = np.maximum(s2 / n_paths - mean ** 2, 0.0) * n_paths / max(n_paths - 1, 1)
    se = np.sqrt(var / n_paths)
    if mean.size == 1:
        return {"estimate": float(mean[0]), "se": float(se[0]), "n_paths": n_paths}
    return {"estimate": mean, "se": se, "n_paths": n_paths}


def quad_expectation_1d(f: Callable, mu: float, sigma: float, tol: float = 1e-11, points=None) -> float:
    """``E[f(X)]`` for ``X ~ N(mu, sigma^2)`` by adaptive quadrature over ``mu +- 10 sigma``."""
    if sigma == 0:
        return float(f(mu))
    lo, hi = mu - 10 * sigma, mu + 10 * sigma
    pts = None if points is None else [x for x in points if lo < x < hi]
    val, err = integrate.quad(lambda x: f(x) * stats.norm.pdf(x, mu, sigma), lo, hi, epsabs=tol, epsrel=0,
                              points=pts, limit=500)
    if err > tol:
        raise ToleranceNotMet(f"quadrature error estimate {err:.2e} exceeds {tol:.2e}")
    return float(val)


def quad_expectation_2d(f: Callable, mean, cov, tol: float = 1e-9) -> float:
    """``E[f(X1, X2)]`` for a bivariate normal, integrating over ``+-10`` standard units."""
    mean = np.asarray(mean, dtype=float)
    c = np.linalg.cholesky(np.asarray(cov, dtype=float))

    def g(z2, z1):
        x = mean + c @ np.array([z1, z2])
        return f(x[0], x[1]) * stats.norm.pdf(z1) * stats.norm.pdf(z2)

    val, err = integrate.dblquad(g, -10, 10, -10, 10, epsabs=tol, epsrel=0)
    if err > tol:
        raise ToleranceNotMet(f"quadrature error estimate {err:.2e} exceeds {tol:.2e}")
    return float(val)
