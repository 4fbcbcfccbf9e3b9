"""Stacked linear system for a fixed regime path and the Gaussian laws it implies.

Stacking ``y = (y_1, ..., y_T)`` the model reads ``Psi y = delta + xi`` with
``xi ~ N(0, blockdiag(Sigma_1, ..., Sigma_T))``.  ``Psi`` is unit lower block
triangular, so every law below is obtained with triangular solves.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import IndexOutOfRange, NonPositiveDefiniteCovariance, ShapeMismatch
from .model import MsVarModel, PathState, check_path, covariance_path

ASYM_TOL = 1e-10


@dataclass(frozen=True)
class GaussianLaw:
    mean: np.ndarray
    cov: np.ndarray

    def marginal(self, idx) -> "GaussianLaw":
        idx = np.asarray(idx)
        return GaussianLaw(self.mean[idx], self.cov[np.ix_(idx, idx)])


def _sym(c: np.ndarray) -> np.ndarray:
    if c.size and np.max(np.abs(c - c.T)) > ASYM_TOL * max(1.0, np.max(np.abs(c))):
        raise NonPositiveDefiniteCovariance("assembled covariance is not symmetric")
    return 0.5 * (c + c.T)


@dataclass(frozen=True)
class StackedSystem:
    psi: np.ndarray
    delta: np.ndarray
    sigmas: tuple
    dim: int
    model: MsVarModel
    path: tuple
    state: PathState

    @property
    def horizon(self) -> int:
        return len(self.sigmas)

    @property
    def sigma(self) -> np.ndarray:
        return linalg.block_diag(*self.sigmas)

    def block(self, t: int) -> slice:
        """Row slice of ``y_t`` (``1 <= t <= T``) in the stacked vector."""
        return slice((t - 1) * self.dim, t * self.dim)


def zero_deltas(model: MsVarModel, horizon: int) -> list:
    n, k, p = model.dim, model.exo_dim, model.lag_order
    return [[np.zeros((n, k))] + [np.zeros((n, n)) for _ in range(p)] for _ in range(horizon)]


def build_stacked(model: MsVarModel, path: Sequence[int], state: PathState, deltas=None) -> StackedSystem:
    """Assemble ``(Psi, delta, Sigma)``.

    ``deltas[t-1]`` is ``[D_0, D_1, ..., D_p]`` for time ``t``: the kernel
    written as ``theta_t = D_0 psi_t + sum_m D_m y_{t-m}``.  ``None`` means the
    real measure.
    """
    path = check_path(model, path)
    T, n, k, p = len(path), model.dim, model.exo_dim, model.lag_order
    if state.horizon < T:
        raise ShapeMismatch(f"need {T} exogenous vectors, have {state.horizon}", "state.psi")
    if state.y_init.shape != (p, n):
        raise ShapeMismatch(f"initial values must be {(p, n)}", "state.y_init")
    if deltas is None:
        deltas = zero_deltas(model, T)
    if len(deltas) != T:
        raise ShapeMismatch(f"need {T} kernel blocks", "deltas")
    psi = np.eye(n * T)
    delta = np.zeros(n * T)
    for t in range(1, T + 1):
        s = path[t - 1]
        d = deltas[t - 1]
        if len(d) != p + 1 or np.shape(d[0]) != (n, k) or any(np.shape(x) != (n, n) for x in d[1:]):
            raise ShapeMismatch("kernel block shapes must be n x k then n x n", f"deltas[{t - 1}]")
        rows = slice((t - 1) * n, t * n)
        delta[rows] = (model.a0(s) + d[0]) @ state.psi[t - 1]
        for m in range(1, p + 1):
            coef = model.a(m, s) + d[m]
            if t - m >= 1:
                psi[rows, (t - m - 1) * n: (t - m) * n] = -coef
            else:
                delta[rows] += coef @ state.y_init[p + t - m - 1]
    return StackedSystem(psi, delta, tuple(covariance_path(model, path)), n, model, path, state)


def _solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return linalg.solve_triangular(a, b, lower=True, unit_diagonal=True)


def law_full(sys: StackedSystem) -> GaussianLaw:
    """Law of ``(y_1, ..., y_T)`` given the initial information."""
    mean = _solve(sys.psi, sys.delta)
    left = _solve(sys.psi, sys.sigma)
    cov = _solve(sys.psi, left.T)
    return GaussianLaw(mean, _sym(cov))


def law_conditional_future(sys: StackedSystem, t: int, observed=None) -> GaussianLaw:
    """Law of ``(y_{t+1}, ..., y_T)`` given ``y_1, ..., y_t``.

    ``observed`` defaults to the prefix held by the system's state.
    """
    T, n = sys.horizon, sys.dim
    if not 0 <= t < T:
        raise IndexOutOfRange(f"t={t} outside 0..{T - 1}", "t")
    if observed is None:
        observed = sys.state.observed[:t]
    ybar = np.asarray(observed, dtype=float).reshape(-1)
    if ybar.size != n * t:
        raise ShapeMismatch(f"observed prefix must have {n * t} entries", "observed")
    cut = n * t
    psi22 = sys.psi[cut:, cut:]
    psi21 = sys.psi[cut:, :cut]
    mean = _solve(psi22, sys.delta[cut:] - psi21 @ ybar)
    sig_c = linalg.block_diag(*sys.sigmas[t:])
    cov = _solve(psi22, _solve(psi22, sig_c).T)
    return GaussianLaw(mean, _sym(cov))


def law_one_step(model: MsVarModel, regime: int, sigma: np.ndarray, psi_t: np.ndarray, lags: np.ndarray,
                 theta=None) -> GaussianLaw:
    """Law of ``y_t`` given the past: mean ``Pi Y_{t-1} + theta_t``, covariance ``Sigma_t``.

    ``lags`` holds ``y_{t-1}, ..., y_{t-p}`` as rows.
    """
    mean = model.a0(regime) @ psi_t
    for m in range(1, model.lag_order + 1):
        mean = mean + model.a(m, regime) @ lags[m - 1]
    if theta is not None:
        mean = mean + theta
    return GaussianLaw(mean, np.array(sigma, dtype=float))


def gaussian_log_likelihood_prefix(sys: StackedSystem, observed) -> float:
    """Log density of the observed prefix ``y_1..y_t`` under the system."""
    ybar = np.asarray(observed, dtype=float).reshape(-1)
    n = sys.dim
    t = ybar.size // n
    if t < 1 or ybar.size != n * t or t > sys.horizon:
        raise ShapeMismatch("observed prefix must cover 1..t whole periods", "observed")
    cut = n * t
    psi11 = sys.psi[:cut, :cut]
    # Psi11 y - delta1 = xi1, with unit Jacobian
    resid = psi11 @ ybar - sys.delta[:cut]
    logdens = 0.0
    for m in range(t):
        r = resid[m * n:(m + 1) * n]
        try:
            c = linalg.cho_factor(sys.sigmas[m], lower=True)
        except linalg.LinAlgError:
            raise NonPositiveDefiniteCovariance("covariance is not positive definite", f"Sigma_{m + 1}") from None
        logdens -= 0.5 * r @ linalg.cho_solve(c, r)
        logdens -= np.sum(np.log(np.diag(c[0])))
    return float(logdens - 0.5 * cut * np.log(2 * np.pi))


def gaussian_likelihood_prefix(sys: StackedSystem, observed) -> float:
    return float(np.exp(gaussian_log_likelihood_prefix(sys, observed)))
