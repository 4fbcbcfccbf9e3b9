"""Measure-change kernels.

A kernel ``theta_t`` shifts the mean of the residual ``xi_t`` under the
pricing measure.  Kernels with a linear representation are carried as
``[D_0, D_1, ..., D_p]`` per period so they can be installed in a stacked
system (see :func:`msvar_pricing.stacked.build_stacked`).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import DegenerateKernel, NoConvergence, RankDeficientConstraint, ShapeMismatch, SingularAssetCovariance
from .markets import FxLayout, NormalLayout
from .model import MsVarModel, check_path, covariance_path, substream

DEGENERATE_X = 1e-12


@dataclass(frozen=True)
class KernelConstraint:
    """Linear restriction ``A theta = b`` on the stacked kernel."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.array(self.a, dtype=float))
        b = np.array(self.b, dtype=float).reshape(-1)
        if a.shape[0] != b.size:
            raise ShapeMismatch(f"A has {a.shape[0]} rows but b has {b.size} entries", "constraint")
        if a.shape[0] > a.shape[1] or np.linalg.matrix_rank(a) < a.shape[0]:
            raise RankDeficientConstraint(f"constraint matrix of shape {a.shape} lacks full row rank")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


def _stack(sigmas: Sequence[np.ndarray]) -> np.ndarray:
    return linalg.block_diag(*[np.asarray(s, dtype=float) for s in sigmas])


def _weighted_min_norm(a: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``W A' (A W A')^{-1} b`` for SPD ``W``."""
    aw = a @ w
    gram = aw @ a.T
    try:
        c = linalg.cho_factor(0.5 * (gram + gram.T))
    except linalg.LinAlgError:
        raise RankDeficientConstraint("A W A' is not positive definite") from None
    return aw.T @ linalg.cho_solve(c, b)


def entropy_kernel(sigmas: Sequence[np.ndarray], constraint: KernelConstraint) -> np.ndarray:
    """Relative-entropy minimiser ``Sigma A' (A Sigma A')^{-1} b``, shape ``(T, n)``."""
    n = np.shape(sigmas[0])[0]
    sig = _stack(sigmas)
    if constraint.a.shape[1] != sig.shape[0]:
        raise ShapeMismatch(f"A must have {sig.shape[0]} columns", "constraint")
    return _weighted_min_norm(constraint.a, sig, constraint.b).reshape(-1, n)


def quadratic_forms(theta: np.ndarray, sigmas: Sequence[np.ndarray]) -> np.ndarray:
    """``x_t = theta_t' Sigma_t^{-1} theta_t`` for every period."""
    return np.array([th @ np.linalg.solve(s, th) for th, s in zip(np.asarray(theta), sigmas)])


def variance_kernel(sigmas: Sequence[np.ndarray], constraint: KernelConstraint, tol: float = 1e-12,
                    max_iter: int = 10_000, damping: float = 0.5) -> np.ndarray:
    """Fixed point of ``theta = Sigma L^{-1} A' (A Sigma L^{-1} A')^{-1} b``.

    ``L^{-1}`` is block diagonal with ``1 - exp(-x_t)`` on block ``t``.  The
    iteration starts at the entropy kernel and takes damped steps.
    """
    n = np.shape(sigmas[0])[0]
    sig = _stack(sigmas)
    theta = entropy_kernel(sigmas, constraint)
    for _ in range(max_iter):
        x = quadratic_forms(theta, sigmas)
        if np.any(x < DEGENERATE_X):
            bad = int(np.argmin(x))
            raise DegenerateKernel(f"kernel vanishes at period {bad + 1}; the variance weights are singular")
        lam_inv = np.repeat(-np.expm1(-x), n)
        target = _weighted_min_norm(constraint.a, sig * lam_inv[None, :], constraint.b).reshape(-1, n)
        step = target - theta
        theta = theta + damping * step
        if np.max(np.abs(step)) <= tol * max(1.0, np.max(np.abs(theta))):
            return target
    raise NoConvergence(f"variance kernel did not converge in {max_iter} iterations")


def fixed_point_residual(theta: np.ndarray, sigmas: Sequence[np.ndarray], constraint: KernelConstraint) -> float:
    n = np.shape(sigmas[0])[0]
    x = quadratic_forms(theta, sigmas)
    lam_inv = np.repeat(-np.expm1(-x), n)
    target = _weighted_min_norm(constraint.a, _stack(sigmas) * lam_inv[None, :], constraint.b)
    return float(np.max(np.abs(target - np.asarray(theta).reshape(-1))))


def entropy(theta: np.ndarray, sigmas: Sequence[np.ndarray]) -> float:
    return 0.5 * float(np.sum(quadratic_forms(theta, sigmas)))


def variance_formula(theta: np.ndarray, sigmas: Sequence[np.ndarray]) -> float:
    """``prod_t (exp(x_t) - 1)``: the closed-form variance objective the variance kernel optimises."""
    return float(np.prod(np.expm1(quadratic_forms(theta, sigmas))))


def state_price_stats(theta: np.ndarray, sigmas: Sequence[np.ndarray], seed: int | None = None,
                      n_paths: int = 100_000) -> dict:
    """Entropy and variance diagnostics of the state price density ``L_T``.

    With a seed the sample variance of ``L_T`` over simulated residuals is
    reported as well, together with its standard error.
    """
    theta = np.asarray(theta, dtype=float)
    out = {"entropy": entropy(theta, sigmas), "variance_formula": variance_formula(theta, sigmas)}
    if seed is not None:
        rng = substream(seed, 1)
        log_l = np.zeros(n_paths)
        for t, (th, s) in enumerate(zip(theta, sigmas)):
            c = np.linalg.cholesky(s)
            xi = rng.standard_normal((n_paths, len(th))) @ c.T
            w = np.linalg.solve(s, th)
            log_l += xi @ w - 0.5 * th @ w
        dev = np.exp(log_l) - 1.0
        sq = dev ** 2
        out["variance_mc"] = float(np.mean(sq) - np.mean(dev) ** 2)
        out["variance_mc_se"] = float(np.std(sq, ddof=1) / np.sqrt(n_paths))
    return out


def contract(deltas: Sequence[np.ndarray], psi_t: np.ndarray, lags: np.ndarray) -> np.ndarray:
    """Evaluate ``D_0 psi_t + sum_m D_m y_{t-m}``; ``lags`` rows are ``y_{t-1}, y_{t-2}, ...``.

    Leading batch dimensions on ``lags`` (``(..., p, n)``) are supported.
    """
    lags = np.asarray(lags, dtype=float)
    out = deltas[0] @ psi_t
    for m in range(1, len(deltas)):
        out = out + lags[..., m - 1, :] @ deltas[m].T
    return out


def _theta_loading(sigma: np.ndarray, n_z: int) -> np.ndarray:
    """``[Sigma_12 Sigma_22^{-1} ; I]``, the map from the asset block to the full kernel."""
    s12 = sigma[:n_z, n_z:]
    s22 = sigma[n_z:, n_z:]
    try:
        c = linalg.cho_factor(s22)
    except linalg.LinAlgError:
        raise SingularAssetCovariance("asset covariance block is singular") from None
    return np.vstack([linalg.cho_solve(c, s12.T).T, np.eye(s22.shape[0])])


def block_deltas_normal(model: MsVarModel, regime: int, sigma: np.ndarray, layout: NormalLayout) -> list:
    """Linear representation of the kernel that makes ``(1+r)^{-t} x_t`` a martingale."""
    m2 = layout.m2
    load = _theta_loading(sigma, layout.n_z)
    hat = [-m2 @ model.a0(regime)]
    for m in range(1, model.lag_order + 1):
        am = model.a(m, regime)
        hat.append(-m2 @ (am - (1 + layout.rate) * np.eye(model.dim)) if m == 1 else -m2 @ am)
    return [load @ d for d in hat]


def lognormal_alpha(sigma: np.ndarray, layout: FxLayout) -> np.ndarray:
    """Convexity correction ``1/2 R2^{-1} diag(R2 Sigma_22 R2')``."""
    r2 = layout.r2
    s22 = sigma[layout.n_z:, layout.n_z:]
    return 0.5 * np.linalg.solve(r2, np.diag(r2 @ s22 @ r2.T))


def block_deltas_lognormal(model: MsVarModel, regime: int, sigma: np.ndarray, layout: FxLayout) -> list:
    """Linear representation of the kernel that makes every ``D^d_t X_t`` a martingale."""
    m2 = layout.m2
    load = _theta_loading(sigma, layout.n_z)
    hat0 = -m2 @ model.a0(regime)
    hat0[:, 0] -= lognormal_alpha(sigma, layout)
    hat = [hat0]
    for m in range(1, model.lag_order + 1):
        am = model.a(m, regime)
        hat.append(m2 @ (np.eye(model.dim) - am) + layout.carry if m == 1 else -m2 @ am)
    return [load @ d for d in hat]


def _deltas_along(model: MsVarModel, path, builder, layout) -> list:
    path = check_path(model, path)
    return [builder(model, s, sig, layout) for s, sig in zip(path, covariance_path(model, path))]


def normal_kernel_deltas(model: MsVarModel, path, layout: NormalLayout) -> list:
    return _deltas_along(model, path, block_deltas_normal, layout)


def lognormal_kernel_deltas(model: MsVarModel, path, layout: FxLayout) -> list:
    return _deltas_along(model, path, block_deltas_lognormal, layout)


def normal_theta_hat(model: MsVarModel, regime: int, layout: NormalLayout, psi_t, lags) -> np.ndarray:
    """Asset-block drift target ``M2((1+r) y_{t-1} - Pi Y_{t-1})`` computed directly."""
    lags = np.asarray(lags, dtype=float)
    pred = model.a0(regime) @ psi_t
    for m in range(1, model.lag_order + 1):
        pred = pred + lags[..., m - 1, :] @ model.a(m, regime).T
    return ((1 + layout.rate) * lags[..., 0, :] - pred)[..., layout.n_z:]


def lognormal_theta_hat(model: MsVarModel, regime: int, layout: FxLayout, psi_t, lags) -> np.ndarray:
    """Asset-block target ``M2(y_{t-1} - Pi Y_{t-1}) + C y_{t-1}`` computed directly."""
    lags = np.asarray(lags, dtype=float)
    pred = model.a0(regime) @ psi_t
    for m in range(1, model.lag_order + 1):
        pred = pred + lags[..., m - 1, :] @ model.a(m, regime).T
    y1 = lags[..., 0, :]
    return (y1 - pred)[..., layout.n_z:] + y1 @ layout.carry.T


def block_constraint(m2: np.ndarray, targets: Sequence[np.ndarray]) -> KernelConstraint:
    """Per-period constraints ``M2 theta_t = target_t`` stacked block-diagonally."""
    return KernelConstraint(linalg.block_diag(*[m2] * len(targets)), np.concatenate(targets))


def block_kernel_normal(model: MsVarModel, regime: int, sigma: np.ndarray, layout: NormalLayout,
                            psi_t, lags) -> tuple:
    """``(theta_t, deltas)`` for the normal market at one period."""
    deltas = block_deltas_normal(model, regime, sigma, layout)
    theta = _theta_loading(sigma, layout.n_z) @ normal_theta_hat(model, regime, layout, psi_t, lags)
    return theta, deltas


def block_kernel_lognormal(model: MsVarModel, regime: int, sigma: np.ndarray, layout: FxLayout,
                               psi_t, lags) -> tuple:
    """``(theta_t, deltas)`` for the domestic-foreign market at one period."""
    deltas = block_deltas_lognormal(model, regime, sigma, layout)
    target = lognormal_theta_hat(model, regime, layout, psi_t, lags) - lognormal_alpha(sigma, layout)
    return _theta_loading(sigma, layout.n_z) @ target, deltas
