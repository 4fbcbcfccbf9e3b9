"""Markov-switching VAR(p) model: parameters, regime chain, covariance paths
and real-measure simulation.

Regimes are labelled ``0..N-1`` and times ``1..T``; a regime path is a tuple
``(s_1, ..., s_T)``.  The lagged-state convention used throughout is

    y_t = A_0(s_t) psi_t + A_1(s_t) y_{t-1} + ... + A_p(s_t) y_{t-p} + xi_t,
    xi_t = chol(Sigma_t) eps_t,  eps_t ~ N(0, I_n).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import (
    IndexOutOfRange,
    NonPositiveDefiniteCovariance,
    NonStochasticTransition,
    ShapeMismatch,
    ValidationError,
)

PROB_TOL = 1e-12
SYM_TOL = 1e-12


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``.

    Every Monte Carlo routine derives its randomness through this counter
    scheme, so results do not depend on how work is split or ordered.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(key))))


def vech(m: np.ndarray) -> np.ndarray:
    """Stack the on-and-below-diagonal entries column by column."""
    n = m.shape[0]
    return np.concatenate([m[j:, j] for j in range(n)])


def unvech(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = int(round((np.sqrt(8 * v.size + 1) - 1) / 2))
    if n * (n + 1) // 2 != v.size:
        raise ShapeMismatch(f"length {v.size} is not triangular")
    out = np.zeros((n, n))
    pos = 0
    for j in range(n):
        out[j:, j] = v[pos:pos + n - j]
        pos += n - j
    return out + np.tril(out, -1).T


def _check_spd(s: np.ndarray, where: str) -> np.ndarray:
    if not np.allclose(s, s.T, atol=SYM_TOL, rtol=0.0):
        raise NonPositiveDefiniteCovariance("covariance is not symmetric", where)
    try:
        return np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        raise NonPositiveDefiniteCovariance("covariance is not positive definite", where) from None


@dataclass(frozen=True)
class ConstantCovariance:
    """One fixed covariance matrix per regime."""

    sigmas: tuple

    def __post_init__(self):
        object.__setattr__(self, "sigmas", tuple(np.array(s, dtype=float) for s in self.sigmas))


@dataclass(frozen=True)
class VechGarch:
    """GARCH(0, q) in vech form.

    ``vech(Sigma_t) = b0[s_t] + sum_j b[s_t][j-1] @ vech(Sigma_{t-j})`` with
    ``initial_sigmas`` holding ``Sigma_{1-q}, ..., Sigma_0`` in time order.
    Lagged-residual (ARCH) terms are not representable here on purpose.
    """

    b0: tuple
    b: tuple
    initial_sigmas: tuple

    def __post_init__(self):
        object.__setattr__(self, "b0", tuple(np.array(v, dtype=float) for v in self.b0))
        object.__setattr__(self, "b", tuple(tuple(np.array(m, dtype=float) for m in bj) for bj in self.b))
        object.__setattr__(self, "initial_sigmas", tuple(np.array(s, dtype=float) for s in self.initial_sigmas))

    @property
    def q(self) -> int:
        return len(self.initial_sigmas)


@dataclass(frozen=True)
class MsVarModel:
    """Parameters of one MS-VAR(p) draw.

    Parameters
    ----------
    coeffs : sequence of arrays, each ``(n, k + n p)``
        ``[A_0 : A_1 : ... : A_p]`` for every regime.
    transition : array ``(N, N)``
        Row-stochastic regime transition matrix.
    initial_dist : array ``(N,)``
        Distribution of ``s_1``.
    cov : ConstantCovariance or VechGarch
    lag_order : int
    """

    coeffs: tuple
    transition: np.ndarray
    initial_dist: np.ndarray
    cov: ConstantCovariance | VechGarch
    lag_order: int = 1

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(np.array(c, dtype=float) for c in self.coeffs))
        object.__setattr__(self, "transition", np.array(self.transition, dtype=float))
        object.__setattr__(self, "initial_dist", np.array(self.initial_dist, dtype=float))

    @property
    def n_regimes(self) -> int:
        return len(self.coeffs)

    @property
    def dim(self) -> int:
        return self.coeffs[0].shape[0]

    @property
    def exo_dim(self) -> int:
        return self.coeffs[0].shape[1] - self.dim * self.lag_order

    def a0(self, regime: int) -> np.ndarray:
        return self.coeffs[regime][:, : self.exo_dim]

    def a(self, lag: int, regime: int) -> np.ndarray:
        """Coefficient on ``y_{t-lag}`` in ``regime`` (``lag >= 1``)."""
        k, n = self.exo_dim, self.dim
        return self.coeffs[regime][:, k + (lag - 1) * n: k + lag * n]


@dataclass(frozen=True)
class PathState:
    """Initial information: lagged values, exogenous path and observed prefix.

    ``y_init`` has rows ``y_{1-p}, ..., y_0``; ``psi`` has rows
    ``psi_1, ..., psi_T``; ``observed`` has rows ``y_1, ..., y_t``.
    """

    y_init: np.ndarray
    psi: np.ndarray
    observed: np.ndarray = field(default=None)

    def __post_init__(self):
        y_init = np.atleast_2d(np.array(self.y_init, dtype=float))
        psi = np.atleast_2d(np.array(self.psi, dtype=float))
        n = y_init.shape[1]
        obs = np.zeros((0, n)) if self.observed is None else np.array(self.observed, dtype=float).reshape(-1, n)
        if not np.all(psi[:, 0] == 1.0):
            raise ValidationError("exogenous vectors must have leading component 1", "state.psi")
        object.__setattr__(self, "y_init", y_init)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "observed", obs)

    @property
    def horizon(self) -> int:
        return self.psi.shape[0]

    @property
    def t(self) -> int:
        return self.observed.shape[0]

    def with_observed(self, observed) -> "PathState":
        return PathState(self.y_init, self.psi, observed)

    def history(self) -> np.ndarray:
        """All known values ``y_{1-p}, ..., y_t`` in time order."""
        return np.vstack([self.y_init, self.observed])

    def value(self, time: int) -> np.ndarray:
        """``y_time`` for ``1-p <= time <= t``."""
        p = self.y_init.shape[0]
        idx = time + p - 1
        if idx < 0 or time > self.t:
            raise IndexOutOfRange(f"y_{time} is not known", "state")
        return self.history()[idx]

    def lags(self, time: int, p: int) -> np.ndarray:
        """``(y_{time-1}, ..., y_{time-p})`` stacked as rows; needs ``time-1 <= t``."""
        return np.array([self.value(time - m) for m in range(1, p + 1)])


def validate_model(model: MsVarModel, horizon: int | None = None) -> MsVarModel:
    """Check every structural invariant and return the model unchanged.

    Raises
    ------
    ShapeMismatch, NonStochasticTransition, NonPositiveDefiniteCovariance
        The message names the offending regime or row.
    """
    n, p = model.dim, model.lag_order
    N = model.n_regimes
    if p < 1:
        raise ValidationError("lag order must be positive", "lag_order")
    k = model.exo_dim
    if k < 1:
        raise ShapeMismatch("coefficient matrix too narrow for an exogenous block", "coeffs[0]")
    for j, c in enumerate(model.coeffs):
        if c.shape != (n, k + n * p):
            raise ShapeMismatch(f"expected shape {(n, k + n * p)}, got {c.shape}", f"regimes[{j}].A")
    P = model.transition
    if P.shape != (N, N):
        raise ShapeMismatch(f"expected shape {(N, N)}, got {P.shape}", "transition")
    for i in range(N):
        if np.any(P[i] < 0) or np.any(P[i] > 1) or abs(P[i].sum() - 1.0) > PROB_TOL:
            raise NonStochasticTransition(f"row sums to {P[i].sum():.15g}", f"transition[{i}]")
    d = model.initial_dist
    if d.shape != (N,) or np.any(d < 0) or abs(d.sum() - 1.0) > PROB_TOL:
        raise NonStochasticTransition("initial distribution is not a probability vector", "initial_dist")

    cov = model.cov
    if isinstance(cov, ConstantCovariance):
        if len(cov.sigmas) != N:
            raise ShapeMismatch(f"need {N} covariance matrices", "cov")
        for j, s in enumerate(cov.sigmas):
            if s.shape != (n, n):
                raise ShapeMismatch(f"expected {(n, n)}, got {s.shape}", f"regimes[{j}].cov")
            _check_spd(s, f"regimes[{j}].cov")
    elif isinstance(cov, VechGarch):
        m = n * (n + 1) // 2
        if len(cov.b0) != N or len(cov.b) != N:
            raise ShapeMismatch(f"need GARCH blocks for {N} regimes", "cov")
        for j in range(N):
            if cov.b0[j].shape != (m,):
                raise ShapeMismatch(f"b0 must have length {m}", f"regimes[{j}].cov.b0")
            if len(cov.b[j]) != cov.q:
                raise ShapeMismatch(f"need {cov.q} lag matrices", f"regimes[{j}].cov.b")
            for i, bm in enumerate(cov.b[j]):
                if bm.shape != (m, m):
                    raise ShapeMismatch(f"expected {(m, m)}", f"regimes[{j}].cov.b[{i}]")
        for i, s in enumerate(cov.initial_sigmas):
            _check_spd(s, f"cov.initial_sigmas[{i}]")
        if horizon is not None:
            # every path of the horizon must stay SPD; enumerate only when cheap
            if N ** horizon <= 4096:
                import itertools
                for path in itertools.product(range(N), repeat=horizon):
                    covariance_path(model, path)
    else:
        raise ValidationError("unknown covariance type", "cov")
    return model


def check_path(model: MsVarModel, path: Sequence[int]) -> tuple:
    path = tuple(int(s) for s in path)
    for i, s in enumerate(path):
        if not 0 <= s < model.n_regimes:
            raise IndexOutOfRange(f"regime {s} outside 0..{model.n_regimes - 1}", f"path[{i}]")
    return path


def markov_path_prob(model: MsVarModel, path: Sequence[int], t: int = 0) -> float:
    """Probability of ``s_{t+1}, ..., s_T`` given ``s_t`` (the initial law when ``t == 0``)."""
    path = check_path(model, path)
    T = len(path)
    if not 0 <= t < T:
        raise IndexOutOfRange(f"t={t} outside 0..{T - 1}", "t")
    prob = model.initial_dist[path[0]] if t == 0 else 1.0
    for m in range(max(t, 1), T):
        prob *= model.transition[path[m - 1], path[m]]
    return float(prob)


def covariance_path(model: MsVarModel, path: Sequence[int]) -> list:
    """``[Sigma_1, ..., Sigma_T]`` along a regime path."""
    path = check_path(model, path)
    cov = model.cov
    if isinstance(cov, ConstantCovariance):
        return [cov.sigmas[s] for s in path]
    hist = [vech(s) for s in cov.initial_sigmas]
    out = []
    for t, s in enumerate(path, start=1):
        v = cov.b0[s].copy()
        for j, bm in enumerate(cov.b[s], start=1):
            v = v + bm @ hist[-j]
        sig = unvech(v)
        _check_spd(sig, f"Sigma_{t}")
        hist.append(v)
        out.append(sig)
    return out


def companion_form(model: MsVarModel, path: Sequence[int], psi: np.ndarray) -> list:
    """Per-time ``(nu_star, A)`` of the VAR(1) embedding on ``(y_t, ..., y_{t-p+1})``."""
    path = check_path(model, path)
    n, p = model.dim, model.lag_order
    out = []
    for t, s in enumerate(path):
        big = np.zeros((n * p, n * p))
        for m in range(1, p + 1):
            big[:n, (m - 1) * n: m * n] = model.a(m, s)
        if p > 1:
            big[n:, : n * (p - 1)] = np.eye(n * (p - 1))
        nu = np.zeros(n * p)
        nu[:n] = model.a0(s) @ psi[t]
        out.append((nu, big))
    return out


def recursion(model: MsVarModel, state: PathState, path: Sequence[int], shocks: np.ndarray) -> np.ndarray:
    """Deterministic VAR recursion driven by given residuals ``xi`` of shape ``(..., T, n)``."""
    path = check_path(model, path)
    p = model.lag_order
    shocks = np.asarray(shocks, dtype=float)
    lead = shocks.shape[:-2]
    hist = [np.broadcast_to(v, lead + v.shape) for v in state.y_init]
    out = np.empty_like(shocks)
    for t, s in enumerate(path):
        y = model.a0(s) @ state.psi[t] + shocks[..., t, :]
        for m in range(1, p + 1):
            y = y + hist[-m] @ model.a(m, s).T
        out[..., t, :] = y
        hist.append(y)
    return out


def companion_recursion(model: MsVarModel, state: PathState, path: Sequence[int], shocks: np.ndarray) -> np.ndarray:
    """Same trajectory as :func:`recursion`, computed through the companion form."""
    n, p = model.dim, model.lag_order
    comp = companion_form(model, path, state.psi)
    ystar = np.concatenate(state.y_init[::-1])
    shocks = np.asarray(shocks, dtype=float)
    ystar = np.broadcast_to(ystar, shocks.shape[:-2] + ystar.shape)
    out = np.empty_like(shocks)
    for t, (nu, big) in enumerate(comp):
        xi = np.zeros(shocks.shape[:-2] + (n * p,))
        xi[..., :n] = shocks[..., t, :]
        ystar = nu + ystar @ big.T + xi
        out[..., t, :] = ystar[..., :n]
    return out


def simulate_real_path(model: MsVarModel, state: PathState, path: Sequence[int], seed: int,
                       n_paths: int | None = None) -> np.ndarray:
    """Simulate ``y_1..y_T`` under the real measure along a fixed regime path.

    Returns shape ``(T, n)`` or ``(n_paths, T, n)``.
    """
    path = check_path(model, path)
    n = model.dim
    rng = substream(seed, 0)
    size = (len(path), n) if n_paths is None else (n_paths, len(path), n)
    eps = rng.standard_normal(size)
    chols = [linalg.cholesky(s, lower=True) for s in covariance_path(model, path)]
    xi = np.stack([eps[..., t, :] @ c.T for t, c in enumerate(chols)], axis=-2)
    return recursion(model, state, path, xi)
