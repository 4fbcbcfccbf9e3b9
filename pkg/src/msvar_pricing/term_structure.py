"""Forward-rate curve market: no-arbitrage kernel, forward-rate laws, caplets,
LIBOR caplets and zero-coupon bond options.

``y_t[j]`` is the forward rate agreed at ``t`` for the period ``t+j -> t+j+1``,
so ``B_{t,u} = exp(-sum_{j < u-t} y_t[j])`` is read straight off the curve.
The kernel is chosen at time ``t`` from that information and is constant
over ``t+1..T`` on each regime path.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import IndexOutOfRange, ValidationError
from .girsanov import KernelConstraint, entropy_kernel
from .lognormal import lognormal_call, lognormal_put
from .markets import HjmLayout
from .model import MsVarModel, PathState, check_path, companion_form, covariance_path
from .normal import truncated_call, truncated_put
from .regimes import DEFAULT_CAP, conditioning_paths
from .stacked import GaussianLaw, StackedSystem, build_stacked, law_conditional_future, zero_deltas


@dataclass(frozen=True)
class HjmConstraintSet:
    """Rows ``a_u`` and targets ``b_u`` for ``u = t+2..T`` over the stacked kernel ``theta_{t+1..T}``."""

    a: np.ndarray
    b: np.ndarray
    t: int

    def as_constraint(self) -> KernelConstraint:
        return KernelConstraint(self.a, self.b)


def _check_times(layout: HjmLayout, state: PathState, t: int):
    if not 0 <= t <= state.t:
        raise IndexOutOfRange(f"t={t} outside 0..{state.t}", "t")
    if not t < layout.horizon:
        raise IndexOutOfRange(f"t={t} must precede the horizon {layout.horizon}", "t")


def log_bond(layout: HjmLayout, y_t: np.ndarray, t: int, u: int) -> float:
    """``log B_{t,u}`` from the time-``t`` forward curve."""
    if not t <= u <= t + layout.n:
        raise IndexOutOfRange(f"u={u} outside {t}..{t + layout.n}", "u")
    return float(-np.sum(y_t[: u - t]))


def bond_curve(layout: HjmLayout, state: PathState, t: int = 0) -> np.ndarray:
    """``B_{t,u}`` for ``u = t..T``."""
    y_t = state.value(t)
    return np.array([np.exp(log_bond(layout, y_t, t, u)) for u in range(t, layout.horizon + 1)])


def hjm_constraints(model: MsVarModel, layout: HjmLayout, path, state: PathState, t: int = 0) -> HjmConstraintSet:
    """No-arbitrage restrictions ``E_t[D_u] / D_t = B_{t,u}`` written as ``A theta = b``.

    With ``Phi_{t+i..t+m+1}`` the companion products, the kernel at ``t+m``
    moves ``y_{t+i}`` (``i >= m``) by ``J Phi_{t+i} ... Phi_{t+m+1} J'``, so
    ``a_{m,u} = e_1' sum_{i=m}^{u-t-1} J Phi_{t+i} ... Phi_{t+m+1} J'``.  The
    target collects the curve carry ``sum_{j=1}^{u-t-1} y_t[j]``, minus the
    real-measure drift of the summed short rates, plus half their variance.
    ``tests/test_term_structure.py`` confirms this reading by simulation.
    """
    _check_times(layout, state, t)
    path = check_path(model, path)
    T, n, p = layout.horizon, model.dim, model.lag_order
    if len(path) != T:
        raise ValidationError(f"regime path must cover 1..{T}", "path")
    comp = companion_form(model, path, state.psi)
    sigmas = covariance_path(model, path)
    jt = np.zeros((n * p, n))
    jt[:n] = np.eye(n)
    ystar = np.concatenate([state.value(t - m) for m in range(p)])
    h = T - t

    def prod(i, m):
        """``J Phi_{t+i} ... Phi_{t+m+1}`` (identity block when ``i == m``)."""
        out = np.eye(n * p)
        for j in range(m + 1, i + 1):
            out = comp[t + j - 1][1] @ out
        return out[:n]

    rows, targets = [], []
    for u in range(t + 2, T + 1):
        row = np.zeros(n * h)
        quad = drift = 0.0
        for m in range(1, u - t):
            a_m = sum(prod(i, m)[0] for i in range(m, u - t)) @ jt
            row[(m - 1) * n: m * n] = a_m
            quad += a_m @ sigmas[t + m - 1] @ a_m
            drift += a_m @ comp[t + m - 1][0][:n]
        carry = sum(prod(i, 0)[0] @ ystar for i in range(1, u - t))
        rows.append(row)
        targets.append(0.5 * quad - drift - carry + np.sum(state.value(t)[1: u - t]))
    return HjmConstraintSet(np.array(rows).reshape(-1, n * h), np.array(targets), t)


def hjm_kernel(model: MsVarModel, layout: HjmLayout, path, state: PathState, t: int = 0) -> np.ndarray:
    """Relative-entropy kernel ``theta_{t+1..T}`` (rows) on one regime path."""
    path = check_path(model, path)
    h = layout.horizon - t
    if h < 2:
        return np.zeros((h, model.dim))
    cons = hjm_constraints(model, layout, path, state, t)
    return entropy_kernel(covariance_path(model, path)[t:], cons.as_constraint())


def hjm_kernel_deltas(model: MsVarModel, layout: HjmLayout, path, state: PathState, t: int = 0) -> list:
    """The kernel as per-period blocks: a constant shift ``D_0 = theta e_1'`` after ``t``, none before."""
    theta = hjm_kernel(model, layout, path, state, t)
    deltas = zero_deltas(model, layout.horizon)
    for m, th in enumerate(theta, start=t + 1):
        deltas[m - 1][0] = np.outer(th, np.eye(model.exo_dim)[0])
    return deltas


@dataclass(frozen=True)
class HjmPathLaw:
    layout: HjmLayout
    system: StackedSystem
    law: GaussianLaw
    t: int
    y_t: np.ndarray

    def block(self, time: int) -> slice:
        if not self.t < time <= self.layout.horizon:
            raise IndexOutOfRange(f"time {time} outside {self.t + 1}..{self.layout.horizon}", "time")
        n = self.system.dim
        return slice((time - self.t - 1) * n, (time - self.t) * n)

    def rate_selector(self, u: int) -> np.ndarray:
        """Sums the short rates ``y_m[0]`` for ``m = t+1..u-1``."""
        g = np.zeros_like(self.law.mean)
        for m in range(self.t + 1, u):
            g[self.block(m).start] = 1.0
        return g

    def discount_exponent(self, u: int) -> float:
        """``a_{t,u}``: log of ``E_t[D_u] / D_t`` on this path."""
        g = self.rate_selector(u)
        return float(-self.y_t[0] - g @ self.law.mean + 0.5 * g @ self.law.cov @ g)

    def forward_mean(self, u: int) -> np.ndarray:
        return self.law.mean - self.law.cov @ self.rate_selector(u)


def hjm_path_law(model: MsVarModel, layout: HjmLayout, state: PathState, path, t: int = 0) -> HjmPathLaw:
    _check_times(layout, state, t)
    sys = build_stacked(model, path, state, hjm_kernel_deltas(model, layout, path, state, t))
    return HjmPathLaw(layout, sys, law_conditional_future(sys, t, state.observed[:t]), t, state.value(t))


def forward_rate_law(pl: HjmPathLaw, v: int, u1: int, u2: int, numeraire: int) -> tuple:
    """Mean and variance of ``f_{v,u1,u2}``, the average of ``y_v[m-v]`` over ``m = u1..u2-1``,
    under the ``(t, numeraire)`` forward measure."""
    if not pl.t < v <= u1 < u2 <= pl.layout.horizon:
        raise IndexOutOfRange(f"need {pl.t} < v <= u1 < u2 <= {pl.layout.horizon}", "forward")
    sel = np.zeros_like(pl.law.mean)
    blk = pl.block(v)
    sel[blk.start + u1 - v: blk.start + u2 - v] = 1.0 / (u2 - u1)
    mean = pl.forward_mean(numeraire)
    return float(sel @ mean), max(float(sel @ pl.law.cov @ sel), 0.0)


def _mix(model, layout, state, t, prefix, cap, fn):
    return float(sum(w * fn(hjm_path_law(model, layout, state, path, t))
                     for path, w in conditioning_paths(model, t, layout.horizon, prefix, cap)))


def zcb_price(model: MsVarModel, layout: HjmLayout, state: PathState, t: int, u: int, prefix=None,
              cap: int = DEFAULT_CAP) -> float:
    """Bond price from the kernel-implied expectation; equals the curve value by construction."""
    if u in (t, t + 1):
        return float(np.exp(log_bond(layout, state.value(t), t, u)))
    return _mix(model, layout, state, t, prefix, cap, lambda pl: np.exp(pl.discount_exponent(u)))


def price_forward_caplet(model: MsVarModel, layout: HjmLayout, state: PathState, v: int, u1: int, u2: int,
                         strike: float, t: int = 0, kind: str = "call", prefix=None, cap: int = DEFAULT_CAP) -> float:
    """Pays ``(f_{v,u1,u2} - strike)^+`` (``kind='put'``: the floorlet) at ``u2``."""
    f = {"call": truncated_call, "put": truncated_put}[kind]

    def one(pl):
        mu, var = forward_rate_law(pl, v, u1, u2, u2)
        return np.exp(pl.discount_exponent(u2)) * float(f(mu, np.sqrt(var), strike))
    return _mix(model, layout, state, t, prefix, cap, one)


def price_libor_caplet(model: MsVarModel, layout: HjmLayout, state: PathState, v: int, u1: int, u2: int,
                       strike: float, t: int = 0, kind: str = "call", prefix=None, cap: int = DEFAULT_CAP) -> float:
    """Pays ``(L - strike)^+`` at ``u2`` with ``L = (B_{v,u1} / B_{v,u2} - 1) / (u2 - u1)``."""
    dt = u2 - u1
    if not 1 + strike * dt > 0:
        raise ValidationError(f"strike must exceed {-1 / dt}", "strike")
    f = {"call": lognormal_call, "put": lognormal_put}[kind]

    def one(pl):
        mu, var = forward_rate_law(pl, v, u1, u2, u2)
        return np.exp(pl.discount_exponent(u2)) * f(dt * mu, dt * np.sqrt(var), 1 + strike * dt) / dt
    return _mix(model, layout, state, t, prefix, cap, one)


def price_zcb_option(model: MsVarModel, layout: HjmLayout, state: PathState, v: int, u: int, strike: float,
                     t: int = 0, kind: str = "call", prefix=None, cap: int = DEFAULT_CAP) -> float:
    """Pays ``(B_{v,u} - strike)^+`` (or the put) at ``v``."""
    if not strike > 0:
        raise ValidationError("strike must be positive", "strike")
    if not t < v < u:
        raise IndexOutOfRange(f"need {t} < v < u", "v")
    f = {"call": lognormal_call, "put": lognormal_put}[kind]

    def one(pl):
        mu, var = forward_rate_law(pl, v, v, u, v)
        return np.exp(pl.discount_exponent(v)) * f(-(u - v) * mu, (u - v) * np.sqrt(var), strike)
    return _mix(model, layout, state, t, prefix, cap, one)


def constraint_oracle(model: MsVarModel, layout: HjmLayout, path, state: PathState, t: int = 0) -> HjmConstraintSet:
    """Same restrictions assembled from the real-measure stacked system instead of companion products."""
    _check_times(layout, state, t)
    sys = build_stacked(model, path, state)
    law = law_conditional_future(sys, t, state.observed[:t])
    n, h = model.dim, layout.horizon - t
    cut = n * t
    inv = linalg.solve_triangular(sys.psi[cut:, cut:], np.eye(n * h), lower=True, unit_diagonal=True)
    rows, targets = [], []
    for u in range(t + 2, layout.horizon + 1):
        g = np.zeros(n * h)
        g[[(m - t - 1) * n for m in range(t + 1, u)]] = 1.0
        rows.append(g @ inv)
        targets.append(np.sum(state.value(t)[1: u - t]) - g @ law.mean + 0.5 * g @ law.cov @ g)
    return HjmConstraintSet(np.array(rows).reshape(-1, n * h), np.array(targets), t)
