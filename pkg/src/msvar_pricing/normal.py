"""Bachelier-type calls and puts on weighted price sums in the normal market."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import IndexOutOfRange, ValidationError
from .girsanov import normal_kernel_deltas
from .markets import NormalLayout
from .model import MsVarModel, PathState
from .regimes import DEFAULT_CAP, conditioning_paths
from .stacked import build_stacked, law_conditional_future


@dataclass(frozen=True)
class WeightScheme:
    """Per-period weights ``w_1..w_T`` on the asset prices; row ``m-1`` is ``w_m``."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.atleast_2d(np.array(self.weights, dtype=float))
        if not np.any(w != 0):
            raise ValidationError("at least one weight must be nonzero", "weights")
        object.__setattr__(self, "weights", w)

    @property
    def horizon(self) -> int:
        return self.weights.shape[0]


def arithmetic_weight_builder(kind: str, horizon: int, n_x: int, asset: int | None = None,
                              basket=None) -> WeightScheme:
    """``european`` and ``asian`` take an asset index; ``basket`` takes a weight vector."""
    w = np.zeros((horizon, n_x))
    if kind in ("european", "asian"):
        if asset is None or not 0 <= asset < n_x:
            raise IndexOutOfRange(f"asset {asset} outside 0..{n_x - 1}", "asset")
        if kind == "european":
            w[-1, asset] = 1.0
        else:
            w[:, asset] = 1.0 / horizon
    elif kind == "basket":
        v = np.asarray(basket, dtype=float)
        if v.shape != (n_x,):
            raise IndexOutOfRange(f"basket needs {n_x} weights", "basket")
        w[-1] = v
    else:
        raise ValidationError(f"unknown weight scheme {kind!r}", "kind")
    return WeightScheme(w)


def truncated_call(mu, sigma, strike):
    """``E[(X - K)^+]`` for ``X ~ N(mu, sigma^2)``; ``sigma = 0`` gives the intrinsic value."""
    mu, sigma, strike = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (mu, sigma, strike)))
    out = np.array(np.maximum(mu - strike, 0.0))
    pos = sigma > 0
    d = (mu[pos] - strike[pos]) / sigma[pos]
    out[pos] = sigma[pos] * (norm.pdf(d) + d * norm.cdf(d))
    return out[()] if out.ndim == 0 else out


def truncated_put(mu, sigma, strike):
    """``E[(K - X)^+]``, the mirror of :func:`truncated_call`."""
    return truncated_call(-np.asarray(mu, dtype=float), sigma, -np.asarray(strike, dtype=float))


def weighted_price_law(model: MsVarModel, layout: NormalLayout, scheme: WeightScheme, state: PathState,
                       path, t: int) -> tuple:
    """Mean and variance of ``sum_m w_m' x_m`` given the first ``t`` observations on one path."""
    T, nz = scheme.horizon, layout.n_z
    sys = build_stacked(model, path, state, normal_kernel_deltas(model, path, layout))
    w = scheme.weights
    known = float(np.sum(w[:t] * state.observed[:t, nz:])) if t else 0.0
    if t == T:
        return known, 0.0
    law = law_conditional_future(sys, t, state.observed[:t])
    sel = np.zeros((T - t) * model.dim)
    for m in range(t, T):
        sel[(m - t) * model.dim + nz:(m - t + 1) * model.dim] = w[m]
    var = float(sel @ law.cov @ sel)
    return known + float(sel @ law.mean), max(var, 0.0)


def normal_option_terms(model: MsVarModel, layout: NormalLayout, scheme: WeightScheme, state: PathState,
                        t: int = 0, prefix=None, cap: int = DEFAULT_CAP) -> list:
    """``(path, weight, mean, sd)`` for every regime path in the mixture."""
    T = scheme.horizon
    if not 0 <= t < T:
        raise IndexOutOfRange(f"t={t} outside 0..{T - 1}", "t")
    out = []
    for path, w in conditioning_paths(model, t, T, prefix, cap):
        mu, var = weighted_price_law(model, layout, scheme, state, path, t)
        out.append((path, w, mu, np.sqrt(var)))
    return out


def price_normal_option(model: MsVarModel, layout: NormalLayout, scheme: WeightScheme, strike: float,
                        state: PathState, t: int = 0, kind: str = "call", prefix=None,
                        cap: int = DEFAULT_CAP) -> float:
    """Time-``t`` price of a call or put on the weighted price, mixed over regime paths."""
    if kind not in ("call", "put"):
        raise ValidationError(f"kind must be call or put, got {kind!r}", "kind")
    f = truncated_call if kind == "call" else truncated_put
    terms = normal_option_terms(model, layout, scheme, state, t, prefix, cap)
    value = sum(w * float(f(mu, sd, strike)) for _, w, mu, sd in terms)
    return value / (1 + layout.rate) ** (scheme.horizon - t)
