"""Regime-path weights and draw averaging.

Prices conditional on a full regime path are exact Gaussian expectations;
these helpers mix them over future paths, over filtered past paths and over
parameter draws.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import AllZeroLikelihood, EnumerationCapExceeded, IndexOutOfRange, InsufficientDraws, ValidationError
from .model import MsVarModel, PathState, check_path
from .stacked import build_stacked, gaussian_log_likelihood_prefix

DEFAULT_CAP = 2 ** 20


@dataclass(frozen=True)
class PathWeights:
    """Probability weights over regime paths covering times ``start+1 .. stop``."""

    entries: dict
    start: int
    stop: int

    def total(self) -> float:
        return float(sum(self.entries.values()))

    def items(self):
        return self.entries.items()


def _enumerate(n_regimes: int, length: int, cap: int):
    if n_regimes ** length > cap:
        raise EnumerationCapExceeded(f"{n_regimes}^{length} paths exceed the cap of {cap}")
    return itertools.product(range(n_regimes), repeat=length)


def future_path_weights(model: MsVarModel, current: int | None, t: int, horizon: int,
                        cap: int = DEFAULT_CAP) -> PathWeights:
    """Weights of ``(s_{t+1}, ..., s_T)`` given ``s_t = current``.

    At ``t == 0`` ``current`` is ignored and the first step uses the initial
    regime distribution.
    """
    if not 0 <= t <= horizon:
        raise IndexOutOfRange(f"t={t} outside 0..{horizon}", "t")
    if t > 0:
        check_path(model, [current])
    P, init = model.transition, model.initial_dist
    entries = {}
    for fut in _enumerate(model.n_regimes, horizon - t, cap):
        prev = current
        w = 1.0
        for m, s in enumerate(fut):
            w *= init[s] if (t == 0 and m == 0) else P[prev, s]
            prev = s
        entries[fut] = w
    return PathWeights(entries, t, horizon)


def filtered_path_weights(model: MsVarModel, state: PathState, t: int, deltas_for: Callable | None = None,
                          cap: int = DEFAULT_CAP) -> PathWeights:
    """Posterior weights of ``(s_1, ..., s_t)`` given the observed prefix.

    ``deltas_for(prefix)`` may supply the kernel blocks used in the prefix
    density; by default the prefix is scored under the real measure.
    """
    if not 1 <= t <= state.t:
        raise IndexOutOfRange(f"t={t} needs 1..{state.t} observed periods", "t")
    observed = state.observed[:t]
    paths, logw = [], []
    for prefix in _enumerate(model.n_regimes, t, cap):
        deltas = None if deltas_for is None else deltas_for(prefix)
        sys = build_stacked(model, prefix, state, deltas)
        prior = model.initial_dist[prefix[0]] * np.prod([model.transition[a, b] for a, b in zip(prefix, prefix[1:])])
        if prior <= 0:
            continue
        paths.append(prefix)
        logw.append(gaussian_log_likelihood_prefix(sys, observed) + np.log(prior))
    logw = np.array(logw)
    if not logw.size or not np.isfinite(logw).any():
        raise AllZeroLikelihood("every regime path gives zero likelihood to the observed data")
    w = np.exp(logw - logsumexp(logw))
    return PathWeights(dict(zip(paths, w / w.sum())), 0, t)


def conditioning_paths(model: MsVarModel, t: int, horizon: int, prefix=None, cap: int = DEFAULT_CAP) -> list:
    """Full regime paths ``(s_1..s_T)`` with their weights given time-``t`` information.

    ``prefix`` is either a known tuple ``(s_1..s_t)`` or :class:`PathWeights`
    over such tuples (a filtered mixture).  ``t == 0`` needs no prefix.
    """
    if prefix is None or (not isinstance(prefix, PathWeights) and len(prefix) == 0):
        if t != 0:
            raise ValidationError("a regime prefix is required when t > 0", "condition")
        prefixes = {(): 1.0}
    elif isinstance(prefix, PathWeights):
        prefixes = prefix.entries
    else:
        prefixes = {tuple(check_path(model, prefix)): 1.0}
    out = []
    for pre, pw in prefixes.items():
        if len(pre) != t:
            raise ValidationError(f"regime prefix must have length {t}", "condition")
        fut = future_path_weights(model, pre[-1] if pre else None, t, horizon, cap)
        for tail, fw in fut.items():
            if pw * fw > 0:
                out.append((pre + tail, pw * fw))
    return out


@dataclass(frozen=True)
class ParameterDraw:
    model: MsVarModel
    weight: float = 1.0

    def __post_init__(self):
        if not self.weight > 0:
            raise ValidationError("draw weight must be positive", "weight")


def rao_blackwell_price(draws: Sequence[ParameterDraw], inner: Callable) -> dict:
    """Weighted mean of exact conditional prices over parameter draws.

    The standard error uses the self-normalised weighted variance with a
    small-sample correction, so equal weights give the usual ``s / sqrt(n)``.
    """
    if len(draws) < 2:
        raise InsufficientDraws(f"need at least 2 draws, got {len(draws)}")
    vals = np.array([float(inner(d)) for d in draws])
    w = np.array([d.weight for d in draws], dtype=float)
    w = w / w.sum()
    est = float(w @ vals)
    n = len(vals)
    var = float(np.sum(w ** 2 * (vals - est) ** 2) * n / (n - 1))
    return {"estimate": est, "standard_error": float(np.sqrt(var))}
