"""Domestic-foreign log-normal market: bonds, forward and asset measures,
exchange options and the general European call.

Per-path quantities are exact Gaussian expressions; prices mix them over
regime paths with :func:`msvar_pricing.regimes.conditioning_paths`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.stats import norm

from .errors import IndexOutOfRange, McBudgetExceeded, MissingStrike, ValidationError
from .girsanov import lognormal_kernel_deltas
from .markets import FxLayout
from .model import MsVarModel, PathState, substream
from .regimes import DEFAULT_CAP, conditioning_paths
from .stacked import GaussianLaw, StackedSystem, build_stacked, law_conditional_future

MAX_EVENT_SAMPLES = 20_000_000


@dataclass(frozen=True)
class FxPathLaw:
    """Pricing-measure law of ``(y_{t+1}, ..., y_T)`` on one regime path."""

    layout: FxLayout
    system: StackedSystem
    law: GaussianLaw
    t: int
    y_t: np.ndarray

    @property
    def horizon(self) -> int:
        return self.system.horizon

    @property
    def dim(self) -> int:
        return self.system.dim

    def block(self, time: int) -> slice:
        """Slice of ``y_time`` inside the future vector (``t < time <= T``)."""
        if not self.t < time <= self.horizon:
            raise IndexOutOfRange(f"time {time} outside {self.t + 1}..{self.horizon}", "time")
        n = self.dim
        return slice((time - self.t - 1) * n, (time - self.t) * n)

    def shift(self, v: np.ndarray) -> np.ndarray:
        """``Psi_22^{-1} Sigma^c v`` for a future-sized vector ``v``."""
        cut = self.t * self.dim
        sig_c = linalg.block_diag(*self.system.sigmas[self.t:])
        return linalg.solve_triangular(self.system.psi[cut:, cut:], sig_c @ v, lower=True, unit_diagonal=True)


def fx_path_law(model: MsVarModel, layout: FxLayout, state: PathState, path, t: int = 0) -> FxPathLaw:
    sys = build_stacked(model, path, state, lognormal_kernel_deltas(model, path, layout))
    law = law_conditional_future(sys, t, state.observed[:t])
    return FxPathLaw(layout, sys, law, t, state.value(t))


def rate_path_selector(layout: FxLayout, dim: int, horizon: int, t: int, u: int, country: int | None = None):
    """Selector ``gamma`` with ``sum_{m=t+1}^u r_m = r_{t+1} + gamma' y_future``."""
    if not 0 <= t < u <= horizon:
        raise IndexOutOfRange(f"need 0 <= t < u <= {horizon}, got t={t}, u={u}", "u")
    g = np.zeros((horizon - t) * dim)
    c = layout.rate_coord(country)
    for time in range(t + 1, u):
        g[(time - t - 1) * dim + c] = 1.0
    return g


def bond_exponent(pl: FxPathLaw, u: int, mean=None) -> float:
    """Log price at ``t`` of the domestic zero-coupon bond maturing at ``u`` on this path."""
    g = rate_path_selector(pl.layout, pl.dim, pl.horizon, pl.t, u)
    mu = pl.law.mean if mean is None else mean
    return float(-pl.y_t[0] - g @ mu + 0.5 * g @ pl.law.cov @ g)


def forward_measure_mean(pl: FxPathLaw, u: int) -> np.ndarray:
    """Mean of the future vector under the ``(t, u)`` domestic forward measure."""
    g = rate_path_selector(pl.layout, pl.dim, pl.horizon, pl.t, u)
    return pl.law.mean - pl.law.cov @ g


def _mix(model, layout, state, t, horizon, prefix, cap, fn):
    return sum(w * fn(fx_path_law(model, layout, state, path, t))
               for path, w in conditioning_paths(model, t, horizon, prefix, cap))


def zcb_domestic(model: MsVarModel, layout: FxLayout, state: PathState, t: int, u: int, prefix=None,
                 cap: int = DEFAULT_CAP) -> float:
    if u == t + 1:
        return float(np.exp(-state.value(t)[0]))
    return _mix(model, layout, state, t, state.horizon, prefix, cap, lambda pl: np.exp(bond_exponent(pl, u)))


def zcb_foreign(model: MsVarModel, layout: FxLayout, state: PathState, country: int, t: int, u: int,
                prefix=None, cap: int = DEFAULT_CAP) -> float:
    """Foreign-currency bond price: the foreign discount under the currency measure."""
    c = layout.rate_coord(country)
    if u == t + 1:
        return float(np.exp(-state.value(t)[c]))
    return _mix(model, layout, state, t, state.horizon, prefix, cap,
                lambda pl: np.exp(currency_terms(pl, u, country)[0]))


def margrabe_psi(mu1: float, mu2: float, var1: float, var2: float, cov12: float) -> float:
    """``E[(e^{X1} - e^{X2})^+]`` for a bivariate normal ``(X1, X2)``."""
    f1 = np.exp(mu1 + 0.5 * var1)
    f2 = np.exp(mu2 + 0.5 * var2)
    s2 = var1 - 2 * cov12 + var2
    if s2 <= 1e-300:
        # the log ratio is deterministic; each leg keeps its own convexity
        return float(max(f1 - f2, 0.0))
    s = np.sqrt(s2)
    return float(f1 * norm.cdf((mu1 - mu2 + var1 - cov12) / s) - f2 * norm.cdf((mu1 - mu2 + cov12 - var2) / s))


def lognormal_call(mu: float, sigma: float, strike: float) -> float:
    """``E[(e^X - K)^+]`` for ``X ~ N(mu, sigma^2)``, ``K > 0``."""
    if sigma <= 0:
        return float(max(np.exp(mu) - strike, 0.0))
    d1 = (mu + sigma ** 2 - np.log(strike)) / sigma
    return float(np.exp(mu + 0.5 * sigma ** 2) * norm.cdf(d1) - strike * norm.cdf(d1 - sigma))


def lognormal_put(mu: float, sigma: float, strike: float) -> float:
    """``E[(K - e^X)^+]`` for ``X ~ N(mu, sigma^2)``, ``K > 0``."""
    if sigma <= 0:
        return float(max(strike - np.exp(mu), 0.0))
    d1 = (mu + sigma ** 2 - np.log(strike)) / sigma
    return float(strike * norm.cdf(-(d1 - sigma)) - np.exp(mu + 0.5 * sigma ** 2) * norm.cdf(-d1))


@dataclass(frozen=True)
class ExchangeSpec:
    """Payoff ``(w0 exp(sum_m w_m' x~_m) - w0_hat exp(sum_m w_hat_m' x~_m))^+`` paid at ``maturity``.

    ``weights`` and ``weights_hat`` have one row per period ``1..T`` over the
    log-price block; a row ``e_a' R2`` turns coordinate ``a`` into the log
    domestic-currency price.
    """

    w0: float
    w0_hat: float
    weights: np.ndarray
    weights_hat: np.ndarray
    maturity: int

    def __post_init__(self):
        if not (self.w0 > 0 and self.w0_hat > 0):
            raise ValidationError("exchange prefactors must be positive", "exchange")
        w = np.atleast_2d(np.array(self.weights, dtype=float))
        wh = np.atleast_2d(np.array(self.weights_hat, dtype=float))
        if w.shape != wh.shape:
            raise ValidationError("both legs need weight tables of one shape", "exchange")
        if np.any(w[self.maturity:] != 0) or np.any(wh[self.maturity:] != 0):
            raise ValidationError("weights after the maturity are not allowed", "exchange")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "weights_hat", wh)

    def swapped(self) -> "ExchangeSpec":
        return ExchangeSpec(self.w0_hat, self.w0, self.weights_hat, self.weights, self.maturity)


def special_case_weights(layout: FxLayout, case: int, horizon: int, maturity: int, first, second=None,
                         units=(1.0, 1.0), strike: float | None = None, put: bool = False) -> ExchangeSpec:
    """Exchange contract for one of the nine standard cases.

    ``first`` and ``second`` name the legs: a domestic asset index, a
    ``(country, asset)`` pair for foreign assets or a country index for
    currencies.  Cases 1-3 are calls (puts with ``put=True``) on ``first``
    struck at ``strike``; cases 4-9 exchange ``second`` into ``first``,
    and ``put=True`` reverses the exchange.

    ====  =====================  =====================
    case  first                  second
    ====  =====================  =====================
    1     domestic               strike
    2     foreign (i, k)         strike
    3     currency               strike
    4     domestic               domestic
    5     domestic               foreign (j, k)
    6     domestic               currency
    7     foreign (i, r)         foreign (j, k)
    8     foreign (i, k)         currency
    9     currency               currency
    ====  =====================  =====================
    """
    kinds = {1: ("d", None), 2: ("f", None), 3: ("q", None), 4: ("d", "d"), 5: ("d", "f"),
             6: ("d", "q"), 7: ("f", "f"), 8: ("f", "q"), 9: ("q", "q")}
    if case not in kinds:
        raise IndexOutOfRange(f"case {case} outside 1..9", "case")
    if not 1 <= maturity <= horizon:
        raise IndexOutOfRange(f"maturity {maturity} outside 1..{horizon}", "maturity")

    def coord(kind, ref):
        if kind == "d":
            return layout.domestic(int(ref))
        if kind == "f":
            i, k = ref
            return layout.foreign(int(i), int(k))
        return layout.currency(int(ref))

    r2 = layout.r2
    k1, k2 = kinds[case]
    w = np.zeros((horizon, layout.n_x))
    wh = np.zeros((horizon, layout.n_x))
    w[maturity - 1] = r2[coord(k1, first)]
    if k2 is None:
        if strike is None:
            raise MissingStrike(f"case {case} needs a strike", "strike")
        spec = ExchangeSpec(units[0], float(strike), w, wh, maturity)
    else:
        if second is None:
            raise IndexOutOfRange(f"case {case} needs a second leg", "second")
        wh[maturity - 1] = r2[coord(k2, second)]
        spec = ExchangeSpec(units[0], units[1], w, wh, maturity)
    return spec.swapped() if put else spec


def _log_leg(pl: FxPathLaw, w0: float, weights: np.ndarray, state: PathState) -> tuple:
    """Known part and future selector of ``log w0 + sum_m w_m' x~_m``."""
    nz = pl.layout.n_z
    const = np.log(w0)
    for m in range(1, pl.t + 1):
        const += weights[m - 1] @ state.observed[m - 1, nz:]
    sel = np.zeros_like(pl.law.mean)
    for m in range(pl.t + 1, weights.shape[0] + 1):
        sel[pl.block(m)][nz:] = weights[m - 1]
    return const, sel


def exchange_path_value(pl: FxPathLaw, ex: ExchangeSpec, state: PathState) -> float:
    """Time-``t`` value of the exchange option on one regime path."""
    u = ex.maturity
    if not pl.t < u <= pl.horizon:
        raise IndexOutOfRange(f"maturity {u} must lie in {pl.t + 1}..{pl.horizon}", "maturity")
    mean = forward_measure_mean(pl, u)
    c1, s1 = _log_leg(pl, ex.w0, ex.weights, state)
    c2, s2 = _log_leg(pl, ex.w0_hat, ex.weights_hat, state)
    cov = pl.law.cov
    psi = margrabe_psi(c1 + s1 @ mean, c2 + s2 @ mean, s1 @ cov @ s1, s2 @ cov @ s2, s1 @ cov @ s2)
    return float(np.exp(bond_exponent(pl, u)) * psi)


def price_exchange_option(model: MsVarModel, layout: FxLayout, state: PathState, ex: ExchangeSpec, t: int = 0,
                          prefix=None, cap: int = DEFAULT_CAP) -> float:
    return _mix(model, layout, state, t, state.horizon, prefix, cap, lambda pl: exchange_path_value(pl, ex, state))


def measure_shift_mean(pl: FxPathLaw, u: int, asset: int) -> np.ndarray:
    """Mean of the future vector under the measure using traded price ``asset`` over ``t..u``."""
    if not pl.t < u <= pl.horizon:
        raise IndexOutOfRange(f"u={u} must lie in {pl.t + 1}..{pl.horizon}", "u")
    lay = pl.layout
    v = np.zeros_like(pl.law.mean)
    load = lay.r_tilde.T[:, asset]
    for m in range(pl.t + 1, u + 1):
        v[pl.block(m)] = load
    return pl.law.mean + pl.shift(v)


def currency_terms(pl: FxPathLaw, u: int, country: int) -> tuple:
    """``(a~, mu~)``: log foreign-bond factor and mean under the currency measure."""
    lay = pl.layout
    mu_q = measure_shift_mean(pl, u, lay.currency(country))
    g = rate_path_selector(lay, pl.dim, pl.horizon, pl.t, u, country)
    a = float(-pl.y_t[lay.rate_coord(country)] - g @ mu_q + 0.5 * g @ pl.law.cov @ g)
    return a, mu_q - pl.law.cov @ g


def _sqrt_cov(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(cov)
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def foreign_discount_known(layout: FxLayout, state: PathState, t: int, country: int) -> float:
    """``D^f_{i,t}``: product of one-period foreign discount factors up to ``t``."""
    c = layout.rate_coord(country)
    return float(np.exp(-sum(state.value(m - 1)[c] for m in range(1, t + 1))))


def currency_discount_expectation(pl: FxPathLaw, state: PathState, country: int, u: int, event=None,
                                  n_samples: int = 100_000, seed: int = 0) -> dict:
    """``D^f_{i,t} exp(a~) N(A; mu~, Sigma)`` with ``N(A)`` estimated by sampling.

    ``event`` maps an array of future vectors to booleans; ``None`` is the
    whole space, for which the value is exact.
    """
    a, mu = currency_terms(pl, u, country)
    scale = foreign_discount_known(pl.layout, state, pl.t, country) * np.exp(a)
    if event is None:
        return {"estimate": float(scale), "se": 0.0}
    z = substream(seed, 2).standard_normal((n_samples, mu.size))
    hit = np.asarray(event(mu + z @ _sqrt_cov(pl.law.cov).T), dtype=float)
    return {"estimate": float(scale * hit.mean()), "se": float(scale * hit.std(ddof=1) / np.sqrt(n_samples))}


@dataclass(frozen=True)
class GeneralCall:
    """Call on a discounted basket of domestic-currency prices.

    ``units[u-1, a]`` holds units of traded price ``a`` received at ``u``;
    ``strike`` is paid at time ``strike_time`` (``>= t``).
    """

    units: np.ndarray
    strike: float
    strike_time: int

    def __post_init__(self):
        object.__setattr__(self, "units", np.atleast_2d(np.array(self.units, dtype=float)))


def _current_prices(layout: FxLayout, y_t: np.ndarray) -> np.ndarray:
    """Domestic-currency prices at ``t`` of every traded coordinate."""
    return np.exp(layout.r2 @ y_t[layout.n_z:])


def general_call_path_terms(pl: FxPathLaw, state: PathState, contract: GeneralCall) -> list:
    """``(coefficient, mean)`` pairs: the path value is ``sum coef * N(A; mean, Sigma)``."""
    lay, t = pl.layout, pl.t
    price_t = _current_prices(lay, pl.y_t)
    terms = []
    for u in range(t + 1, pl.horizon + 1):
        for a in np.nonzero(contract.units[u - 1])[0]:
            w = contract.units[u - 1, a]
            if a >= lay.n_d + lay.n_f_total:
                country = a - lay.n_d - lay.n_f_total
                atil, mu = currency_terms(pl, u, country)
                terms.append((w * price_t[a] * np.exp(atil), mu))
            else:
                terms.append((w * price_t[a], measure_shift_mean(pl, u, a)))
    v = contract.strike_time
    if v == t:
        terms.append((-contract.strike, pl.law.mean))
    else:
        terms.append((-contract.strike * np.exp(bond_exponent(pl, v)), forward_measure_mean(pl, v)))
    return terms


def general_call_event(pl: FxPathLaw, contract: GeneralCall):
    """Indicator of the exercise event as a function of future-vector samples."""
    lay, t = pl.layout, pl.t
    r_next = pl.y_t[0]
    rows, wts = [], []
    for u in range(t + 1, pl.horizon + 1):
        g = rate_path_selector(lay, pl.dim, pl.horizon, t, u)
        for a in np.nonzero(contract.units[u - 1])[0]:
            sel = np.zeros_like(pl.law.mean)
            sel[pl.block(u)][lay.n_z:] = lay.r2[a]
            rows.append(sel - g)
            wts.append(contract.units[u - 1, a])
    v = contract.strike_time
    g_v = rate_path_selector(lay, pl.dim, pl.horizon, t, v) if v > t else np.zeros_like(pl.law.mean)
    proj = np.array(rows) if rows else np.zeros((0, pl.law.mean.size))
    wts = np.array(wts)
    k_off = -r_next if v > t else 0.0

    def event(samples):
        lhs = np.exp(samples @ proj.T - r_next) @ wts if proj.shape[0] else np.zeros(samples.shape[0])
        rhs = contract.strike * np.exp(k_off - samples @ g_v)
        return lhs >= rhs
    return event


def price_general_call(model: MsVarModel, layout: FxLayout, state: PathState, contract: GeneralCall, t: int = 0,
                       prefix=None, n_samples: int = 200_000, seed: int = 0, cap: int = DEFAULT_CAP) -> dict:
    """Price with standard error; event probabilities share one sample set per path."""
    if not t <= contract.strike_time <= state.horizon:
        raise IndexOutOfRange(f"strike time must lie in {t}..{state.horizon}", "strike_time")
    paths = conditioning_paths(model, t, state.horizon, prefix, cap)
    if n_samples * len(paths) > MAX_EVENT_SAMPLES:
        raise McBudgetExceeded(f"{n_samples} samples on {len(paths)} paths exceed the budget")
    est, var = 0.0, 0.0
    for idx, (path, w) in enumerate(paths):
        pl = fx_path_law(model, layout, state, path, t)
        event = general_call_event(pl, contract)
        z = substream(seed, 3, idx).standard_normal((n_samples, pl.law.mean.size)) @ _sqrt_cov(pl.law.cov).T
        h = np.zeros(n_samples)
        for coef, mu in general_call_path_terms(pl, state, contract):
            h += coef * event(mu + z)
        est += w * h.mean()
        var += w ** 2 * h.var(ddof=1) / n_samples
    return {"estimate": float(est), "se": float(np.sqrt(var))}
