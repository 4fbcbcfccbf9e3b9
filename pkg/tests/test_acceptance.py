"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line in the run summary.

Monte Carlo checks use 10^6 paths with fixed seeds, so every run reproduces
the same verdicts.
"""
import json
import os
import subprocess
import sys
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy import linalg, stats

from msvar_pricing.cli import main
from msvar_pricing.girsanov import KernelConstraint, block_constraint, entropy, entropy_kernel, variance_kernel
from msvar_pricing.lognormal import (
    GeneralCall,
    lognormal_call,
    lognormal_put,
    margrabe_psi,
    price_exchange_option,
    price_general_call,
    special_case_weights,
    zcb_domestic,
    zcb_foreign,
)
from msvar_pricing.markets import HjmLayout, NormalLayout
from msvar_pricing.model import ConstantCovariance, MsVarModel, PathState, substream
from msvar_pricing.normal import arithmetic_weight_builder, price_normal_option, truncated_call, truncated_put
from msvar_pricing.oracle import (
    linear_kernel,
    lognormal_kernel,
    mc_price,
    normal_kernel,
    quad_expectation_1d,
)
from msvar_pricing.regimes import (
    ParameterDraw,
    conditioning_paths,
    filtered_path_weights,
    future_path_weights,
    rao_blackwell_price,
)
from msvar_pricing.stacked import build_stacked, law_conditional_future, law_full
from msvar_pricing.term_structure import (
    bond_curve,
    forward_rate_law,
    hjm_kernel_deltas,
    hjm_path_law,
    price_forward_caplet,
    price_libor_caplet,
    price_zcb_option,
    zcb_price,
)

from conftest import at_start, random_model, random_spd, record
from golden_commands import COMMANDS, GOLDEN, resolve

PATHS = 1_000_000


def _fx_discount(st0, y, u, coord=0):
    return np.exp(-st0.y_init[0, coord] - y[:, : u - 1, coord].sum(axis=1))


def _hjm_discount(st0, y, u):
    return np.exp(-st0.y_init[0, 0] - y[:, : u - 1, 0].sum(axis=1))


def _within(cf, res, k, extra_se=0.0):
    se = np.sqrt(np.asarray(res["se"]) ** 2 + np.asarray(extra_se) ** 2)
    z = np.abs(np.asarray(cf) - np.asarray(res["estimate"])) / se
    return bool(np.all(z < k)), float(np.max(z))


# ---------------------------------------------------------------- 1, 2


def test_kernel_correctness():
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    worst_fit, worst_gap = 0.0, np.inf
    for _ in range(25):
        n, T = int(rng.integers(1, 4)), int(rng.integers(1, 5))
        q = int(rng.integers(1, n * T + 1))
        sig = [random_spd(rng, n) for _ in range(T)]
        c = KernelConstraint(rng.standard_normal((q, n * T)), rng.standard_normal(q))
        th = entropy_kernel(sig, c)
        worst_fit = max(worst_fit, float(np.max(np.abs(c.a @ th.ravel() - c.b))))
        base = entropy(th, sig)
        null = linalg.null_space(c.a)
        if null.shape[1] == 0:
            continue
        for _ in range(100):
            pert = th + (null @ rng.standard_normal(null.shape[1])).reshape(th.shape)
            worst_gap = min(worst_gap, entropy(pert, sig) - base)
    elapsed = time.perf_counter() - start
    ok = worst_fit < 1e-10 and worst_gap >= -1e-12 and elapsed < 1.0
    record(1, ok, f"max |A theta - b| = {worst_fit:.1e}, min objective gain = {worst_gap:.1e}, {elapsed:.2f}s")
    assert ok


def test_variance_equals_entropy_for_block_constraints():
    start = time.perf_counter()
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(25):
        n, T = int(rng.integers(2, 5)), int(rng.integers(1, 6))
        q = int(rng.integers(1, n + 1))
        sig = [random_spd(rng, n) for _ in range(T)]
        m2 = np.eye(n)[n - q:]
        c = block_constraint(m2, [rng.standard_normal(q) for _ in range(T)])
        worst = max(worst, float(np.max(np.abs(variance_kernel(sig, c) - entropy_kernel(sig, c)))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed < 5.0
    record(2, ok, f"max |theta_var - theta_re| = {worst:.1e}, {elapsed:.2f}s")
    assert ok


# ---------------------------------------------------------------- 3, 4


def _normal_run(b, n_paths):
    st0, lay = at_start(b), b.market
    asian = arithmetic_weight_builder("asian", 5, 2, asset=0)
    basket = arithmetic_weight_builder("basket", 5, 2, basket=[0.5, 1.0])
    disc = (1 + lay.rate) ** -np.arange(1, 6)

    def pay(y, p):
        x = y[:, :, lay.n_z:]
        cols = [x[:, u - 1, a] * disc[u - 1] for u in range(1, 6) for a in range(lay.n_x)]
        cols.append(np.maximum(np.einsum("ntk,tk->n", x, asian.weights) - 10.5, 0) * disc[4])
        cols.append(np.maximum(10.0 - np.einsum("ntk,tk->n", x, basket.weights), 0) * disc[4])
        return np.stack(cols, axis=1)
    res = mc_price(b.model, st0, conditioning_paths(b.model, 0, 5), lambda p: normal_kernel(b.model, lay),
                   pay, n_paths, seed=31)
    mart = np.repeat(st0.y_init[0, lay.n_z:][None], 5, axis=0).ravel()
    closed = [price_normal_option(b.model, lay, asian, 10.5, st0),
              price_normal_option(b.model, lay, basket, 10.0, st0, kind="put")]
    return res, mart, np.array(closed)


MARGRABE = [
    (1, 0, None, (1, 1), 100.0),
    (2, (0, 0), None, (1, 1), 60.0),
    (3, 0, None, (1, 1), 1.2),
    (4, 0, 0, (1, 0.95), None),
    (5, 0, (0, 0), (1, 1.6), None),
    (6, 0, 0, (1, 80), None),
    (7, (0, 0), (0, 0), (1, 0.95), None),
    (8, (0, 0), 0, (1, 45), None),
    (9, 0, 0, (1, 0.95), None),
]


def _general_contract():
    doc = json.loads((GOLDEN / "general_contract.json").read_text())
    return GeneralCall(np.array(doc["units"]), doc["strike"], doc["strike_time"])


def _fx_run(b, n_paths):
    st0, lay = at_start(b), b.market
    y0 = st0.y_init[0]
    z = lay.n_z
    specs = [special_case_weights(lay, c, 5, 4, f, s, u, k) for c, f, s, u, k in MARGRABE]
    gc = _general_contract()
    r2 = lay.r2
    q = z + lay.currency(0)
    rf = lay.rate_coord(0)

    def pay(y, p):
        x = y[:, :, z:]
        cols = []
        for u in range(1, 6):
            d = _fx_discount(st0, y, u)
            cols.append(d * np.exp(y[:, u - 1, z + lay.domestic(0)]))
            cols.append(d * np.exp(y[:, u - 1, z + lay.foreign(0, 0)] + y[:, u - 1, q]))
            cols.append(d / _fx_discount(st0, y, u, rf) * np.exp(y[:, u - 1, q]))
        d4 = _fx_discount(st0, y, 4)
        for ex in specs:
            l1 = np.log(ex.w0) + np.einsum("ntk,tk->n", x, ex.weights)
            l2 = np.log(ex.w0_hat) + np.einsum("ntk,tk->n", x, ex.weights_hat)
            cols.append(d4 * np.maximum(np.exp(l1) - np.exp(l2), 0))
        basket = sum(gc.units[u - 1, a] * _fx_discount(st0, y, u) * np.exp(x[:, u - 1] @ r2[a])
                     for u in range(1, 6) for a in np.nonzero(gc.units[u - 1])[0])
        cols.append(np.maximum(basket - gc.strike * _fx_discount(st0, y, gc.strike_time), 0))
        cols.append(_fx_discount(st0, y, 5))
        cols.append(d4 * np.exp(y[:, 3, q] - y0[q]))
        return np.stack(cols, axis=1)
    res = mc_price(b.model, st0, conditioning_paths(b.model, 0, 5), lambda p: lognormal_kernel(b.model, lay),
                   pay, n_paths, seed=32)
    prices = np.exp(r2 @ y0[z:])
    mart = np.tile([prices[lay.domestic(0)], prices[lay.foreign(0, 0)], prices[lay.currency(0)]], 5)
    general = price_general_call(b.model, lay, st0, gc, n_samples=400_000, seed=5)
    closed = [price_exchange_option(b.model, lay, st0, ex) for ex in specs]
    closed += [general["estimate"], zcb_domestic(b.model, lay, st0, 0, 5), zcb_foreign(b.model, lay, st0, 0, 0, 4)]
    extra = np.zeros(len(closed))
    extra[len(specs)] = general["se"]
    return res, mart, np.array(closed), extra


def _hjm_run(b, n_paths):
    st0 = at_start(b)
    v, u1, u2, k = 2, 3, 5, 0.025
    f = lambda y: y[:, v - 1, u1 - v: u2 - v].mean(axis=1)

    def pay(y, p):
        lib = np.expm1((u2 - u1) * f(y)) / (u2 - u1)
        bond = np.exp(-y[:, 1, :3].sum(axis=1))
        d2, du = _hjm_discount(st0, y, 2), _hjm_discount(st0, y, u2)
        return np.stack([_hjm_discount(st0, y, u) for u in range(2, 6)] + [
            du * np.maximum(f(y) - k, 0), du * np.maximum(k - f(y), 0),
            du * np.maximum(lib - k, 0), du * np.maximum(k - lib, 0),
            d2 * np.maximum(bond - 0.93, 0), d2 * np.maximum(0.93 - bond, 0)], axis=1)
    kern = lambda p: linear_kernel(hjm_kernel_deltas(b.model, b.market, p, st0))
    res = mc_price(b.model, st0, conditioning_paths(b.model, 0, 5), kern, pay, n_paths, seed=33)
    m, lay = b.model, b.market
    closed = [price_forward_caplet(m, lay, st0, v, u1, u2, k), price_forward_caplet(m, lay, st0, v, u1, u2, k, kind="put"),
              price_libor_caplet(m, lay, st0, v, u1, u2, k), price_libor_caplet(m, lay, st0, v, u1, u2, k, kind="put"),
              price_zcb_option(m, lay, st0, 2, 5, 0.93), price_zcb_option(m, lay, st0, 2, 5, 0.93, kind="put")]
    return res, bond_curve(lay, st0)[2:], np.array(closed)


@pytest.fixture(scope="module")
def desk_runs(desk_normal, desk_fx, desk_hjm):
    out, times = {}, {}
    for name, fn, b in [("normal", _normal_run, desk_normal), ("fx", _fx_run, desk_fx), ("hjm", _hjm_run, desk_hjm)]:
        start = time.perf_counter()
        out[name] = fn(b, PATHS)
        times[name] = time.perf_counter() - start
    return out, times


def test_martingale_suite(desk_runs):
    runs, times = desk_runs
    parts, ok = [], True
    for name, n_mart in [("normal", 10), ("fx", 15), ("hjm", 4)]:
        res = runs[name][0]
        sub = {"estimate": res["estimate"][:n_mart], "se": res["se"][:n_mart]}
        good, z = _within(runs[name][1], sub, 4)
        ok &= good
        parts.append(f"{name} max z = {z:.2f}")
    elapsed = sum(times.values())
    ok &= elapsed < 120
    record(3, ok, ", ".join(parts) + f" ({PATHS} paths, shared run {elapsed:.0f}s)")
    assert ok


def test_closed_forms_vs_monte_carlo(desk_runs):
    runs, times = desk_runs
    parts, ok = [], True
    for name, n_mart in [("normal", 10), ("fx", 15), ("hjm", 4)]:
        run = runs[name]
        res = run[0]
        sub = {"estimate": res["estimate"][n_mart:], "se": res["se"][n_mart:]}
        good, z = _within(run[2], sub, 3, run[3] if len(run) > 3 else 0.0)
        ok &= good
        parts.append(f"{name} {len(run[2])} prices max z = {z:.2f}")
    elapsed = sum(times.values())
    ok &= elapsed < 600
    record(4, ok, ", ".join(parts) + f", {elapsed:.0f}s")
    assert ok


# ---------------------------------------------------------------- 5, 6


def test_closed_form_oracles():
    start = time.perf_counter()
    rng = np.random.default_rng(505)
    worst_t = worst_l = worst_z = 0.0
    for _ in range(50):
        mu, sd, k = rng.normal(0, 1), rng.uniform(0.05, 2), rng.normal(0, 1)
        ref = quad_expectation_1d(lambda v: max(v - k, 0.0), mu, sd, points=[k])
        worst_t = max(worst_t, abs(truncated_call(mu, sd, k) - ref))
        mu, sd, k = rng.normal(0, 0.5), rng.uniform(0.05, 1), rng.uniform(0.3, 3)
        ref = quad_expectation_1d(lambda v: max(np.exp(v) - k, 0.0), mu, sd, points=[np.log(k)])
        worst_l = max(worst_l, abs(lognormal_call(mu, sd, k) - ref))
    for i in range(50):
        m1, m2 = rng.normal(0, 0.3, 2)
        s1, s2 = rng.uniform(0.05, 0.8, 2)
        cov = rng.uniform(-0.9, 0.9) * s1 * s2
        draw = substream(505, i).multivariate_normal([m1, m2], [[s1 ** 2, cov], [cov, s2 ** 2]], 200_000)
        pay = np.maximum(np.exp(draw[:, 0]) - np.exp(draw[:, 1]), 0)
        z = abs(margrabe_psi(m1, m2, s1 ** 2, s2 ** 2, cov) - pay.mean()) / (pay.std(ddof=1) / np.sqrt(pay.size))
        worst_z = max(worst_z, z)
    elapsed = time.perf_counter() - start
    ok = worst_t < 1e-9 and worst_l < 1e-9 and worst_z < 4 and elapsed < 60
    record(5, ok, f"normal call {worst_t:.1e}, lognormal call {worst_l:.1e}, exchange max z = {worst_z:.2f}, "
                  f"{elapsed:.1f}s")
    assert ok


def test_parities(desk_hjm):
    rng = np.random.default_rng(606)
    worst = {}
    for _ in range(50):
        mu, sd, k = rng.normal(0, 1), rng.uniform(0, 2), rng.normal(0, 1)
        worst["normal"] = max(worst.get("normal", 0), abs(truncated_call(mu, sd, k) - truncated_put(mu, sd, k) - (mu - k)))
        mu, sd, k = rng.normal(0, 0.5), rng.uniform(0, 1), rng.uniform(0.3, 3)
        gap = lognormal_call(mu, sd, k) - lognormal_put(mu, sd, k) - (np.exp(mu + sd ** 2 / 2) - k)
        worst["lognormal"] = max(worst.get("lognormal", 0), abs(gap))
        m1, m2 = rng.normal(0, 0.3, 2)
        v1, v2 = rng.uniform(0.01, 0.5, 2)
        c = rng.uniform(-0.9, 0.9) * np.sqrt(v1 * v2)
        gap = margrabe_psi(m1, m2, v1, v2, c) - margrabe_psi(m2, m1, v2, v1, c) - \
            (np.exp(m1 + v1 / 2) - np.exp(m2 + v2 / 2))
        worst["exchange"] = max(worst.get("exchange", 0), abs(gap))
    b = desk_hjm
    st0, m, lay = at_start(b), b.model, b.market
    paths = conditioning_paths(m, 0, 5)
    v, u1, u2, k = 2, 3, 5, 0.025
    fwd_cap = fwd_bond = 0.0
    for path, w in paths:
        pl = hjm_path_law(m, lay, st0, path)
        mu, _ = forward_rate_law(pl, v, u1, u2, u2)
        fwd_cap += w * np.exp(pl.discount_exponent(u2)) * (mu - k)
        mu, var = forward_rate_law(pl, 2, 2, 5, 2)
        fwd_bond += w * np.exp(pl.discount_exponent(2)) * (np.exp(-3 * mu + 4.5 * var) - 0.93)
    worst["caplet"] = abs(price_forward_caplet(m, lay, st0, v, u1, u2, k)
                          - price_forward_caplet(m, lay, st0, v, u1, u2, k, kind="put") - fwd_cap)
    worst["bond option"] = abs(price_zcb_option(m, lay, st0, 2, 5, 0.93)
                               - price_zcb_option(m, lay, st0, 2, 5, 0.93, kind="put") - fwd_bond)
    ok = max(worst.values()) < 1e-10
    record(6, ok, ", ".join(f"{key} {val:.1e}" for key, val in worst.items()))
    assert ok


# ---------------------------------------------------------------- 7, 8


def test_gaussian_conditioning():
    rng = np.random.default_rng(707)
    worst = 0.0
    for _ in range(20):
        n, p, T = int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(2, 6))
        m = random_model(rng, n=n, p=p, k=2)
        s = PathState(rng.standard_normal((p, n)), np.column_stack([np.ones(T), rng.standard_normal(T)]))
        path = tuple(int(v) for v in rng.integers(0, 2, T))
        sys = build_stacked(m, path, s)
        t = int(rng.integers(1, T))
        obs = rng.standard_normal(n * t)
        full = law_full(sys)
        cut = n * t
        s11, s21, s22 = full.cov[:cut, :cut], full.cov[cut:, :cut], full.cov[cut:, cut:]
        gain = linalg.solve(s11, s21.T, assume_a="pos").T
        mean = full.mean[cut:] + gain @ (obs - full.mean[:cut])
        cov = s22 - gain @ s21.T
        cond = law_conditional_future(sys, t, obs.reshape(t, n))
        worst = max(worst, float(np.max(np.abs(cond.mean - mean))), float(np.max(np.abs(cond.cov - cov))))
    ok = worst < 1e-10
    record(7, ok, f"max deviation from block conditioning = {worst:.1e} over 20 points")
    assert ok


def test_regime_weights(desk_normal):
    rng = np.random.default_rng(808)
    worst_sum = worst_marg = 0.0
    for _ in range(20):
        N, T = int(rng.integers(2, 4)), int(rng.integers(2, 7))
        m = random_model(rng, N=N)
        t = int(rng.integers(0, T))
        current = int(rng.integers(0, N))
        w = future_path_weights(m, current, t, T)
        worst_sum = max(worst_sum, abs(w.total() - 1))
        marg = np.zeros(N)
        for path, pr in w.items():
            marg[path[-1]] += pr
        start = np.eye(N)[current] @ np.linalg.matrix_power(m.transition, T - t) if t else \
            m.initial_dist @ np.linalg.matrix_power(m.transition, T - 1)
        worst_marg = max(worst_marg, float(np.max(np.abs(marg - start))))
    b = desk_normal
    for t in (1, 2):
        worst_sum = max(worst_sum, abs(filtered_path_weights(b.model, b.state, t).total() - 1))
        pw = filtered_path_weights(b.model, b.state, t)
        worst_sum = max(worst_sum, abs(sum(w for _, w in conditioning_paths(b.model, t, 5, pw)) - 1))
    ok = worst_sum < 1e-12 and worst_marg < 1e-12
    record(8, ok, f"max |sum - 1| = {worst_sum:.1e}, max marginal error = {worst_marg:.1e}")
    assert ok


# ---------------------------------------------------------------- 9


def test_rao_blackwell_variance(desk_normal):
    b = desk_normal
    st0, lay = at_start(b), b.market
    scheme = arithmetic_weight_builder("asian", 5, 2, asset=0)
    disc = (1 + lay.rate) ** -5
    base = b.model.cov.sigmas
    pay = lambda y, p: np.maximum(np.einsum("ntk,tk->n", y[:, :, lay.n_z:], scheme.weights) - 10.5, 0) * disc
    paths = conditioning_paths(b.model, 0, 5)
    rng = np.random.default_rng(909)
    tau1, tau2 = [], []
    for rep in range(200):
        # parameter uncertainty: each draw rescales the covariances
        draws = [ParameterDraw(replace(b.model, cov=ConstantCovariance(tuple(s * f for s in base))))
                 for f in np.exp(rng.normal(0, 0.3, 10))]
        tau1.append(np.mean([mc_price(d.model, st0, paths, lambda p, d=d: normal_kernel(d.model, lay), pay, 1,
                                      seed=rep * 10 + j)["estimate"] for j, d in enumerate(draws)]))
        tau2.append(rao_blackwell_price(draws, lambda d: price_normal_option(d.model, lay, scheme, 10.5, st0))
                    ["estimate"])
    v1, v2 = np.var(tau1, ddof=1), np.var(tau2, ddof=1)
    p_value = stats.f.sf(v1 / v2, 199, 199)
    ok = v2 <= v1 and p_value < 0.01
    record(9, ok, f"Var(plain) = {v1:.3e}, Var(conditional) = {v2:.3e}, one-sided p = {p_value:.1e}")
    assert ok


# ---------------------------------------------------------------- 10


def test_degenerate_exactness(desk_fx, desk_hjm):
    checks = {}
    fx = desk_fx
    for t, pre in [(0, None), (1, (0,)), (2, (0, 1))]:
        r = fx.state.value(t)
        checks[f"fx bond t={t}"] = zcb_domestic(fx.model, fx.market, fx.state, t, t + 1, pre) == np.exp(-r[0])
        rf = r[fx.market.rate_coord(0)]
        checks[f"foreign bond t={t}"] = zcb_foreign(fx.model, fx.market, fx.state, 0, t, t + 1, pre) == np.exp(-rf)
    h = desk_hjm
    for t, pre in [(0, None), (2, (1, 0))]:
        checks[f"curve bond t={t}"] = zcb_price(h.model, h.market, h.state, t, t + 1, pre) == np.exp(-h.state.value(t)[0])

    dev = 0.0
    # zero volatility: closed forms collapse to intrinsic values
    for mu, k in [(3.0, 1.0), (-0.2, 0.5), (0.4, 0.4)]:
        dev = max(dev, abs(truncated_call(mu, 0.0, k) - max(mu - k, 0)), abs(truncated_put(mu, 0.0, k) - max(k - mu, 0)))
        dev = max(dev, abs(lognormal_call(mu, 0.0, k) - max(np.exp(mu) - k, 0)))
        dev = max(dev, abs(margrabe_psi(mu, k, 0.0, 0.0, 0.0) - max(np.exp(mu) - np.exp(k), 0)))
    tiny = 1e-30
    lay = NormalLayout(1, 1, 0.02)
    m = MsVarModel([[[0.0, 0.5, 0.0], [0.0, 0.0, 1.0]]], [[1.0]], [1.0], ConstantCovariance([np.eye(2) * tiny]))
    s = PathState([[0.0, 10.0]], np.ones((3, 1)))
    scheme = arithmetic_weight_builder("european", 3, 1, asset=0)
    # the asset grows at the flat rate, so the forward is 10 (1.02)^3 and the call is worth 10 - K / 1.02^3
    dev = max(dev, abs(price_normal_option(m, lay, scheme, 9.0, s) - (10 - 9.0 / 1.02 ** 3)))
    n = 4
    m = MsVarModel([np.hstack([np.zeros((n, 1)), np.eye(n)])], [[1.0]], [1.0], ConstantCovariance([np.eye(n) * tiny]))
    lay = HjmLayout(3, n)
    s = PathState([[0.01, 0.02, 0.03, 0.04]], np.ones((3, 1)))
    # with no noise the forward and the short rates are read off the single deterministic path
    path_mean = hjm_path_law(m, lay, s, (0, 0, 0)).law.mean.reshape(3, n)
    forward = path_mean[0, :2].mean()
    discount = np.exp(-s.y_init[0, 0] - path_mean[:2, 0].sum())
    caplet = price_forward_caplet(m, lay, s, 1, 1, 3, 0.015)
    dev = max(dev, abs(caplet - discount * max(forward - 0.015, 0)))
    checks["zero volatility"] = dev < 1e-12
    ok = all(checks.values())
    record(10, ok, f"{sum(checks.values())}/{len(checks)} exact checks, zero-volatility deviation {dev:.1e}")
    assert ok, [key for key, good in checks.items() if not good]


# ---------------------------------------------------------------- 11


def test_cli_determinism(capsys):
    mismatched = []
    for name, argv in sorted(COMMANDS.items()):
        outs = []
        for _ in range(2):
            main(resolve(argv))
            outs.append(capsys.readouterr().out)
        if outs[0] != outs[1] or outs[0] != (GOLDEN / f"{name}.txt").read_bytes().decode():
            mismatched.append(name)
    for threads in ("1", "4"):
        env = dict(os.environ, OMP_NUM_THREADS=threads, OPENBLAS_NUM_THREADS=threads, MKL_NUM_THREADS=threads)
        for name in ("price_normal", "price_general", "simulate"):
            out = subprocess.run([sys.executable, "-m", "msvar_pricing", *resolve(COMMANDS[name])], env=env,
                                 capture_output=True, check=True).stdout
            if out != (GOLDEN / f"{name}.txt").read_bytes():
                mismatched.append(f"{name}@{threads}")
    ok = not mismatched
    record(11, ok, f"{len(COMMANDS)} commands byte-identical across runs and 1/4 threads"
           if ok else f"mismatch: {mismatched}")
    assert ok
