"""Command-line front end: ``msvar-price``.

Exit codes: 0 success, 2 usage error, 3 invalid input, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import json
import sys
from importlib import resources

import numpy as np

from . import girsanov, lognormal, normal, oracle, term_structure
from .errors import NumericalError, ValidationError
from .io import ModelBundle, load_condition, load_draws, load_model
from .markets import FxLayout, HjmLayout, NormalLayout
from .model import check_path, covariance_path, markov_path_prob, simulate_real_path, substream
from .regimes import filtered_path_weights, rao_blackwell_price

EXIT_USAGE, EXIT_INVALID, EXIT_NUMERICAL = 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def desk_model_path(kind: str) -> str:
    return str(resources.files("msvar_pricing") / "data" / f"desk_{kind}.json")


# ---------------------------------------------------------------- contracts
# Each builder returns (label, closed_form(model, state, t, prefix), payoff(y, path, state, t));
# the payoff is discounted to t and feeds the --validate cross-check.

def _discount(market, y, state, t, u):
    """``D_u / D_t`` on simulated trajectories."""
    if isinstance(market, NormalLayout):
        return np.full(y.shape[0], (1 + market.rate) ** -(u - t))
    first = state.value(t)[0]
    later = y[:, t:u - 1, 0].sum(axis=1) if u - 1 > t else 0.0
    return np.exp(-first - later)


def _need(market, cls, command):
    if not isinstance(market, cls):
        raise ValidationError(f"'{command}' needs a {cls.__name__.replace('Layout', '').lower()} market", "market.kind")


def _normal_contract(args, b: ModelBundle):
    _need(b.market, NormalLayout, "price normal")
    kind, _, arg = args.weights.partition(":")
    if kind == "basket":
        scheme = normal.arithmetic_weight_builder("basket", b.horizon, b.market.n_x,
                                                  basket=[float(v) for v in arg.split(",")])
    else:
        try:
            asset = int(arg)
        except ValueError:
            raise ValidationError(f"cannot read weights {args.weights!r}", "weights") from None
        scheme = normal.arithmetic_weight_builder(kind, b.horizon, b.market.n_x, asset=asset)
    sign = 1.0 if args.type == "call" else -1.0

    def closed(model, state, t, prefix):
        return normal.price_normal_option(model, b.market, scheme, args.strike, state, t, args.type, prefix)

    def payoff(y, path, state, t):
        x = np.einsum("ntk,tk->n", y[:, :, b.market.n_z:], scheme.weights)
        return np.maximum(sign * (x - args.strike), 0.0) * _discount(b.market, y, state, t, b.horizon)
    return f"{args.type} {args.weights} K={args.strike:g}", closed, payoff


def _leg(text):
    parts = [int(v) for v in text.split(",")] if text else []
    return parts[0] if len(parts) == 1 else tuple(parts) if parts else None


def _margrabe_contract(args, b: ModelBundle):
    _need(b.market, FxLayout, "price margrabe")
    units = tuple(float(v) for v in args.units.split(","))
    ex = lognormal.special_case_weights(b.market, args.case, b.horizon, args.maturity, _leg(args.first),
                                        _leg(args.second), units, args.strike, args.type == "put")
    nz = b.market.n_z

    def closed(model, state, t, prefix):
        return lognormal.price_exchange_option(model, b.market, state, ex, t, prefix)

    def payoff(y, path, state, t):
        x = y[:, :, nz:]
        l1 = np.log(ex.w0) + np.einsum("ntk,tk->n", x, ex.weights)
        l2 = np.log(ex.w0_hat) + np.einsum("ntk,tk->n", x, ex.weights_hat)
        return np.maximum(np.exp(l1) - np.exp(l2), 0.0) * _discount(b.market, y, state, t, ex.maturity)
    return f"case {args.case} {args.type} u={args.maturity}", closed, payoff


def _general_contract(args, b: ModelBundle):
    _need(b.market, FxLayout, "price general")
    from .io import _keys, _read
    doc = _read(args.contract)
    _keys(doc, {"units", "strike", "strike_time"}, "", ("units", "strike", "strike_time"))
    gc = lognormal.GeneralCall(doc["units"], float(doc["strike"]), int(doc["strike_time"]))
    if gc.units.shape != (b.horizon, b.market.n_x):
        raise ValidationError(f"expected {(b.horizon, b.market.n_x)}", "units")
    lay = b.market

    def closed(model, state, t, prefix):
        return lognormal.price_general_call(model, lay, state, gc, t, prefix, args.samples, args.seed)

    def payoff(y, path, state, t):
        px = np.exp(y[:, :, lay.n_z:] @ lay.r2.T)
        total = sum(_discount(lay, y, state, t, u) * (px[:, u - 1] @ gc.units[u - 1]) for u in range(t + 1, b.horizon + 1))
        dv = _discount(lay, y, state, t, gc.strike_time) if gc.strike_time > t else 1.0
        return np.maximum(total - dv * gc.strike, 0.0)
    return f"general K={gc.strike:g} v={gc.strike_time}", closed, payoff


def _rate_contract(args, b: ModelBundle):
    _need(b.market, HjmLayout, f"price {args.product}")
    lay = b.market
    if args.product == "zcb-option":
        v, u, k = args.expiry, args.maturity, args.strike
        sign = 1.0 if args.type == "call" else -1.0

        def closed(model, state, t, prefix):
            return term_structure.price_zcb_option(model, lay, state, v, u, k, t, args.type, prefix)

        def payoff(y, path, state, t):
            bond = np.exp(-y[:, v - 1, : u - v].sum(axis=1))
            return np.maximum(sign * (bond - k), 0.0) * _discount(lay, y, state, t, v)
        return f"zcb {args.type} v={v} u={u} K={k:g}", closed, payoff

    v, u1, u2, k = args.fixing, args.start, args.end, args.strike
    libor = args.product.startswith("libor")
    kind = "call" if args.product.endswith("caplet") else "put"
    sign = 1.0 if kind == "call" else -1.0
    pricer = term_structure.price_libor_caplet if libor else term_structure.price_forward_caplet

    def closed(model, state, t, prefix):
        return pricer(model, lay, state, v, u1, u2, k, t, kind, prefix)

    def payoff(y, path, state, t):
        f = y[:, v - 1, u1 - v: u2 - v].mean(axis=1)
        rate = np.expm1((u2 - u1) * f) / (u2 - u1) if libor else f
        return np.maximum(sign * (rate - k), 0.0) * _discount(lay, y, state, t, u2)
    return f"{args.product} v={v} [{u1},{u2}) K={k:g}", closed, payoff


def _kernel_for(b: ModelBundle, model, state, t):
    if isinstance(b.market, NormalLayout):
        return lambda path: oracle.normal_kernel(model, b.market)
    if isinstance(b.market, FxLayout):
        return lambda path: oracle.lognormal_kernel(model, b.market)
    return lambda path: oracle.linear_kernel(term_structure.hjm_kernel_deltas(model, b.market, path, state, t))


# ---------------------------------------------------------------- plumbing

def _conditioning(args, b: ModelBundle, model):
    """``(t, state, prefix, label)``; an unlabelled data file gets filtered weights."""
    if not args.condition:
        return 0, b.state.with_observed(b.state.observed[:0]), None, "t=0"
    t, state, prefix = load_condition(args.condition, b)
    if t == 0:
        return 0, state, None, "t=0"
    if prefix is None:
        return t, state, filtered_path_weights(model, state, t), f"t={t} filtered"
    check_path(model, prefix)
    return t, state, prefix, f"t={t} s={','.join(map(str, prefix))}"


def _price(args, b: ModelBundle, builder) -> list:
    label, closed, payoff = builder(args, b)
    t, state, prefix, cond = _conditioning(args, b, b.model)
    if t >= b.horizon:
        raise ValidationError("conditioning time must precede the horizon", "condition")
    row = {"contract": label, "condition": cond}
    if args.draws:
        draws = load_draws(args.draws, b)

        def inner(d):
            _, st, pre, _ = _conditioning(args, b, d.model)
            return closed(d.model, st, t, pre)
        res = rao_blackwell_price(draws, inner)
        row.update(price=res["estimate"], se=res["standard_error"])
    else:
        value = closed(b.model, state, t, prefix)
        if isinstance(value, dict):
            row.update(price=value["estimate"], se=value["se"])
        else:
            row.update(price=value, se=0.0)
    if getattr(args, "validate", False):
        from .regimes import conditioning_paths
        paths = conditioning_paths(b.model, t, b.horizon, prefix)
        mc = oracle.mc_price(b.model, state, paths, _kernel_for(b, b.model, state, t),
                             lambda y, path: payoff(y, path, state, t), args.mc_paths, args.seed, t)
        row.update(mc=mc["estimate"], mc_se=mc["se"], delta=row["price"] - mc["estimate"])
    return [row]


def _curve(args, b: ModelBundle) -> list:
    t, state, prefix, cond = _conditioning(args, b, b.model)
    if args.start is not None and args.start != t:
        raise ValidationError(f"--from must equal the conditioning time {t}", "from")
    rows = []
    for u in range(t + 1, args.to + 1):
        if isinstance(b.market, NormalLayout):
            price = (1 + b.market.rate) ** -(u - t)
        elif isinstance(b.market, FxLayout):
            if args.country is None:
                price = lognormal.zcb_domestic(b.model, b.market, state, t, u, prefix)
            else:
                price = lognormal.zcb_foreign(b.model, b.market, state, args.country, t, u, prefix)
        else:
            price = term_structure.zcb_price(b.model, b.market, state, t, u, prefix)
        rows.append({"contract": f"zcb {t}->{u}", "condition": cond, "price": price, "se": 0.0})
    return rows


def _draw_regimes(model, horizon, rng, n):
    out = np.empty((n, horizon), dtype=int)
    out[:, 0] = rng.choice(model.n_regimes, size=n, p=model.initial_dist)
    for m in range(1, horizon):
        u = rng.random(n)
        cum = np.cumsum(model.transition[out[:, m - 1]], axis=1)
        out[:, m] = np.minimum((u[:, None] > cum).sum(axis=1), model.n_regimes - 1)
    return out


def _simulate(args, b: ModelBundle) -> list:
    model, state = b.model, b.state.with_observed(b.state.observed[:0])
    regimes = _draw_regimes(model, b.horizon, substream(args.seed, 5), args.paths)
    rows = []
    for i, path in enumerate(map(tuple, regimes)):
        if args.measure == "real":
            y = simulate_real_path(model, state, path, args.seed + i)
        else:
            y = oracle.simulate_under_Q(model, state, path, _kernel_for(b, model, state, 0)(path),
                                        substream(args.seed, 6, i), 1)[0]
        for m in range(b.horizon):
            row = {"sample": i, "time": m + 1, "regime": path[m]}
            row.update({f"y{j}": float(v) for j, v in enumerate(y[m])})
            rows.append(row)
    return rows


def _kernel(args, b: ModelBundle) -> list:
    model = b.model
    path = check_path(model, [int(v) for v in args.path.split(",")]) if args.path else (0,) * b.horizon
    if len(path) != b.horizon:
        raise ValidationError(f"regime path must have {b.horizon} entries", "path")
    sigmas = covariance_path(model, path)
    if isinstance(b.market, HjmLayout):
        cons = term_structure.hjm_constraints(model, b.market, path, b.state.with_observed(b.state.observed[:0]))
        # no restriction reaches the final period, whose kernel is zero under either objective
        n = model.dim
        constraint, sig = girsanov.KernelConstraint(cons.a[:, : n * (b.horizon - 1)], cons.b), sigmas[:-1]
    else:
        lay, st = b.market, b.state
        lags, psi = st.lags(1, model.lag_order), st.psi[0]
        if isinstance(lay, NormalLayout):
            target = girsanov.normal_theta_hat(model, path[0], lay, psi, lags)
        else:
            target = girsanov.lognormal_theta_hat(model, path[0], lay, psi, lags) - girsanov.lognormal_alpha(sigmas[0], lay)
        constraint, sig = girsanov.block_constraint(lay.m2, [target]), sigmas[:1]
    solver = girsanov.entropy_kernel if args.objective == "entropy" else girsanov.variance_kernel
    theta = solver(sig, constraint)
    if isinstance(b.market, HjmLayout):
        theta = np.vstack([theta, np.zeros(model.dim)])
        sig = sigmas
    stats = girsanov.state_price_stats(theta, sig)
    rows = []
    for m, th in enumerate(theta, start=1):
        row = {"time": m, "regime": path[m - 1]}
        row.update({f"theta{j}": float(v) for j, v in enumerate(th)})
        rows.append(row)
    rows.append({"time": "total", "entropy": stats["entropy"], "variance_formula": stats["variance_formula"],
                 "path_prob": markov_path_prob(model, path)})
    return rows


# ---------------------------------------------------------------- output

def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def render(rows: list, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=1, default=float) + "\n"
    cols = []
    for row in rows:
        cols.extend(c for c in row if c not in cols)
    table = [[_fmt(row.get(c, "")) for c in cols] for row in rows]
    if fmt == "csv":
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(cols)
        w.writerows(table)
        return buf.getvalue()
    widths = [max(len(c), *(len(r[i]) for r in table)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip()]
    lines += ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in table]
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--model", help="model JSON file (default: the shipped desk model for the command)")
    common.add_argument("--draws", help="parameter-draw JSON file; prices are averaged over draws")
    common.add_argument("--condition", help="regime prefix like 0,1 or a JSON data file")
    common.add_argument("--mc-paths", type=int, default=200_000)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--output", choices=("table", "csv", "json"), default="table")

    p = _Parser(prog="msvar-price", description="Regime-switching VAR derivative pricer.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    price = sub.add_parser("price", help="price a contract")
    psub = price.add_subparsers(dest="product", required=True, parser_class=_Parser)
    q = psub.add_parser("normal", parents=[common])
    q.add_argument("--weights", required=True, help="european:<asset>, asian:<asset> or basket:<w1,w2,...>")
    q.add_argument("--strike", type=float, required=True)
    q.add_argument("--type", choices=("call", "put"), default="call")
    q.add_argument("--validate", action="store_true")
    q = psub.add_parser("margrabe", parents=[common])
    q.add_argument("--case", type=int, required=True, choices=range(1, 10))
    q.add_argument("--first", required=True, help="asset index, or country,asset for foreign assets")
    q.add_argument("--second", default="")
    q.add_argument("--units", default="1,1")
    q.add_argument("--strike", type=float)
    q.add_argument("--maturity", type=int, required=True)
    q.add_argument("--type", choices=("call", "put"), default="call")
    q.add_argument("--validate", action="store_true")
    q = psub.add_parser("general", parents=[common])
    q.add_argument("--contract", required=True)
    q.add_argument("--samples", type=int, default=200_000)
    q.add_argument("--validate", action="store_true")
    for name in ("caplet", "floorlet", "libor-caplet", "libor-floorlet"):
        q = psub.add_parser(name, parents=[common])
        q.add_argument("--fixing", type=int, required=True)
        q.add_argument("--start", type=int, required=True)
        q.add_argument("--end", type=int, required=True)
        q.add_argument("--strike", type=float, required=True)
        q.add_argument("--validate", action="store_true")
    q = psub.add_parser("zcb-option", parents=[common])
    q.add_argument("--expiry", type=int, required=True)
    q.add_argument("--maturity", type=int, required=True)
    q.add_argument("--strike", type=float, required=True)
    q.add_argument("--type", choices=("call", "put"), default="call")
    q.add_argument("--validate", action="store_true")

    curve = sub.add_parser("curve", help="bond prices")
    csub = curve.add_subparsers(dest="product", required=True, parser_class=_Parser)
    q = csub.add_parser("zcb", parents=[common])
    q.add_argument("--from", dest="start", type=int)
    q.add_argument("--to", type=int, required=True)
    q.add_argument("--country", type=int)

    q = sub.add_parser("simulate", parents=[common], help="simulate trajectories")
    q.add_argument("--measure", choices=("real", "q"), default="real")
    q.add_argument("--paths", type=int, default=10)

    q = sub.add_parser("kernel", parents=[common], help="solve for the measure-change kernel")
    q.add_argument("--objective", choices=("entropy", "variance"), default="entropy")
    q.add_argument("--path", default="", help="regime path, default all zeros")
    return p


DEFAULT_MARKET = {"normal": "normal", "margrabe": "fx", "general": "fx", "caplet": "hjm", "floorlet": "hjm",
                  "libor-caplet": "hjm", "libor-floorlet": "hjm", "zcb-option": "hjm"}


def run(args) -> list:
    product = getattr(args, "product", None)
    b = load_model(args.model or desk_model_path(DEFAULT_MARKET.get(product, "normal")))
    if args.command == "price":
        builder = {"normal": _normal_contract, "margrabe": _margrabe_contract,
                   "general": _general_contract}.get(product, _rate_contract)
        return _price(args, b, builder)
    if args.command == "curve":
        if args.to > b.horizon:
            raise ValidationError(f"--to must not exceed {b.horizon}", "to")
        return _curve(args, b)
    if args.command == "simulate":
        if args.paths < 1:
            raise ValidationError("need at least one path", "paths")
        return _simulate(args, b)
    return _kernel(args, b)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    fmt = next((b for a, b in zip(argv, argv[1:]) if a == "--output"), "table")
    try:
        args = build_parser().parse_args(argv)
        sys.stdout.write(render(run(args), args.output))
        return 0
    except UsageError as exc:
        sys.stderr.write(str(exc) + "\n")
        return EXIT_USAGE
    except ValueError as exc:
        # malformed numbers inside option values
        return main_error(ValidationError(str(exc), "arguments"), fmt)
    except (ValidationError, NumericalError) as exc:
        return main_error(exc, fmt)


def main_error(exc, fmt: str) -> int:
    code = EXIT_INVALID if isinstance(exc, ValidationError) else EXIT_NUMERICAL
    if fmt == "json":
        err = {"error": type(exc).__name__, "message": str(exc), "location": getattr(exc, "location", None),
               "exit_code": code}
        sys.stderr.write(json.dumps(err) + "\n")
    else:
        sys.stderr.write(f"error: {exc}\n")
    return code

if __name__ == "__main__":
    sys.exit(main())
