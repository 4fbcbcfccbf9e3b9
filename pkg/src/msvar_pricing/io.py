"""JSON model files, parameter-draw files and conditioning data.

A model file looks like::

    {
      "dims": {"n": 3, "p": 1, "k": 1, "N": 2, "T": 5},
      "regimes": [{"A": [[...]], "cov": {"sigma": [[...]]}}, ...],
      "transition": [[...]],
      "initial_dist": [...],
      "market": {"kind": "normal", "n_z": 1, "n_x": 2, "rate": 0.01},
      "state": {"y0": [[...]], "psi": [[...]]}
    }

``A`` is ``[A_0 : A_1 : ... : A_p]``.  A regime covariance is either
``{"sigma": M}`` or a GARCH block ``{"b0": v, "b": [M_1, ..., M_q]}``; GARCH
models also need a top-level ``"garch_initial"`` list of matrices.  Markets
are ``{"kind": "fx", "n_z", "n_d", "n_f": [...]}`` or ``{"kind": "hjm"}``
(the horizon is ``dims.T``).  ``state.y0`` lists ``y_{1-p}..y_0`` and may
carry ``"observed"`` rows ``y_1..y_t``.  Unknown keys are rejected and every
diagnostic names the JSON path of the offending field.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, ShapeMismatch, ValidationError
from .markets import FxLayout, HjmLayout, NormalLayout
from .model import ConstantCovariance, MsVarModel, PathState, VechGarch, validate_model
from .regimes import ParameterDraw

TOP_KEYS = {"dims", "regimes", "transition", "initial_dist", "market", "state", "garch_initial"}
DRAW_KEYS = {"regimes", "transition", "initial_dist", "garch_initial", "weight"}
DIM_KEYS = {"n", "p", "k", "N", "T"}
MARKET_KEYS = {"normal": {"kind", "n_z", "n_x", "rate"}, "fx": {"kind", "n_z", "n_d", "n_f"}, "hjm": {"kind"}}
STATE_KEYS = {"y0", "psi", "observed"}


@dataclass(frozen=True)
class ModelBundle:
    model: MsVarModel
    market: NormalLayout | FxLayout | HjmLayout
    state: PathState
    horizon: int


def _read(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(str(exc), str(path)) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", str(path)) from None
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", "$")
    return doc


def _keys(obj, allowed: set, where: str, required=()):
    if not isinstance(obj, dict):
        raise ParseError("expected an object", where)
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ParseError(f"unknown key {extra[0]!r}", f"{where}.{extra[0]}" if where else extra[0])
    for key in required:
        if key not in obj:
            raise ParseError("missing required key", f"{where}.{key}" if where else key)


def _array(value, where: str, ndim: int) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ParseError("expected a numeric array", where) from None
    if arr.ndim != ndim:
        raise ShapeMismatch(f"expected {ndim}-dimensional array, got {arr.ndim}", where)
    if not np.all(np.isfinite(arr)):
        raise ParseError("non-finite number", where)
    return arr


def _int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError("expected an integer", where)
    return value


def _parameters(doc: dict, dims: dict, prefix: str = "") -> MsVarModel:
    n, p, k, N = dims["n"], dims["p"], dims["k"], dims["N"]
    regimes = doc["regimes"]
    if not isinstance(regimes, list) or len(regimes) != N:
        raise ShapeMismatch(f"need {N} regimes", f"{prefix}regimes")
    coeffs, sigmas, b0, b = [], [], [], []
    garch = None
    for j, reg in enumerate(regimes):
        where = f"{prefix}regimes[{j}]"
        _keys(reg, {"A", "cov"}, where, ("A", "cov"))
        a = _array(reg["A"], f"{where}.A", 2)
        if a.shape != (n, k + n * p):
            raise ShapeMismatch(f"expected {(n, k + n * p)}, got {a.shape}", f"{where}.A")
        coeffs.append(a)
        cov = reg["cov"]
        kind = "sigma" if isinstance(cov, dict) and "sigma" in cov else "garch"
        if garch is not None and garch != (kind == "garch"):
            raise ValidationError("all regimes must use one covariance form", f"{where}.cov")
        garch = kind == "garch"
        if garch:
            _keys(cov, {"b0", "b"}, f"{where}.cov", ("b0", "b"))
            b0.append(_array(cov["b0"], f"{where}.cov.b0", 1))
            b.append(tuple(_array(m, f"{where}.cov.b[{i}]", 2) for i, m in enumerate(cov["b"])))
        else:
            _keys(cov, {"sigma"}, f"{where}.cov", ("sigma",))
            sigmas.append(_array(cov["sigma"], f"{where}.cov.sigma", 2))
    if garch:
        if "garch_initial" not in doc:
            raise ParseError("GARCH covariances need initial matrices", f"{prefix}garch_initial")
        init = [_array(m, f"{prefix}garch_initial[{i}]", 2) for i, m in enumerate(doc["garch_initial"])]
        cov_spec = VechGarch(tuple(b0), tuple(b), tuple(init))
    else:
        cov_spec = ConstantCovariance(tuple(sigmas))
    model = MsVarModel(tuple(coeffs), _array(doc["transition"], f"{prefix}transition", 2),
                       _array(doc["initial_dist"], f"{prefix}initial_dist", 1), cov_spec, p)
    try:
        return validate_model(model, dims["T"])
    except ValidationError as exc:
        if exc.location and prefix:
            raise type(exc)(str(exc).split(": ", 1)[-1], prefix + exc.location) from None
        raise


def _dims(doc: dict) -> dict:
    _keys(doc["dims"], DIM_KEYS, "dims", tuple(sorted(DIM_KEYS)))
    dims = {key: _int(doc["dims"][key], f"dims.{key}") for key in DIM_KEYS}
    for key in DIM_KEYS:
        if dims[key] < 1:
            raise ValidationError("must be positive", f"dims.{key}")
    return dims


def _market(spec, dims: dict):
    if not isinstance(spec, dict) or spec.get("kind") not in MARKET_KEYS:
        raise ParseError("kind must be normal, fx or hjm", "market.kind")
    kind = spec["kind"]
    _keys(spec, MARKET_KEYS[kind], "market", tuple(sorted(MARKET_KEYS[kind])))
    if kind == "normal":
        lay = NormalLayout(_int(spec["n_z"], "market.n_z"), _int(spec["n_x"], "market.n_x"), float(spec["rate"]))
    elif kind == "fx":
        if not isinstance(spec["n_f"], list):
            raise ParseError("expected a list of counts", "market.n_f")
        lay = FxLayout(_int(spec["n_z"], "market.n_z"), _int(spec["n_d"], "market.n_d"),
                       tuple(_int(v, f"market.n_f[{i}]") for i, v in enumerate(spec["n_f"])))
    else:
        lay = HjmLayout(dims["T"], dims["n"])
    if kind != "hjm" and lay.n != dims["n"]:
        raise ShapeMismatch(f"layout covers {lay.n} coordinates but n = {dims['n']}", "market")
    return lay


def _state(spec, dims: dict) -> PathState:
    _keys(spec, STATE_KEYS, "state", ("y0", "psi"))
    n, p, k, T = dims["n"], dims["p"], dims["k"], dims["T"]
    y0 = np.atleast_2d(_array(spec["y0"], "state.y0", np.ndim(spec["y0"])))
    if y0.shape != (p, n):
        raise ShapeMismatch(f"expected {(p, n)}", "state.y0")
    psi = _array(spec["psi"], "state.psi", 2)
    if psi.shape != (T, k):
        raise ShapeMismatch(f"expected {(T, k)}", "state.psi")
    obs = None
    if "observed" in spec:
        obs = _array(spec["observed"], "state.observed", 2)
        if obs.shape[1] != n or obs.shape[0] > T:
            raise ShapeMismatch(f"expected at most {T} rows of length {n}", "state.observed")
    return PathState(y0, psi, obs)


def parse_model(doc: dict) -> ModelBundle:
    _keys(doc, TOP_KEYS, "", ("dims", "regimes", "transition", "initial_dist", "market", "state"))
    dims = _dims(doc)
    model = _parameters(doc, dims)
    if model.n_regimes != dims["N"]:
        raise ShapeMismatch(f"need {dims['N']} regimes", "regimes")
    return ModelBundle(model, _market(doc["market"], dims), _state(doc["state"], dims), dims["T"])


def load_model(path) -> ModelBundle:
    return parse_model(_read(path))


def load_draws(path, bundle: ModelBundle) -> list:
    """Parameter draws sharing the dimensions, market and state of ``bundle``.

    The file is ``{"draws": [block, ...]}`` where each block holds
    ``regimes``, ``transition``, ``initial_dist`` and an optional ``weight``.
    """
    doc = _read(path)
    _keys(doc, {"draws"}, "", ("draws",))
    if not isinstance(doc["draws"], list) or not doc["draws"]:
        raise ParseError("expected a non-empty list", "draws")
    m = bundle.model
    dims = {"n": m.dim, "p": m.lag_order, "k": m.exo_dim, "N": m.n_regimes, "T": bundle.horizon}
    out = []
    for i, block in enumerate(doc["draws"]):
        where = f"draws[{i}]"
        _keys(block, DRAW_KEYS, where, ("regimes", "transition", "initial_dist"))
        weight = block.get("weight", 1.0)
        if isinstance(weight, bool) or not isinstance(weight, (int, float)):
            raise ParseError("expected a number", f"{where}.weight")
        try:
            out.append(ParameterDraw(_parameters(block, dims, f"{where}."), float(weight)))
        except ValidationError as exc:
            if exc.location == "weight":
                raise ValidationError("draw weight must be positive", f"{where}.weight") from None
            raise
    return out


def load_condition(text: str, bundle: ModelBundle) -> tuple:
    """``(t, state, prefix)`` from a regime prefix like ``"0,1"`` or a JSON data file.

    A prefix uses the observations stored in the model file.  A data file is
    ``{"observed": [[...]], "regimes": [...]}``; without ``regimes`` the
    prefix is left to the caller to filter.
    """
    text = text.strip()
    if Path(text).suffix == ".json" or Path(text).is_file():
        doc = _read(text)
        _keys(doc, {"observed", "regimes"}, "", ("observed",))
        obs = _array(doc["observed"], "observed", 2)
        if obs.shape[1] != bundle.model.dim or obs.shape[0] >= bundle.horizon:
            raise ShapeMismatch(f"need fewer than {bundle.horizon} rows of length {bundle.model.dim}", "observed")
        state = bundle.state.with_observed(obs)
        regimes = doc.get("regimes")
        if regimes is not None:
            regimes = tuple(_int(v, f"regimes[{i}]") for i, v in enumerate(regimes))
            if len(regimes) != obs.shape[0]:
                raise ShapeMismatch("need one regime per observed row", "regimes")
        return obs.shape[0], state, regimes
    try:
        prefix = tuple(int(v) for v in text.split(",")) if text else ()
    except ValueError:
        raise ParseError(f"cannot read regime prefix {text!r}", "condition") from None
    t = len(prefix)
    if bundle.state.t < t:
        raise ValidationError(f"prefix of length {t} needs {t} observed rows in the model file", "condition")
    return t, bundle.state.with_observed(bundle.state.observed[:t]), prefix


def _market_doc(lay) -> dict:
    if isinstance(lay, NormalLayout):
        return {"kind": "normal", "n_z": lay.n_z, "n_x": lay.n_x, "rate": lay.rate}
    if isinstance(lay, FxLayout):
        return {"kind": "fx", "n_z": lay.n_z, "n_d": lay.n_d, "n_f": list(lay.n_f)}
    return {"kind": "hjm"}


def model_to_dict(bundle: ModelBundle) -> dict:
    m, st = bundle.model, bundle.state
    doc = {"dims": {"n": m.dim, "p": m.lag_order, "k": m.exo_dim, "N": m.n_regimes, "T": bundle.horizon}}
    if isinstance(m.cov, ConstantCovariance):
        covs = [{"sigma": s.tolist()} for s in m.cov.sigmas]
    else:
        covs = [{"b0": m.cov.b0[j].tolist(), "b": [x.tolist() for x in m.cov.b[j]]} for j in range(m.n_regimes)]
        doc["garch_initial"] = [s.tolist() for s in m.cov.initial_sigmas]
    doc["regimes"] = [{"A": c.tolist(), "cov": cv} for c, cv in zip(m.coeffs, covs)]
    doc["transition"] = m.transition.tolist()
    doc["initial_dist"] = m.initial_dist.tolist()
    doc["market"] = _market_doc(bundle.market)
    doc["state"] = {"y0": st.y_init.tolist(), "psi": st.psi.tolist()}
    if st.t:
        doc["state"]["observed"] = st.observed.tolist()
    return doc


def dump_model(bundle: ModelBundle) -> str:
    """JSON text; floats are written with round-trip precision."""
    return json.dumps(model_to_dict(bundle), indent=1)
