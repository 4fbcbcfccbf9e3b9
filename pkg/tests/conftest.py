import numpy as np
import pytest

from msvar_pricing.cli import desk_model_path
from msvar_pricing.io import load_model
from msvar_pricing.model import ConstantCovariance, MsVarModel, PathState


def _bundle(kind):
    b = load_model(desk_model_path(kind))
    return b


@pytest.fixture(scope="session")
def desk_normal():
    return _bundle("normal")


@pytest.fixture(scope="session")
def desk_fx():
    return _bundle("fx")


@pytest.fixture(scope="session")
def desk_hjm():
    return _bundle("hjm")


def at_start(bundle):
    """Desk state with the observed rows dropped (pricing at t = 0)."""
    return bundle.state.with_observed(bundle.state.observed[:0])


def random_spd(rng, n, scale=1.0):
    g = rng.standard_normal((n, n))
    return scale * (g @ g.T / n + 0.3 * np.eye(n))


def random_model(rng, n=2, p=1, k=1, N=2, scale=0.1):
    coeffs = []
    for _ in range(N):
        c = rng.standard_normal((n, k + n * p)) * scale
        c[:, k:k + n] += 0.5 * np.eye(n)
        coeffs.append(c)
    P = rng.dirichlet(np.ones(N), size=N)
    init = rng.dirichlet(np.ones(N))
    sig = ConstantCovariance(tuple(random_spd(rng, n, 0.05) for _ in range(N)))
    return MsVarModel(tuple(coeffs), P, init, sig, p)


def random_state(rng, model, T):
    return PathState(rng.standard_normal((model.lag_order, model.dim)), np.ones((T, model.exo_dim)))


ACCEPTANCE = {}


def record(number, ok, detail):
    ACCEPTANCE[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
