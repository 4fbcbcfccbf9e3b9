import json
import os
import subprocess
import sys

import pytest

from msvar_pricing.cli import main

from golden_commands import COMMANDS, GOLDEN, resolve


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("name", sorted(COMMANDS))
def test_golden_output(name, capsys):
    code, out, _ = run(resolve(COMMANDS[name]), capsys)
    assert code == 0
    assert out == (GOLDEN / f"{name}.txt").read_bytes().decode()


def test_unknown_subcommand(capsys):
    code, out, err = run(["bogus"], capsys)
    assert code == 2 and "usage" in err


def test_missing_required_option(capsys):
    code, _, err = run(["price", "normal", "--strike", "1"], capsys)
    assert code == 2 and "--weights" in err


def test_validation_exit_code_and_json_error(capsys):
    code, _, err = run(["price", "normal", "--weights", "asian:9", "--strike", "1", "--output", "json"], capsys)
    assert code == 3
    payload = json.loads(err)
    assert payload["error"] == "IndexOutOfRange" and payload["location"] == "asset"


def test_wrong_market(capsys):
    code, _, err = run(["price", "caplet", "--fixing", "2", "--start", "3", "--end", "4", "--strike", "0.02",
                        "--model", resolve(["@normal"])[0]], capsys)
    assert code == 3 and "market" in err


def test_numerical_exit_code(tmp_path, capsys):
    # the asset already has zero excess drift, so the kernel is zero and the variance weights are singular
    model = {
        "dims": {"n": 2, "p": 1, "k": 1, "N": 1, "T": 2},
        "regimes": [{"A": [[0.0, 0.5, 0.0], [0.0, 0.0, 1.0]], "cov": {"sigma": [[0.04, 0.0], [0.0, 0.25]]}}],
        "transition": [[1.0]], "initial_dist": [1.0],
        "market": {"kind": "normal", "n_z": 1, "n_x": 1, "rate": 0.0},
        "state": {"y0": [[0.0, 10.0]], "psi": [[1.0], [1.0]]},
    }
    path = tmp_path / "flat.json"
    path.write_text(json.dumps(model))
    code, _, err = run(["kernel", "--objective", "variance", "--model", str(path), "--output", "json"], capsys)
    assert code == 4 and json.loads(err)["error"] == "DegenerateKernel"


def test_seeded_runs_identical(capsys):
    argv = resolve(COMMANDS["price_normal"])
    assert run(argv, capsys)[1] == run(argv, capsys)[1]


def test_draw_averaging(tmp_path, capsys):
    doc = json.loads(open(resolve(["@normal"])[0]).read())
    block = {k: doc[k] for k in ("regimes", "transition", "initial_dist")}
    other = json.loads(json.dumps(block))
    other["transition"] = [[0.8, 0.2], [0.3, 0.7]]
    path = tmp_path / "draws.json"
    path.write_text(json.dumps({"draws": [block, other]}))
    code, out, _ = run(["price", "normal", "--weights", "asian:0", "--strike", "10.5", "--draws", str(path),
                        "--output", "json"], capsys)
    row = json.loads(out)[0]
    assert code == 0 and row["se"] > 0


@pytest.mark.parametrize("threads", ["1", "4"])
def test_thread_count_independence(threads):
    env = dict(os.environ, OMP_NUM_THREADS=threads, OPENBLAS_NUM_THREADS=threads, MKL_NUM_THREADS=threads)
    argv = resolve(COMMANDS["price_libor_caplet"])
    out = subprocess.run([sys.executable, "-m", "msvar_pricing", *argv], env=env, capture_output=True, text=True,
                         check=True).stdout
    assert out == (GOLDEN / "price_libor_caplet.txt").read_bytes().decode()
