import io
import json
import os

import pandas as pd
import pytest
from typer.testing import CliRunner

from app.api.network import save_instance
from planner import app
from tests.conftest import make_instance, make_request


runner = CliRunner()


@pytest.fixture
def small_file(tmp_path):
    instance = make_instance(
        3, [(0, 1), (1, 2), (0, 2)],
        [make_request(0, 0, 2, [(0.85, 0.5), (0.95, 0.5)])],
        cap_reserved=4, cap_ondemand=4,
    )
    path = os.path.join(tmp_path, "small.json")
    save_instance(instance, path)
    return path


def test_solve_to_file(demo_file, tmp_path):
    out = os.path.join(tmp_path, "solution.json")
    result = runner.invoke(app, ["solve", demo_file, "--out", out])
    assert result.exit_code == 0, result.output
    with open(out, encoding="utf-8") as f:
        solution = json.load(f)
    assert solution["kind"] == "sp"
    assert [r["path"] for r in solution["routes"]] == [[0, 1, 2], [3, 4, 5]]
    assert solution["objective"]["total"] == pytest.approx(
        solution["objective"]["stage1"] + solution["objective"]["stage2"]
    )


@pytest.mark.parametrize("model,kind", [("evp", "evp"), ("ws", None)])
def test_solve_baselines(demo_file, tmp_path, model, kind):
    out = os.path.join(tmp_path, f"{model}.json")
    result = runner.invoke(app, ["solve", demo_file, "--model", model, "--out", out])
    assert result.exit_code == 0, result.output
    with open(out, encoding="utf-8") as f:
        data = json.load(f)
    if kind:
        assert data["kind"] == kind
    else:
        assert data["mode"] == "joint"
        assert len(data["outcomes"]) == 9


def test_dump_model(small_file, tmp_path):
    dump = os.path.join(tmp_path, "model.lp")
    result = runner.invoke(app, ["solve", small_file, "--dump-model", dump, "--out", os.path.join(tmp_path, "s.json")])
    assert result.exit_code == 0, result.output
    with open(dump, encoding="utf-8") as f:
        text = f.read()
    assert text.startswith("minimize\n")
    assert text.endswith("end\n")


def test_sweep_reservation_csv(demo_file, tmp_path):
    out = os.path.join(tmp_path, "reservation.csv")
    result = runner.invoke(app, ["sweep-reservation", demo_file, "--from", "30", "--to", "40", "--out", out])
    assert result.exit_code == 0, result.output
    with open(out, encoding="utf-8") as f:
        text = f.read()
    assert text.startswith("# command: sweep-reservation\n")
    df = pd.read_csv(io.StringIO(text), comment="#")
    assert list(df["forced_reservation"]) == list(range(30, 41))
    assert int(df.loc[df["total"].idxmin(), "forced_reservation"]) == 36


def test_sweep_fidelity_deterministic(demo_file, tmp_path):
    outputs = []
    for name, threads in (("one.csv", "1"), ("two.csv", "3")):
        out = os.path.join(tmp_path, name)
        result = runner.invoke(
            app,
            ["--threads", threads, "sweep-fidelity", demo_file, "--from", "0.8", "--to", "0.9", "--step", "0.05",
             "--out", out],
        )
        assert result.exit_code == 0, result.output
        with open(out, "rb") as f:
            outputs.append(f.read())
    assert outputs[0] == outputs[1]
    df = pd.read_csv(io.BytesIO(outputs[0]), comment="#")
    assert list(df["requirement"]) == [0.8, 0.85, 0.9]


def test_compare_models(tmp_path):
    out = os.path.join(tmp_path, "compare.csv")
    result = runner.invoke(
        app,
        ["--max-paths", "10", "compare-models", "--topology", "line(4)", "--requests", "1,2",
         "--samples", "2", "--seed", "5", "--base-fidelity", "0.75", "--step", "0.05", "--out", out],
    )
    assert result.exit_code == 0, result.output
    df = pd.read_csv(out, comment="#")
    assert list(df["n_requests"]) == [1, 2]
    assert (df["cost_ws"] <= df["cost_sp"] + 1e-9).all()
    assert (df["cost_sp"] <= df["cost_evp"] + 1e-9).all()


def test_compare_models_needs_one_source(demo_file):
    result = runner.invoke(app, ["compare-models", demo_file, "--topology", "nsfnet"])
    assert result.exit_code != 0


def test_oracle_check(small_file):
    result = runner.invoke(app, ["oracle-check", small_file])
    assert result.exit_code == 0, result.output
    assert result.output.strip().splitlines()[-1] == "match"


def test_oracle_check_refuses_large(demo_file):
    result = runner.invoke(app, ["oracle-check", demo_file])
    assert result.exit_code == 1


def test_bad_instance_file(tmp_path):
    missing = runner.invoke(app, ["solve", os.path.join(tmp_path, "missing.json")])
    assert missing.exit_code == 1

    broken = os.path.join(tmp_path, "broken.json")
    with open(broken, "w", encoding="utf-8") as f:
        f.write('{"nodes": [{"id": 0}], "edges": [], "costs": {}}')
    result = runner.invoke(app, ["solve", broken])
    assert result.exit_code == 1


def test_infeasible_exit_code(tmp_path):
    instance = make_instance(2, [(0, 1)], [make_request(0, 0, 1, [(0.99, 1.0)])], cap_reserved=1, cap_ondemand=1)
    path = os.path.join(tmp_path, "infeasible.json")
    save_instance(instance, path)
    result = runner.invoke(app, ["solve", path])
    assert result.exit_code == 1
