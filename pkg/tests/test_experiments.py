import io

import numpy as np
import pandas as pd
import pytest

from app.api.network import builtin_topology
from app.exceptions import InstanceError
from app.schemas.solution import SolverOptions
from app.transformations.experiments import (
    csv_text,
    requirement_range,
    run_compare_models,
    run_header,
    run_sweep_fidelity,
    run_sweep_reservation,
)
from app.transformations.generators import random_requests, uniform_scenarios


def test_requirement_range():
    assert requirement_range(0.5, 0.55, 0.01) == [0.5, 0.51, 0.52, 0.53, 0.54, 0.55]
    assert len(requirement_range(0.5, 0.99, 0.01)) == 50
    with pytest.raises(InstanceError):
        requirement_range(0.9, 0.8, 0.01)
    with pytest.raises(InstanceError):
        requirement_range(0.8, 0.9, 0.0)


def test_sweep_reservation(demo_instance):
    df = run_sweep_reservation(demo_instance, 0, 40)
    assert list(df["forced_reservation"]) == list(range(41))
    assert (df["status"] == "optimal").all()
    assert df["stage1"].is_monotonic_increasing
    assert df["stage2"].is_monotonic_decreasing
    assert int(df.loc[df["total"].idxmin(), "forced_reservation"]) == 36


def test_sweep_reservation_route_limit(demo_instance):
    # two simple paths can cover at most six of the seven edges
    df = run_sweep_reservation(demo_instance, 60, 61)
    assert list(df["status"]) == ["optimal", "infeasible"]
    assert pd.isna(df.loc[1, "total"])

    beyond = run_sweep_reservation(demo_instance, 71, 71)
    assert list(beyond["status"]) == ["infeasible"]


def test_sweep_fidelity(demo_instance):
    df = run_sweep_fidelity(demo_instance, 0.5, 0.99, 0.01)
    assert len(df) == 50
    assert (df["status"] == "optimal").all()
    assert df["reserved"].is_monotonic_increasing
    assert df["utilized"].is_monotonic_increasing
    assert df[df["requirement"] <= 0.8]["reserved"].nunique() == 1
    assert (df[df["ondemand"] > 0]["max_edge_reserved"] == 10).all()
    last = df.iloc[-1]
    assert last["ondemand"] > 0


def test_uniform_scenarios():
    scenarios = uniform_scenarios(0.01, 0.8)
    assert [s.requirement for s in scenarios][:3] == [0.8, 0.81, 0.82]
    assert scenarios[-1].requirement == 0.99
    assert len(scenarios) == 20
    assert sum(s.probability for s in scenarios) == pytest.approx(1.0)


def test_random_requests_deterministic():
    topology = builtin_topology("nsfnet")
    first = random_requests(topology, 3, np.random.default_rng([1, 3, 0]))
    second = random_requests(topology, 3, np.random.default_rng([1, 3, 0]))
    assert first == second
    assert [r.id for r in first] == [0, 1, 2]
    assert len({(r.source, r.destination) for r in first}) == 3
    assert all(r.source < r.destination for r in first)
    with pytest.raises(InstanceError):
        random_requests(builtin_topology("line(2)"), 2, np.random.default_rng(0))


def test_compare_models_gap():
    topology = builtin_topology("nsfnet", base_fidelity=0.75)
    options = SolverOptions(max_paths=20)
    df = run_compare_models(topology, [2], seed=3, samples=2, options=options)
    row = df.iloc[0]
    assert row["n_requests"] == 2
    assert row["infeasible_samples"] == 0
    assert row["cost_ws"] <= row["cost_sp"] + 1e-9
    assert row["cost_sp"] <= row["cost_evp"] + 1e-9
    assert row["gap_percent"] >= 20.0

    again = run_compare_models(topology, [2], seed=3, samples=2, options=options.model_copy(update={"threads": 2}))
    pd.testing.assert_frame_equal(df, again)


def test_csv_text():
    df = pd.DataFrame({"forced_reservation": [0, 1], "total": [1.5, 2.0]})
    header = run_header("sweep-reservation", SolverOptions(), instance="demo.json")
    text = csv_text(df, header)
    lines = text.splitlines()
    assert lines[0] == "# command: sweep-reservation"
    assert "# f_max: 0.99" in lines
    assert not any("threads" in line for line in lines)
    assert lines[-3] == "forced_reservation,total"
    back = pd.read_csv(io.StringIO(text), comment="#")
    pd.testing.assert_frame_equal(back, df)
