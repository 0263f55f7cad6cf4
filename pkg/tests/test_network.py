import json

import pytest
from pydantic import ValidationError

from app.api.network import builtin_topology, instance_to_json, load_instance, save_instance, scenario_grid
from app.api.paths import enumerate_paths
from app.exceptions import InfeasibleError, InstanceError
from app.schemas.network import NetworkInstance, Request, Scenario
from tests.conftest import make_instance, make_request


def test_load_demo(demo_instance):
    assert len(demo_instance.nodes) == 6
    assert len(demo_instance.edges) == 7
    assert [r.id for r in demo_instance.requests] == [0, 1]
    assert demo_instance.edge(1, 0).base_fidelity == 0.6
    assert demo_instance.node_cost(3) == 155.0
    assert demo_instance.outbound[1] == ((1, 0), (1, 2), (1, 4))
    assert demo_instance.inbound[1] == ((0, 1), (2, 1), (4, 1))


def test_save_is_canonical(demo_file, demo_instance, tmp_path):
    path = tmp_path / "copy.json"
    save_instance(demo_instance, str(path))
    with open(demo_file, encoding="utf-8") as f:
        assert path.read_text(encoding="utf-8") == f.read()


def test_canonical_order(tmp_path):
    instance = make_instance(3, [(2, 1), (1, 0)], [make_request(5, 2, 0, [(0.9, 1.0)])])
    data = json.loads(instance_to_json(instance))
    assert [(e["u"], e["v"]) for e in data["edges"]] == [(0, 1), (1, 2)]
    assert data["requests"][0]["src"] == 2
    assert data["costs"]["ondemand"] == 200.0


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_instance(str(tmp_path / "missing.json"))


def test_load_reports_field(tmp_path, demo_file):
    with open(demo_file, encoding="utf-8") as f:
        data = json.load(f)
    data["requests"][0]["scenarios"][0]["prob"] = 0.9
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(ValidationError) as e:
        load_instance(str(path))
    assert "scenarios" in str(e.value)


def test_request_validation():
    with pytest.raises(ValidationError):
        Request(id=0, src=1, dst=1, scenarios=(Scenario(req=0.9, prob=1.0),))
    with pytest.raises(ValidationError):
        Request(id=0, src=0, dst=1, scenarios=(Scenario(req=0.9, prob=0.5), Scenario(req=0.8, prob=0.5)))
    with pytest.raises(ValidationError):
        Request(id=0, src=0, dst=1, scenarios=())

    request = make_request(0, 0, 1, [(0.8, 0.25), (0.9, 0.75)])
    assert request.expected_requirement() == pytest.approx(0.875)


def test_instance_validation(line3):
    with pytest.raises(ValidationError):
        make_instance(3, [(0, 1), (0, 1)])
    with pytest.raises(ValidationError):
        make_instance(3, [(0, 3)])
    with pytest.raises(ValidationError):
        # node 2 is isolated
        make_instance(3, [(0, 1)], [make_request(0, 0, 2, [(0.9, 1.0)])])
    with pytest.raises(ValidationError):
        line3.with_requests([make_request(0, 0, 2, [(0.9, 1.0)]), make_request(0, 1, 2, [(0.9, 1.0)])])
    with pytest.raises(ValidationError):
        NetworkInstance(nodes=line3.nodes[1:], edges=(), costs=line3.costs)


def test_builtin_topologies():
    nsfnet = builtin_topology("nsfnet")
    assert len(nsfnet.nodes) == 14
    assert len(nsfnet.edges) == 21
    assert not nsfnet.requests

    line = builtin_topology("line(4)", base_fidelity=0.8)
    assert sorted(line.edge_map) == [(0, 1), (1, 2), (2, 3)]
    assert all(edge.base_fidelity == 0.8 for edge in line.edges)

    grid = builtin_topology("grid(2,3)")
    assert len(grid.nodes) == 6
    assert len(grid.edges) == 7

    with pytest.raises(InstanceError):
        builtin_topology("torus(3)")


def test_scenario_grid():
    assert scenario_grid(0.25) == [0.0, 0.25, 0.5, 0.75]
    grid = scenario_grid(0.01)
    assert len(grid) == 100
    assert grid[-1] == 0.99
    with pytest.raises(InstanceError):
        scenario_grid(0.0)
    with pytest.raises(InstanceError):
        scenario_grid(0.1, f_max=1.5)


def test_enumerate_paths_line(line3):
    paths = enumerate_paths(line3, line3.requests[0], 10)
    assert [p.nodes for p in paths.paths] == [(0, 1, 2)]
    assert paths.paths[0].demands == ((2,), (2,))
    assert not paths.truncated


def test_enumerate_paths_cycle(cycle4):
    instance = cycle4.with_requests([make_request(0, 0, 2, [(0.9, 1.0)])])
    paths = enumerate_paths(instance, instance.requests[0], 10)
    assert [p.nodes for p in paths.paths] == [(0, 1, 2), (0, 3, 2)]
    assert all(p.hops == 2 for p in paths.paths)


def test_enumerate_paths_truncation(cycle4):
    instance = cycle4.with_requests([make_request(0, 0, 1, [(0.9, 1.0)])])
    paths = enumerate_paths(instance, instance.requests[0], 1)
    assert [p.nodes for p in paths.paths] == [(0, 1)]
    assert paths.truncated


def test_enumerate_paths_nsfnet(nsfnet_instance):
    request = nsfnet_instance.requests[0]
    paths = enumerate_paths(nsfnet_instance, request, 50)
    assert len(paths.paths) == 50
    assert paths.truncated
    keys = [(p.hops, p.nodes) for p in paths.paths]
    assert keys == sorted(keys)
    for path in paths.paths:
        assert len(set(path.nodes)) == len(path.nodes)
        assert path.nodes[0] == request.source
        assert path.nodes[-1] == request.destination


def test_enumerate_paths_blocked(cycle4):
    # edge (0, 1) cannot reach 0.99 with a single pair
    edges = [e if e.key != (0, 1) else e.model_copy(update={"cap_ondemand": 0, "cap_reserved": 1})
             for e in cycle4.edges]
    instance = cycle4.with_edges(edges).with_requests([make_request(0, 0, 2, [(0.8, 0.5), (0.99, 0.5)])])
    paths = enumerate_paths(instance, instance.requests[0], 10)
    assert [p.nodes for p in paths.paths] == [(0, 3, 2)]
    assert paths.blocked_paths == 1
    assert paths.blocked_edges == ((0, 1),)

    line = make_instance(2, [(0, 1)], [make_request(0, 0, 1, [(0.99, 1.0)])], cap_reserved=1, cap_ondemand=0)
    with pytest.raises(InfeasibleError) as e:
        enumerate_paths(line, line.requests[0], 10)
    assert e.value.diagnostics == [(0, 1)]
