import os

import logfire
import numpy as np
import pytest

from app.api.network import DATA_PATH, load_instance
from app.schemas.network import CostParams, Edge, NetworkInstance, NodeSpec, Request, Scenario


logfire.configure(send_to_logfire=False, console=False)


BENCHMARK_COSTS = CostParams(energy=5.0, setup=150.0, reserve=10.0, utilize=1.0, ondemand=200.0)


def make_instance(
    n_nodes: int,
    links: list[tuple[int, int]],
    requests: list[Request] | None = None,
    base_fidelity: float = 0.75,
    threshold: float = 0.8,
    cap_reserved: int = 10,
    cap_ondemand: int = 60,
    costs: CostParams = BENCHMARK_COSTS,
) -> NetworkInstance:
    return NetworkInstance(
        nodes=tuple(NodeSpec(id=i) for i in range(n_nodes)),
        edges=tuple(
            Edge(u=u, v=v, fidelity=base_fidelity, cap_reserved=cap_reserved,
                 cap_ondemand=cap_ondemand, threshold=threshold)
            for u, v in links
        ),
        requests=tuple(requests or ()),
        costs=costs,
    )


def make_request(request_id: int, src: int, dst: int, scenarios: list[tuple[float, float]]) -> Request:
    return Request(
        id=request_id, src=src, dst=dst,
        scenarios=tuple(Scenario(req=req, prob=prob) for req, prob in scenarios),
    )


@pytest.fixture(scope="session")
def demo_file():
    return os.path.join(DATA_PATH, "demo.json")


@pytest.fixture(scope="session")
def demo_instance(demo_file):
    return load_instance(demo_file)


@pytest.fixture(scope="session")
def nsfnet_instance():
    return load_instance(os.path.join(DATA_PATH, "nsfnet.json"))


@pytest.fixture
def line3():
    """Path 0-1-2 with one request 0 -> 2 needing 0.9."""
    return make_instance(3, [(0, 1), (1, 2)], [make_request(0, 0, 2, [(0.9, 1.0)])])


@pytest.fixture
def cycle4():
    return make_instance(4, [(0, 1), (1, 2), (2, 3), (0, 3)])


@pytest.fixture
def single_edge():
    """One edge whose demand is 2 pairs at 0.9 and 4 pairs at 0.98 for base 0.75."""
    return make_instance(2, [(0, 1)], [make_request(0, 0, 1, [(0.9, 0.5), (0.98, 0.5)])])


def random_small_instance(seed: int) -> NetworkInstance:
    """Random connected instance within the brute-force limits, on-demand sometimes cheaper than utilization."""
    rng = np.random.default_rng([seed, 7])
    n_nodes = int(rng.integers(3, 6))
    links = {(int(rng.integers(0, i)), i) for i in range(1, n_nodes)}
    for u in range(n_nodes):
        for v in range(u + 1, n_nodes):
            if rng.random() < 0.35:
                links.add((u, v))

    edges = tuple(
        Edge(
            u=u, v=v,
            fidelity=float(rng.choice([0.6, 0.7, 0.8, 0.9])),
            cap_reserved=int(rng.integers(0, 6)),
            cap_ondemand=int(rng.integers(0, 6)),
            threshold=float(rng.choice([0.5, 0.7, 0.8])),
        )
        for u, v in sorted(links)
    )
    nodes = tuple(
        NodeSpec(id=i, energy=float(rng.integers(0, 20))) if rng.random() < 0.2 else NodeSpec(id=i)
        for i in range(n_nodes)
    )

    utilize = float(rng.integers(0, 6))
    ondemand = utilize / 2 if rng.random() < 0.25 else float(rng.integers(20, 201))
    costs = CostParams(
        energy=float(rng.integers(0, 11)),
        setup=float(rng.integers(0, 51)),
        reserve=float(rng.integers(1, 21)),
        utilize=utilize,
        ondemand=ondemand,
    )

    requests = []
    for request_id in range(int(rng.integers(1, 3))):
        src, dst = (int(x) for x in rng.choice(n_nodes, size=2, replace=False))
        count = int(rng.integers(1, 4))
        requirements = sorted(float(x) for x in rng.choice([0.6, 0.7, 0.8, 0.85, 0.9, 0.95], size=count, replace=False))
        weights = rng.integers(1, 5, size=count)
        probabilities = [float(w) / float(weights.sum()) for w in weights]
        requests.append(make_request(request_id, src, dst, list(zip(requirements, probabilities))))

    return NetworkInstance(nodes=nodes, edges=edges, requests=tuple(requests), costs=costs)


@pytest.fixture
def small_instance_factory():
    return random_small_instance
