import itertools
from typing import Optional

import networkx as nx
import numpy as np

from app.api.network import scenario_grid
from app.config import config
from app.exceptions import InstanceError
from app.schemas.network import NetworkInstance, Request, Scenario


def uniform_scenarios(step: float, low: float, f_max: float = config.F_MAX) -> list[Scenario]:
    """Equiprobable scenarios over the requirement grid restricted to ``[low, f_max]``."""
    values = [value for value in scenario_grid(step, f_max) if value >= low - 1e-9]
    if not values:
        raise InstanceError(f"no grid value of step {step} in [{low}, {f_max}]")
    probability = 1.0 / len(values)
    return [Scenario(req=value, prob=probability) for value in values]


def random_requests(
    instance: NetworkInstance,
    n_requests: int,
    rng: np.random.Generator,
    step: float = 0.01,
    low: Optional[float] = None,
    f_max: float = config.F_MAX,
) -> list[Request]:
    """
    Draws ``n_requests`` requests over distinct, connected endpoint pairs. Every
    request gets the uniform distribution over the requirement grid.

    :param instance: Topology to place the requests on.
    :param n_requests: Number of requests.
    :param rng: Seeded generator; callers derive it from (seed, n_requests, sample).
    :param step: Requirement grid spacing.
    :param low: Smallest requirement; the configured edge threshold when omitted.
    :param f_max: Largest requirement.
    :raises InstanceError: If there are fewer connected pairs than requests.
    :return: Requests with ids ``0..n_requests-1``.
    """
    low = config.DEFAULT_THRESHOLD if low is None else low
    graph = instance.graph
    pairs = [
        (a, b)
        for a, b in itertools.combinations(sorted(graph.nodes), 2)
        if nx.has_path(graph, a, b)
    ]
    if n_requests > len(pairs):
        raise InstanceError(f"{n_requests} requests but only {len(pairs)} connected node pairs")

    scenarios = uniform_scenarios(step, low, f_max)
    picked = rng.choice(len(pairs), size=n_requests, replace=False)
    return [
        Request(id=i, src=pairs[index][0], dst=pairs[index][1], scenarios=tuple(scenarios))
        for i, index in enumerate(sorted(int(p) for p in picked))
    ]
