import json
import os
import re
from typing import Optional

import logfire
import numpy as np

from app.config import config
from app.exceptions import InstanceError
from app.schemas.network import CostParams, Edge, NetworkInstance, NodeSpec


# path to data folder
DATA_PATH = os.path.abspath(os.path.join(os.path.dirname(__file__), '../data'))

# standard 14-node / 21-link NSFNET T1 backbone
NSFNET_LINKS = (
    (0, 1), (0, 2), (0, 7), (1, 2), (1, 3), (2, 5), (3, 4), (3, 10), (4, 5), (4, 6), (5, 9),
    (5, 13), (6, 7), (7, 8), (8, 9), (8, 11), (8, 12), (10, 11), (10, 12), (11, 13), (12, 13),
)

_LINE_PATTERN = re.compile(r"^line\((\d+)\)$")
_GRID_PATTERN = re.compile(r"^grid\((\d+),\s*(\d+)\)$")


def load_instance(path: str) -> NetworkInstance:
    """
    Reads an instance file and validates it. The schema is enforced by pydantic,
    so a malformed file or an invariant violation raises ``ValidationError``
    naming the offending field.

    :param path: Path to the JSON instance file.
    :type path: str
    :raises FileNotFoundError: If the file does not exist.
    :return: The validated instance with adjacency sets built.
    :rtype: NetworkInstance
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Instance file {path} not found.")
    with open(path, encoding="utf-8") as f:
        instance = NetworkInstance.model_validate_json(f.read())
    logfire.info(
        "loaded instance {path}",
        path=path,
        nodes=len(instance.nodes),
        edges=len(instance.edges),
        requests=len(instance.requests),
    )
    return instance


def instance_to_json(instance: NetworkInstance) -> str:
    """Canonical JSON text of ``instance`` (sorted entities, two-space indent)."""
    data = {
        "nodes": [
            node.model_dump(by_alias=True, exclude_none=True)
            for node in sorted(instance.nodes, key=lambda n: n.id)
        ],
        "edges": [
            Edge(
                u=edge.key[0], v=edge.key[1], fidelity=edge.base_fidelity, cap_reserved=edge.cap_reserved,
                cap_ondemand=edge.cap_ondemand, threshold=edge.fidelity_threshold,
            ).model_dump(by_alias=True)
            for edge in sorted(instance.edges, key=lambda e: e.key)
        ],
        "requests": [
            request.model_dump(by_alias=True, mode="json")
            for request in sorted(instance.requests, key=lambda r: r.id)
        ],
        "costs": instance.costs.model_dump(by_alias=True),
    }
    return json.dumps(data, indent=2) + "\n"


def save_instance(instance: NetworkInstance, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(instance_to_json(instance))


def default_costs() -> CostParams:
    return CostParams(
        energy=config.COST_ENERGY,
        setup=config.COST_SETUP,
        reserve=config.COST_RESERVE,
        utilize=config.COST_UTILIZE,
        ondemand=config.COST_ONDEMAND,
    )


def _make_topology(
    n_nodes: int,
    links: list[tuple[int, int]] | tuple[tuple[int, int], ...],
    base_fidelity: Optional[float],
    costs: Optional[CostParams],
) -> NetworkInstance:
    fidelity = config.DEFAULT_BASE_FIDELITY if base_fidelity is None else base_fidelity
    edges = [
        Edge(
            u=u,
            v=v,
            fidelity=fidelity,
            cap_reserved=config.DEFAULT_CAP_RESERVED,
            cap_ondemand=config.DEFAULT_CAP_ONDEMAND,
            threshold=config.DEFAULT_THRESHOLD,
        )
        for u, v in links
    ]
    return NetworkInstance(
        nodes=tuple(NodeSpec(id=i) for i in range(n_nodes)),
        edges=tuple(edges),
        costs=costs or default_costs(),
    )


def builtin_topology(
    name: str,
    base_fidelity: Optional[float] = None,
    costs: Optional[CostParams] = None,
) -> NetworkInstance:
    """
    Builds one of the bundled topologies without requests. Capacities, thresholds
    and the per-edge base fidelity come from ``config`` unless overridden.

    :param name: ``nsfnet``, ``line(k)`` or ``grid(a,b)``.
    :type name: str
    :param base_fidelity: Base fidelity applied to every edge.
    :type base_fidelity: float, optional
    :param costs: Cost parameters; the configured defaults when omitted.
    :type costs: CostParams, optional
    :raises InstanceError: If the name is not a known topology.
    :return: The topology as an instance with an empty request list.
    :rtype: NetworkInstance
    """
    name = name.strip().lower()
    if name == "nsfnet":
        return _make_topology(14, NSFNET_LINKS, base_fidelity, costs)

    if match := _LINE_PATTERN.match(name):
        k = int(match.group(1))
        if k < 2:
            raise InstanceError("line topology needs at least 2 nodes")
        return _make_topology(k, [(i, i + 1) for i in range(k - 1)], base_fidelity, costs)

    if match := _GRID_PATTERN.match(name):
        a, b = int(match.group(1)), int(match.group(2))
        if a < 1 or b < 1 or a * b < 2:
            raise InstanceError("grid topology needs at least 2 nodes")
        links = [(i * b + j, i * b + j + 1) for i in range(a) for j in range(b - 1)]
        links += [(i * b + j, (i + 1) * b + j) for i in range(a - 1) for j in range(b)]
        return _make_topology(a * b, sorted(links), base_fidelity, costs)

    raise InstanceError(f"unknown topology {name!r}; expected nsfnet, line(k) or grid(a,b)")


def scenario_grid(step: float, f_max: float = config.F_MAX) -> list[float]:
    """
    Ascending requirement grid ``0, step, 2*step, ...`` keeping only values up to
    ``f_max``.

    :param step: Grid spacing in (0, 1].
    :param f_max: Largest admissible requirement.
    :return: The grid values, rounded to 10 decimals.
    """
    if not 0.0 < step <= 1.0:
        raise InstanceError(f"grid step {step} outside (0, 1]")
    if f_max > 1.0:
        raise InstanceError(f"f_max {f_max} above 1")
    if f_max < 0.0:
        return []
    count = int(np.floor(f_max / step + 1e-9)) + 1
    return [float(v) for v in np.round(np.arange(count) * step, 10)]
