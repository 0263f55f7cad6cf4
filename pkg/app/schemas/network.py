from functools import cached_property
from typing import Optional

import more_itertools
import networkx as nx
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


PROBABILITY_TOLERANCE = 1e-9

EdgeKey = tuple[int, int]


def edge_key(u: int, v: int) -> EdgeKey:
    """Canonical (undirected) key of the edge between ``u`` and ``v``."""
    return (u, v) if u < v else (v, u)


class Scenario(BaseModel):
    """
    One realisation of a request's fidelity requirement together with the
    probability of that realisation.
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    requirement: float = Field(alias="req", ge=0.0, le=1.0, description="Required fidelity")
    probability: float = Field(alias="prob", ge=0.0, le=1.0, description="Probability of the scenario")


class Request(BaseModel):
    """
    A source-destination pair that must be connected by entangled pairs whose
    fidelity meets a requirement known only through its scenario distribution.
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    id: int = Field(description="Request identifier")
    source: int = Field(alias="src", ge=0, description="Source node id")
    destination: int = Field(alias="dst", ge=0, description="Destination node id")
    scenarios: tuple[Scenario, ...] = Field(min_length=1, description="Requirement scenarios, ascending")

    @field_validator("scenarios")
    @classmethod
    def check_distribution(cls, scenarios: tuple[Scenario, ...]) -> tuple[Scenario, ...]:
        total = sum(s.probability for s in scenarios)
        if abs(total - 1.0) > PROBABILITY_TOLERANCE:
            raise ValueError(f"scenario probabilities sum to {total}, expected 1")
        if not more_itertools.is_sorted((s.requirement for s in scenarios), strict=True):
            raise ValueError("scenario requirements must be strictly ascending")
        return scenarios

    @model_validator(mode="after")
    def check_endpoints(self) -> "Request":
        if self.source == self.destination:
            raise ValueError(f"request {self.id}: source and destination must differ")
        return self

    @property
    def requirements(self) -> tuple[float, ...]:
        return tuple(s.requirement for s in self.scenarios)

    @property
    def probabilities(self) -> tuple[float, ...]:
        return tuple(s.probability for s in self.scenarios)

    def expected_requirement(self) -> float:
        return sum(s.requirement * s.probability for s in self.scenarios)

    def with_scenarios(self, scenarios: list[Scenario]) -> "Request":
        return Request(id=self.id, source=self.source, destination=self.destination, scenarios=tuple(scenarios))


class NodeSpec(BaseModel):
    """A quantum node. Cost fields override the instance-wide scalars when set."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    id: int = Field(ge=0, description="Dense node identifier")
    energy: Optional[float] = Field(default=None, ge=0.0, description="Energy cost override")
    setup: Optional[float] = Field(default=None, ge=0.0, description="Repeater setup cost override")


class Edge(BaseModel):
    """
    An undirected quantum channel. All entangled pairs on one edge share the same
    base fidelity; both directions draw from the same capacities.
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    u: int = Field(ge=0)
    v: int = Field(ge=0)
    base_fidelity: float = Field(alias="fidelity", gt=0.0, le=1.0, description="Fidelity of one raw pair")
    cap_reserved: int = Field(ge=0, description="Maximum pairs booked in the reservation phase")
    cap_ondemand: int = Field(ge=0, description="Maximum pairs bought in the on-demand phase")
    fidelity_threshold: float = Field(alias="threshold", ge=0.0, le=1.0, description="Minimum fidelity on the edge")

    @model_validator(mode="after")
    def check_loop(self) -> "Edge":
        if self.u == self.v:
            raise ValueError(f"edge ({self.u}, {self.v}) is a self loop")
        return self

    @property
    def key(self) -> EdgeKey:
        return edge_key(self.u, self.v)

    @property
    def max_pairs(self) -> int:
        return self.cap_reserved + self.cap_ondemand


class CostParams(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    energy_per_node: float = Field(alias="energy", ge=0.0)
    repeater_setup: float = Field(alias="setup", ge=0.0)
    reserve_per_pair: float = Field(alias="reserve", ge=0.0)
    utilize_per_pair: float = Field(alias="utilize", ge=0.0)
    ondemand_per_pair: float = Field(alias="ondemand", ge=0.0)


class NetworkInstance(BaseModel):
    """
    The network graph, its requests and the cost parameters. Validated on
    construction and immutable afterwards, so one instance can be shared by
    concurrent solves.
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    nodes: tuple[NodeSpec, ...]
    edges: tuple[Edge, ...]
    requests: tuple[Request, ...] = ()
    costs: CostParams

    @model_validator(mode="after")
    def check_graph(self) -> "NetworkInstance":
        ids = sorted(node.id for node in self.nodes)
        if ids != list(range(len(ids))):
            raise ValueError("node ids must form the dense range 0..|M|-1")

        seen: set[EdgeKey] = set()
        for index, edge in enumerate(self.edges):
            if edge.u >= len(ids) or edge.v >= len(ids):
                raise ValueError(f"edges[{index}]: endpoint not in the node set")
            if edge.key in seen:
                raise ValueError(f"edges[{index}]: duplicate edge {edge.key}")
            seen.add(edge.key)

        request_ids = [request.id for request in self.requests]
        if len(set(request_ids)) != len(request_ids):
            raise ValueError("request ids must be unique")
        for index, request in enumerate(self.requests):
            if request.source >= len(ids) or request.destination >= len(ids):
                raise ValueError(f"requests[{index}]: endpoint not in the node set")
            if not nx.has_path(self.graph, request.source, request.destination):
                raise ValueError(
                    f"requests[{index}]: destination {request.destination} unreachable from {request.source}"
                )
        return self

    @cached_property
    def graph(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(len(self.nodes)))
        graph.add_edges_from(edge.key for edge in self.edges)
        return graph

    @cached_property
    def node_map(self) -> dict[int, NodeSpec]:
        return {node.id: node for node in self.nodes}

    @cached_property
    def edge_map(self) -> dict[EdgeKey, Edge]:
        return {edge.key: edge for edge in self.edges}

    @cached_property
    def outbound(self) -> dict[int, tuple[tuple[int, int], ...]]:
        """Directed links leaving each node (one per incident edge)."""
        links: dict[int, list[tuple[int, int]]] = {node.id: [] for node in self.nodes}
        for u, v in sorted(self.edge_map):
            links[u].append((u, v))
            links[v].append((v, u))
        return {node: tuple(sorted(items)) for node, items in links.items()}

    @cached_property
    def inbound(self) -> dict[int, tuple[tuple[int, int], ...]]:
        """Directed links entering each node (one per incident edge)."""
        return {
            node: tuple(sorted((j, i) for i, j in links))
            for node, links in self.outbound.items()
        }

    def edge(self, u: int, v: int) -> Edge:
        return self.edge_map[edge_key(u, v)]

    def node_cost(self, node: int) -> float:
        """Energy plus repeater setup paid when a route enters ``node``."""
        spec = self.node_map[node]
        energy = self.costs.energy_per_node if spec.energy is None else spec.energy
        setup = self.costs.repeater_setup if spec.setup is None else spec.setup
        return energy + setup

    def request(self, request_id: int) -> Request:
        return next(request for request in self.requests if request.id == request_id)

    def with_requests(self, requests: list[Request] | tuple[Request, ...]) -> "NetworkInstance":
        return NetworkInstance(nodes=self.nodes, edges=self.edges, requests=tuple(requests), costs=self.costs)

    def with_edges(self, edges: list[Edge] | tuple[Edge, ...]) -> "NetworkInstance":
        return NetworkInstance(nodes=self.nodes, edges=tuple(edges), requests=self.requests, costs=self.costs)
