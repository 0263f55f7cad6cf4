import itertools
from typing import Iterator, Optional

import logfire
from pydantic import BaseModel, ConfigDict

from app.exceptions import OracleLimitError
from app.models.purification import purification_table
from app.schemas.network import EdgeKey, NetworkInstance, Request, edge_key
from app.schemas.solution import (
    EdgeAllocation,
    OracleResult,
    RouteAssignment,
    Solution,
    SolverOptions,
    SpObjective,
)


class OracleLimits(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_nodes: int = 6
    max_requests: int = 2
    max_scenarios: int = 3
    max_capacity: int = 8


# (stage-1 cost, expected stage-2 cost, per-scenario splits) of one request on one edge
_Recourse = tuple[float, float, tuple[tuple[int, int], ...]]


def _simple_paths(instance: NetworkInstance, source: int, target: int) -> list[tuple[int, ...]]:
    adjacency: dict[int, list[int]] = {node.id: [] for node in instance.nodes}
    for edge in instance.edges:
        adjacency[edge.u].append(edge.v)
        adjacency[edge.v].append(edge.u)

    found: list[tuple[int, ...]] = []
    stack = [(source, (source,))]
    while stack:
        node, path = stack.pop()
        if node == target:
            found.append(path)
            continue
        for nxt in sorted(adjacency[node], reverse=True):
            if nxt not in path:
                stack.append((nxt, path + (nxt,)))
    return sorted(found, key=lambda p: (len(p), p))


def _check_limits(instance: NetworkInstance, limits: OracleLimits) -> None:
    if len(instance.nodes) > limits.max_nodes:
        raise OracleLimitError(f"{len(instance.nodes)} nodes exceed the oracle limit of {limits.max_nodes}")
    if len(instance.requests) > limits.max_requests:
        raise OracleLimitError(f"{len(instance.requests)} requests exceed the oracle limit of {limits.max_requests}")
    for request in instance.requests:
        if len(request.scenarios) > limits.max_scenarios:
            raise OracleLimitError(f"request {request.id} has more than {limits.max_scenarios} scenarios")
    for edge in instance.edges:
        if max(edge.cap_reserved, edge.cap_ondemand) > limits.max_capacity:
            raise OracleLimitError(f"edge {edge.key} capacity exceeds the oracle limit of {limits.max_capacity}")


class _BruteForce:
    def __init__(self, instance: NetworkInstance, options: SolverOptions):
        self.instance = instance
        self.options = options
        self.examined = 0
        self._recourse: dict[tuple, Optional[_Recourse]] = {}
        self._edges: dict[tuple, Optional[tuple[float, list[tuple[int, int, _Recourse]]]]] = {}

    def recourse(self, edge: EdgeKey, request: Request, head: int, reserved: int, ceiling: int) -> Optional[_Recourse]:
        """Cheapest split per scenario over every (utilized, on-demand) pair within the bounds."""
        key = (edge, request.id, head, reserved, ceiling)
        if key in self._recourse:
            return self._recourse[key]
        spec = self.instance.edge_map[edge]
        costs = self.instance.costs
        fidelity = purification_table(spec.base_fidelity, max(1, spec.cap_reserved + spec.cap_ondemand)).achieved

        reserve_cost = costs.reserve_per_pair
        if self.options.per_pair_node_cost:
            reserve_cost += self.instance.node_cost(head)

        stage2 = 0.0
        splits = []
        for scenario in request.scenarios:
            target = max(scenario.requirement, spec.fidelity_threshold)
            best: Optional[tuple[float, tuple[int, int]]] = None
            if target >= 1.0:
                # perfect fidelity is not reachable by finite purification
                self._recourse[key] = None
                return None
            for used in range(reserved + 1):
                for bought in range(ceiling + 1):
                    if used + bought < 1 or fidelity[used + bought] < target:
                        continue
                    price = costs.utilize_per_pair * used + costs.ondemand_per_pair * bought
                    if best is None or price < best[0]:
                        best = (price, (used, bought))
            if best is None:
                self._recourse[key] = None
                return None
            stage2 += scenario.probability * best[0]
            splits.append(best[1])

        result = (reserve_cost * reserved, stage2, tuple(splits))
        self._recourse[key] = result
        return result

    def edge_cost(
        self, edge: EdgeKey, uses: tuple[tuple[Request, int], ...]
    ) -> Optional[tuple[float, list[tuple[int, int, _Recourse]]]]:
        """Every reservation vector and on-demand ceiling vector within the edge capacities."""
        key = (edge, tuple((r.id, head) for r, head in uses))
        if key in self._edges:
            return self._edges[key]
        spec = self.instance.edge_map[edge]
        best: Optional[tuple[float, list[tuple[int, int, _Recourse]]]] = None
        count = len(uses)
        for reserved in itertools.product(range(spec.cap_reserved + 1), repeat=count):
            if sum(reserved) > spec.cap_reserved:
                continue
            for ceilings in itertools.product(range(spec.cap_ondemand + 1), repeat=count):
                if sum(ceilings) > spec.cap_ondemand:
                    continue
                parts = [self.recourse(edge, r, head, y, o) for (r, head), y, o in zip(uses, reserved, ceilings)]
                if any(part is None for part in parts):
                    continue
                self.examined += 1
                total = sum(part[0] + part[1] for part in parts)
                if best is None or total < best[0]:
                    best = (total, [(r.id, y, part) for (r, _), y, part in zip(uses, reserved, parts)])
        self._edges[key] = best
        return best

    def combinations(self) -> Iterator[tuple[tuple[int, ...], ...]]:
        requests = sorted(self.instance.requests, key=lambda r: r.id)
        path_lists = [_simple_paths(self.instance, r.source, r.destination) for r in requests]
        return itertools.product(*path_lists)


def brute_force(
    instance: NetworkInstance,
    options: Optional[SolverOptions] = None,
    limits: Optional[OracleLimits] = None,
) -> OracleResult:
    """
    Exact optimum by exhaustive enumeration, written independently of the solver.

    Every combination of simple paths is tried; on each edge every reservation
    vector and on-demand ceiling vector within capacity is tried; in each scenario
    every (utilized, on-demand) split meeting the fidelity target is tried.

    :param instance: A small instance.
    :param options: Selects the node-cost variant.
    :param limits: Refusal limits; the defaults when omitted.
    :raises OracleLimitError: If the instance exceeds the limits.
    :return: Optimal cost with one optimal solution, or an infeasible status.
    """
    options = options or SolverOptions()
    limits = limits or OracleLimits()
    _check_limits(instance, limits)

    with logfire.span("brute force", nodes=len(instance.nodes), requests=len(instance.requests)):
        requests = sorted(instance.requests, key=lambda r: r.id)
        search = _BruteForce(instance, options)
        best: Optional[tuple[float, float, float, tuple[tuple[int, ...], ...], list]] = None

        for paths in search.combinations():
            node_cost = 0.0
            uses: dict[EdgeKey, list[tuple[Request, int]]] = {}
            for request, path in zip(requests, paths):
                for a, b in zip(path, path[1:]):
                    uses.setdefault(edge_key(a, b), []).append((request, b))
                    if not options.per_pair_node_cost:
                        node_cost += instance.node_cost(b)

            stage1, stage2, chosen = node_cost, 0.0, []
            feasible = True
            for edge in sorted(uses):
                found = search.edge_cost(edge, tuple(uses[edge]))
                if found is None:
                    feasible = False
                    break
                for request_id, reserved, part in found[1]:
                    stage1 += part[0]
                    stage2 += part[1]
                    chosen.append((edge, request_id, reserved, part[2]))
            if not feasible:
                continue
            if best is None or stage1 + stage2 < best[0] - 1e-12:
                best = (stage1 + stage2, stage1, stage2, paths, chosen)

        if best is None:
            logfire.info("brute force found no feasible assignment", examined=search.examined)
            return OracleResult(status="infeasible", assignments_examined=search.examined)

        _, stage1, stage2, paths, chosen = best
        solution = Solution(
            kind="sp",
            routes=[RouteAssignment(request_id=r.id, path=list(p)) for r, p in zip(requests, paths)],
            allocations=[
                EdgeAllocation(
                    u=edge[0], v=edge[1], request_id=request_id, reserved=reserved,
                    utilized=[used for used, _ in splits], ondemand=[bought for _, bought in splits],
                )
                for edge, request_id, reserved, splits in chosen
            ],
            objective=SpObjective.from_stages(stage1, stage2),
        )
        logfire.info("brute force optimum {cost}", cost=solution.objective.total, examined=search.examined)
        return OracleResult(
            status="optimal",
            cost=solution.objective.total,
            solution=solution,
            assignments_examined=search.examined,
        )
