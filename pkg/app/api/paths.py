from typing import Optional

import logfire
import networkx as nx

from app.exceptions import InfeasibleError
from app.models.sp_model import SpModel, edge_demand
from app.schemas.network import EdgeKey, NetworkInstance, Request, edge_key
from app.schemas.paths import CandidatePath, RequestPaths


def path_demands(
    instance: NetworkInstance,
    request: Request,
    nodes: list[int] | tuple[int, ...],
    model: Optional[SpModel] = None,
) -> tuple[tuple[EdgeKey, ...], tuple[tuple[Optional[int], ...], ...]]:
    keys = tuple(edge_key(a, b) for a, b in zip(nodes, nodes[1:]))
    demands = []
    for key in keys:
        if model is not None and (key, request.id) in model.demands:
            demands.append(model.demands[(key, request.id)])
        else:
            edge = instance.edge_map[key]
            demands.append(tuple(edge_demand(edge, requirement) for requirement in request.requirements))
    return keys, tuple(demands)


def enumerate_paths(
    instance: NetworkInstance,
    request: Request,
    max_paths: int,
    model: Optional[SpModel] = None,
) -> RequestPaths:
    """
    Candidate routes of ``request``: every simple path when there are fewer than
    ``max_paths``, otherwise the ``max_paths`` shortest by hop count with
    lexicographic tie-breaking. Paths crossing an edge whose demand is
    unreachable in some scenario are dropped and counted.

    :param instance: Validated instance.
    :param request: The request to route.
    :param max_paths: Enumeration bound.
    :param model: Compiled model whose demands are reused when given.
    :raises InfeasibleError: When no path survives; diagnostics list the blocked edges.
    :return: Surviving paths sorted by (hops, node sequence).
    """
    with logfire.span("enumerate paths", request=request.id, max_paths=max_paths):
        kept: list[CandidatePath] = []
        blocked_paths = 0
        blocked_edges: set[EdgeKey] = set()
        cutoff_hops: Optional[int] = None
        exhausted = True

        for nodes in nx.shortest_simple_paths(instance.graph, request.source, request.destination):
            hops = len(nodes) - 1
            if cutoff_hops is not None and hops > cutoff_hops:
                exhausted = False
                break
            keys, demands = path_demands(instance, request, nodes, model)
            unreachable = [key for key, demand in zip(keys, demands) if None in demand]
            if unreachable:
                blocked_paths += 1
                blocked_edges.update(unreachable)
                continue
            kept.append(CandidatePath(nodes=tuple(nodes), hops=hops, edges=keys, demands=demands))
            if len(kept) == max_paths:
                # keep collecting paths of the same length so ties resolve lexicographically
                cutoff_hops = hops

        kept.sort(key=lambda p: (p.hops, p.nodes))
        truncated = not exhausted or len(kept) > max_paths
        kept = kept[:max_paths]

        if truncated:
            logfire.warn("path enumeration truncated at {max_paths} for request {request}",
                         max_paths=max_paths, request=request.id)
        if not kept:
            raise InfeasibleError(
                f"request {request.id}: every path crosses an edge with unreachable fidelity demand",
                diagnostics=sorted(blocked_edges),
            )
        return RequestPaths(
            request_id=request.id,
            paths=tuple(kept),
            blocked_paths=blocked_paths,
            blocked_edges=tuple(sorted(blocked_edges)),
            truncated=truncated,
        )
