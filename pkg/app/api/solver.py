import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple, Optional

import logfire

from app.api.paths import enumerate_paths, path_demands
from app.api.recourse import allocate_edge, best_plan
from app.config import config
from app.exceptions import InfeasibleError, InstanceError
from app.models.sp_model import SpModel, compile_model
from app.schemas.network import EdgeKey, NetworkInstance, Request, Scenario
from app.schemas.paths import CandidatePath, EdgePlan, NewsvendorProfile, RequestPaths
from app.schemas.solution import (
    EdgeAllocation,
    PerfectInfoResult,
    RouteAssignment,
    ScenarioOutcome,
    Solution,
    SolverOptions,
    SolverStats,
    SpObjective,
)


# (request id, head node of the directed link)
EdgeUse = tuple[int, int]


class Leaf(NamedTuple):
    cost: float
    hops: int
    key: tuple[int, ...]
    node_cost: float
    plans: dict[EdgeKey, EdgePlan]


class BranchAndBound:
    """
    Depth-first branch-and-bound over one candidate path per request.

    Leaves are priced exactly by the per-edge joint allocation; an internal node
    is bounded by the joint cost of the assigned requests plus the cheapest
    standalone path cost of every unassigned one. The search is single-threaded
    and deterministic: among equal costs the fewest total hops win, then the
    smallest tuple of path indices.
    """

    def __init__(
        self,
        instance: NetworkInstance,
        path_sets: dict[int, RequestPaths],
        options: SolverOptions,
        forced_reservation: Optional[int] = None,
        frozen_reservation: Optional[dict[tuple[EdgeKey, int], int]] = None,
    ):
        self.instance = instance
        self.path_sets = path_sets
        self.options = options
        self.forced_reservation = forced_reservation
        self.frozen_reservation = frozen_reservation
        self.requests: dict[int, Request] = {r.id: r for r in instance.requests}
        self.request_ids = sorted(self.requests)

        self.nodes_explored = 0
        self.leaves_evaluated = 0
        self.time_limit_reached = False
        self._deadline: Optional[float] = None
        self._edge_cache: dict[tuple, dict[int, EdgePlan]] = {}
        self._incumbent: Optional[Leaf] = None

        self._uses: dict[tuple[int, int], dict[EdgeKey, int]] = {}
        self._demands: dict[tuple[int, EdgeKey], tuple[int, ...]] = {}
        self._node_costs: dict[tuple[int, int], float] = {}
        self._standalone: dict[int, list[float]] = {}
        for rid in self.request_ids:
            costs = []
            for index, path in enumerate(path_sets[rid].paths):
                self._demands.update(((rid, edge), demand) for edge, demand in zip(path.edges, path.demands))
                self._uses[(rid, index)] = {edge: head for edge, (_, head) in zip(path.edges, path.links())}
                self._node_costs[(rid, index)] = self._path_node_cost(path)
                costs.append(self._assigned_cost({rid: index}))
            self._standalone[rid] = costs

    def _path_node_cost(self, path: CandidatePath) -> float:
        if self.options.per_pair_node_cost:
            return 0.0
        return sum(self.instance.node_cost(head) for _, head in path.links())

    def _profile(self, edge: EdgeKey, use: EdgeUse) -> NewsvendorProfile:
        rid, head = use
        request = self.requests[rid]
        demand = self._demands[(rid, edge)]
        costs = self.instance.costs
        reserve = costs.reserve_per_pair
        if self.options.per_pair_node_cost:
            reserve += self.instance.node_cost(head)
        spec = self.instance.edge_map[edge]
        return NewsvendorProfile(
            demands=tuple(zip(demand, request.probabilities)),
            reserve_cost=reserve,
            utilize_cost=costs.utilize_per_pair,
            ondemand_cost=costs.ondemand_per_pair,
            cap_reserved=spec.cap_reserved,
            cap_ondemand=spec.cap_ondemand,
        )

    def _reserved_values(self, edge: EdgeKey, rid: int, profile: NewsvendorProfile, forced: bool) -> range:
        if self.frozen_reservation is not None:
            fixed = self.frozen_reservation.get((edge, rid), 0)
            return range(fixed, fixed + 1)
        if forced:
            return range(profile.cap_reserved + 1)
        return range(min(profile.cap_reserved, profile.max_demand) + 1)

    def edge_table(self, edge: EdgeKey, uses: tuple[EdgeUse, ...], forced: bool = False) -> dict[int, EdgePlan]:
        cache_key = (edge, uses, forced)
        table = self._edge_cache.get(cache_key)
        if table is None:
            profiles = [self._profile(edge, use) for use in uses]
            spec = self.instance.edge_map[edge]
            table = allocate_edge(
                profiles,
                spec.cap_reserved,
                spec.cap_ondemand,
                [self._reserved_values(edge, rid, p, forced) for (rid, _), p in zip(uses, profiles)],
            )
            self._edge_cache[cache_key] = table
        return table

    def _edge_groups(self, chosen: dict[int, int]) -> dict[EdgeKey, tuple[EdgeUse, ...]]:
        groups: dict[EdgeKey, list[EdgeUse]] = {}
        for rid in sorted(chosen):
            for edge, head in self._uses[(rid, chosen[rid])].items():
                groups.setdefault(edge, []).append((rid, head))
        return {edge: tuple(uses) for edge, uses in sorted(groups.items())}

    def _assigned_cost(self, chosen: dict[int, int]) -> float:
        total = sum(self._node_costs[(rid, index)] for rid, index in chosen.items())
        for edge, uses in self._edge_groups(chosen).items():
            plan = best_plan(self.edge_table(edge, uses))
            if plan is None:
                return math.inf
            total += plan.cost
        return total

    def _forced_plans(self, groups: dict[EdgeKey, tuple[EdgeUse, ...]]) -> Optional[tuple[float, dict[EdgeKey, EdgePlan]]]:
        """Cheapest per-edge plans whose reservations add up to the forced total."""
        target = self.forced_reservation or 0
        combined: dict[int, tuple[float, dict[EdgeKey, EdgePlan]]] = {0: (0.0, {})}
        for edge, uses in groups.items():
            table = self.edge_table(edge, uses, forced=True)
            nxt: dict[int, tuple[float, dict[EdgeKey, EdgePlan]]] = {}
            for reserved, (cost, plans) in combined.items():
                for extra, plan in table.items():
                    total = reserved + extra
                    if total > target:
                        continue
                    candidate = cost + plan.cost
                    if total not in nxt or candidate < nxt[total][0] - config.COST_TOLERANCE:
                        nxt[total] = (candidate, {**plans, edge: plan})
            combined = nxt
        return combined.get(target)

    def _evaluate_leaf(self, chosen: dict[int, int]) -> Optional[Leaf]:
        self.leaves_evaluated += 1
        node_cost = sum(self._node_costs[(rid, index)] for rid, index in chosen.items())
        groups = self._edge_groups(chosen)
        key = tuple(chosen[rid] for rid in self.request_ids)
        hops = sum(self.path_sets[rid].paths[index].hops for rid, index in chosen.items())
        if self.forced_reservation is not None:
            found = self._forced_plans(groups)
            if found is None:
                return None
            cost, plans = found
            return Leaf(node_cost + cost, hops, key, node_cost, plans)

        plans = {}
        cost = node_cost
        for edge, uses in groups.items():
            plan = best_plan(self.edge_table(edge, uses))
            if plan is None:
                return None
            plans[edge] = plan
            cost += plan.cost
        return Leaf(cost, hops, key, node_cost, plans)

    def _improves(self, leaf: Leaf) -> bool:
        best = self._incumbent
        if best is None or leaf.cost < best.cost - config.COST_TOLERANCE:
            return True
        if abs(leaf.cost - best.cost) > config.COST_TOLERANCE:
            return False
        return (leaf.hops, leaf.key) < (best.hops, best.key)

    def _out_of_time(self) -> bool:
        if self._deadline is not None and time.monotonic() > self._deadline:
            self.time_limit_reached = True
        return self.time_limit_reached

    def _search(self, order: list[int], depth: int, chosen: dict[int, int], rest_bounds: list[float]) -> None:
        self.nodes_explored += 1
        if self._out_of_time():
            return
        if depth == len(order):
            leaf = self._evaluate_leaf(chosen)
            if leaf is not None and self._improves(leaf):
                self._incumbent = leaf
            return

        rid = order[depth]
        base = self._assigned_cost(chosen) if chosen else 0.0
        if math.isinf(base):
            return
        rest = rest_bounds[depth + 1]
        best = math.inf if self._incumbent is None else self._incumbent.cost
        candidates = sorted(range(len(self._standalone[rid])), key=lambda i: (self._standalone[rid][i], i))
        for index in candidates:
            if base + self._standalone[rid][index] + rest > best + config.COST_TOLERANCE:
                break
            chosen[rid] = index
            bound = self._assigned_cost(chosen) + rest
            if bound <= best + config.COST_TOLERANCE:
                self._search(order, depth + 1, chosen, rest_bounds)
                best = math.inf if self._incumbent is None else self._incumbent.cost
            del chosen[rid]
            if self.time_limit_reached:
                return

    def run(self) -> Optional[Leaf]:
        """Search all path combinations; ``None`` when no combination is feasible."""
        if self.options.time_limit is not None:
            self._deadline = time.monotonic() + self.options.time_limit
        # fail-first: fewest candidate paths first
        order = sorted(self.request_ids, key=lambda rid: (len(self.path_sets[rid].paths), rid))
        rest_bounds = [0.0] * (len(order) + 1)
        for depth in range(len(order) - 1, -1, -1):
            rest_bounds[depth] = rest_bounds[depth + 1] + min(self._standalone[order[depth]], default=math.inf)
        if not math.isinf(rest_bounds[0]):
            self._search(order, 0, {}, rest_bounds)
        return self._incumbent

    def to_solution(self, leaf: Leaf, kind: str = "sp") -> Solution:
        chosen = dict(zip(self.request_ids, leaf.key))
        routes = [
            RouteAssignment(request_id=rid, path=list(self.path_sets[rid].paths[chosen[rid]].nodes))
            for rid in self.request_ids
        ]
        groups = self._edge_groups(chosen)
        allocations = []
        stage1 = leaf.node_cost
        stage2 = 0.0
        for edge, uses in groups.items():
            plan = leaf.plans[edge]
            stage1 += plan.stage1
            stage2 += plan.stage2
            for (rid, _), choice in zip(uses, plan.choices):
                allocations.append(
                    EdgeAllocation(
                        u=edge[0], v=edge[1], request_id=rid, reserved=choice.reserved,
                        utilized=list(choice.utilized), ondemand=list(choice.ondemand),
                    )
                )
        return Solution(
            kind=kind,
            routes=routes,
            allocations=allocations,
            objective=SpObjective.from_stages(stage1, stage2),
            stats=self.stats(),
        )

    def stats(self) -> SolverStats:
        return SolverStats(
            nodes_explored=self.nodes_explored,
            leaves_evaluated=self.leaves_evaluated,
            paths_per_request={rid: len(self.path_sets[rid].paths) for rid in self.request_ids},
            blocked_paths={rid: self.path_sets[rid].blocked_paths for rid in self.request_ids},
            truncated=any(self.path_sets[rid].truncated for rid in self.request_ids),
            optimal=not self.time_limit_reached,
            time_limit_reached=self.time_limit_reached,
        )


def _empty_solution(kind: str = "sp") -> Solution:
    return Solution(kind=kind, routes=[], allocations=[], objective=SpObjective.from_stages(0.0, 0.0))


def _path_sets(instance: NetworkInstance, model: SpModel, options: SolverOptions) -> dict[int, RequestPaths]:
    if not model.structurally_feasible:
        raise InfeasibleError(
            f"requests {sorted(model.unroutable)} have no path avoiding unreachable fidelity demands",
            diagnostics=[b for rid in sorted(model.unroutable) for b in model.unroutable[rid]],
        )
    return {r.id: enumerate_paths(instance, r, options.max_paths, model) for r in model.requests}


def solve_sp(
    instance: NetworkInstance,
    options: Optional[SolverOptions] = None,
    forced_reservation: Optional[int] = None,
) -> Solution:
    """
    Solves the two-stage program exactly over the enumerated path sets.

    :param instance: Validated instance.
    :type instance: NetworkInstance
    :param options: Solver options; defaults when omitted.
    :type options: SolverOptions, optional
    :param forced_reservation: When given, the total reserved pairs over all edges and requests must equal it.
    :type forced_reservation: int, optional
    :raises InfeasibleError: If fidelity demands or capacities admit no solution.
    :raises InstanceError: If the forced reservation is outside the network capacity.
    :return: Optimal solution with solver statistics.
    :rtype: Solution
    """
    options = options or SolverOptions()
    with logfire.span("solve sp", requests=len(instance.requests), forced_reservation=forced_reservation) as span:
        if forced_reservation is not None:
            capacity = sum(edge.cap_reserved for edge in instance.edges)
            if not 0 <= forced_reservation <= capacity:
                raise InstanceError(f"forced reservation {forced_reservation} outside [0, {capacity}]")
        if not instance.requests:
            if forced_reservation:
                raise InfeasibleError("reservation forced without any request to carry it")
            return _empty_solution()

        started = time.monotonic()
        model = compile_model(instance, options)
        search = BranchAndBound(instance, _path_sets(instance, model, options), options, forced_reservation)
        leaf = search.run()
        if search.time_limit_reached:
            logfire.warn("time limit reached after {nodes} nodes", nodes=search.nodes_explored)
        if leaf is None and search.time_limit_reached:
            raise InfeasibleError("time limit reached before any feasible solution was found")
        if leaf is None:
            raise InfeasibleError(
                "no path combination fits within the reservation and on-demand capacities",
                diagnostics=[("capacity", rid) for rid in search.request_ids],
            )
        solution = search.to_solution(leaf)
        span.set_attribute("total_cost", solution.objective.total)
        span.set_attribute("nodes_explored", search.nodes_explored)
        logfire.info(
            "sp solved with cost {cost}",
            cost=solution.objective.total,
            elapsed=time.monotonic() - started,
        )
        return solution


def _mean_request(request: Request) -> Request:
    mean = min(max(request.expected_requirement(), request.requirements[0]), request.requirements[-1])
    return request.with_scenarios([Scenario(req=mean, prob=1.0)])


def solve_evp(instance: NetworkInstance, options: Optional[SolverOptions] = None) -> Solution:
    """
    Expected-value baseline: routes and reservations are planned against each
    request's mean requirement, then frozen while the recourse is priced against
    the true scenarios. Shortfalls are covered on demand; exceeding the on-demand
    capacity makes the plan infeasible.
    """
    options = options or SolverOptions()
    with logfire.span("solve evp", requests=len(instance.requests)):
        if not instance.requests:
            return _empty_solution("evp")

        planned = solve_sp(instance.with_requests([_mean_request(r) for r in instance.requests]), options)
        frozen = {((a.u, a.v), a.request_id): a.reserved for a in planned.allocations}

        path_sets = {}
        for request in instance.requests:
            nodes = planned.route(request.id)
            keys, demands = path_demands(instance, request, nodes)
            blocked = [key for key, demand in zip(keys, demands) if None in demand]
            if blocked:
                raise InfeasibleError(
                    f"request {request.id}: expected-value route crosses edges unreachable in some scenario",
                    diagnostics=blocked,
                )
            path = CandidatePath(nodes=tuple(nodes), hops=len(nodes) - 1, edges=keys, demands=demands)
            path_sets[request.id] = RequestPaths(request_id=request.id, paths=(path,))

        recourse = BranchAndBound(instance, path_sets, options, frozen_reservation=frozen)
        leaf = recourse.run()
        if leaf is None:
            raise InfeasibleError(
                "expected-value reservation needs more on-demand pairs than available",
                diagnostics=sorted(frozen.items()),
            )
        solution = recourse.to_solution(leaf, kind="evp")
        solution = solution.model_copy(update={"stats": planned.stats})
        logfire.info("evp solved with cost {cost}", cost=solution.objective.total)
        return solution


def _deterministic(request: Request, index: int) -> Request:
    return request.with_scenarios([Scenario(req=request.scenarios[index].requirement, prob=1.0)])


def solve_perfect_info(instance: NetworkInstance, options: Optional[SolverOptions] = None) -> PerfectInfoResult:
    """
    Wait-and-see bound: every scenario is solved with its requirements known in
    advance and the costs are weighted by probability.

    The full product of scenarios is enumerated when ``joint_scenarios`` is set
    (for few requests) or the product is small; otherwise each request is solved
    alone per scenario, which drops capacity coupling and stays a lower bound.

    :param instance: Validated instance.
    :param options: Solver options; ``threads`` sizes the worker pool.
    :raises InfeasibleError: If some scenario is infeasible.
    :return: Expected cost, the mode used and every per-scenario solution.
    """
    options = options or SolverOptions()
    requests = sorted(instance.requests, key=lambda r: r.id)
    combinations = math.prod(len(r.scenarios) for r in requests)
    joint = combinations <= config.WS_MAX_COMBINATIONS or (
        options.joint_scenarios and len(requests) <= config.JOINT_SCENARIO_MAX_REQUESTS
    )
    with logfire.span("solve perfect information", combinations=combinations, joint=joint):
        tasks: list[tuple[float, dict[int, int], NetworkInstance]] = []
        if joint:
            for combo in itertools.product(*(range(len(r.scenarios)) for r in requests)):
                probability = math.prod(r.scenarios[s].probability for r, s in zip(requests, combo))
                chosen = [_deterministic(r, s) for r, s in zip(requests, combo)]
                tasks.append((probability, {r.id: s for r, s in zip(requests, combo)}, instance.with_requests(chosen)))
        else:
            for request in requests:
                for s, scenario in enumerate(request.scenarios):
                    tasks.append(
                        (scenario.probability, {request.id: s}, instance.with_requests([_deterministic(request, s)]))
                    )

        def _solve(task: tuple[float, dict[int, int], NetworkInstance]) -> Solution:
            return solve_sp(task[2], options).model_copy(update={"kind": "deterministic"})

        with ThreadPoolExecutor(max_workers=options.threads) as executor:
            solutions = list(executor.map(_solve, tasks))

        outcomes = [
            ScenarioOutcome(probability=p, scenario_index=index, cost=sol.objective.total, solution=sol)
            for (p, index, _), sol in zip(tasks, solutions)
        ]
        expected = 0.0
        for outcome in outcomes:
            expected += outcome.probability * outcome.cost
        logfire.info("perfect information cost {cost}", cost=expected, mode="joint" if joint else "independent")
        return PerfectInfoResult(expected_cost=expected, mode="joint" if joint else "independent", outcomes=outcomes)
