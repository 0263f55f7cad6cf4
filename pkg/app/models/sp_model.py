import itertools
from functools import cached_property
from typing import NamedTuple, Optional

import logfire
import networkx as nx

from app.config import config
from app.models.purification import min_pairs
from app.schemas.network import Edge, EdgeKey, NetworkInstance, Request, edge_key
from app.schemas.solution import Evaluation, Solution, SolverOptions, SpObjective


# constraint groups, in the order they are emitted and checked
CONSTRAINT_GROUPS = (
    "source_outflow",
    "sink_inflow",
    "flow_conservation",
    "single_outbound",
    "reserve_on_route",
    "reserve_capacity",
    "utilize_within_reserve",
    "fidelity_demand",
    "ondemand_on_route",
    "ondemand_ceiling",
    "ondemand_capacity",
)


class Constraint(NamedTuple):
    name: str
    group: str
    terms: tuple[tuple[str, float], ...]
    sense: str
    rhs: float


class ObjectiveTerm(NamedTuple):
    coef: float
    variables: tuple[str, ...]
    stage: int


class BlockedDemand(NamedTuple):
    edge: EdgeKey
    request_id: int
    scenario_index: int
    requirement: float


def x_var(i: int, j: int, r: int) -> str:
    return f"x[{i},{j},{r}]"


def yr_var(e: EdgeKey, r: int) -> str:
    return f"yr[{e[0]},{e[1]},{r}]"


def ye_var(e: EdgeKey, r: int, s: int) -> str:
    return f"ye[{e[0]},{e[1]},{r},{s}]"


def yo_var(e: EdgeKey, r: int, s: int) -> str:
    return f"yo[{e[0]},{e[1]},{r},{s}]"


def om_var(e: EdgeKey, r: int) -> str:
    return f"om[{e[0]},{e[1]},{r}]"


def edge_demand(edge: Edge, requirement: float) -> Optional[int]:
    """
    Minimum pairs on ``edge`` whose purified fidelity meets both the requirement
    and the edge threshold, or ``None`` when the edge capacities cannot reach it.
    """
    if edge.max_pairs < 1:
        return None
    return min_pairs(edge.base_fidelity, max(requirement, edge.fidelity_threshold), edge.max_pairs)


class SpModel:
    """
    Deterministic-equivalent model of the two-stage program for one instance.

    Demands are compiled eagerly; the explicit variable and constraint lists are
    built on first access, since the solver works from the demands alone.
    """

    def __init__(self, instance: NetworkInstance, options: SolverOptions):
        self.instance = instance
        self.options = options
        self.requests: tuple[Request, ...] = tuple(sorted(instance.requests, key=lambda r: r.id))
        self.edge_keys: tuple[EdgeKey, ...] = tuple(sorted(instance.edge_map))
        self.demands: dict[tuple[EdgeKey, int], tuple[Optional[int], ...]] = {}
        self.blocked: list[BlockedDemand] = []
        self.unroutable: dict[int, list[BlockedDemand]] = {}

        self.joint_scenarios = options.joint_scenarios
        if self.joint_scenarios and len(self.requests) > config.JOINT_SCENARIO_MAX_REQUESTS:
            logfire.warn(
                "joint scenarios limited to {limit} requests, using worst-case on-demand capacity",
                limit=config.JOINT_SCENARIO_MAX_REQUESTS,
                requests=len(self.requests),
            )
            self.joint_scenarios = False

        self._compile_demands()

    def _compile_demands(self) -> None:
        for key in self.edge_keys:
            edge = self.instance.edge_map[key]
            for request in self.requests:
                demand = tuple(edge_demand(edge, requirement) for requirement in request.requirements)
                self.demands[(key, request.id)] = demand
                self.blocked.extend(
                    BlockedDemand(key, request.id, s, request.requirements[s])
                    for s, k in enumerate(demand)
                    if k is None
                )

        for request in self.requests:
            usable = nx.Graph()
            usable.add_nodes_from(self.instance.graph.nodes)
            usable.add_edges_from(
                key for key in self.edge_keys if None not in self.demands[(key, request.id)]
            )
            if not nx.has_path(usable, request.source, request.destination):
                self.unroutable[request.id] = [b for b in self.blocked if b.request_id == request.id]

    @property
    def structurally_feasible(self) -> bool:
        return not self.unroutable

    def demand(self, key: EdgeKey, request_id: int) -> tuple[Optional[int], ...]:
        return self.demands[(key, request_id)]

    # -- variables ---------------------------------------------------------

    @cached_property
    def route_vars(self) -> list[str]:
        return [
            x_var(i, j, r.id)
            for r in self.requests
            for n in sorted(self.instance.outbound)
            for i, j in self.instance.outbound[n]
        ]

    @cached_property
    def reserve_vars(self) -> list[str]:
        return [yr_var(e, r.id) for e in self.edge_keys for r in self.requests]

    @cached_property
    def utilize_vars(self) -> list[str]:
        return [ye_var(e, r.id, s) for e in self.edge_keys for r in self.requests for s in range(len(r.scenarios))]

    @cached_property
    def ondemand_vars(self) -> list[str]:
        return [yo_var(e, r.id, s) for e in self.edge_keys for r in self.requests for s in range(len(r.scenarios))]

    @cached_property
    def ceiling_vars(self) -> list[str]:
        if self.joint_scenarios:
            return []
        return [om_var(e, r.id) for e in self.edge_keys for r in self.requests]

    # -- constraints -------------------------------------------------------

    @cached_property
    def constraints(self) -> list[Constraint]:
        groups: dict[str, list[Constraint]] = {group: [] for group in CONSTRAINT_GROUPS}
        instance = self.instance

        for request in self.requests:
            r = request.id
            for n in sorted(instance.outbound):
                out_terms = [(x_var(i, j, r), 1.0) for i, j in instance.outbound[n]]
                in_terms = [(x_var(i, j, r), -1.0) for i, j in instance.inbound[n]]
                if n == request.source:
                    groups["source_outflow"].append(
                        Constraint(f"source_outflow[r={r}]", "source_outflow", tuple(out_terms + in_terms), "==", 1.0)
                    )
                elif n == request.destination:
                    terms = [(v, -c) for v, c in out_terms] + [(v, -c) for v, c in in_terms]
                    groups["sink_inflow"].append(
                        Constraint(f"sink_inflow[r={r}]", "sink_inflow", tuple(terms), "==", 1.0)
                    )
                else:
                    groups["flow_conservation"].append(
                        Constraint(
                            f"flow_conservation[r={r},n={n}]", "flow_conservation",
                            tuple(out_terms + in_terms), "==", 0.0,
                        )
                    )
                groups["single_outbound"].append(
                    Constraint(f"single_outbound[r={r},n={n}]", "single_outbound", tuple(out_terms), "<=", 1.0)
                )

        for e in self.edge_keys:
            edge = instance.edge_map[e]
            u, v = e
            for request in self.requests:
                r = request.id
                forward, backward = x_var(u, v, r), x_var(v, u, r)
                groups["reserve_on_route"].append(
                    Constraint(
                        f"reserve_on_route[{u},{v},r={r}]", "reserve_on_route",
                        ((yr_var(e, r), 1.0), (forward, -edge.cap_reserved), (backward, -edge.cap_reserved)),
                        "<=", 0.0,
                    )
                )
                for s, k in enumerate(self.demands[(e, r)]):
                    tag = f"[{u},{v},r={r},s={s}]"
                    groups["utilize_within_reserve"].append(
                        Constraint(
                            f"utilize_within_reserve{tag}", "utilize_within_reserve",
                            ((ye_var(e, r, s), 1.0), (yr_var(e, r), -1.0)), "<=", 0.0,
                        )
                    )
                    if k is None:
                        fidelity = Constraint(
                            f"fidelity_demand{tag}", "fidelity_demand", ((forward, 1.0), (backward, 1.0)), "<=", 0.0
                        )
                    else:
                        fidelity = Constraint(
                            f"fidelity_demand{tag}", "fidelity_demand",
                            ((ye_var(e, r, s), 1.0), (yo_var(e, r, s), 1.0), (forward, -k), (backward, -k)),
                            ">=", 0.0,
                        )
                    groups["fidelity_demand"].append(fidelity)
                    groups["ondemand_on_route"].append(
                        Constraint(
                            f"ondemand_on_route{tag}", "ondemand_on_route",
                            ((yo_var(e, r, s), 1.0), (forward, -edge.cap_ondemand), (backward, -edge.cap_ondemand)),
                            "<=", 0.0,
                        )
                    )
                    if not self.joint_scenarios:
                        groups["ondemand_ceiling"].append(
                            Constraint(
                                f"ondemand_ceiling{tag}", "ondemand_ceiling",
                                ((yo_var(e, r, s), 1.0), (om_var(e, r), -1.0)), "<=", 0.0,
                            )
                        )

            if not self.requests:
                continue
            groups["reserve_capacity"].append(
                Constraint(
                    f"reserve_capacity[{u},{v}]", "reserve_capacity",
                    tuple((yr_var(e, r.id), 1.0) for r in self.requests), "<=", float(edge.cap_reserved),
                )
            )
            if self.joint_scenarios:
                ranges = [range(len(r.scenarios)) for r in self.requests]
                for combo in itertools.product(*ranges):
                    label = ",".join(str(s) for s in combo)
                    groups["ondemand_capacity"].append(
                        Constraint(
                            f"ondemand_capacity[{u},{v},s=({label})]", "ondemand_capacity",
                            tuple((yo_var(e, r.id, s), 1.0) for r, s in zip(self.requests, combo)),
                            "<=", float(edge.cap_ondemand),
                        )
                    )
            else:
                groups["ondemand_capacity"].append(
                    Constraint(
                        f"ondemand_capacity[{u},{v}]", "ondemand_capacity",
                        tuple((om_var(e, r.id), 1.0) for r in self.requests), "<=", float(edge.cap_ondemand),
                    )
                )

        return [c for group in CONSTRAINT_GROUPS for c in groups[group]]

    @cached_property
    def objective(self) -> list[ObjectiveTerm]:
        instance = self.instance
        costs = instance.costs
        stage1: list[ObjectiveTerm] = []
        stage2: list[ObjectiveTerm] = []
        for request in self.requests:
            r = request.id
            for n in sorted(instance.inbound):
                for i, _ in instance.inbound[n]:
                    if self.options.per_pair_node_cost:
                        variables = (x_var(i, n, r), yr_var(edge_key(i, n), r))
                    else:
                        variables = (x_var(i, n, r),)
                    stage1.append(ObjectiveTerm(instance.node_cost(n), variables, 1))
            for e in self.edge_keys:
                stage1.append(ObjectiveTerm(costs.reserve_per_pair, (yr_var(e, r),), 1))
                for s, probability in enumerate(request.probabilities):
                    stage2.append(ObjectiveTerm(probability * costs.utilize_per_pair, (ye_var(e, r, s),), 2))
                    stage2.append(ObjectiveTerm(probability * costs.ondemand_per_pair, (yo_var(e, r, s),), 2))
        return stage1 + stage2

    def dump(self) -> str:
        """LP-style listing of the objective and every constraint, one per line."""
        lines = ["minimize", "  obj:" + "".join(_format_term(t.coef, "*".join(t.variables)) for t in self.objective)]
        lines.append("subject to")
        for c in self.constraints:
            sense = "=" if c.sense == "==" else c.sense
            body = "".join(_format_term(coef, var) for var, coef in c.terms)
            lines.append(f"  {c.name}:{body} {sense} {c.rhs:g}")
        lines.append("binary")
        lines.extend(f"  {v}" for v in self.route_vars)
        lines.append("general")
        lines.extend(
            f"  {v}" for v in self.reserve_vars + self.utilize_vars + self.ondemand_vars + self.ceiling_vars
        )
        lines.append("end")
        return "\n".join(lines) + "\n"


def _format_term(coef: float, var: str) -> str:
    sign = "-" if coef < 0 else "+"
    return f" {sign} {abs(coef):.12g} {var}"


def compile_model(instance: NetworkInstance, options: Optional[SolverOptions] = None) -> SpModel:
    """
    Build the deterministic-equivalent model of ``instance``.

    Each (edge, request, scenario) triple gets one demand: the minimum pair count
    meeting the larger of the scenario requirement and the edge threshold. A
    request that has no path avoiding unreachable demands flags the model as
    structurally infeasible; the offending triples are kept in ``blocked``.

    :param instance: Validated network instance.
    :param options: Solver options; defaults when omitted.
    :return: The compiled model.
    """
    options = options or SolverOptions()
    with logfire.span("compile model", requests=len(instance.requests), edges=len(instance.edges)):
        model = SpModel(instance, options)
        if not model.structurally_feasible:
            logfire.warn("structurally infeasible requests {requests}", requests=sorted(model.unroutable))
        return model


def _assignment(solution: Solution, model: SpModel) -> tuple[dict[str, float], Optional[str]]:
    instance = model.instance
    request_ids = {r.id for r in model.requests}
    routed_ids = [route.request_id for route in solution.routes]
    if sorted(routed_ids) != sorted(request_ids):
        raise ValueError(f"dimension mismatch: routes for {sorted(routed_ids)}, requests {sorted(request_ids)}")

    values: dict[str, float] = {}
    problem: Optional[str] = None
    for route in solution.routes:
        for a, b in itertools.pairwise(route.path):
            if edge_key(a, b) not in instance.edge_map:
                problem = problem or f"route_link[r={route.request_id}]: no edge ({a}, {b})"
                continue
            name = x_var(a, b, route.request_id)
            values[name] = values.get(name, 0.0) + 1.0

    for alloc in solution.allocations:
        key = edge_key(alloc.u, alloc.v)
        if key not in instance.edge_map:
            raise ValueError(f"dimension mismatch: allocation on unknown edge {key}")
        if alloc.request_id not in request_ids:
            raise ValueError(f"dimension mismatch: allocation for unknown request {alloc.request_id}")
        n_scenarios = len(instance.request(alloc.request_id).scenarios)
        if len(alloc.utilized) != n_scenarios or len(alloc.ondemand) != n_scenarios:
            raise ValueError(
                f"dimension mismatch: edge {key} request {alloc.request_id} expects {n_scenarios} scenarios"
            )
        if min(alloc.utilized + alloc.ondemand, default=0) < 0:
            problem = problem or f"nonnegativity[{key[0]},{key[1]},r={alloc.request_id}]"
        values[yr_var(key, alloc.request_id)] = float(alloc.reserved)
        for s in range(n_scenarios):
            values[ye_var(key, alloc.request_id, s)] = float(alloc.utilized[s])
            values[yo_var(key, alloc.request_id, s)] = float(alloc.ondemand[s])
        values[om_var(key, alloc.request_id)] = float(max(alloc.ondemand, default=0))
    return values, problem


def evaluate(
    solution: Solution,
    instance: NetworkInstance,
    options: Optional[SolverOptions] = None,
    model: Optional[SpModel] = None,
) -> Evaluation:
    """
    Recompute feasibility and both cost stages of ``solution`` from the compiled
    constraints, without any solver code.

    :param solution: Candidate solution.
    :param instance: The instance it claims to solve.
    :param options: Options selecting objective and capacity variants.
    :param model: Precompiled model of ``instance``, compiled when omitted.
    :return: Objective, feasibility flag and the first violated constraint.
    :raises ValueError: When the solution's dimensions do not match the instance.
    """
    model = model or compile_model(instance, options)
    values, violation = _assignment(solution, model)

    if violation is None:
        for c in model.constraints:
            lhs = sum(coef * values.get(var, 0.0) for var, coef in c.terms)
            if (
                (c.sense == "==" and abs(lhs - c.rhs) > config.COST_TOLERANCE)
                or (c.sense == "<=" and lhs > c.rhs + config.COST_TOLERANCE)
                or (c.sense == ">=" and lhs < c.rhs - config.COST_TOLERANCE)
            ):
                violation = c.name
                break

    stages = {1: 0.0, 2: 0.0}
    for term in model.objective:
        product = term.coef
        for var in term.variables:
            product *= values.get(var, 0.0)
        stages[term.stage] += product
    return Evaluation(
        objective=SpObjective.from_stages(stages[1], stages[2]),
        feasible=violation is None,
        violation=violation,
    )
