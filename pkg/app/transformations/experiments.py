import io
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Iterable, Optional, TypeVar

import logfire
import numpy as np
import pandas as pd
from tqdm import tqdm

from app.api.solver import solve_evp, solve_perfect_info, solve_sp
from app.config import config
from app.exceptions import InstanceError, PlannerError
from app.schemas.experiments import ComparisonRow, FidelitySweepRow, ReservationSweepRow
from app.schemas.network import NetworkInstance, Scenario
from app.schemas.solution import Solution, SolverOptions
from app.transformations.generators import random_requests


T = TypeVar("T")
R = TypeVar("R")


def _run_points(func: Callable[[T], R], points: list[T], threads: int, desc: str) -> list[R]:
    """Runs independent points on a thread pool; results keep the order of ``points``."""
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(tqdm(executor.map(func, points), total=len(points), desc=desc))


def requirement_range(start: float, stop: float, step: float) -> list[float]:
    if step <= 0:
        raise InstanceError(f"sweep step {step} must be positive")
    if stop < start:
        raise InstanceError(f"sweep range [{start}, {stop}] is empty")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [float(v) for v in np.round(start + np.arange(count) * step, 10)]


def _max_edge_reserved(solution: Solution) -> int:
    per_edge: dict[tuple[int, int], int] = {}
    for alloc in solution.allocations:
        per_edge[(alloc.u, alloc.v)] = per_edge.get((alloc.u, alloc.v), 0) + alloc.reserved
    return max(per_edge.values(), default=0)


def run_sweep_fidelity(
    instance: NetworkInstance,
    start: float,
    stop: float,
    step: float,
    options: Optional[SolverOptions] = None,
) -> pd.DataFrame:
    """
    Solves the instance once per requirement value, with every request made
    deterministic at that requirement. Infeasible points become rows.

    :param instance: Instance whose requests are reused with a single scenario.
    :param start: First requirement.
    :param stop: Last requirement, inclusive.
    :param step: Requirement increment.
    :param options: Solver options; ``threads`` sizes the worker pool.
    :return: One row per requirement, in ascending order.
    """
    options = options or SolverOptions()
    requirements = requirement_range(start, stop, step)

    def _point(requirement: float) -> FidelitySweepRow:
        requests = [r.with_scenarios([Scenario(req=requirement, prob=1.0)]) for r in instance.requests]
        try:
            solution = solve_sp(instance.with_requests(requests), options)
        except PlannerError as e:
            logfire.warn("fidelity {requirement} infeasible: {error}", requirement=requirement, error=str(e))
            return FidelitySweepRow(requirement=requirement, status="infeasible")
        totals = solution.totals()
        return FidelitySweepRow(
            requirement=requirement,
            status="optimal",
            reserved=totals["reserved"],
            utilized=totals["utilized"],
            ondemand=totals["ondemand"],
            max_edge_reserved=_max_edge_reserved(solution),
            total_cost=solution.objective.total,
        )

    with logfire.span("sweep fidelity", points=len(requirements)):
        rows = _run_points(_point, requirements, options.threads, "Fidelity sweep")
    return pd.DataFrame([row.model_dump() for row in rows], columns=list(FidelitySweepRow.model_fields))


def run_sweep_reservation(
    instance: NetworkInstance,
    start: int,
    stop: int,
    options: Optional[SolverOptions] = None,
) -> pd.DataFrame:
    """One solve per forced total reservation ``start..stop``, reporting both cost stages."""
    options = options or SolverOptions()
    if stop < start or start < 0:
        raise InstanceError(f"reservation range [{start}, {stop}] is empty or negative")
    totals = list(range(start, stop + 1))

    def _point(total: int) -> ReservationSweepRow:
        try:
            solution = solve_sp(instance, options, forced_reservation=total)
        except PlannerError as e:
            logfire.warn("reservation {total} infeasible: {error}", total=total, error=str(e))
            return ReservationSweepRow(forced_reservation=total, status="infeasible")
        return ReservationSweepRow(
            forced_reservation=total,
            status="optimal",
            stage1=solution.objective.stage1,
            stage2=solution.objective.stage2,
            total=solution.objective.total,
        )

    with logfire.span("sweep reservation", points=len(totals)):
        rows = _run_points(_point, totals, options.threads, "Reservation sweep")
    return pd.DataFrame([row.model_dump() for row in rows], columns=list(ReservationSweepRow.model_fields))


def _compare_sample(
    topology: NetworkInstance,
    n_requests: int,
    seed: int,
    sample: int,
    step: float,
    options: SolverOptions,
) -> Optional[tuple[float, float, float]]:
    rng = np.random.default_rng([seed, n_requests, sample])
    instance = topology.with_requests(random_requests(topology, n_requests, rng, step=step))
    try:
        cost_sp = solve_sp(instance, options).objective.total
        cost_evp = solve_evp(instance, options).objective.total
        cost_ws = solve_perfect_info(instance, options).expected_cost
    except PlannerError as e:
        logfire.warn("sample {sample} with {n} requests infeasible: {error}", sample=sample, n=n_requests, error=str(e))
        return None
    return cost_sp, cost_evp, cost_ws


def run_compare_models(
    topology: NetworkInstance,
    request_counts: Iterable[int],
    seed: int,
    samples: int,
    step: float = 0.01,
    options: Optional[SolverOptions] = None,
) -> pd.DataFrame:
    """
    Compares the stochastic plan against the expected-value and perfect-information
    baselines on random request sets.

    Sample ``s`` of request count ``n`` draws its requests from a generator seeded
    with ``(seed, n, s)``, so rows do not depend on the order or the number of
    worker threads. Costs are means over the samples where all three models are
    feasible.

    :param topology: Network without requests.
    :param request_counts: Request counts to compare.
    :param seed: Base seed.
    :param samples: Samples per request count.
    :param step: Requirement grid spacing of the sampled scenarios.
    :param options: Solver options; ``threads`` sizes the worker pool.
    :return: One row per request count.
    """
    options = options or SolverOptions()
    if samples < 1:
        raise InstanceError("at least one sample is needed")
    counts = list(request_counts)
    points = [(n, s) for n in counts for s in range(samples)]

    def _point(point: tuple[int, int]) -> Optional[tuple[float, float, float]]:
        # inner solves stay sequential, the pool already runs the samples in parallel
        return _compare_sample(topology, point[0], seed, point[1], step, options.model_copy(update={"threads": 1}))

    with logfire.span("compare models", counts=counts, samples=samples, seed=seed):
        results = _run_points(_point, points, options.threads, "Model comparison")

    rows = []
    for n in counts:
        costs = [r for (count, _), r in zip(points, results) if count == n and r is not None]
        row = ComparisonRow(n_requests=n, samples=samples, infeasible_samples=samples - len(costs))
        if costs:
            cost_sp, cost_evp, cost_ws = (float(np.mean(column)) for column in zip(*costs))
            row = row.model_copy(update={
                "cost_sp": cost_sp,
                "cost_evp": cost_evp,
                "cost_ws": cost_ws,
                "gap_percent": (cost_evp - cost_sp) / cost_evp * 100.0 if cost_evp > 0 else 0.0,
            })
        rows.append(row)
    return pd.DataFrame([row.model_dump() for row in rows], columns=list(ComparisonRow.model_fields))


def csv_text(df: pd.DataFrame, header: dict[str, Any]) -> str:
    """CSV body preceded by ``# key: value`` provenance lines."""
    buffer = io.StringIO()
    for key, value in header.items():
        buffer.write(f"# {key}: {value}\n")
    df.to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()


def run_header(command: str, options: SolverOptions, **extra: Any) -> dict[str, Any]:
    header: dict[str, Any] = {"command": command, **extra}
    header.update(options.model_dump(exclude={"threads", "time_limit"}))
    header["f_max"] = config.F_MAX
    return header
