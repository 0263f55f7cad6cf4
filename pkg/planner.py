import os
from typing import Optional

import logfire
import typer
from pydantic import ValidationError

from app.api.network import builtin_topology, load_instance
from app.api.oracle import brute_force
from app.api.solver import solve_evp, solve_perfect_info, solve_sp
from app.config import config
from app.exceptions import PlannerError
from app.models.sp_model import compile_model, evaluate
from app.schemas.network import Edge
from app.schemas.solution import SolverOptions
from app.transformations.experiments import (
    csv_text,
    run_compare_models,
    run_header,
    run_sweep_fidelity,
    run_sweep_reservation,
)


app = typer.Typer(no_args_is_help=True)

# solver options collected by the global callback
state: dict[str, SolverOptions] = {}


def _options() -> SolverOptions:
    return state.get("options") or SolverOptions()


def _fail(error: Exception) -> None:
    typer.echo(f"Error: {error}", err=True)
    raise typer.Exit(code=1)


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        typer.echo(text, nl=False)
        return
    with open(out, "w", encoding="utf-8") as f:
        f.write(text)
    typer.echo(f"Written to {out}", err=True)


@app.callback()
def main(
    max_paths: int = typer.Option(config.MAX_PATHS, help="Simple paths enumerated per request"),
    joint_scenarios: bool = typer.Option(False, help="Exact product-space on-demand capacity"),
    per_pair_node_cost: bool = typer.Option(False, help="Charge node costs per reserved pair"),
    threads: int = typer.Option(config.THREADS, help="Worker threads for independent solves"),
    time_limit: Optional[float] = typer.Option(config.TIME_LIMIT, help="Branch-and-bound limit in seconds"),
):
    """Entangled-pair reservation and fidelity-guaranteed routing planner."""
    logfire.configure(
        service_name=config.SERVICE_NAME,
        send_to_logfire='if-token-present',
        console=False,
    )
    try:
        state["options"] = SolverOptions(
            max_paths=max_paths,
            joint_scenarios=joint_scenarios,
            per_pair_node_cost=per_pair_node_cost,
            threads=threads,
            time_limit=time_limit,
        )
    except ValidationError as e:
        _fail(e)


@app.command()
def solve(
    instance_file: str,
    out: Optional[str] = typer.Option(None, help="Write the JSON result here instead of stdout"),
    model: str = typer.Option("sp", help="sp, evp or ws (perfect information)"),
    dump_model: Optional[str] = typer.Option(None, help="Write the compiled model as LP text"),
):
    options = _options()
    try:
        instance = load_instance(instance_file)
        if dump_model:
            with open(dump_model, "w", encoding="utf-8") as f:
                f.write(compile_model(instance, options).dump())
        if model == "sp":
            result = solve_sp(instance, options).model_dump_json(indent=2)
        elif model == "evp":
            result = solve_evp(instance, options).model_dump_json(indent=2)
        elif model == "ws":
            result = solve_perfect_info(instance, options).model_dump_json(indent=2)
        else:
            raise typer.BadParameter(f"unknown model {model!r}; expected sp, evp or ws")
    except (PlannerError, ValidationError, FileNotFoundError) as e:
        _fail(e)
    _emit(result + "\n", out)


@app.command()
def sweep_fidelity(
    instance_file: str,
    start: float = typer.Option(..., "--from", help="First requirement"),
    stop: float = typer.Option(..., "--to", help="Last requirement"),
    step: float = typer.Option(..., "--step", help="Requirement increment"),
    out: Optional[str] = typer.Option(None, help="CSV output file"),
):
    options = _options()
    try:
        instance = load_instance(instance_file)
        df = run_sweep_fidelity(instance, start, stop, step, options)
    except (PlannerError, ValidationError, FileNotFoundError) as e:
        _fail(e)
    header = run_header(
        "sweep-fidelity", options, instance=os.path.basename(instance_file), start=start, stop=stop, step=step
    )
    _emit(csv_text(df, header), out)


@app.command()
def sweep_reservation(
    instance_file: str,
    start: int = typer.Option(..., "--from", help="Smallest forced total reservation"),
    stop: int = typer.Option(..., "--to", help="Largest forced total reservation"),
    out: Optional[str] = typer.Option(None, help="CSV output file"),
):
    options = _options()
    try:
        instance = load_instance(instance_file)
        df = run_sweep_reservation(instance, start, stop, options)
    except (PlannerError, ValidationError, FileNotFoundError) as e:
        _fail(e)
    header = run_header(
        "sweep-reservation", options, instance=os.path.basename(instance_file), start=start, stop=stop
    )
    _emit(csv_text(df, header), out)


@app.command()
def compare_models(
    instance_file: Optional[str] = typer.Argument(None, help="Topology file; its requests are ignored"),
    topology: Optional[str] = typer.Option(None, help="Bundled topology: nsfnet, line(k) or grid(a,b)"),
    requests: str = typer.Option("2,3,4", help="Comma-separated request counts"),
    seed: int = typer.Option(0),
    samples: int = typer.Option(5),
    base_fidelity: Optional[float] = typer.Option(None, help="Override the base fidelity of every edge"),
    step: float = typer.Option(0.01, help="Requirement grid step of the sampled scenarios"),
    out: Optional[str] = typer.Option(None, help="CSV output file"),
):
    options = _options()
    try:
        counts = [int(part) for part in requests.split(",") if part.strip()]
        if (instance_file is None) == (topology is None):
            raise typer.BadParameter("give either an instance file or --topology")
        if topology is not None:
            network = builtin_topology(topology, base_fidelity)
        else:
            network = load_instance(instance_file).with_requests([])
            if base_fidelity is not None:
                network = network.with_edges(
                    [Edge(**{**edge.model_dump(), "base_fidelity": base_fidelity}) for edge in network.edges]
                )
        df = run_compare_models(network, counts, seed, samples, step, options)
    except (PlannerError, ValidationError, FileNotFoundError, ValueError) as e:
        _fail(e)
    header = run_header(
        "compare-models", options,
        instance=topology or os.path.basename(instance_file),
        requests=requests, seed=seed, samples=samples, base_fidelity=base_fidelity, step=step,
    )
    _emit(csv_text(df, header), out)


@app.command()
def oracle_check(instance_file: str):
    """Cross-checks the solver against exhaustive enumeration; exits 1 on a mismatch."""
    options = _options()
    try:
        instance = load_instance(instance_file)
        reference = brute_force(instance, options)
        try:
            solution = solve_sp(instance, options)
        except PlannerError:
            solution = None
    except (PlannerError, ValidationError, FileNotFoundError) as e:
        _fail(e)

    if reference.status == "infeasible" or solution is None:
        if reference.status == "infeasible" and solution is None:
            typer.echo("both infeasible")
            return
        typer.echo(f"Mismatch: oracle {reference.status}, solver {'infeasible' if solution is None else 'optimal'}",
                   err=True)
        raise typer.Exit(code=1)

    report = evaluate(solution, instance, options)
    typer.echo(f"oracle: {reference.cost:.6f} ({reference.assignments_examined} assignments)")
    typer.echo(f"solver: {solution.objective.total:.6f} ({solution.stats.nodes_explored} nodes)")
    if abs(reference.cost - solution.objective.total) > config.COST_TOLERANCE * max(1.0, abs(reference.cost)):
        typer.echo("Mismatch: costs differ", err=True)
        raise typer.Exit(code=1)
    if not report.feasible:
        typer.echo(f"Mismatch: solver solution violates {report.violation}", err=True)
        raise typer.Exit(code=1)
    typer.echo("match")


if __name__ == "__main__":
    app()
