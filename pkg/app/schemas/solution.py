from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.config import config


class SolverOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_paths: int = Field(default=config.MAX_PATHS, ge=1, description="Simple paths kept per request")
    joint_scenarios: bool = Field(
        default=False,
        description="Enforce on-demand capacity per scenario combination and enumerate the product space",
    )
    per_pair_node_cost: bool = Field(
        default=False,
        description="Charge node energy and setup per reserved pair instead of once per hop",
    )
    time_limit: Optional[float] = Field(default=config.TIME_LIMIT, gt=0.0, description="Seconds")
    threads: int = Field(default=config.THREADS, ge=1, description="Workers for independent solves")


class SpObjective(BaseModel):
    model_config = ConfigDict(frozen=True)

    stage1: float = Field(description="Route activation and reservation cost")
    stage2: float = Field(description="Expected utilization and on-demand cost")
    total: float = Field(description="stage1 + stage2")

    @classmethod
    def from_stages(cls, stage1: float, stage2: float) -> "SpObjective":
        return cls(stage1=stage1, stage2=stage2, total=stage1 + stage2)


class RouteAssignment(BaseModel):
    request_id: int
    path: list[int] = Field(description="Node sequence from source to destination; empty when unrouted")


class EdgeAllocation(BaseModel):
    """Pairs of one request on one (undirected) edge, per scenario of that request."""
    u: int
    v: int
    request_id: int
    reserved: int = Field(ge=0)
    utilized: list[int] = Field(description="Utilized pairs per scenario")
    ondemand: list[int] = Field(description="On-demand pairs per scenario")


class SolverStats(BaseModel):
    nodes_explored: int = 0
    leaves_evaluated: int = 0
    paths_per_request: dict[int, int] = Field(default_factory=dict)
    blocked_paths: dict[int, int] = Field(default_factory=dict)
    truncated: bool = Field(default=False, description="Path enumeration hit max_paths for some request")
    optimal: bool = True
    time_limit_reached: bool = False


class Solution(BaseModel):
    kind: Literal["sp", "evp", "deterministic"] = "sp"
    routes: list[RouteAssignment]
    allocations: list[EdgeAllocation]
    objective: SpObjective
    stats: SolverStats = Field(default_factory=SolverStats)

    def route(self, request_id: int) -> list[int]:
        return next((r.path for r in self.routes if r.request_id == request_id), [])

    def totals(self) -> dict[str, float]:
        """Reserved pairs plus probability-free sums of utilized and on-demand pairs."""
        return {
            "reserved": sum(a.reserved for a in self.allocations),
            "utilized": sum(sum(a.utilized) for a in self.allocations),
            "ondemand": sum(sum(a.ondemand) for a in self.allocations),
        }


class ScenarioOutcome(BaseModel):
    probability: float
    scenario_index: dict[int, int] = Field(description="Scenario index chosen for each request id")
    cost: float
    solution: Solution


class PerfectInfoResult(BaseModel):
    expected_cost: float
    mode: Literal["joint", "independent"]
    outcomes: list[ScenarioOutcome]


class OracleResult(BaseModel):
    status: Literal["optimal", "infeasible"]
    cost: Optional[float] = None
    solution: Optional[Solution] = None
    assignments_examined: int = 0


class Evaluation(BaseModel):
    objective: SpObjective
    feasible: bool
    violation: Optional[str] = Field(default=None, description="First violated constraint, if any")
