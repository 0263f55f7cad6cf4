from pydantic import BaseModel, ConfigDict, Field


class CandidatePath(BaseModel):
    """A simple source-to-destination path with the pair demand of every edge on it."""
    model_config = ConfigDict(frozen=True)

    nodes: tuple[int, ...]
    hops: int
    edges: tuple[tuple[int, int], ...] = Field(description="Canonical edge keys along the path")
    demands: tuple[tuple[int, ...], ...] = Field(description="Pair demand per edge and scenario")

    def links(self) -> list[tuple[int, int]]:
        """Directed links in travel order."""
        return list(zip(self.nodes, self.nodes[1:]))


class RequestPaths(BaseModel):
    model_config = ConfigDict(frozen=True)

    request_id: int
    paths: tuple[CandidatePath, ...]
    blocked_paths: int = Field(default=0, description="Paths dropped for an unreachable demand")
    blocked_edges: tuple[tuple[int, int], ...] = ()
    truncated: bool = Field(default=False, description="More paths exist beyond max_paths")


class NewsvendorProfile(BaseModel):
    """
    Recourse data of one request on one edge: the pair demand distribution and
    the per-pair prices of the three phases.
    """
    model_config = ConfigDict(frozen=True)

    demands: tuple[tuple[int, float], ...] = Field(description="(pairs needed, probability), ascending in pairs")
    reserve_cost: float = Field(ge=0.0)
    utilize_cost: float = Field(ge=0.0)
    ondemand_cost: float = Field(ge=0.0)
    cap_reserved: int = Field(ge=0)
    cap_ondemand: int = Field(ge=0)

    @property
    def max_demand(self) -> int:
        return max((k for k, _ in self.demands), default=0)


class RecourseChoice(BaseModel):
    """Reservation and the resulting per-scenario split for one request on one edge."""
    model_config = ConfigDict(frozen=True)

    reserved: int
    ondemand_ceiling: int = Field(description="Largest on-demand count over the scenarios")
    utilized: tuple[int, ...]
    ondemand: tuple[int, ...]
    stage1: float
    stage2: float

    @property
    def expected_cost(self) -> float:
        return self.stage1 + self.stage2


class EdgePlan(BaseModel):
    """Joint allocation of one edge among the requests routed over it."""
    model_config = ConfigDict(frozen=True)

    choices: tuple[RecourseChoice, ...]
    stage1: float
    stage2: float

    @property
    def cost(self) -> float:
        return self.stage1 + self.stage2

    @property
    def reserved(self) -> int:
        return sum(choice.reserved for choice in self.choices)
