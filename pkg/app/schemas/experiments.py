from typing import Literal, Optional

from pydantic import BaseModel, Field


Status = Literal["optimal", "infeasible"]


class FidelitySweepRow(BaseModel):
    requirement: float = Field(description="Requirement applied to every request")
    status: Status
    reserved: Optional[int] = None
    utilized: Optional[int] = None
    ondemand: Optional[int] = None
    max_edge_reserved: Optional[int] = Field(default=None, description="Largest reservation on a single used edge")
    total_cost: Optional[float] = None


class ReservationSweepRow(BaseModel):
    forced_reservation: int
    status: Status
    stage1: Optional[float] = None
    stage2: Optional[float] = None
    total: Optional[float] = None


class ComparisonRow(BaseModel):
    n_requests: int
    samples: int
    infeasible_samples: int = Field(description="Samples where some model had no feasible plan")
    cost_sp: Optional[float] = None
    cost_evp: Optional[float] = None
    cost_ws: Optional[float] = None
    gap_percent: Optional[float] = Field(default=None, description="(evp - sp) / evp in percent")
