import os


def _optional_float(name: str) -> float | None:
    value = os.getenv(name)
    return float(value) if value else None


class Config:
    # path enumeration
    MAX_PATHS = int(os.getenv("PLANNER_MAX_PATHS", "200"))

    # requirement 1.0 is unreachable by finite purification
    F_MAX = float(os.getenv("PLANNER_F_MAX", "0.99"))

    # topology defaults for builtin topologies
    DEFAULT_BASE_FIDELITY = float(os.getenv("PLANNER_BASE_FIDELITY", "0.95"))
    DEFAULT_THRESHOLD = float(os.getenv("PLANNER_THRESHOLD", "0.8"))
    DEFAULT_CAP_RESERVED = int(os.getenv("PLANNER_CAP_RESERVED", "10"))
    DEFAULT_CAP_ONDEMAND = int(os.getenv("PLANNER_CAP_ONDEMAND", "60"))

    # costs in $
    COST_ENERGY = float(os.getenv("PLANNER_COST_ENERGY", "5"))
    COST_SETUP = float(os.getenv("PLANNER_COST_SETUP", "150"))
    COST_RESERVE = float(os.getenv("PLANNER_COST_RESERVE", "10"))
    COST_UTILIZE = float(os.getenv("PLANNER_COST_UTILIZE", "1"))
    COST_ONDEMAND = float(os.getenv("PLANNER_COST_ONDEMAND", "200"))

    # solver
    THREADS = int(os.getenv("PLANNER_THREADS", "1"))
    TIME_LIMIT = _optional_float("PLANNER_TIME_LIMIT")
    WS_MAX_COMBINATIONS = int(os.getenv("PLANNER_WS_MAX_COMBINATIONS", "256"))
    JOINT_SCENARIO_MAX_REQUESTS = 3
    COST_TOLERANCE = 1e-9

    SERVICE_NAME = os.getenv("PLANNER_SERVICE_NAME", "entanglement-planner")


config = Config
