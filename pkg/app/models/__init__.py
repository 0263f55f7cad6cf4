from .purification import (
    PurificationTable,
    chained_fidelity,
    min_pairs,
    purification_table,
    purify_step,
)
from .sp_model import (
    SpModel,
    compile_model,
    edge_demand,
    evaluate,
)


__all__ = [
    "PurificationTable",
    "chained_fidelity",
    "min_pairs",
    "purification_table",
    "purify_step",
    "SpModel",
    "compile_model",
    "edge_demand",
    "evaluate",
]
