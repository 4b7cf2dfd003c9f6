from src.norms.family import (
    compute_stats,
    normalize_backward,
    normalize_eval,
    normalize_train,
    update_running,
)
from src.norms.kinds import (
    BatchStats,
    NormCache,
    NormKind,
    NormParams,
    RunningState,
    sample_counts,
)

__all__ = [
    "BatchStats",
    "NormCache",
    "NormKind",
    "NormParams",
    "RunningState",
    "compute_stats",
    "normalize_backward",
    "normalize_eval",
    "normalize_train",
    "sample_counts",
    "update_running",
]
