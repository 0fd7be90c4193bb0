"""Knowledge-graph-embedding training engine and runtime benchmark harness."""

import os as _os

# Measurement hygiene: the harness's thread axis must be the only source of
# parallelism, so pin external BLAS pools before numpy's first import.
# Respected only when numpy has not been imported yet; explicit user
# settings win.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    _os.environ.setdefault(_var, "1")
del _os, _var

from .graph import (  # noqa: E402
    DatasetStats,
    KnowledgeGraph,
    Triple,
    Vocabulary,
    generate_synthetic,
    load_dataset,
    stats,
)
from .kernels import Backend  # noqa: E402
from .metrics import BenchmarkRecord, MemoryProbe, PhaseTiming  # noqa: E402
from .models import (  # noqa: E402
    ConvKBParams,
    DistMultParams,
    ModelKind,
    Norm,
    ScoreGradient,
    TransEParams,
    grad,
    init_params,
    load_params,
    save_params,
    score,
    score_batch,
)
from .evaluation import RankResult, rank_queries  # noqa: E402
from .training import TrainConfig, TrainingTimings, train  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "Backend",
    "BenchmarkRecord",
    "ConvKBParams",
    "DatasetStats",
    "DistMultParams",
    "KnowledgeGraph",
    "MemoryProbe",
    "ModelKind",
    "Norm",
    "PhaseTiming",
    "RankResult",
    "ScoreGradient",
    "TrainConfig",
    "TrainingTimings",
    "TransEParams",
    "Triple",
    "Vocabulary",
    "generate_synthetic",
    "grad",
    "init_params",
    "load_dataset",
    "load_params",
    "rank_queries",
    "save_params",
    "score",
    "score_batch",
    "stats",
    "train",
]
