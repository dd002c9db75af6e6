"""Probability-like cluster-membership certainties for hard partitions."""

import types as _types

from .certainty import (
    CertaintyMatrix,
    avg_dissim,
    certainty,
    certainty_dissimilarity,
    certainty_silhouette,
    silhouette_matrix,
)
from .dissimilarity import (
    Dataset,
    DissimilarityMatrix,
    chord,
    euclidean,
    iris,
    load_dataset,
    load_matrix,
    save_dataset,
    save_matrix,
    simple_matching,
)
from .errors import (
    ClustcertError,
    IngestionError,
    SolverError,
    TuningError,
    ValidationError,
)
from .evaluation import (
    EvaluationReport,
    evaluate,
    match_clusters,
    partition_disagreement,
    soft_misclassification,
    tune_exponent,
)
from .fanny import FannyResult, fanny
from .partition import Partition, hierarchical, kmeans, pam, silhouette_width
from .simulate import Scenario, generate, run_replications

__version__ = "0.1.0"

__all__ = sorted(
    name for name, obj in globals().items()
    if not name.startswith("_") and not isinstance(obj, _types.ModuleType)
)
