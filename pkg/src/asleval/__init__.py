"""Atomized search length (ASL) evaluation for ranked retrieval runs."""

from .metrics import (
    AblationStage,
    PerDocEval,
    QueryEval,
    RunEval,
    SystemMetric,
    SystemScores,
    ablation_metric,
    asl_all,
    asl_at_g,
    average_precision,
    evaluate_query,
    evaluate_run,
    get_metric,
    mean_average_precision,
    precision_at_k,
    reciprocal_rank,
    rrie,
    score_run,
)
from .trec_io import Qrels, RunList, TrackBundle, discover_track, parse_qrels, parse_run

__version__ = "0.1.0"

__all__ = [
    "AblationStage", "PerDocEval", "QueryEval", "Qrels", "RunEval", "RunList", "SystemMetric",
    "SystemScores", "TrackBundle", "ablation_metric", "asl_all", "asl_at_g",
    "average_precision", "discover_track", "evaluate_query", "evaluate_run", "get_metric",
    "mean_average_precision", "parse_qrels", "parse_run", "precision_at_k", "reciprocal_rank",
    "rrie", "score_run",
]
