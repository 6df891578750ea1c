"""Per-document search length, precision baselines and their aggregates.

A relevant document's atomized search length (ASL) is one plus the number
of irrelevant documents ranked above it, i.e. its rank once every other
relevant document is removed. An unretrieved relevant document gets the
query's total count of retrieved irrelevant documents. Unjudged retrieved
documents count as irrelevant.

The ablation intermediates move from MAP towards ASL one step at a time:

* ``M1`` replaces each coupled precision with ``1 / ASL`` (atomized) and
  keeps both arithmetic means;
* ``M2`` additionally takes the harmonic mean over a query's documents;
* ``M3`` additionally takes the harmonic mean across queries, which makes
  it exactly ``1 / ASL``.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Collection, Iterable, Mapping, Sequence

from .trec_io import Qrels, RunList

logger = logging.getLogger(__name__)


class UndefinedMetricError(ValueError):
    pass


class DegenerateQueryError(ValueError):
    """An unretrieved relevant document has search length 0 (no irrelevant
    documents were retrieved), so its atomized precision is undefined."""


class ZeroErrorBaselineError(ValueError):
    pass


@dataclass(frozen=True)
class PerDocEval:
    query_id: str
    doc_id: str
    retrieved: bool
    rank: int | None
    rel_above: int
    irrel_above: int
    asl: int
    precision: float


@dataclass(frozen=True)
class QueryEval:
    query_id: str
    n_rel: int
    irrel_total: int
    n_retrieved: int
    docs: tuple[PerDocEval, ...]

    @property
    def degenerate(self) -> bool:
        return any(d.asl == 0 for d in self.docs)

    @property
    def asls(self) -> list[int]:
        return [d.asl for d in self.docs]


def evaluate_query(
    relevant: Collection[str], ranked: Sequence[str], query_id: str = ""
) -> QueryEval | None:
    """Evaluate one query. Returns None when there is nothing to measure
    (no relevant documents), which callers treat as "skip this query".
    """
    relevant = frozenset(relevant)
    if not relevant:
        return None
    docs: list[PerDocEval] = []
    rel_seen = 0
    irrel_seen = 0
    for rank, doc in enumerate(ranked, start=1):
        if doc in relevant:
            docs.append(PerDocEval(
                query_id, doc, True, rank, rel_seen, irrel_seen,
                asl=rank - rel_seen,
                precision=(rel_seen + 1) / rank,
            ))
            rel_seen += 1
        else:
            irrel_seen += 1
    found = {d.doc_id for d in docs}
    for doc in sorted(relevant - found):
        docs.append(PerDocEval(
            query_id, doc, False, None, rel_seen, irrel_seen,
            asl=irrel_seen,
            precision=0.0,
        ))
    return QueryEval(query_id, len(relevant), irrel_seen, len(ranked), tuple(docs))


@dataclass(frozen=True)
class RunEval:
    system_id: str
    queries: tuple[QueryEval, ...]
    warnings: tuple[str, ...] = field(default=())

    def by_query(self) -> dict[str, QueryEval]:
        return {q.query_id: q for q in self.queries}

    @property
    def n_judged_relevant(self) -> int:
        return sum(q.n_rel for q in self.queries)


def evaluate_run(qrels: Qrels, run: RunList) -> RunEval:
    """Evaluate every query that appears in both the run and the qrels and has
    at least one relevant document. Queries are kept in sorted id order so
    reductions are reproducible."""
    warnings = []
    evals = []
    for qid in run.queries:
        if qid not in qrels.judgments:
            warnings.append(f"{run.system_id}: query {qid} not in qrels; dropped")
            continue
        qe = evaluate_query(qrels.relevant_docs(qid), run.ranked_docs(qid), qid)
        if qe is None:
            continue
        if qe.degenerate:
            warnings.append(
                f"{run.system_id}: query {qid} is degenerate "
                "(unretrieved relevant docs but no retrieved irrelevant docs)"
            )
        evals.append(qe)
    for w in warnings:
        logger.warning(w)
    return RunEval(run.system_id, tuple(evals), tuple(warnings))


# -- per-query values ---------------------------------------------------------

def query_asl(qe: QueryEval) -> float:
    return math.fsum(qe.asls) / qe.n_rel


def query_asl_at_g(qe: QueryEval, n: int) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    head = qe.asls[:n]
    return math.fsum(head) / len(head)


def average_precision(qe: QueryEval) -> float:
    return math.fsum(d.precision for d in qe.docs) / qe.n_rel


def query_precision_at_k(qe: QueryEval, k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    return sum(1 for d in qe.docs if d.retrieved and d.rank <= k) / k


def query_reciprocal_rank(qe: QueryEval) -> float:
    first = qe.docs[0]
    return 1.0 / first.rank if first.retrieved else 0.0


def precision_at_k(ranked: Sequence[str], relevant: Collection[str], k: int) -> float:
    """Fraction of the top ``k`` that is relevant; short lists still divide by k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rel = set(relevant)
    return sum(1 for d in ranked[:k] if d in rel) / k


def reciprocal_rank(ranked: Sequence[str], relevant: Collection[str]) -> float:
    rel = set(relevant)
    for rank, d in enumerate(ranked, start=1):
        if d in rel:
            return 1.0 / rank
    return 0.0


def atomized_precisions(qe: QueryEval) -> list[float]:
    if qe.degenerate:
        raise DegenerateQueryError(
            f"query {qe.query_id}: unretrieved relevant document with no retrieved "
            "irrelevant documents"
        )
    return [1.0 / d.asl for d in qe.docs]


class AblationStage(str, Enum):
    ATOMIZE = "M1"
    HARMONIC_WITHIN = "M2"
    HARMONIC_BOTH = "M3"


def ablation_query_value(qe: QueryEval, stage: AblationStage | str) -> float:
    """Per-query value of an ablation stage, in precision space.

    M2 and M3 share per-query values (harmonic mean of atomized precision,
    equal to ``1 / query_asl``); they differ only in the cross-query mean.
    """
    stage = AblationStage(stage)
    ps = atomized_precisions(qe)
    if stage is AblationStage.ATOMIZE:
        return math.fsum(ps) / len(ps)
    return len(ps) / math.fsum(1.0 / p for p in ps)


def _require(evals: Sequence[QueryEval]) -> None:
    if not evals:
        raise UndefinedMetricError("no evaluated queries")


def asl_all(evals: Sequence[QueryEval]) -> float:
    _require(evals)
    return math.fsum(query_asl(q) for q in evals) / len(evals)


def asl_at_g(evals: Sequence[QueryEval], n: int) -> float:
    _require(evals)
    return math.fsum(query_asl_at_g(q, n) for q in evals) / len(evals)


def mean_average_precision(aps: Sequence[float]) -> float:
    if not aps:
        raise UndefinedMetricError("no average precision values")
    return math.fsum(aps) / len(aps)


def arithmetic_mean(values: Sequence[float]) -> float:
    if not values:
        raise UndefinedMetricError("empty input")
    return math.fsum(values) / len(values)


def harmonic_mean(values: Sequence[float]) -> float:
    if not values:
        raise UndefinedMetricError("empty input")
    return len(values) / math.fsum(1.0 / v for v in values)


def ablation_metric(evals: Sequence[QueryEval], stage: AblationStage | str) -> float:
    """Aggregate an ablation stage. Raises DegenerateQueryError if any query
    is degenerate; use :func:`score_run` to exclude those with a warning."""
    _require(evals)
    stage = AblationStage(stage)
    values = [ablation_query_value(q, stage) for q in evals]
    if stage is AblationStage.HARMONIC_BOTH:
        return harmonic_mean(values)
    return arithmetic_mean(values)


class RRIEKind(str, Enum):
    PRECISION = "precision"
    ASL = "asl"


def rrie(baseline: float, improved: float, kind: RRIEKind | str) -> float:
    """Relative reduction in error from ``baseline`` to ``improved``.

    Precision-style error is ``1 - P`` (optimum 1); ASL-style error is
    ``ASL - 1`` (optimum 1). Negative when ``improved`` is worse.
    """
    kind = RRIEKind(kind)
    if kind is RRIEKind.PRECISION:
        err_base, err_new = 1.0 - baseline, 1.0 - improved
    else:
        err_base, err_new = baseline - 1.0, improved - 1.0
    if err_base == 0:
        raise ZeroErrorBaselineError(f"baseline {baseline} is already optimal")
    return (err_base - err_new) / err_base


# -- named metrics ------------------------------------------------------------

@dataclass(frozen=True)
class Metric:
    """A named metric: per-query value, cross-query aggregation, orientation.

    ``per_query`` returns None for queries the metric cannot score (only the
    ablation stages, on degenerate queries).
    """

    name: str
    higher_is_better: bool
    per_query: Callable[[QueryEval], float | None] = field(compare=False, repr=False)
    aggregate: Callable[[Sequence[float]], float] = field(compare=False, repr=False)
    asl_family: bool = False
    rrie_kind: RRIEKind | None = None


def _skip_degenerate(fn):
    def wrapped(qe):
        return None if qe.degenerate else fn(qe)
    return wrapped


_ASL_G = re.compile(r"^ASL@G(?:1-)?(\d+)$")
_P_AT = re.compile(r"^P@(\d+)$")


def get_metric(name: str) -> Metric:
    """Look up a metric by name: ``ASL``, ``ASL@g1-<n>``, ``MAP``, ``P@<k>``,
    ``MRR``, ``M1``, ``M2``, ``M3`` (case-insensitive)."""
    key = name.strip().upper()
    if key == "ASL":
        return Metric("ASL", False, query_asl, arithmetic_mean, True, RRIEKind.ASL)
    if key == "MAP":
        return Metric("MAP", True, average_precision, arithmetic_mean, False, RRIEKind.PRECISION)
    if key == "MRR":
        return Metric("MRR", True, query_reciprocal_rank, arithmetic_mean, False,
                      RRIEKind.PRECISION)
    m = _ASL_G.match(key)
    if m:
        n = int(m.group(1))
        if n < 1:
            raise ValueError(f"bad metric {name!r}: n must be >= 1")
        return Metric(f"ASL@g1-{n}", False, lambda qe: query_asl_at_g(qe, n),
                      arithmetic_mean, True, RRIEKind.ASL)
    m = _P_AT.match(key)
    if m:
        k = int(m.group(1))
        if k < 1:
            raise ValueError(f"bad metric {name!r}: k must be >= 1")
        return Metric(f"P@{k}", True, lambda qe: query_precision_at_k(qe, k),
                      arithmetic_mean, False, RRIEKind.PRECISION)
    if key in ("M1", "M2", "M3"):
        stage = AblationStage(key)
        agg = harmonic_mean if stage is AblationStage.HARMONIC_BOTH else arithmetic_mean
        return Metric(key, True, _skip_degenerate(lambda qe: ablation_query_value(qe, stage)),
                      agg, False, RRIEKind.PRECISION)
    raise ValueError(f"unknown metric {name!r}")


@dataclass(frozen=True)
class SystemMetric:
    """One metric for one system: aggregate plus the per-query values behind it."""

    value: float
    per_query: Mapping[str, float]
    higher_is_better: bool


@dataclass(frozen=True)
class SystemScores:
    system_id: str
    metrics: Mapping[str, SystemMetric]
    warnings: tuple[str, ...] = field(default=())

    def __getitem__(self, name: str) -> SystemMetric:
        return self.metrics[name]

    def value(self, name: str) -> float:
        return self.metrics[name].value


def score_metric(evals: Iterable[QueryEval], metric: Metric) -> tuple[SystemMetric, list[str]]:
    per_query = {}
    skipped = []
    for qe in evals:
        v = metric.per_query(qe)
        if v is None:
            skipped.append(qe.query_id)
        else:
            per_query[qe.query_id] = v
    warnings = []
    if skipped:
        warnings.append(f"{metric.name}: excluded degenerate queries {', '.join(skipped)}")
    value = metric.aggregate(list(per_query.values())) if per_query else math.nan
    if not per_query:
        warnings.append(f"{metric.name}: no scorable queries")
    return SystemMetric(value, per_query, metric.higher_is_better), warnings


def score_run(run_eval: RunEval, metric_names: Iterable[str]) -> SystemScores:
    metrics = {}
    warnings = list(run_eval.warnings)
    for name in metric_names:
        metric = get_metric(name)
        sm, w = score_metric(run_eval.queries, metric)
        metrics[metric.name] = sm
        warnings.extend(f"{run_eval.system_id}: {x}" for x in w)
    return SystemScores(run_eval.system_id, metrics, tuple(warnings))


DEFAULT_METRICS = ("ASL", "ASL@g1-1", "ASL@g1-10", "MAP", "P@20", "MRR", "M1", "M2", "M3")
