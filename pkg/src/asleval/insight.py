"""Analysis outputs: headroom tables, search-length histograms, and numeric
checks on how averaging precisions weights search lengths.

Averaging precisions ``P_i = 1 / SL_i`` arithmetically is the same as
averaging the search lengths with weights ``1 / SL_i``; the result in
search-length space is the harmonic mean of the ``SL_i``.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .metrics import QueryEval, SystemScores

HEADROOM_METRICS = ("P@20", "ASL@g1-10", "MAP", "ASL")

# Nine search lengths with a heavy tail, and the per-element values that give
# the same unweighted mean as averaging the originals in precision space.
# How the second list was derived element-wise is not known; only its mean
# is used, as a regression check.
SKEWED_SEARCH_LENGTHS = (1, 1, 1, 2, 4, 5, 10, 10000, 10000)
SWAP_EQUIVALENT_SEARCH_LENGTHS = (1, 1, 1, 2.1, 2.7, 2.9, 3, 3.2, 3.2)


class MatchingError(ValueError):
    pass


# -- histograms -----------------------------------------------------------------

@dataclass(frozen=True)
class HistogramSpec:
    """Bucket layout.

    Unsigned: buckets ``[e_i, e_{i+1})`` plus an ``above`` bucket for values
    ``>= e_last`` and, with ``overflow_missing``, a bucket for unretrieved
    documents.

    Signed: edges must be symmetric around 0 and exclude 0. The positive edges
    ``m_0 < m_1 < ...`` define a centre bucket ``|d| < m_0``, mirrored buckets
    ``m_i <= |d| < m_{i+1}`` and two outer buckets ``|d| >= m_last``.
    """

    bucket_edges: tuple[float, ...]
    overflow_missing: bool = True
    signed: bool = False

    def __post_init__(self):
        edges = tuple(float(e) for e in self.bucket_edges)
        object.__setattr__(self, "bucket_edges", edges)
        if len(edges) < 2 and not self.signed:
            raise ValueError("need at least 2 edges")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("edges must be strictly increasing")
        if self.signed:
            if any(a != -b for a, b in zip(edges, reversed(edges))):
                raise ValueError("signed edges must be symmetric around 0")
            if 0.0 in edges or not edges:
                raise ValueError("signed edges must be nonempty and exclude 0")

    @property
    def magnitudes(self) -> tuple[float, ...]:
        return tuple(e for e in self.bucket_edges if e > 0)

    def labels(self) -> list[str]:
        if not self.signed:
            e = self.bucket_edges
            out = [f"[{_fmt(a)},{_fmt(b)})" for a, b in zip(e, e[1:])]
            out.append(f">={_fmt(e[-1])}")
            if self.overflow_missing:
                out.append("missing")
            return out
        m = self.magnitudes
        neg = [f"<=-{_fmt(m[-1])}"] + [
            f"(-{_fmt(b)},-{_fmt(a)}]" for a, b in reversed(list(zip(m, m[1:])))
        ]
        pos = [f"[{_fmt(a)},{_fmt(b)})" for a, b in zip(m, m[1:])] + [f">={_fmt(m[-1])}"]
        return neg + [f"(-{_fmt(m[0])},{_fmt(m[0])})"] + pos


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(x)


def geometric_edges(cap: float, base: float = 2.0, start: float = 1.0) -> tuple[float, ...]:
    """``start, start*base, ...`` up to the first edge ``>= cap``."""
    if base <= 1 or start <= 0:
        raise ValueError("need base > 1 and start > 0")
    edges = [start]
    while edges[-1] < cap:
        edges.append(edges[-1] * base)
    if len(edges) == 1:
        edges.append(start * base)
    return tuple(edges)


DEFAULT_ASL_SPEC = HistogramSpec(geometric_edges(1024))
DEFAULT_DELTA_SPEC = HistogramSpec((-1000, -100, -10, -1, 1, 10, 100, 1000), signed=True)


@dataclass(frozen=True)
class Histogram:
    spec: HistogramSpec
    counts: tuple[int, ...]

    @property
    def labels(self) -> list[str]:
        return self.spec.labels()

    @property
    def total(self) -> int:
        return sum(self.counts)

    def rows(self) -> list[tuple[str, int]]:
        return list(zip(self.labels, self.counts))


def _docs(evals: Iterable[QueryEval]):
    for qe in evals:
        yield from qe.docs


def asl_histogram(evals: Iterable[QueryEval], spec: HistogramSpec = DEFAULT_ASL_SPEC) -> Histogram:
    """Count per-document ASL values into buckets."""
    if spec.signed:
        raise ValueError("asl_histogram needs an unsigned spec")
    e = spec.bucket_edges
    n_main = len(e) - 1
    counts = [0] * (n_main + 1 + (1 if spec.overflow_missing else 0))
    for d in _docs(evals):
        if not d.retrieved and spec.overflow_missing:
            counts[-1] += 1
            continue
        if d.asl < e[0]:
            raise AssertionError(f"ASL {d.asl} below first edge {e[0]}")
        counts[min(bisect.bisect_right(e, d.asl) - 1, n_main)] += 1
    return Histogram(spec, tuple(counts))


def asl_deltas(evals_a: Iterable[QueryEval], evals_b: Iterable[QueryEval]) -> dict[tuple[str, str], int]:
    """Per-document ``ASL_a - ASL_b`` keyed by (query, doc)."""
    a = {(d.query_id, d.doc_id): d.asl for d in _docs(evals_a)}
    b = {(d.query_id, d.doc_id): d.asl for d in _docs(evals_b)}
    if a.keys() != b.keys():
        diff = sorted(a.keys() ^ b.keys())
        raise MatchingError(f"document sets differ, e.g. {diff[:5]}")
    return {k: a[k] - b[k] for k in sorted(a)}


def signed_bucket(delta: float, spec: HistogramSpec) -> int:
    m = spec.magnitudes
    centre = len(m)
    mag = abs(delta)
    if mag < m[0]:
        return centre
    # position among magnitude edges: 1..len(m)
    off = bisect.bisect_right(m, mag)
    return centre + off if delta > 0 else centre - off


def delta_histogram(
    evals_a: Iterable[QueryEval], evals_b: Iterable[QueryEval],
    spec: HistogramSpec = DEFAULT_DELTA_SPEC,
) -> Histogram:
    """Signed histogram of per-document ASL differences; negative means ``a``
    ranked the document higher."""
    if not spec.signed:
        raise ValueError("delta_histogram needs a signed spec")
    counts = [0] * (2 * len(spec.magnitudes) + 1)
    for delta in asl_deltas(evals_a, evals_b).values():
        counts[signed_bucket(delta, spec)] += 1
    return Histogram(spec, tuple(counts))


# -- system selection and headroom --------------------------------------------

def _ordered(values: Mapping[str, float], higher_is_better: bool) -> list[str]:
    if not values:
        raise ValueError("no systems")
    sign = -1.0 if higher_is_better else 1.0
    return sorted(values, key=lambda s: (sign * values[s], s))


def best_system(values: Mapping[str, float], higher_is_better: bool) -> str:
    return _ordered(values, higher_is_better)[0]


def median_system(values: Mapping[str, float], higher_is_better: bool) -> str:
    """Lower median of the best-first ordering (index ``(|S|-1) // 2``)."""
    order = _ordered(values, higher_is_better)
    return order[(len(order) - 1) // 2]


@dataclass(frozen=True)
class HeadroomRow:
    track_id: str
    best: Mapping[str, tuple[str, float]]

    def value(self, metric: str) -> float:
        return self.best[metric][1]

    def system(self, metric: str) -> str:
        return self.best[metric][0]


def headroom_table(
    tracks: Mapping[str, Mapping[str, SystemScores]],
    metrics: Sequence[str] = HEADROOM_METRICS,
) -> list[HeadroomRow]:
    """Best value of each metric per track, respecting orientation."""
    rows = []
    for track_id in sorted(tracks):
        systems = tracks[track_id]
        best = {}
        for name in metrics:
            vals = {s: sc[name].value for s, sc in systems.items() if not math.isnan(sc[name].value)}
            if not vals:
                continue
            hib = next(iter(systems.values()))[name].higher_is_better
            sid = best_system(vals, hib)
            best[name] = (sid, vals[sid])
        rows.append(HeadroomRow(track_id, best))
    return rows


def bucket_values(values: Sequence[float], edges: Sequence[float]) -> list[int]:
    """Counts per ``[e_i, e_{i+1})``, with values outside clamped to the end
    buckets. Used for the distribution of per-track best values."""
    counts = [0] * (len(edges) - 1)
    for v in values:
        i = bisect.bisect_right(edges, v) - 1
        counts[min(max(i, 0), len(counts) - 1)] += 1
    return counts


HEADROOM_EDGES = {
    "P@20": (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0 + 1e-9),
    "MAP": (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0 + 1e-9),
    "ASL@g1-10": (1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, math.inf),
    "ASL": (1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, math.inf),
}


def headroom_distribution(rows: Sequence[HeadroomRow], metric: str,
                          edges: Sequence[float] | None = None) -> list[int]:
    edges = edges or HEADROOM_EDGES[metric]
    return bucket_values([r.value(metric) for r in rows if metric in r.best], edges)


# -- precision-space averaging of search lengths --------------------------------

def p_space_average_sl(search_lengths: Sequence[float]) -> float:
    """Search length implied by averaging ``1/SL`` arithmetically."""
    if len(search_lengths) == 0:
        raise ValueError("empty input")
    if any(s < 1 for s in search_lengths):
        raise ValueError("search lengths must be >= 1")
    return len(search_lengths) / math.fsum(1.0 / s for s in search_lengths)


def two_value_limit_check(sl1: float, sl2_values: Iterable[float]) -> list[float]:
    """Precision-space average of ``sl1`` with each ``sl2``, as a search length.

    Approaches ``2 * sl1`` as ``sl2`` grows.
    """
    return [p_space_average_sl([sl1, s]) for s in sl2_values]


def weighted_identity_check(search_lengths: Sequence[float], rel_tol: float = 1e-12) -> bool:
    """``n / sum(P_i)`` equals the ``1/SL``-weighted mean of the SLs."""
    sl = [float(s) for s in search_lengths]
    if not sl:
        raise ValueError("empty input")
    precisions = [1.0 / s for s in sl]
    lhs = len(sl) / math.fsum(precisions)
    weights = [1.0 / s for s in sl]
    rhs = math.fsum(s * w for s, w in zip(sl, weights)) / math.fsum(weights)
    return math.isclose(lhs, rhs, rel_tol=rel_tol, abs_tol=0.0)


class PartitionLevel(str, Enum):
    PER_QUERY = "per-query"
    POOLED = "pooled"


@dataclass(frozen=True)
class PartitionResult:
    n: int
    total: int
    fraction: float
    target_sl: float
    achieved_sl: float
    parts: tuple["PartitionResult", ...] = field(default=(), repr=False)


def partition_point(search_lengths: Sequence[float]) -> PartitionResult:
    """Smallest prefix (of SLs sorted ascending) whose plain mean is closest to
    the precision-space average. Infinite SLs (precision 0) are allowed."""
    sl = np.sort(np.asarray(search_lengths, dtype=float))
    if sl.size == 0:
        raise ValueError("empty input")
    if np.any(sl < 1):
        raise ValueError("search lengths must be >= 1")
    mean_p = math.fsum(1.0 / sl)  # 1/inf == 0
    mean_p /= sl.size
    target = math.inf if mean_p == 0 else 1.0 / mean_p
    with np.errstate(invalid="ignore"):
        prefix = np.cumsum(sl) / np.arange(1, sl.size + 1)
    if math.isinf(target):
        finite = np.isinf(prefix)
        n = int(np.argmax(finite)) + 1 if finite.any() else sl.size
    else:
        dist = np.abs(prefix - target)
        n = int(np.argmin(dist)) + 1  # argmin returns first minimum: smallest n
    return PartitionResult(n, int(sl.size), n / sl.size, target, float(prefix[n - 1]))


def effective_top_fraction(
    search_lengths: Mapping[str, Sequence[float]] | Sequence[float],
    level: PartitionLevel | str = PartitionLevel.PER_QUERY,
) -> PartitionResult:
    """Fraction of documents whose plain SL mean matches precision averaging.

    ``search_lengths`` is per-query (mapping) or a flat pool. At per-query
    level the fractions are averaged over queries and ``n``/``total`` are
    summed; ``target_sl``/``achieved_sl`` are query means.
    """
    level = PartitionLevel(level)
    if not isinstance(search_lengths, Mapping):
        return partition_point(search_lengths)
    if level is PartitionLevel.POOLED:
        pooled = [s for q in sorted(search_lengths) for s in search_lengths[q]]
        return partition_point(pooled)
    parts = tuple(partition_point(search_lengths[q]) for q in sorted(search_lengths))
    if not parts:
        raise ValueError("empty input")
    k = len(parts)
    return PartitionResult(
        n=sum(p.n for p in parts),
        total=sum(p.total for p in parts),
        fraction=math.fsum(p.fraction for p in parts) / k,
        target_sl=math.fsum(p.target_sl for p in parts) / k,
        achieved_sl=math.fsum(p.achieved_sl for p in parts) / k,
        parts=parts,
    )


def precision_search_lengths(evals: Iterable[QueryEval]) -> dict[str, list[float]]:
    """Per-query ``1 / P`` for each relevant doc's (coupled) precision; an
    unretrieved doc has precision 0 and search length infinity."""
    return {
        qe.query_id: [math.inf if d.precision == 0 else 1.0 / d.precision for d in qe.docs]
        for qe in evals
    }
