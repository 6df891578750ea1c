"""System-ordering comparisons between two metrics.

A system counts as *significantly better* than another under a metric when
its aggregate is at least ``min_relative_gain`` better in the metric's own
direction and a two-tailed t-test on per-query values gives
``p <= max_p_value``. ``delta_sort`` measures, per system, how much the
number of significantly better competitors changes between two metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np
from scipy import stats as sps

from .metrics import SystemMetric

VARIANCE_FLOOR = 1e-30
_GAIN_EPS = 1e-12


class PairingError(ValueError):
    pass


class UndefinedImprovementError(ZeroDivisionError):
    pass


class UndefinedRatioError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class SignificanceConfig:
    min_relative_gain: float = 0.10
    max_p_value: float = 0.05
    paired: bool = True

    def __post_init__(self):
        for name in ("min_relative_gain", "max_p_value"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must be in (0, 1), got {v}")


PerQuery = Union[Sequence[float], Mapping[str, float]]


def _pair(a: PerQuery, b: PerQuery) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(a, Mapping) or isinstance(b, Mapping):
        if not (isinstance(a, Mapping) and isinstance(b, Mapping)):
            raise PairingError("cannot pair a mapping with a plain sequence")
        if set(a) != set(b):
            missing = sorted(set(a) ^ set(b))
            raise PairingError(f"unmatched query ids: {missing[:10]}")
        keys = sorted(a)
        xa = np.array([a[k] for k in keys], dtype=float)
        xb = np.array([b[k] for k in keys], dtype=float)
    else:
        xa = np.asarray(a, dtype=float)
        xb = np.asarray(b, dtype=float)
        if xa.shape != xb.shape:
            raise PairingError(f"length mismatch: {len(xa)} vs {len(xb)}")
    if len(xa) < 2:
        raise PairingError("need at least 2 paired values")
    return xa, xb


def paired_t_test(a: PerQuery, b: PerQuery) -> float:
    """Two-tailed p-value of the paired t statistic on ``a - b``.

    All-zero differences give 1.0. Zero variance with a nonzero mean is
    handled by flooring the variance at ``VARIANCE_FLOOR`` (p ~ 0).
    """
    xa, xb = _pair(a, b)
    d = xa - xb
    if not np.any(d):
        return 1.0
    n = len(d)
    var = max(float(np.var(d, ddof=1)), VARIANCE_FLOOR)
    t = float(np.mean(d)) / math.sqrt(var / n)
    return float(min(1.0, 2.0 * sps.t.sf(abs(t), n - 1)))


def two_sample_t_test(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-tailed Student t-test, pooled variance, unpaired."""
    xa = np.asarray(list(a.values()) if isinstance(a, Mapping) else a, dtype=float)
    xb = np.asarray(list(b.values()) if isinstance(b, Mapping) else b, dtype=float)
    if len(xa) < 2 or len(xb) < 2:
        raise PairingError("need at least 2 values per sample")
    if np.array_equal(np.sort(xa), np.sort(xb)):
        return 1.0
    na, nb = len(xa), len(xb)
    pooled = ((na - 1) * np.var(xa, ddof=1) + (nb - 1) * np.var(xb, ddof=1)) / (na + nb - 2)
    pooled = max(float(pooled), VARIANCE_FLOOR)
    t = (xa.mean() - xb.mean()) / math.sqrt(pooled * (1 / na + 1 / nb))
    return float(min(1.0, 2.0 * sps.t.sf(abs(t), na + nb - 2)))


def relative_improvement(a: float, b: float, higher_is_better: bool) -> float:
    """Gain of ``a`` over ``b`` relative to ``b``, in the metric's direction."""
    if b == 0:
        raise UndefinedImprovementError("relative improvement over a zero baseline")
    return (a - b) / b if higher_is_better else (b - a) / b


def passes_significance(
    score_a: float, score_b: float, p_value: float, higher_is_better: bool,
    config: SignificanceConfig = SignificanceConfig(),
) -> bool:
    gain = relative_improvement(score_a, score_b, higher_is_better)
    return gain >= config.min_relative_gain - _GAIN_EPS and p_value <= config.max_p_value


def significantly_better(
    a: SystemMetric, b: SystemMetric, config: SignificanceConfig = SignificanceConfig()
) -> bool:
    """True iff system ``a`` beats ``b`` on both the gain gate and the t-test."""
    if a.higher_is_better != b.higher_is_better:
        raise ValueError("metrics with different orientations")
    # cheap gate first; the t-test is only needed when the gain passes
    if relative_improvement(a.value, b.value, a.higher_is_better) < config.min_relative_gain - _GAIN_EPS:
        return False
    if config.paired:
        # runs may skip queries; pair on the ones both systems answered
        common = sorted(set(a.per_query) & set(b.per_query))
        if len(common) < 2:
            return False
        p = paired_t_test([a.per_query[q] for q in common], [b.per_query[q] for q in common])
    else:
        p = two_sample_t_test(a.per_query, b.per_query)
    return p <= config.max_p_value


def better_counts(
    systems: Mapping[str, SystemMetric], config: SignificanceConfig = SignificanceConfig()
) -> dict[str, int]:
    """For every system, how many others are significantly better than it."""
    ids = sorted(systems)
    counts = dict.fromkeys(ids, 0)
    for s in ids:
        for o in ids:
            if o != s and significantly_better(systems[o], systems[s], config):
                counts[s] += 1
    return counts


@dataclass(frozen=True)
class DeltaSortRow:
    system_id: str
    n0: int
    n1: int
    n_systems: int

    @property
    def delta_sort(self) -> float:
        return 100.0 * abs(self.n0 - self.n1) / self.n_systems


@dataclass(frozen=True)
class DeltaSortResult:
    rows: tuple[DeltaSortRow, ...]

    @property
    def max(self) -> float:
        return max(r.delta_sort for r in self.rows)


def delta_sort(
    metric_a: Mapping[str, SystemMetric],
    metric_b: Mapping[str, SystemMetric],
    config: SignificanceConfig = SignificanceConfig(),
) -> DeltaSortResult:
    if set(metric_a) != set(metric_b):
        raise PairingError("metrics cover different systems")
    if len(metric_a) < 2:
        raise ValueError("delta_sort needs at least 2 systems")
    n0 = better_counts(metric_a, config)
    n1 = better_counts(metric_b, config)
    size = len(metric_a)
    return DeltaSortResult(tuple(DeltaSortRow(s, n0[s], n1[s], size) for s in sorted(metric_a)))


Ranking = Union[Sequence[str], Mapping[str, float]]


def kendall_tau(a: Ranking, b: Ranking) -> float:
    """Kendall tau-b between two rankings of the same systems.

    Each ranking is either an ordering of system ids (best first) or a
    mapping of system id to a score where larger is better (ties allowed).
    """
    sa, sb = _as_scores(a), _as_scores(b)
    if set(sa) != set(sb):
        raise PairingError("rankings cover different systems")
    if len(sa) < 2:
        raise ValueError("kendall tau needs at least 2 systems")
    keys = sorted(sa)
    tau = float(sps.kendalltau([sa[k] for k in keys], [sb[k] for k in keys], variant="b").statistic)
    # scipy divides by two separate square roots, so perfect (dis)agreement
    # can land one ulp short of +-1
    if abs(abs(tau) - 1.0) < 1e-12:
        tau = math.copysign(1.0, tau)
    return tau


def _as_scores(r: Ranking) -> dict[str, float]:
    if isinstance(r, Mapping):
        return {k: float(v) for k, v in r.items()}
    r = list(r)
    if len(set(r)) != len(r):
        raise ValueError("ordering repeats a system id")
    return {s: float(len(r) - i) for i, s in enumerate(r)}


def oriented_scores(systems: Mapping[str, SystemMetric]) -> dict[str, float]:
    """Aggregate values flipped so that larger is always better."""
    return {s: (m.value if m.higher_is_better else -m.value) for s, m in systems.items()}


def precision_space(value: float, higher_is_better: bool) -> float:
    return value if higher_is_better else 1.0 / value


def delta_value(
    old: Mapping[str, float] | Sequence[float],
    new: Mapping[str, float] | Sequence[float],
    old_higher_is_better: bool = True,
    new_higher_is_better: bool = True,
) -> float:
    """Mean over systems of ``new / old``. Lower-is-better (search length)
    values are compared as their reciprocals."""
    if isinstance(old, Mapping):
        if set(old) != set(new):
            raise PairingError("old and new cover different systems")
        keys = sorted(old)
        old_v = [old[k] for k in keys]
        new_v = [new[k] for k in keys]
    else:
        old_v, new_v = list(old), list(new)
        if len(old_v) != len(new_v):
            raise PairingError("length mismatch")
    if not old_v:
        raise ValueError("no systems")
    ratios = []
    for o, n in zip(old_v, new_v):
        o = precision_space(o, old_higher_is_better)
        n = precision_space(n, new_higher_is_better)
        if o == 0:
            raise UndefinedRatioError("zero old metric value")
        ratios.append(n / o)
    return math.fsum(ratios) / len(ratios)


@dataclass(frozen=True)
class Summary:
    mean: float
    std: float
    n: int

    @property
    def low(self) -> float:
        return self.mean - self.std

    @property
    def high(self) -> float:
        return self.mean + self.std

    def range_str(self, fmt: str = "{:.2f}") -> str:
        return f"{fmt.format(self.low)}-{fmt.format(self.high)}"


def cross_track_summary(values: Sequence[float], population: bool = True) -> Summary:
    """Mean and standard deviation over tracks (population by default)."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("no tracks")
    std = float(np.std(x, ddof=0 if population or x.size == 1 else 1))
    return Summary(float(math.fsum(x) / x.size), std, int(x.size))


@dataclass(frozen=True)
class TrackReorder:
    track_id: str
    metric_a: str
    metric_b: str
    delta_sort: DeltaSortResult
    kendall: float
    delta_value: float

    @property
    def max_delta_sort(self) -> float:
        return self.delta_sort.max

    @property
    def n_systems(self) -> int:
        return len(self.delta_sort.rows)


def compare_track(
    track_id: str,
    metric_a: str,
    metric_b: str,
    systems: Mapping[str, Mapping[str, SystemMetric]],
    config: SignificanceConfig = SignificanceConfig(),
) -> TrackReorder:
    """Reordering statistics for one track. ``systems[sid][metric]``."""
    a = {s: m[metric_a] for s, m in systems.items()}
    b = {s: m[metric_b] for s, m in systems.items()}
    first_a = next(iter(a.values()))
    first_b = next(iter(b.values()))
    ds = delta_sort(a, b, config)
    tau = kendall_tau(oriented_scores(a), oriented_scores(b))
    dv = delta_value(
        {s: v.value for s, v in a.items()}, {s: v.value for s, v in b.items()},
        first_a.higher_is_better, first_b.higher_is_better,
    )
    return TrackReorder(track_id, metric_a, metric_b, ds, tau, dv)


@dataclass(frozen=True)
class ReorderReport:
    metric_a: str
    metric_b: str
    tracks: tuple[TrackReorder, ...]
    population: bool = True
    skipped: tuple[str, ...] = field(default=())

    def _summary(self, attr: str) -> Summary:
        return cross_track_summary([getattr(t, attr) for t in self.tracks], self.population)

    @property
    def delta_sort_summary(self) -> Summary:
        return self._summary("max_delta_sort")

    @property
    def kendall_summary(self) -> Summary:
        return self._summary("kendall")

    @property
    def delta_value_summary(self) -> Summary:
        return self._summary("delta_value")
