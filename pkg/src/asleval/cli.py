"""Command-line interface.

    asleval eval      --qrels Q --runs-dir R        per-system metric table
    asleval compare   --qrels Q --runs-dir R --baseline A --candidate B
    asleval compare   --values table.json           baseline/candidate/RRIE table
    asleval reorder   --tracks-dir T                ΔSort / Kendall / ΔValue study
    asleval histogram --qrels Q --runs-dir R        per-document ASL histogram
    asleval headroom  --tracks-dir T                best value per track
    asleval oracle                                  numeric checks on SL averaging

Exit codes: 0 success (warnings allowed), 1 input error, 2 oracle failure.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from . import insight
from .metrics import (
    RunEval,
    SystemScores,
    UndefinedMetricError,
    evaluate_run,
    get_metric,
    rrie,
    score_run,
)
from .stats import ReorderReport, SignificanceConfig, compare_track
from .trec_io import (
    InsufficientRunsError,
    LayoutError,
    OrderingPolicy,
    TrackBundle,
    TrecFormatError,
    discover_track,
    discover_tracks,
    parse_qrels,
    parse_run,
)

logger = logging.getLogger("asleval")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INPUT, EXIT_ORACLE = 0, 1, 2

REORDER_PAIRS = (
    ("MAP", "M1"),
    ("M1", "M2"),
    ("M2", "M3"),
    ("MAP", "ASL"),
    ("P@20", "ASL@g1-10"),
    ("MRR", "ASL@g1-1"),
)


class Command(str, Enum):
    EVAL = "eval"
    COMPARE = "compare"
    REORDER = "reorder"
    HISTOGRAM = "histogram"
    HEADROOM = "headroom"
    ORACLE = "oracle"


class Rounding(str, Enum):
    PRECISE = "precise"
    PAPER = "paper"


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    command: Command = Command.EVAL
    qrels: Path | None = None
    runs_dir: Path | None = None
    runs: list[Path] = field(default_factory=list)
    tracks_dir: Path | None = None
    metrics: list[str] = field(default_factory=list)
    g_values: list[int] = field(default_factory=lambda: [1, 10])
    k_values: list[int] = field(default_factory=lambda: [20])
    significance: SignificanceConfig = field(default_factory=SignificanceConfig)
    population_std: bool = True
    order: OrderingPolicy = OrderingPolicy.BY_SCORE
    threshold: int = 1
    output_format: str = "tsv"
    rounding: Rounding = Rounding.PRECISE
    seed: int = 0
    jobs: int = 1
    min_runs: int | None = None
    per_query: bool = False
    # compare
    baseline: str | None = None
    candidate: str | None = None
    values: Mapping[str, Mapping[str, float]] | None = None
    # histogram
    system: str | None = None
    against: str | None = None
    delta: bool = False
    edges: list[float] | None = None
    # oracle
    draws: int = 10000
    search_lengths: list[float] | None = None

    def __post_init__(self):
        if any(g < 1 for g in self.g_values) or any(k < 1 for k in self.k_values):
            raise ValueError("g and k values must be >= 1")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def metric_names(self) -> list[str]:
        if self.metrics:
            names = self.metrics
        else:
            names = (["ASL"] + [f"ASL@g1-{g}" for g in self.g_values] + ["MAP"]
                     + [f"P@{k}" for k in self.k_values] + ["MRR", "M1", "M2", "M3"])
        out = []
        for n in names:
            canon = get_metric(n).name
            if canon not in out:
                out.append(canon)
        return out

    def effective_min_runs(self) -> int:
        if self.min_runs is not None:
            return self.min_runs
        return 5 if self.command in (Command.REORDER, Command.HEADROOM) else 1


# -- loading and scoring ----------------------------------------------------------

def load_bundles(config: RunConfig) -> tuple[list[TrackBundle], list[str]]:
    min_runs = config.effective_min_runs()
    if config.tracks_dir is not None:
        if not config.tracks_dir.is_dir():
            raise LayoutError(f"{config.tracks_dir}: not a directory")
        bundles, warnings = discover_tracks(config.tracks_dir, min_runs, config.threshold,
                                            config.order)
        if not bundles:
            raise InputError(f"{config.tracks_dir}: no usable tracks")
        return bundles, warnings
    if config.qrels is None:
        raise InputError("need --tracks-dir, or --qrels with --runs-dir/--run")
    qrels = parse_qrels(config.qrels, config.threshold)
    paths = list(config.runs)
    if config.runs_dir is not None:
        if not config.runs_dir.is_dir():
            raise LayoutError(f"{config.runs_dir}: not a directory")
        paths += sorted(p for p in config.runs_dir.iterdir()
                        if p.is_file() and not p.name.startswith("."))
    runs, warnings = [], []
    for p in paths:
        try:
            runs.append(parse_run(p, p.name, config.order))
        except TrecFormatError as exc:
            if config.runs_dir is None:
                raise
            warnings.append(f"skipping run {p.name}: {exc}")
    track_id = config.runs_dir.parent.name if config.runs_dir else config.qrels.parent.name
    if len(runs) < max(min_runs, 1):
        raise InsufficientRunsError(track_id or "track", len(runs), max(min_runs, 1))
    return [TrackBundle(track_id or "track", qrels, tuple(runs), tuple(warnings))], warnings


def _score_task(args) -> tuple[RunEval, SystemScores]:
    qrels, run, names = args
    ev = evaluate_run(qrels, run)
    return ev, score_run(ev, names)


def _pmap(fn: Callable, items: Sequence, jobs: int) -> list:
    # executor.map preserves input order, so output is independent of jobs
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


@dataclass
class ScoredTrack:
    track_id: str
    evals: dict[str, RunEval]
    scores: dict[str, SystemScores]


def score_bundles(bundles: Sequence[TrackBundle], names: Sequence[str], jobs: int) -> list[ScoredTrack]:
    tasks = [(b.qrels, r, tuple(names)) for b in bundles for r in b.runs]
    results = iter(_pmap(_score_task, tasks, jobs))
    out = []
    for b in bundles:
        evals, scores = {}, {}
        for r in b.runs:
            ev, sc = next(results)
            evals[r.system_id] = ev
            scores[r.system_id] = sc
        out.append(ScoredTrack(b.track_id, evals, scores))
    return out


# -- formatting ---------------------------------------------------------------------

def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def format_value(name: str, value: float | None, rounding: Rounding) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    if rounding is Rounding.PAPER:
        if get_metric(name).asl_family:
            return str(round_half_up(value))
        return f"{value:.3f}"
    return f"{value:.4f}"


def json_value(name: str, value: float, rounding: Rounding):
    if value is None or math.isnan(value):
        return None
    if rounding is Rounding.PAPER:
        return round_half_up(value) if get_metric(name).asl_family else round(value, 3)
    return value


def tsv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    out = io.StringIO()
    out.write("\t".join(header) + "\n")
    for row in rows:
        out.write("\t".join(str(c) for c in row) + "\n")
    return out.getvalue()


def dump_json(obj: dict) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION, **obj}, indent=2, sort_keys=False,
                      allow_nan=False) + "\n"


# -- eval ---------------------------------------------------------------------------

@dataclass
class EvalReport:
    metrics: list[str]
    tracks: list[ScoredTrack]
    warnings: list[str]

    def system(self, system_id: str, track_id: str | None = None) -> SystemScores:
        for t in self.tracks:
            if track_id is None or t.track_id == track_id:
                if system_id in t.scores:
                    return t.scores[system_id]
        raise KeyError(system_id)

    def render(self, fmt: str, rounding: Rounding, per_query: bool = False) -> str:
        if fmt == "json":
            return dump_json({
                "command": "eval",
                "rounding": rounding.value,
                "metrics": self.metrics,
                "tracks": [{
                    "track_id": t.track_id,
                    "systems": [{
                        "system_id": sid,
                        "n_queries": len(t.evals[sid].queries),
                        "metrics": {m: json_value(m, sc[m].value, rounding) for m in self.metrics},
                        "per_query": {m: {q: json_value(m, v, rounding)
                                          for q, v in sorted(sc[m].per_query.items())}
                                      for m in self.metrics},
                    } for sid, sc in t.scores.items()],
                } for t in self.tracks],
                "warnings": self.warnings,
            })
        if per_query:
            header = ["track", "system", "query", *self.metrics]
            rows = []
            for t in self.tracks:
                for sid, sc in t.scores.items():
                    for qe in t.evals[sid].queries:
                        q = qe.query_id
                        rows.append([t.track_id, sid, q, *(
                            format_value(m, sc[m].per_query.get(q, math.nan), rounding)
                            for m in self.metrics)])
            return tsv(header, rows)
        header = ["track", "system", "n_queries", *self.metrics]
        rows = [[t.track_id, sid, len(t.evals[sid].queries),
                 *(format_value(m, sc[m].value, rounding) for m in self.metrics)]
                for t in self.tracks for sid, sc in t.scores.items()]
        return tsv(header, rows)


def cmd_eval(config: RunConfig) -> EvalReport:
    bundles, warnings = load_bundles(config)
    names = config.metric_names()
    tracks = score_bundles(bundles, names, config.jobs)
    for t in tracks:
        for sc in t.scores.values():
            warnings.extend(sc.warnings)
    return EvalReport(names, tracks, warnings)


# -- compare ------------------------------------------------------------------------

TABLE_METRICS = ("P@20", "ASL@g1-10", "MAP", "ASL")


@dataclass
class CompareRow:
    metric: str
    baseline: float
    candidate: float
    rrie: float | None


@dataclass
class CompareReport:
    baseline_id: str
    candidate_id: str
    rows: list[CompareRow]
    warnings: list[str] = field(default_factory=list)

    def row(self, metric: str) -> CompareRow:
        canon = get_metric(metric).name
        return next(r for r in self.rows if r.metric == canon)

    def rrie_percent(self, metric: str) -> int | None:
        r = self.row(metric).rrie
        return None if r is None else round_half_up(100 * r)

    def render(self, fmt: str, rounding: Rounding) -> str:
        def rrie_str(r):
            if r is None:
                return "nan"
            return f"{round_half_up(100 * r)}%" if rounding is Rounding.PAPER else f"{r:.4f}"

        if fmt == "json":
            return dump_json({
                "command": "compare",
                "rounding": rounding.value,
                "baseline": self.baseline_id,
                "candidate": self.candidate_id,
                "rows": [{
                    "metric": r.metric,
                    "baseline": json_value(r.metric, r.baseline, rounding),
                    "candidate": json_value(r.metric, r.candidate, rounding),
                    "rrie": None if r.rrie is None else r.rrie,
                    "rrie_percent": None if r.rrie is None else round_half_up(100 * r.rrie),
                } for r in self.rows],
                "warnings": self.warnings,
            })
        return tsv(["metric", "baseline", "candidate", "rrie"], [
            [r.metric, format_value(r.metric, r.baseline, rounding),
             format_value(r.metric, r.candidate, rounding), rrie_str(r.rrie)]
            for r in self.rows])


def compare_values(
    baseline: Mapping[str, float], candidate: Mapping[str, float],
    baseline_id: str = "baseline", candidate_id: str = "candidate",
) -> CompareReport:
    """Baseline value, candidate value and RRIE for every metric in ``baseline``."""
    rows, warnings = [], []
    cand = {get_metric(k).name: v for k, v in candidate.items()}
    for name, b in baseline.items():
        metric = get_metric(name)
        if metric.name not in cand:
            raise KeyError(f"candidate has no value for {metric.name}")
        c = cand[metric.name]
        try:
            r = rrie(b, c, metric.rrie_kind)
        except ZeroDivisionError:
            r = None
        except ValueError as exc:
            warnings.append(f"{metric.name}: {exc}")
            r = None
        rows.append(CompareRow(metric.name, b, c, r))
    return CompareReport(baseline_id, candidate_id, rows, warnings)


def cmd_compare(config: RunConfig, baseline: str | None = None,
                candidate: str | None = None) -> CompareReport:
    baseline = baseline or config.baseline or "baseline"
    candidate = candidate or config.candidate or "candidate"
    if config.values is not None:
        vals = config.values
        if baseline not in vals or candidate not in vals:
            raise KeyError(f"values table needs entries {baseline!r} and {candidate!r}")
        names = config.metrics or list(vals[baseline])
        b = {n: vals[baseline][n] for n in names}
        return compare_values(b, vals[candidate], baseline, candidate)
    bundles, warnings = load_bundles(config)
    names = config.metrics or list(TABLE_METRICS)
    names = [get_metric(n).name for n in names]
    for b in bundles:
        if baseline in b.system_ids and candidate in b.system_ids:
            track = score_bundles([_subset(b, [baseline, candidate])], names, 1)[0]
            bs, cs = track.scores[baseline], track.scores[candidate]
            report = compare_values({n: bs.value(n) for n in names},
                                    {n: cs.value(n) for n in names}, baseline, candidate)
            report.warnings = warnings + list(bs.warnings) + list(cs.warnings) + report.warnings
            return report
    raise KeyError(f"systems {baseline!r} and {candidate!r} not found in one track")


def _subset(bundle: TrackBundle, ids: Sequence[str]) -> TrackBundle:
    return TrackBundle(bundle.track_id, bundle.qrels, tuple(bundle.run(i) for i in ids),
                       bundle.warnings)


# -- reorder ------------------------------------------------------------------------

def reorder_study(
    tracks: Mapping[str, Mapping[str, Mapping[str, Any]]],
    pairs: Sequence[tuple[str, str]] = REORDER_PAIRS,
    config: SignificanceConfig = SignificanceConfig(),
    population: bool = True,
) -> list[ReorderReport]:
    """``tracks[track][system][metric] -> SystemMetric``; one report per pair."""
    reports = []
    for a, b in pairs:
        a, b = get_metric(a).name, get_metric(b).name
        rows, skipped = [], []
        for tid in sorted(tracks):
            systems = {s: m for s, m in tracks[tid].items()
                       if not (math.isnan(m[a].value) or math.isnan(m[b].value))}
            if len(systems) < 2:
                skipped.append(tid)
                logger.warning("reorder %s->%s: track %s has fewer than 2 systems; skipped",
                               a, b, tid)
                continue
            rows.append(compare_track(tid, a, b, systems, config))
        reports.append(ReorderReport(a, b, tuple(rows), population, tuple(skipped)))
    return reports


@dataclass
class ReorderOutput:
    reports: list[ReorderReport]
    warnings: list[str]

    def render(self, fmt: str, detail: bool = False) -> str:
        if fmt == "json":
            out = []
            for rep in self.reports:
                entry = {"metric_a": rep.metric_a, "metric_b": rep.metric_b,
                         "skipped_tracks": list(rep.skipped), "tracks": []}
                for t in rep.tracks:
                    entry["tracks"].append({
                        "track_id": t.track_id, "n_systems": t.n_systems,
                        "max_delta_sort": t.max_delta_sort, "kendall": _nan_none(t.kendall),
                        "delta_value": t.delta_value,
                        "systems": [{"system_id": r.system_id, "n0": r.n0, "n1": r.n1,
                                     "delta_sort": r.delta_sort} for r in t.delta_sort.rows],
                    })
                if rep.tracks:
                    entry["summary"] = {
                        name: {"mean": _nan_none(s.mean), "std": _nan_none(s.std),
                               "low": _nan_none(s.low), "high": _nan_none(s.high)}
                        for name, s in (("delta_sort", rep.delta_sort_summary),
                                        ("kendall", rep.kendall_summary),
                                        ("delta_value", rep.delta_value_summary))
                    }
                out.append(entry)
            return dump_json({"command": "reorder", "pairs": out, "warnings": self.warnings})
        header = ["scope", "pair", "track", "system", "n_systems", "n0", "n1",
                  "delta_sort", "kendall", "delta_value"]
        rows = []
        for rep in self.reports:
            pair = f"{rep.metric_a}->{rep.metric_b}"
            for t in rep.tracks:
                if detail:
                    for r in t.delta_sort.rows:
                        rows.append(["system", pair, t.track_id, r.system_id, t.n_systems,
                                     r.n0, r.n1, f"{r.delta_sort:.2f}", "", ""])
                rows.append(["track", pair, t.track_id, "", t.n_systems, "", "",
                             f"{t.max_delta_sort:.2f}", f"{t.kendall:.4f}", f"{t.delta_value:.4f}"])
            if rep.tracks:
                ds, kt, dv = rep.delta_sort_summary, rep.kendall_summary, rep.delta_value_summary
                rows.append(["mean", pair, "", "", "", "", "",
                             f"{ds.mean:.2f}", f"{kt.mean:.4f}", f"{dv.mean:.4f}"])
                rows.append(["std", pair, "", "", "", "", "",
                             f"{ds.std:.2f}", f"{kt.std:.4f}", f"{dv.std:.4f}"])
                rows.append(["range", pair, "", "", "", "", "", ds.range_str(),
                             kt.range_str("{:.2f}"), dv.range_str("{:.3f}")])
        return tsv(header, rows)


def _nan_none(x: float):
    return None if x is None or math.isnan(x) else x


def cmd_reorder(config: RunConfig, metric_a: str | None = None, metric_b: str | None = None,
                tracks: Mapping[str, Mapping[str, Any]] | None = None) -> ReorderOutput:
    """Run the reordering study. ``tracks`` may be supplied precomputed
    (``tracks[track][system][metric] -> SystemMetric``) instead of loading files."""
    if metric_a and metric_b:
        pairs = [(metric_a, metric_b)]
    elif len(config.metrics) == 2:
        pairs = [tuple(config.metrics)]
    elif config.metrics:
        raise InputError("reorder takes exactly two --metric values (or none for the default study)")
    else:
        pairs = list(REORDER_PAIRS)
    warnings: list[str] = []
    if tracks is None:
        bundles, warnings = load_bundles(config)
        names = sorted({get_metric(m).name for p in pairs for m in p})
        scored = score_bundles(bundles, names, config.jobs)
        tracks = {t.track_id: t.scores for t in scored}
        for t in scored:
            for sc in t.scores.values():
                warnings.extend(sc.warnings)
    reports = reorder_study(tracks, pairs, config.significance, config.population_std)
    for rep in reports:
        warnings.extend(f"{rep.metric_a}->{rep.metric_b}: track {t} skipped (fewer than 2 systems)"
                        for t in rep.skipped)
    return ReorderOutput(reports, warnings)


# -- histogram ----------------------------------------------------------------------

@dataclass
class HistogramOutput:
    track_id: str
    system: str
    against: str | None
    histogram: insight.Histogram

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return dump_json({
                "command": "histogram", "track_id": self.track_id, "system": self.system,
                "against": self.against, "signed": self.histogram.spec.signed,
                "edges": list(self.histogram.spec.bucket_edges),
                "buckets": [{"bucket": l, "count": c} for l, c in self.histogram.rows()],
                "total": self.histogram.total,
            })
        return tsv(["bucket", "count"], self.histogram.rows())


def cmd_histogram(config: RunConfig) -> HistogramOutput:
    bundles, _ = load_bundles(config)
    bundle = bundles[0]
    track = score_bundles([bundle], ["ASL"], config.jobs)[0]
    asl = {s: sc["ASL"].value for s, sc in track.scores.items() if not math.isnan(sc["ASL"].value)}
    system = config.system or insight.best_system(asl, higher_is_better=False)
    if system not in track.evals:
        raise KeyError(f"unknown system {system!r}")
    if config.delta or config.against:
        against = config.against or insight.median_system(asl, higher_is_better=False)
        if against not in track.evals:
            raise KeyError(f"unknown system {against!r}")
        spec = (insight.HistogramSpec(tuple(config.edges), signed=True) if config.edges
                else insight.DEFAULT_DELTA_SPEC)
        hist = insight.delta_histogram(track.evals[system].queries,
                                       track.evals[against].queries, spec)
        return HistogramOutput(bundle.track_id, system, against, hist)
    spec = insight.HistogramSpec(tuple(config.edges)) if config.edges else insight.DEFAULT_ASL_SPEC
    return HistogramOutput(bundle.track_id, system, None,
                           insight.asl_histogram(track.evals[system].queries, spec))


# -- headroom -----------------------------------------------------------------------

@dataclass
class HeadroomOutput:
    rows: list[insight.HeadroomRow]
    metrics: list[str]

    def render(self, fmt: str, rounding: Rounding) -> str:
        if fmt == "json":
            return dump_json({
                "command": "headroom",
                "tracks": [{"track_id": r.track_id, "best": {
                    m: {"system": r.system(m), "value": json_value(m, r.value(m), rounding)}
                    for m in self.metrics if m in r.best}} for r in self.rows],
                "distributions": {
                    m: {"edges": [e if math.isfinite(e) else None for e in insight.HEADROOM_EDGES[m]],
                        "counts": insight.headroom_distribution(self.rows, m)}
                    for m in self.metrics if m in insight.HEADROOM_EDGES},
            })
        header = ["track"]
        for m in self.metrics:
            header += [f"best_{m}", f"system_{m}"]
        rows = []
        for r in self.rows:
            row = [r.track_id]
            for m in self.metrics:
                if m in r.best:
                    row += [format_value(m, r.value(m), rounding), r.system(m)]
                else:
                    row += ["nan", ""]
            rows.append(row)
        return tsv(header, rows)


def cmd_headroom(config: RunConfig) -> HeadroomOutput:
    bundles, _ = load_bundles(config)
    names = [get_metric(m).name for m in (config.metrics or insight.HEADROOM_METRICS)]
    scored = score_bundles(bundles, names, config.jobs)
    return HeadroomOutput(insight.headroom_table({t.track_id: t.scores for t in scored}, names),
                          names)


# -- oracle -------------------------------------------------------------------------

@dataclass
class OracleCheck:
    name: str
    passed: bool
    detail: str


@dataclass
class OracleReport:
    checks: list[OracleCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return dump_json({"command": "oracle", "passed": self.passed,
                              "checks": [vars(c) for c in self.checks]})
        return tsv(["check", "status", "detail"],
                   [[c.name, "pass" if c.passed else "FAIL", c.detail] for c in self.checks])


def cmd_oracle(config: RunConfig) -> OracleReport:
    rng = np.random.default_rng(config.seed)
    checks = []

    ok = 0
    for _ in range(config.draws):
        n = int(rng.integers(1, 50))
        sl = rng.uniform(1.0, 1e6, n)
        ok += insight.weighted_identity_check(sl)
    checks.append(OracleCheck("weighted_identity", ok == config.draws,
                              f"{ok}/{config.draws} random vectors"))

    for sl1 in (1.0, 5.0, 50.0):
        sl2 = np.geomspace(sl1, 1e6, 25)
        eq = insight.two_value_limit_check(sl1, sl2)
        monotone = all(b >= a for a, b in zip(eq, eq[1:]))
        close = abs(eq[-1] - 2 * sl1) <= 0.01 * 2 * sl1
        checks.append(OracleCheck(f"two_value_limit[SL1={sl1:g}]", monotone and close,
                                  f"SL2=1e6 -> {eq[-1]:.6f} (limit {2 * sl1:g})"))

    v = insight.p_space_average_sl([1, 1000])
    checks.append(OracleCheck("p_space_average[1,1000]", 1.99 <= v <= 2.01, f"{v:.6f}"))

    hm = insight.p_space_average_sl(insight.SKEWED_SEARCH_LENGTHS)
    swapped = float(np.mean(insight.SWAP_EQUIVALENT_SEARCH_LENGTHS))
    checks.append(OracleCheck("skewed_list_harmonic", abs(hm - 2.222) <= 0.001, f"{hm:.6f}"))
    checks.append(OracleCheck("swap_equivalent_mean", abs(swapped - hm) <= 0.01 * hm,
                              f"{swapped:.6f} vs {hm:.6f}"))

    part = insight.effective_top_fraction([1, 1000])
    checks.append(OracleCheck("partition[1,1000]", part.fraction == 0.5,
                              f"n={part.n} fraction={part.fraction}"))

    if config.search_lengths:
        res = insight.effective_top_fraction(config.search_lengths)
        checks.append(OracleCheck("partition[supplied]", 0 < res.fraction <= 1,
                                  f"n={res.n}/{res.total} fraction={res.fraction:.4f} "
                                  f"target={res.target_sl:.4f} achieved={res.achieved_sl:.4f}"))
    if config.tracks_dir is not None or config.qrels is not None:
        bundles, _ = load_bundles(config)
        scored = score_bundles(bundles, ["MAP"], config.jobs)
        per_track = []
        for t in scored:
            fr = [insight.effective_top_fraction(insight.precision_search_lengths(ev.queries)).fraction
                  for ev in t.evals.values() if ev.queries]
            if fr:
                per_track.append(float(np.mean(fr)))
        if per_track:
            mean, std = float(np.mean(per_track)), float(np.std(per_track))
            checks.append(OracleCheck("map_effective_top_fraction",
                                      all(0 < f <= 1 for f in per_track),
                                      f"{100 * mean:.0f}% +- {100 * std:.0f} over {len(per_track)} track(s)"))
    return OracleReport(checks)


# -- argument parsing -----------------------------------------------------------------

def _env_jobs() -> int:
    env = os.environ.get("ASL_EVAL_JOBS")
    if env:
        return int(env)
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--qrels", type=Path)
    common.add_argument("--runs-dir", type=Path)
    common.add_argument("--run", type=Path, action="append", default=[], dest="runs",
                        help="run file (repeatable)")
    common.add_argument("--tracks-dir", type=Path)
    common.add_argument("--metric", action="append", default=[], dest="metrics")
    common.add_argument("--g", type=int, action="append", dest="g_values")
    common.add_argument("--k", type=int, action="append", dest="k_values")
    common.add_argument("--threshold", type=int, default=1)
    common.add_argument("--order", choices=["score", "file"], default="score")
    common.add_argument("--min-gain", type=float, default=0.10)
    common.add_argument("--max-p", type=float, default=0.05)
    common.add_argument("--unpaired", action="store_true", help="two-sample instead of paired t-test")
    common.add_argument("--sample-std", action="store_true",
                        help="sample instead of population std for cross-track ranges")
    common.add_argument("--format", choices=["tsv", "json"], default="tsv", dest="output_format")
    common.add_argument("--round", choices=["precise", "paper"], default="precise", dest="rounding")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=None)
    common.add_argument("--min-runs", type=int, default=None)
    common.add_argument("-o", "--output", type=Path)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="asleval", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", parents=[common], help="per-system metrics")
    p.add_argument("--per-query", action="store_true")

    p = sub.add_parser("compare", parents=[common], help="baseline vs candidate with RRIE")
    p.add_argument("--baseline")
    p.add_argument("--candidate")
    p.add_argument("--values", type=Path,
                   help='JSON {"<baseline>": {metric: value}, "<candidate>": {...}}')

    p = sub.add_parser("reorder", parents=[common], help="system reordering study")
    p.add_argument("--detail", action="store_true", help="include per-system rows")

    p = sub.add_parser("histogram", parents=[common], help="per-document ASL histogram")
    p.add_argument("--system")
    p.add_argument("--against")
    p.add_argument("--delta", action="store_true", help="best minus median system")
    p.add_argument("--edges", type=lambda s: [float(x) for x in s.split(",")])

    sub.add_parser("headroom", parents=[common], help="best value per track")

    p = sub.add_parser("oracle", parents=[common], help="numeric checks on SL averaging")
    p.add_argument("--draws", type=int, default=10000)
    p.add_argument("--sl", type=float, nargs="+", dest="search_lengths")
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    values = None
    if getattr(ns, "values", None) is not None:
        values = json.loads(Path(ns.values).read_text())
    return RunConfig(
        command=Command(ns.command),
        qrels=ns.qrels, runs_dir=ns.runs_dir, runs=ns.runs, tracks_dir=ns.tracks_dir,
        metrics=ns.metrics,
        g_values=ns.g_values or [1, 10], k_values=ns.k_values or [20],
        significance=SignificanceConfig(ns.min_gain, ns.max_p, paired=not ns.unpaired),
        population_std=not ns.sample_std,
        order=OrderingPolicy(ns.order), threshold=ns.threshold,
        output_format=ns.output_format, rounding=Rounding(ns.rounding),
        seed=ns.seed, jobs=ns.jobs if ns.jobs is not None else _env_jobs(),
        min_runs=ns.min_runs, per_query=getattr(ns, "per_query", False),
        baseline=getattr(ns, "baseline", None), candidate=getattr(ns, "candidate", None),
        values=values,
        system=getattr(ns, "system", None), against=getattr(ns, "against", None),
        delta=getattr(ns, "delta", False), edges=getattr(ns, "edges", None),
        draws=getattr(ns, "draws", 10000), search_lengths=getattr(ns, "search_lengths", None),
    )


def run(config: RunConfig, detail: bool = False) -> tuple[str, int, list[str]]:
    """Execute a config; returns (output text, exit code, warnings)."""
    fmt, rnd = config.output_format, config.rounding
    cmd = config.command
    if cmd is Command.EVAL:
        rep = cmd_eval(config)
        return rep.render(fmt, rnd, config.per_query), EXIT_OK, rep.warnings
    if cmd is Command.COMPARE:
        rep = cmd_compare(config)
        return rep.render(fmt, rnd), EXIT_OK, rep.warnings
    if cmd is Command.REORDER:
        rep = cmd_reorder(config)
        return rep.render(fmt, detail), EXIT_OK, rep.warnings
    if cmd is Command.HISTOGRAM:
        return cmd_histogram(config).render(fmt), EXIT_OK, []
    if cmd is Command.HEADROOM:
        return cmd_headroom(config).render(fmt, rnd), EXIT_OK, []
    rep = cmd_oracle(config)
    return rep.render(fmt), (EXIT_OK if rep.passed else EXIT_ORACLE), []


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.ERROR,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        config = config_from_args(ns)
        text, code, warnings = run(config, detail=getattr(ns, "detail", False))
    except (TrecFormatError, LayoutError, InsufficientRunsError, InputError, KeyError,
            UndefinedMetricError, ValueError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"asleval: error: {msg}", file=sys.stderr)
        return EXIT_INPUT
    for w in warnings:
        print(f"asleval: warning: {w}", file=sys.stderr)
    if ns.output is not None:
        with open(ns.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
