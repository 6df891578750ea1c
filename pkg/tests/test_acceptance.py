"""Acceptance criteria. Each test records a PASS/FAIL line in the terminal summary."""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from asleval.cli import Command, Rounding, RunConfig, cmd_compare, cmd_reorder, format_value
from asleval.insight import (
    SKEWED_SEARCH_LENGTHS,
    SWAP_EQUIVALENT_SEARCH_LENGTHS,
    asl_histogram,
    delta_histogram,
    effective_top_fraction,
    p_space_average_sl,
    two_value_limit_check,
    weighted_identity_check,
)
from asleval.metrics import (
    AblationStage,
    ablation_metric,
    asl_all,
    average_precision,
    evaluate_query,
    evaluate_run,
    mean_average_precision,
    query_asl_at_g,
    query_precision_at_k,
)
from asleval.stats import cross_track_summary, kendall_tau
from asleval.synthetic import move, planted_metric, random_ranking, synthetic_track
from asleval.trec_io import parse_qrels, parse_run

from oracles import brute_ap, brute_asl

pytestmark = pytest.mark.usefixtures("criterion")

TABLE_VALUES = {
    "documents": ({"P@20": 0.456, "ASL@g1-10": 14, "MAP": 0.401, "ASL": 39},
                  {"P@20": 0.594, "ASL@g1-10": 5, "MAP": 0.543, "ASL": 27},
                  {"P@20": 25, "ASL@g1-10": 69, "MAP": 24, "ASL": 32}),
    "passages": ({"P@20": 0.517, "ASL@g1-10": 51, "MAP": 0.400, "ASL": 264},
                 {"P@20": 0.706, "ASL@g1-10": 6, "MAP": 0.572, "ASL": 215},
                 {"P@20": 39, "ASL@g1-10": 90, "MAP": 29, "ASL": 19}),
}


@pytest.mark.criterion("AC1 relative error reduction table")
def test_ac1_rrie_table():
    start = time.perf_counter()
    for name, (base, cand, expected) in TABLE_VALUES.items():
        config = RunConfig(command=Command.COMPARE, values={"base": base, "cand": cand})
        report = cmd_compare(config, "base", "cand")
        got = {m: report.rrie_percent(m) for m in expected}
        assert got == expected, name
        rendered = report.render("tsv", Rounding.PAPER)
        for m, pct in expected.items():
            assert f"{m}\t" in rendered and f"\t{pct}%" in rendered
    assert time.perf_counter() - start < 1.0


@pytest.mark.criterion("AC2 irrelevant-above count equals rank minus relevant-above")
def test_ac2_two_forms_agree():
    rng = np.random.default_rng(2)
    checked = 0
    for _ in range(10_000):
        ranked, relevant = random_ranking(rng, max_docs=1000)
        qe = evaluate_query(relevant, ranked)
        is_rel = np.fromiter((d in relevant for d in ranked), bool, len(ranked))
        irrel_before = np.concatenate(([0], np.cumsum(~is_rel)))
        rel_before = np.concatenate(([0], np.cumsum(is_rel)))
        for d in qe.docs:
            if not d.retrieved:
                continue
            i = d.rank - 1
            direct_irrel, direct_rel = int(irrel_before[i]), int(rel_before[i])
            assert (d.irrel_above, d.rel_above) == (direct_irrel, direct_rel)
            assert direct_irrel + 1 == d.rank - direct_rel == d.asl
            checked += 1
    assert checked > 100_000


@pytest.mark.criterion("AC3 per-document search length unaffected by other relevant docs")
def test_ac3_atomization():
    rng = np.random.default_rng(3)
    for trial in range(1000):
        ranked, relevant = random_ranking(rng, max_docs=300)
        before = {d.doc_id: d.asl for d in evaluate_query(relevant, ranked).docs}
        assert before == brute_asl(ranked, relevant)
        if trial % 2 == 0 and len(relevant) > 1:
            victim = sorted(relevant)[int(rng.integers(len(relevant)))]
            new_rel = relevant - {victim}
            new_ranked = [d for d in ranked if d != victim]
        else:
            victim = "new-relevant"
            new_rel = relevant | {victim}
            pos = int(rng.integers(len(ranked) + 1))
            new_ranked = ranked[:pos] + [victim] + ranked[pos:]
        after = {d.doc_id: d.asl for d in evaluate_query(new_rel, new_ranked).docs}
        for doc in relevant - {victim}:
            assert after[doc] == before[doc]


def _multi_query_system(rng, n_queries):
    evals = []
    while len(evals) < n_queries:
        ranked, relevant = random_ranking(rng, max_docs=200)
        qe = evaluate_query(relevant, ranked, f"q{len(evals)}")
        if not qe.degenerate:
            evals.append(qe)
    return evals


@pytest.mark.criterion("AC4 fully harmonic ablation equals reciprocal ASL")
def test_ac4_ablation_chain():
    rng = np.random.default_rng(4)
    for group in range(100):
        asl, m3 = {}, {}
        for i in range(10):
            evals = _multi_query_system(rng, int(rng.integers(1, 8)))
            sid = f"s{i}"
            asl[sid] = asl_all(evals)
            m3[sid] = ablation_metric(evals, AblationStage.HARMONIC_BOTH)
            assert m3[sid] == pytest.approx(1.0 / asl[sid], rel=1e-12, abs=1e-12)
        by_m3 = sorted(m3, key=lambda s: (-m3[s], s))
        by_asl = sorted(asl, key=lambda s: (asl[s], s))
        assert kendall_tau(by_m3, by_asl) == 1.0


@pytest.mark.criterion("AC5 MAP matches scan-accumulate oracle")
def test_ac5_map_oracle():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        lib, ref = [], []
        for q in range(int(rng.integers(1, 6))):
            ranked, relevant = random_ranking(rng, max_docs=300)
            lib.append(average_precision(evaluate_query(relevant, ranked, f"q{q}")))
            ref.append(brute_ap(ranked, relevant))
        assert abs(mean_average_precision(lib) - sum(ref) / len(ref)) <= 1e-12


@pytest.mark.criterion("AC6 precision-space averaging identities")
def test_ac6_appendix_identities():
    rng = np.random.default_rng(6)
    for _ in range(10_000):
        n = int(rng.integers(1, 50))
        sl = np.exp(rng.uniform(0, np.log(1e4), n))
        assert weighted_identity_check(sl, rel_tol=1e-12)
    for sl1 in (1, 5, 50):
        (limit,) = two_value_limit_check(sl1, [1e6])
        assert abs(limit - 2 * sl1) <= 0.01 * 2 * sl1
    assert 1.99 <= p_space_average_sl([1, 1000]) <= 2.01


@pytest.mark.criterion("AC7a skewed-list regression values")
def test_ac7_regression():
    hm = p_space_average_sl(SKEWED_SEARCH_LENGTHS)
    assert abs(hm - 2.222) <= 0.001
    plain = sum(SWAP_EQUIVALENT_SEARCH_LENGTHS) / len(SWAP_EQUIVALENT_SEARCH_LENGTHS)
    assert abs(plain - hm) <= 0.01 * hm
    assert effective_top_fraction([1, 1000]).fraction == 0.5


def _monotone_pools():
    for n in range(2, 41):
        for dispersion in (2.5, 3.0, 5.0, 10.0, 100.0, 1000.0):
            yield "geometric", n, dispersion, list(np.geomspace(1.0, dispersion, n))
            yield "linear", n, dispersion, list(np.linspace(1.0, dispersion, n))


@pytest.mark.criterion("AC7b effective top fraction below 1 when dispersion exceeds 2x")
def test_ac7_dispersion_property():
    failures = []
    for kind, n, dispersion, pool in _monotone_pools():
        assert max(pool) / min(pool) > 2
        res = effective_top_fraction(pool)
        if not res.fraction < 1:
            failures.append((kind, n, dispersion))
    assert not failures, f"{len(failures)} pools reach fraction 1, first {failures[:3]}"


@pytest.mark.criterion("AC8a planted significance jump and Kendall extremes")
def test_ac8_planted_track():
    order = [f"s{i}" for i in range(10)]
    a = planted_metric(order)
    b = planted_metric(move(order, 7, 1), rng=np.random.default_rng(1))
    tracks = {"planted": {s: {"MAP": a[s], "ASL@g1-10": b[s]} for s in order}}
    out = cmd_reorder(RunConfig(command=Command.REORDER), "MAP", "ASL@g1-10", tracks=tracks)
    track = out.reports[0].tracks[0]
    # s7 has 7 significantly better systems under A and 1 under B
    assert track.max_delta_sort == 60.0

    same = {"t": {s: {"MAP": a[s], "ASL@g1-10": a[s]} for s in order}}
    rev = planted_metric(order[::-1])
    flipped = {"t": {s: {"MAP": a[s], "ASL@g1-10": rev[s]} for s in order}}
    k_same = cmd_reorder(RunConfig(), "MAP", "ASL@g1-10", tracks=same).reports[0].tracks[0]
    k_rev = cmd_reorder(RunConfig(), "MAP", "ASL@g1-10", tracks=flipped).reports[0].tracks[0]
    assert k_same.kendall == 1.0 and k_rev.kendall == -1.0
    assert kendall_tau(order, order) == 1.0 and kendall_tau(order, order[::-1]) == -1.0


@pytest.mark.criterion("AC8b 76-track mean within analytic expectation +- 3 SE")
def test_ac8_cross_track_summary():
    # one system moved from a uniform src to a uniform dst != src among 10
    # systems: max delta sort = 10 * |src - dst|
    n = 10
    gaps = [abs(i - j) for i in range(n) for j in range(n) if i != j]
    mean = 10 * sum(gaps) / len(gaps)
    var = 100 * sum(g * g for g in gaps) / len(gaps) - mean**2
    assert mean == pytest.approx(110 / 3)

    rng = np.random.default_rng(8)
    order = [f"s{i}" for i in range(n)]
    tracks = {}
    for t in range(76):
        src, dst = rng.choice(n, size=2, replace=False)
        a = planted_metric(order, rng=rng)
        b = planted_metric(move(order, int(src), int(dst)), rng=rng)
        tracks[f"t{t:02d}"] = {s: {"MAP": a[s], "ASL@g1-10": b[s]} for s in order}
    report = cmd_reorder(RunConfig(), "MAP", "ASL@g1-10", tracks=tracks).reports[0]
    values = [t.max_delta_sort for t in report.tracks]
    summary = cross_track_summary(values)
    assert summary.n == 76 and summary.mean == report.delta_sort_summary.mean
    assert abs(summary.mean - mean) <= 3 * math.sqrt(var / 76)


@pytest.mark.criterion("AC9 histogram conservation and delta antisymmetry")
def test_ac9_histograms():
    rng = np.random.default_rng(9)
    for t in range(5):
        bundle = synthetic_track(rng, f"t{t}", n_systems=6, n_queries=10)
        evals = {r.system_id: evaluate_run(bundle.qrels, r).queries for r in bundle.runs}
        run_queries = set.union(*(set(r.queries) for r in bundle.runs))
        total = sum(len(bundle.qrels.relevant_docs(q)) for q in bundle.qrels.queries
                    if q in run_queries)
        for sid, ev in evals.items():
            assert asl_histogram(ev).total == total
        ids = sorted(evals)
        for x in ids:
            for y in ids:
                fwd = delta_histogram(evals[x], evals[y])
                back = delta_histogram(evals[y], evals[x])
                assert fwd.counts == back.counts[::-1]
                assert fwd.total == total


FIXTURE_QRELS = b"q1 0 d1 1\nq1 0 d4 1\nq1 0 d9 1\nq1 0 d2 0\nq2 0 e2 1\n"
FIXTURE_RUN = b"".join(f"{q} Q0 {d} {i} {10 - i} fx\n".encode() for q, docs in
                       (("q1", ["d1", "d2", "d3", "d4", "d5"]), ("q2", ["e1", "e2", "e3"]))
                       for i, d in enumerate(docs, start=1))


@pytest.mark.criterion("AC10 two-query worked fixture end to end")
def test_ac10_fixture():
    qrels, run = parse_qrels(FIXTURE_QRELS), parse_run(FIXTURE_RUN, "fx")
    evals = evaluate_run(qrels, run).queries
    q1 = next(q for q in evals if q.query_id == "q1")

    # brute force: per-doc SL by deletion, then the two-level mean in exact fractions
    per_query = []
    for qid in ("q1", "q2"):
        sls = brute_asl(run.ranked_docs(qid), qrels.relevant_docs(qid))
        per_query.append(Fraction(sum(sls.values()), len(sls)))
    brute = sum(per_query) / 2
    assert brute == Fraction(13, 6)
    assert asl_all(evals) == pytest.approx(13 / 6, abs=1e-15)
    assert format_value("ASL", asl_all(evals), Rounding.PAPER) == "2"
    assert format_value("ASL", asl_all(evals), Rounding.PRECISE) == "2.1667"

    brute_map = (brute_ap(run.ranked_docs("q1"), qrels.relevant_docs("q1"))
                 + brute_ap(run.ranked_docs("q2"), qrels.relevant_docs("q2"))) / 2
    assert mean_average_precision([average_precision(q) for q in evals]) == brute_map == 0.5

    first_two = sorted(brute_asl(run.ranked_docs("q1"), {"d1", "d4"}).values())
    assert query_asl_at_g(q1, 2) == sum(first_two) / 2 == 2
    hits = sum(d in qrels.relevant_docs("q1") for d in run.ranked_docs("q1")[:5])
    assert query_precision_at_k(q1, 5) == hits / 5 == 0.4
