import io
import logging
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asleval.trec_io import (
    DuplicateJudgmentError,
    DuplicatePredictionError,
    InsufficientRunsError,
    LayoutError,
    OrderingPolicy,
    Relevance,
    RunList,
    TrecFormatError,
    discover_track,
    discover_tracks,
    format_run,
    parse_qrels,
    parse_run,
)


def test_qrels_basic():
    q = parse_qrels(b"q1 0 d1 1\nq1 0 d2 0")
    assert q.relevant_docs("q1") == {"d1"}
    assert q.classify("q1", "d2") is Relevance.IRRELEVANT
    assert q.classify("q1", "zz") is Relevance.UNJUDGED
    assert len(q) == 2


def test_qrels_graded_threshold():
    assert parse_qrels(b"q1 0 d1 2", threshold=1).is_relevant("q1", "d1")
    assert not parse_qrels(b"q1 0 d1 1", threshold=2).is_relevant("q1", "d1")
    # negative grades are legal and never relevant at the default threshold
    assert parse_qrels(b"q1 0 d1 -2").grade("q1", "d1") == -2


def test_qrels_duplicate():
    with pytest.raises(DuplicateJudgmentError) as exc:
        parse_qrels(b"q1 0 d1 1\nq1 0 d1 1")
    assert exc.value.line == 2


@pytest.mark.parametrize("text,line", [
    (b"q1 0 d1 1\nq1 0 d2", 2),
    (b"q1 0 d1 x", 1),
    (b"q1 0 d1 1.5", 1),
    (b"\nq1 0 d1 1 extra", 2),
])
def test_qrels_malformed(text, line):
    with pytest.raises(TrecFormatError) as exc:
        parse_qrels(text)
    assert exc.value.line == line


def test_qrels_from_path_and_stream(tmp_path):
    p = tmp_path / "qrels.txt"
    p.write_bytes(b"q1 0 d1 1\n")
    assert parse_qrels(p).relevant_docs("q1") == {"d1"}
    assert parse_qrels(io.BytesIO(b"q1 0 d1 1\n")).relevant_docs("q1") == {"d1"}


def test_run_sorted_by_score():
    run = parse_run(b"q1 Q0 d1 1 3.0 t\nq1 Q0 d2 2 5.0 t\n", "sys")
    assert run.ranked_docs("q1") == ["d2", "d1"]


def test_run_tie_break_doc_desc():
    run = parse_run(b"q1 Q0 dA 1 1.0 t\nq1 Q0 dB 2 1.0 t\n", "sys")
    assert run.ranked_docs("q1") == ["dB", "dA"]


def test_run_rank_column_ignored():
    run = parse_run(b"q1 Q0 d1 1 1.0 t\nq1 Q0 d2 2 2.0 t\n", "sys")
    assert run.ranked_docs("q1") == ["d2", "d1"]


def test_run_file_order():
    run = parse_run(b"q1 Q0 d1 1 1.0 t\nq1 Q0 d2 2 2.0 t\n", "sys", OrderingPolicy.BY_FILE_ORDER)
    assert run.ranked_docs("q1") == ["d1", "d2"]


def test_run_duplicate():
    data = b"q1 Q0 d1 1 1.0 t\nq1 Q0 d1 2 2.0 t\n"
    with pytest.raises(DuplicatePredictionError) as exc:
        parse_run(data, "sys")
    assert exc.value.line == 2


def test_run_duplicate_dedupe(caplog):
    data = b"q1 Q0 d1 1 1.0 t\nq1 Q0 d2 2 1.5 t\nq1 Q0 d1 3 2.0 t\n"
    with caplog.at_level(logging.WARNING):
        run = parse_run(data, "sys", dedupe=True)
    assert run.rankings["q1"][0] == ("d1", 2.0)
    assert "duplicate" in caplog.text


@pytest.mark.parametrize("text", [
    b"q1 Q0 d1 1 1.0",
    b"q1 Q0 d1 1 abc t",
    b"q1 Q0 d1 one 1.0 t",
    b"q1 Q0 d1 1 nan t",
])
def test_run_malformed(text):
    with pytest.raises(TrecFormatError):
        parse_run(text, "sys")


def test_run_system_id_defaults_to_tag():
    assert parse_run(b"q1 Q0 d1 1 1.0 mytag\n").system_id == "mytag"


run_lines = st.lists(
    st.tuples(
        st.sampled_from(["q1", "q2", "q3"]),
        st.text("abcdefXYZ019-_.", min_size=1, max_size=6),
        st.floats(-1e6, 1e6, allow_nan=False).map(lambda x: round(x, 3)),
    ),
    max_size=40,
    unique_by=lambda t: (t[0], t[1]),
)


def _render(lines):
    return "".join(f"{q} Q0 {d} 0 {s!r} tag\n" for q, d, s in lines).encode()


@given(run_lines, st.sampled_from(list(OrderingPolicy)))
@settings(max_examples=150, deadline=None)
def test_run_round_trip(lines, policy):
    run = parse_run(_render(lines), "sys", policy)
    again = parse_run(format_run(run).encode(), "sys", policy)
    assert again == run


@given(run_lines)
@settings(max_examples=100, deadline=None)
def test_parse_deterministic(lines):
    data = _render(lines)
    a = parse_run(data, "s")
    b = parse_run(data, "s")
    assert {q: list(v) for q, v in a.rankings.items()} == {q: list(v) for q, v in b.rankings.items()}
    for q, seq in a.rankings.items():
        keys = [(s, d) for d, s in seq]
        assert keys == sorted(keys, reverse=True)


@given(run_lines, st.lists(st.tuples(st.sampled_from(["q1", "q2"]),
                                     st.text("abcXYZ01", min_size=1, max_size=6),
                                     st.integers(-1, 3)),
                           unique_by=lambda t: (t[0], t[1])))
@settings(max_examples=100, deadline=None)
def test_every_prediction_classified_once(lines, judgments):
    qrels = parse_qrels("".join(f"{q} 0 {d} {g}\n" for q, d, g in judgments))
    run = parse_run(_render(lines), "s")
    for q in run.queries:
        for d in run.ranked_docs(q):
            kinds = [
                qrels.is_relevant(q, d),
                qrels.grade(q, d) is not None and not qrels.is_relevant(q, d),
                qrels.grade(q, d) is None,
            ]
            assert sum(kinds) == 1
            assert qrels.classify(q, d) in Relevance


def test_runlist_is_immutable():
    run = RunList("s", {"q1": [("d1", 1.0)]})
    with pytest.raises(TypeError):
        run.rankings["q2"] = ()


def _make_track(root: Path, n_runs: int, corrupt: int = 0) -> Path:
    track = root / "trackA"
    (track / "runs").mkdir(parents=True)
    (track / "qrels.txt").write_text("q1 0 d1 1\nq1 0 d2 0\n")
    for i in range(n_runs):
        (track / "runs" / f"run{i}").write_text(f"q1 Q0 d1 1 {i}.0 run{i}\nq1 Q0 d2 2 0.5 run{i}\n")
    for i in range(corrupt):
        (track / "runs" / f"bad{i}").write_text("q1 Q0 d1\n")
    return track


def test_discover_track_five_runs(tmp_path):
    bundle = discover_track(_make_track(tmp_path, 5), min_runs=5)
    assert len(bundle.runs) == 5
    assert bundle.system_ids == [f"run{i}" for i in range(5)]
    assert bundle.warnings == ()


def test_discover_track_too_few(tmp_path):
    with pytest.raises(InsufficientRunsError):
        discover_track(_make_track(tmp_path, 4), min_runs=5)


def test_discover_track_skips_malformed(tmp_path, caplog):
    with caplog.at_level(logging.WARNING):
        bundle = discover_track(_make_track(tmp_path, 6, corrupt=1), min_runs=5)
    assert len(bundle.runs) == 6
    assert len(bundle.warnings) == 1 and "bad0" in bundle.warnings[0]


def test_discover_track_missing_qrels(tmp_path):
    (tmp_path / "t" / "runs").mkdir(parents=True)
    with pytest.raises(LayoutError):
        discover_track(tmp_path / "t")


def test_discover_tracks_skips_bad(tmp_path):
    _make_track(tmp_path, 5)
    (tmp_path / "empty" / "runs").mkdir(parents=True)
    (tmp_path / "empty" / "qrels.txt").write_text("q1 0 d1 1\n")
    bundles, warnings = discover_tracks(tmp_path, min_runs=5)
    assert [b.track_id for b in bundles] == ["trackA"]
    assert len(warnings) == 1 and "empty" in warnings[0]


def test_non_ascii_ids_round_trip():
    data = "q1 Q0 dé 1 1.0 t\n".encode() + b"q1 Q0 d\xff 2 0.5 t\n"
    run = parse_run(data, "s")
    again = parse_run(format_run(run).encode("utf-8", "surrogateescape"), "s")
    assert again == run
