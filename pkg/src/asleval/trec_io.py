"""Readers and writers for TREC qrels and run files.

Qrels lines are ``query iteration doc grade``; run lines are
``query Q0 doc rank score tag``. Both are whitespace delimited. Bytes are
decoded as UTF-8 with ``surrogateescape`` so arbitrary doc-ids survive a
round trip and compare in byte order.
"""

from __future__ import annotations

import io
import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import BinaryIO, Iterable, Iterator, Mapping, Sequence, Union

logger = logging.getLogger(__name__)

# str is file content; pass a Path to read from disk
Source = Union[bytes, str, os.PathLike, BinaryIO]

QRELS_FILENAME = "qrels.txt"
RUNS_DIRNAME = "runs"
DEFAULT_MIN_RUNS = 5


class TrecFormatError(ValueError):
    """A line could not be parsed. ``line`` is 1-based."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class DuplicateJudgmentError(TrecFormatError):
    pass


class DuplicatePredictionError(TrecFormatError):
    pass


class LayoutError(FileNotFoundError):
    pass


class InsufficientRunsError(ValueError):
    def __init__(self, track_id: str, found: int, required: int):
        self.track_id = track_id
        self.found = found
        self.required = required
        super().__init__(
            f"track {track_id!r}: {found} valid run file(s), at least {required} required"
        )


class OrderingPolicy(str, Enum):
    BY_SCORE = "score"
    BY_FILE_ORDER = "file"


class Relevance(str, Enum):
    RELEVANT = "relevant"
    IRRELEVANT = "judged-irrelevant"
    UNJUDGED = "unjudged"


def _freeze(d: Mapping) -> Mapping:
    return MappingProxyType(dict(d))


@dataclass(frozen=True)
class Qrels:
    """Relevance judgments, ``judgments[query][doc] -> grade``."""

    judgments: Mapping[str, Mapping[str, int]]
    relevance_threshold: int = 1

    def __post_init__(self):
        frozen = {q: _freeze(docs) for q, docs in self.judgments.items()}
        object.__setattr__(self, "judgments", _freeze(frozen))

    @property
    def queries(self) -> list[str]:
        return sorted(self.judgments)

    def grade(self, query_id: str, doc_id: str) -> int | None:
        return self.judgments.get(query_id, {}).get(doc_id)

    def is_relevant(self, query_id: str, doc_id: str) -> bool:
        g = self.grade(query_id, doc_id)
        return g is not None and g >= self.relevance_threshold

    def relevant_docs(self, query_id: str) -> frozenset[str]:
        docs = self.judgments.get(query_id, {})
        return frozenset(d for d, g in docs.items() if g >= self.relevance_threshold)

    def classify(self, query_id: str, doc_id: str) -> Relevance:
        g = self.grade(query_id, doc_id)
        if g is None:
            return Relevance.UNJUDGED
        if g >= self.relevance_threshold:
            return Relevance.RELEVANT
        return Relevance.IRRELEVANT

    def __len__(self) -> int:
        return sum(len(d) for d in self.judgments.values())

    def __reduce__(self):
        return (Qrels, ({q: dict(d) for q, d in self.judgments.items()}, self.relevance_threshold))


@dataclass(frozen=True)
class RunList:
    """One system's ranked output: ``rankings[query] -> ((doc, score), ...)``."""

    system_id: str
    rankings: Mapping[str, tuple[tuple[str, float], ...]]
    ordering_policy: OrderingPolicy = OrderingPolicy.BY_SCORE

    def __post_init__(self):
        object.__setattr__(
            self, "rankings", _freeze({q: tuple(v) for q, v in self.rankings.items()})
        )
        object.__setattr__(self, "ordering_policy", OrderingPolicy(self.ordering_policy))

    @property
    def queries(self) -> list[str]:
        return sorted(self.rankings)

    def ranked_docs(self, query_id: str) -> list[str]:
        return [d for d, _ in self.rankings.get(query_id, ())]

    def __eq__(self, other):
        if not isinstance(other, RunList):
            return NotImplemented
        return (
            self.system_id == other.system_id
            and self.ordering_policy == other.ordering_policy
            and dict(self.rankings) == dict(other.rankings)
        )

    def __hash__(self):
        return hash((self.system_id, tuple(sorted(self.rankings.items()))))

    def __reduce__(self):
        return (RunList, (self.system_id, dict(self.rankings), self.ordering_policy))


@dataclass(frozen=True)
class TrackBundle:
    track_id: str
    qrels: Qrels
    runs: tuple[RunList, ...]
    warnings: tuple[str, ...] = field(default=())

    def run(self, system_id: str) -> RunList:
        for r in self.runs:
            if r.system_id == system_id:
                return r
        raise KeyError(f"unknown system {system_id!r} in track {self.track_id!r}")

    @property
    def system_ids(self) -> list[str]:
        return [r.system_id for r in self.runs]


def _read_bytes(source: Source) -> tuple[bytes, str | None]:
    if isinstance(source, bytes):
        return source, None
    if isinstance(source, str):
        return source.encode("utf-8", "surrogateescape"), None
    if isinstance(source, os.PathLike):
        path = Path(source)
        return path.read_bytes(), str(path)
    data = source.read()
    if isinstance(data, str):
        data = data.encode("utf-8", "surrogateescape")
    return data, getattr(source, "name", None)


def _lines(data: bytes) -> Iterator[tuple[int, list[str]]]:
    text = data.decode("utf-8", "surrogateescape")
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if parts:
            yield lineno, parts


def parse_qrels(source: Source, threshold: int = 1) -> Qrels:
    """Parse a qrels file. The iteration column is ignored.

    ``source`` may be raw bytes, text content, a binary file object or a
    ``pathlib.Path``.
    """
    data, name = _read_bytes(source)
    judgments: dict[str, dict[str, int]] = {}
    for lineno, parts in _lines(data):
        if len(parts) != 4:
            raise TrecFormatError(
                f"expected 4 columns (query iteration doc grade), got {len(parts)}", lineno, name
            )
        qid, _, doc, grade_s = parts
        try:
            grade = int(grade_s)
        except ValueError:
            raise TrecFormatError(f"non-integer relevance grade {grade_s!r}", lineno, name) from None
        docs = judgments.setdefault(qid, {})
        if doc in docs:
            raise DuplicateJudgmentError(f"duplicate judgment for ({qid}, {doc})", lineno, name)
        docs[doc] = grade
    return Qrels(judgments, threshold)


def _sort_by_score(entries: Iterable[tuple[str, float]]) -> tuple[tuple[str, float], ...]:
    # score descending, then doc-id descending
    return tuple(sorted(entries, key=lambda e: (e[1], e[0]), reverse=True))


def parse_run(
    source: Source,
    system_id: str | None = None,
    policy: OrderingPolicy | str = OrderingPolicy.BY_SCORE,
    dedupe: bool = False,
) -> RunList:
    """Parse a 6-column run file.

    The rank column is validated as an integer but otherwise ignored. With
    ``dedupe=True`` a repeated (query, doc) keeps its highest score and a
    warning is logged instead of raising.
    If ``system_id`` is None the tag of the first line is used.
    """
    policy = OrderingPolicy(policy)
    data, name = _read_bytes(source)
    rankings: dict[str, dict[str, float]] = {}
    tag = None
    for lineno, parts in _lines(data):
        if len(parts) != 6:
            raise TrecFormatError(
                f"expected 6 columns (query Q0 doc rank score tag), got {len(parts)}", lineno, name
            )
        qid, _, doc, rank_s, score_s, run_tag = parts
        try:
            int(rank_s)
        except ValueError:
            raise TrecFormatError(f"non-integer rank {rank_s!r}", lineno, name) from None
        try:
            score = float(score_s)
        except ValueError:
            raise TrecFormatError(f"non-numeric score {score_s!r}", lineno, name) from None
        if score != score:
            raise TrecFormatError("NaN score", lineno, name)
        if tag is None:
            tag = run_tag
        docs = rankings.setdefault(qid, {})
        if doc in docs:
            if not dedupe:
                raise DuplicatePredictionError(
                    f"duplicate prediction for ({qid}, {doc})", lineno, name
                )
            logger.warning("%s:%d: duplicate prediction for (%s, %s); keeping best score",
                           name or "<run>", lineno, qid, doc)
            docs[doc] = max(docs[doc], score)
        else:
            docs[doc] = score
    if policy is OrderingPolicy.BY_SCORE:
        ordered = {q: _sort_by_score(d.items()) for q, d in rankings.items()}
    else:
        ordered = {q: tuple(d.items()) for q, d in rankings.items()}
    if system_id is None:
        system_id = tag if tag is not None else (Path(name).name if name else "run")
    return RunList(system_id, ordered, policy)


def format_run(run: RunList) -> str:
    """Serialize a RunList to run-file text, rank rewritten as 1..k."""
    out = io.StringIO()
    for qid in run.queries:
        for rank, (doc, score) in enumerate(run.rankings[qid], start=1):
            out.write(f"{qid} Q0 {doc} {rank} {score!r} {run.system_id}\n")
    return out.getvalue()


def format_qrels(qrels: Qrels) -> str:
    out = io.StringIO()
    for qid in qrels.queries:
        for doc, grade in sorted(qrels.judgments[qid].items()):
            out.write(f"{qid} 0 {doc} {grade}\n")
    return out.getvalue()


def discover_track(
    directory: str | os.PathLike,
    min_runs: int = DEFAULT_MIN_RUNS,
    threshold: int = 1,
    policy: OrderingPolicy | str = OrderingPolicy.BY_SCORE,
    dedupe: bool = False,
) -> TrackBundle:
    """Load ``<track>/qrels.txt`` and every file in ``<track>/runs/``.

    Run files that fail to parse are skipped with a warning. System ids are
    the run file names.
    """
    root = Path(directory)
    qrels_path = root / QRELS_FILENAME
    if not qrels_path.is_file():
        raise LayoutError(f"{root}: missing {QRELS_FILENAME}")
    qrels = parse_qrels(qrels_path, threshold)
    runs_dir = root / RUNS_DIRNAME
    if not runs_dir.is_dir():
        raise LayoutError(f"{root}: missing {RUNS_DIRNAME}/ directory")

    runs: list[RunList] = []
    warnings: list[str] = []
    for path in sorted(p for p in runs_dir.iterdir() if p.is_file() and not p.name.startswith(".")):
        try:
            runs.append(parse_run(path, path.name, policy, dedupe))
        except (TrecFormatError, UnicodeError) as exc:
            msg = f"skipping run {path.name}: {exc}"
            logger.warning(msg)
            warnings.append(msg)
    if len(runs) < min_runs:
        raise InsufficientRunsError(root.name, len(runs), min_runs)
    return TrackBundle(root.name, qrels, tuple(runs), tuple(warnings))


def discover_tracks(
    directory: str | os.PathLike,
    min_runs: int = DEFAULT_MIN_RUNS,
    threshold: int = 1,
    policy: OrderingPolicy | str = OrderingPolicy.BY_SCORE,
) -> tuple[list[TrackBundle], list[str]]:
    """Load every track subdirectory; tracks that fail the layout or run-count
    gate are skipped and reported in the returned warnings."""
    bundles, warnings = [], []
    for sub in sorted(p for p in Path(directory).iterdir() if p.is_dir()):
        try:
            bundles.append(discover_track(sub, min_runs, threshold, policy))
        except (LayoutError, InsufficientRunsError, TrecFormatError) as exc:
            msg = f"skipping track {sub.name}: {exc}"
            logger.warning(msg)
            warnings.append(msg)
    return bundles, warnings


def relevant_sets(qrels: Qrels, queries: Sequence[str] | None = None) -> dict[str, frozenset[str]]:
    return {q: qrels.relevant_docs(q) for q in (queries if queries is not None else qrels.queries)}
