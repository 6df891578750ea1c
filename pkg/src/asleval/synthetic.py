"""Seeded synthetic qrels, runs and metric tables for tests and demos."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from .metrics import SystemMetric
from .trec_io import OrderingPolicy, Qrels, RunList, TrackBundle, format_qrels, format_run


def random_ranking(
    rng: np.random.Generator, max_docs: int = 1000, n_pool_extra: int = 20,
    p_relevant: float | None = None,
) -> tuple[list[str], frozenset[str]]:
    """A random ranked list and relevant set. Some relevant docs are left out
    of the ranking so unretrieved documents are exercised."""
    n = int(rng.integers(1, max_docs + 1))
    p = float(rng.uniform(0.01, 0.6)) if p_relevant is None else p_relevant
    docs = [f"d{i}" for i in range(n + n_pool_extra)]
    rel_mask = rng.random(len(docs)) < p
    if not rel_mask.any():
        rel_mask[int(rng.integers(len(docs)))] = True
    relevant = frozenset(d for d, r in zip(docs, rel_mask) if r)
    order = rng.permutation(len(docs))[:n]
    return [docs[i] for i in order], relevant


def synthetic_track(
    rng: np.random.Generator,
    track_id: str = "track",
    n_systems: int = 6,
    n_queries: int = 8,
    pool_size: int = 300,
    depth: int = 100,
    rel_rate: float = 0.08,
) -> TrackBundle:
    """Systems rank a shared pool with a per-system quality knob; relevant
    documents get a score boost proportional to quality."""
    judgments: dict[str, dict[str, int]] = {}
    rel_by_q = {}
    for qi in range(n_queries):
        qid = f"q{qi + 1}"
        rel = rng.random(pool_size) < rel_rate
        rel[int(rng.integers(pool_size))] = True
        judged = rel | (rng.random(pool_size) < 0.3)
        judgments[qid] = {f"{qid}-d{i}": int(rel[i]) for i in range(pool_size) if judged[i]}
        rel_by_q[qid] = rel
    qualities = np.linspace(0.3, 3.0, n_systems)
    runs = []
    for si, quality in enumerate(qualities):
        rankings = {}
        for qid, rel in rel_by_q.items():
            scores = rng.normal(size=pool_size) + quality * rel
            top = np.argsort(-scores, kind="stable")[:depth]
            rankings[qid] = tuple((f"{qid}-d{i}", round(float(scores[i]), 6)) for i in top)
        runs.append(RunList(f"sys{si:02d}", rankings, OrderingPolicy.BY_SCORE))
    return TrackBundle(track_id, Qrels(judgments), tuple(runs))


def write_track(bundle: TrackBundle, root: str | Path) -> Path:
    """Write ``<root>/<track>/qrels.txt`` and ``runs/<system>``."""
    track_dir = Path(root) / bundle.track_id
    (track_dir / "runs").mkdir(parents=True, exist_ok=True)
    (track_dir / "qrels.txt").write_text(format_qrels(bundle.qrels))
    for run in bundle.runs:
        (track_dir / "runs" / run.system_id).write_text(format_run(run))
    return track_dir


def planted_metric(
    order: Sequence[str],
    n_queries: int = 20,
    top: float = 0.9,
    ratio: float = 0.75,
    noise: float = 0.01,
    rng: np.random.Generator | None = None,
    higher_is_better: bool = True,
) -> dict[str, SystemMetric]:
    """Metric table where ``order`` (best first) is separated by a constant
    ratio between neighbours, so every pair passes a 10% gain gate and a
    paired t-test at any usual level."""
    rng = rng or np.random.default_rng(0)
    out = {}
    for pos, sid in enumerate(order):
        base = top * ratio**pos
        if not higher_is_better:
            base = 1.0 / base
        vals = base * (1.0 + noise * rng.uniform(-1, 1, n_queries))
        per_query = {f"q{i:03d}": float(v) for i, v in enumerate(vals)}
        out[sid] = SystemMetric(float(np.mean(vals)), per_query, higher_is_better)
    return out


def move(order: Sequence[str], src: int, dst: int) -> list[str]:
    """``order`` with the element at ``src`` moved to index ``dst``."""
    out = list(order)
    out.insert(dst, out.pop(src))
    return out


def dispersed_pool(rng: np.random.Generator, n: int, spread: float) -> list[float]:
    """Log-uniform search lengths in ``[1, spread]``."""
    return list(np.exp(rng.uniform(0.0, np.log(spread), n)))
