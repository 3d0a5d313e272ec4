"""Batch reranking across sessions, optionally fanned out to worker processes."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Sequence

from .core import Profile, Session
from .reranker import rerank_session

THREADS_ENV = "GAP_RERANKER_THREADS"
_MIN_PARALLEL = 2000


def worker_count() -> int:
    """Workers allowed by ``GAP_RERANKER_THREADS``; 0 or unset means one per CPU."""
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return n


def _rerank_chunk(args):
    sessions, store, profile, alpha = args
    return [rerank_session(s, store.get(s.query), profile, alpha) for s in sessions]


def rerank_all(sessions: Sequence[Session], store, profile: Profile,
               alpha: float | None = None, workers: int | None = None) -> list[Session]:
    """Rerank every session; output order matches input order."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(sessions) < _MIN_PARALLEL:
        return _rerank_chunk((sessions, store, profile, alpha))
    size = -(-len(sessions) // workers)
    chunks = [(sessions[i:i + size], store, profile, alpha) for i in range(0, len(sessions), size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        out = []
        for part in pool.map(_rerank_chunk, chunks):
            out.extend(part)
    return out
