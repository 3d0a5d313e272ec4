"""Latency benchmark for the per-session rerank loop."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass
from typing import Sequence

from .core import Profile, Session
from .reranker import rerank


@dataclass(frozen=True)
class BenchReport:
    iterations: int
    median_ms: float
    p99_ms: float
    mean_ms: float
    alpha: float | None

    def format(self) -> str:
        alpha = "profile/model" if self.alpha is None else f"{self.alpha:g}"
        return (f"alpha={alpha} iterations={self.iterations} "
                f"median={self.median_ms:.4f} ms p99={self.p99_ms:.4f} ms mean={self.mean_ms:.4f} ms")


def _percentile(sorted_samples: Sequence[float], q: float) -> float:
    # nearest-rank percentile
    idx = max(0, min(len(sorted_samples) - 1, int(round(q * len(sorted_samples) + 0.5)) - 1))
    return sorted_samples[idx]


def bench_rerank(sessions: Sequence[Session], store, profile: Profile, iterations: int,
                 alpha: float | None = None, warmup: int = 200) -> BenchReport:
    """Time ``iterations`` single-session reranks, cycling through ``sessions``."""
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    if not sessions:
        raise ValueError("bench needs at least one session")
    models = [store.get(s.query) for s in sessions]
    n = len(sessions)
    for i in range(min(warmup, max(n, 1) * 4)):
        rerank(sessions[i % n], models[i % n], profile, alpha)
    samples = []
    clock = time.perf_counter
    for i in range(iterations):
        s, model = sessions[i % n], models[i % n]
        t0 = clock()
        rerank(s, model, profile, alpha)
        samples.append(clock() - t0)
    samples.sort()
    to_ms = 1e3
    return BenchReport(iterations, statistics.median(samples) * to_ms,
                       _percentile(samples, 0.99) * to_ms,
                       statistics.fmean(samples) * to_ms, alpha)
