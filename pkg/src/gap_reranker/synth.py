"""Seeded synthetic workloads with a controllable majority bias.

Every query gets a purchase log (history, used to mine shares) and a set of
search sessions (used for evaluation).  Candidate aspect values are drawn
from the query's true purchase shares, and the synthetic production ranker
scores

    best_match = relevance_scale * relevance
                 + ranker_bias * bias_offset * (#aspects on majority value)

A purchasing session draws the buyer's intended value for every aspect
from the true shares, then buys the pool item maximizing

    relevance / purchase_temperature + intent_strength * (#intended values matched) + Gumbel noise

Purchases never see ``best_match``, so the bought aspect mix tracks the true
shares while the biased ranker over-impresses majority values.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Mapping

import numpy as np

from .core import (
    DEFAULT_ALPHA,
    AspectValueKey,
    Candidate,
    ConfigurationError,
    QueryAspectModel,
    Session,
)
from .metrics import pooled_gap_curve
from .mining import DEFAULT_WINDOW_DAYS, ModelStore

DEFAULT_SHARES = {
    "condition": {"new": 0.5, "refurbished": 0.3, "old": 0.2},
    "buying_format": {"fixed_price": 0.55, "auction": 0.3, "best_offer": 0.15},
    "shipping": {"free": 0.6, "paid": 0.25, "pickup": 0.15},
}


@dataclass(frozen=True)
class WorkloadConfig:
    seed: int = 0
    num_queries: int = 500
    sessions_per_query: int = 20
    pool_size: int = 50
    true_shares: Mapping[str, Mapping[str, float]] = field(
        default_factory=lambda: {a: dict(d) for a, d in DEFAULT_SHARES.items()})
    # per-query overrides of true_shares, keyed by query string
    query_shares: Mapping[str, Mapping[str, Mapping[str, float]]] = field(default_factory=dict)
    ranker_bias: float = 0.5
    bias_offset: float = 2.0
    relevance_scale: float = 1.0
    biased_fraction: float = 1.0
    purchase_rate: float = 0.5
    purchase_temperature: float = 1.0
    intent_strength: float = 3.0
    log_events_per_query: int = 2000
    gmv_sigma: float = 0.5
    window_days: int = DEFAULT_WINDOW_DAYS
    start_ts: int = 1_700_000_000

    @property
    def aspects(self) -> list[tuple[str, list[str]]]:
        return [(a, list(d)) for a, d in self.true_shares.items()]

    def query_names(self) -> list[str]:
        return [f"query-{i:04d}" for i in range(self.num_queries)]

    def shares_for(self, query: str) -> Mapping[str, Mapping[str, float]]:
        return self.query_shares.get(query, self.true_shares)

    @classmethod
    def from_dict(cls, data: Mapping) -> "WorkloadConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown workload config field(s): {', '.join(sorted(unknown))}")
        config = cls(**data)
        validate_config(config)
        return config

    def to_dict(self) -> dict:
        return asdict(self)


def _check_distribution(name: str, dist: Mapping[str, float]) -> None:
    if not dist:
        raise ConfigurationError(f"{name}: empty distribution")
    for value, p in dist.items():
        if not isinstance(p, (int, float)) or not (0.0 <= p <= 1.0):
            raise ConfigurationError(f"{name}: share of {value!r} must lie in [0, 1], got {p!r}")
    total = math.fsum(dist.values())
    if abs(total - 1.0) > 1e-9:
        raise ConfigurationError(f"{name}: shares sum to {total!r}, expected 1")


def validate_config(config: WorkloadConfig) -> None:
    """Raise ``ConfigurationError`` naming the first offending field."""
    def positive_int(name):
        v = getattr(config, name)
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ConfigurationError(f"{name} must be a positive integer, got {v!r}")

    for name in ("num_queries", "sessions_per_query", "pool_size", "window_days"):
        positive_int(name)
    if config.pool_size < 2:
        raise ConfigurationError(f"pool_size must be at least 2, got {config.pool_size}")
    if not isinstance(config.seed, int):
        raise ConfigurationError(f"seed must be an integer, got {config.seed!r}")
    if not isinstance(config.log_events_per_query, int) or config.log_events_per_query < 0:
        raise ConfigurationError(
            f"log_events_per_query must be a non-negative integer, got {config.log_events_per_query!r}")
    if not (0.0 <= config.ranker_bias <= 1.0):
        raise ConfigurationError(f"ranker_bias must lie in [0, 1], got {config.ranker_bias!r}")
    if not (0.0 <= config.biased_fraction <= 1.0):
        raise ConfigurationError(f"biased_fraction must lie in [0, 1], got {config.biased_fraction!r}")
    if not (0.0 < config.purchase_rate <= 1.0):
        raise ConfigurationError(f"purchase_rate must lie in (0, 1], got {config.purchase_rate!r}")
    if config.bias_offset < 0:
        raise ConfigurationError(f"bias_offset must be non-negative, got {config.bias_offset!r}")
    if config.gmv_sigma < 0:
        raise ConfigurationError(f"gmv_sigma must be non-negative, got {config.gmv_sigma!r}")
    if config.relevance_scale <= 0:
        raise ConfigurationError(f"relevance_scale must be positive, got {config.relevance_scale!r}")
    if config.intent_strength < 0:
        raise ConfigurationError(f"intent_strength must be non-negative, got {config.intent_strength!r}")
    if config.purchase_temperature <= 0:
        raise ConfigurationError(
            f"purchase_temperature must be positive, got {config.purchase_temperature!r}")
    if not config.true_shares:
        raise ConfigurationError("true_shares must name at least one aspect")
    for aspect, dist in config.true_shares.items():
        _check_distribution(f"true_shares.{aspect}", dist)
    for query, per_aspect in config.query_shares.items():
        for aspect, dist in per_aspect.items():
            _check_distribution(f"query_shares.{query}.{aspect}", dist)


@dataclass
class Workload:
    config: WorkloadConfig
    log_lines: list[str]
    sessions: list[Session]
    truth: ModelStore
    biased_queries: frozenset[str]

    def __iter__(self):
        # unpacks as (log_lines, sessions)
        return iter((self.log_lines, self.sessions))


def _true_model(query: str, shares: Mapping[str, Mapping[str, float]]) -> QueryAspectModel:
    flat = {AspectValueKey(a, v): float(p) for a, d in shares.items() for v, p in d.items()}
    return QueryAspectModel(query, flat, DEFAULT_ALPHA, 0)


def _query_sessions(rng: np.random.Generator, query: str, config: WorkloadConfig,
                    shares: Mapping[str, Mapping[str, float]], bias: float) -> list[Session]:
    n_sess, m = config.sessions_per_query, config.pool_size
    relevance = rng.standard_normal((n_sess, m))
    drawn = []
    boost = np.zeros((n_sess, m))
    matches = np.zeros((n_sess, m))
    for aspect, dist in shares.items():
        values = list(dist)
        probs = np.array([dist[v] for v in values])
        probs = probs / probs.sum()
        idx = rng.choice(len(values), size=(n_sess, m), p=probs)
        intent = rng.choice(len(values), size=n_sess, p=probs)
        boost += idx == int(np.argmax(probs))
        matches += idx == intent[:, None]
        drawn.append((aspect, values, idx))
    best_match = config.relevance_scale * relevance + bias * config.bias_offset * boost
    has_purchase = rng.random(n_sess) < config.purchase_rate
    utility = (relevance / config.purchase_temperature
               + config.intent_strength * matches + rng.gumbel(size=(n_sess, m)))
    bought = np.argmax(utility, axis=1)

    order = np.argsort(-best_match, axis=1, kind="stable")
    scores = np.take_along_axis(best_match, order, axis=1).tolist()
    # per aspect: value names in display order, one list per session
    labels = [(aspect, np.asarray(values, dtype=object)[np.take_along_axis(idx, order, axis=1)].tolist())
              for aspect, values, idx in drawn]
    order = order.tolist()
    sessions = []
    for s in range(n_sess):
        prefix = f"{query}-s{s:03d}-i"
        cands = [
            Candidate(f"{prefix}{i:03d}", scores[s][j], {aspect: rows[s][j] for aspect, rows in labels})
            for j, i in enumerate(order[s])
        ]
        purchased = {f"{prefix}{bought[s]:03d}"} if has_purchase[s] else set()
        sessions.append(Session(query, tuple(cands), frozenset(purchased)))
    return sessions


def _query_log(rng: np.random.Generator, query: str, config: WorkloadConfig,
               shares: Mapping[str, Mapping[str, float]]) -> list[str]:
    n = config.log_events_per_query
    if n == 0:
        return []
    columns = []
    for aspect, dist in shares.items():
        values = list(dist)
        probs = np.array([dist[v] for v in values])
        columns.append((aspect, values, rng.choice(len(values), size=n, p=probs / probs.sum())))
    gmv = np.maximum(np.round(rng.lognormal(4.0, config.gmv_sigma, size=n), 2), 0.01)
    ts = config.start_ts + rng.integers(0, config.window_days * 86400, size=n)
    lines = []
    for e in range(n):
        record = {
            "aspects": {aspect: values[idx[e]] for aspect, values, idx in columns},
            "gmv": float(gmv[e]),
            "item_id": f"{query}-p{e:05d}",
            "query": query,
            "ts": int(ts[e]),
        }
        lines.append(json.dumps(record, sort_keys=True))
    return lines


def generate_workload(config: WorkloadConfig, with_log: bool = True) -> Workload:
    """Deterministic in ``config.seed``; queries use independent child streams."""
    validate_config(config)
    queries = config.query_names()
    root = np.random.SeedSequence(config.seed)
    pick_rng = np.random.default_rng(root.spawn(1)[0])
    n_biased = round(config.biased_fraction * len(queries))
    biased = frozenset(queries[i] for i in sorted(pick_rng.permutation(len(queries))[:n_biased]))

    log_lines, sessions, models = [], [], {}
    for query, child in zip(queries, root.spawn(len(queries))):
        session_seq, log_seq = child.spawn(2)
        shares = config.shares_for(query)
        bias = config.ranker_bias if query in biased else 0.0
        sessions.extend(_query_sessions(np.random.default_rng(session_seq), query, config, shares, bias))
        if with_log:
            log_lines.extend(_query_log(np.random.default_rng(log_seq), query, config, shares))
        models[query] = _true_model(query, shares)
    truth = ModelStore(models, config.start_ts, config.window_days)
    return Workload(config, log_lines, sessions, truth, biased)


@dataclass(frozen=True)
class BaselineSummary:
    fraction_with_gap: float
    mean_gap: float
    per_query: Mapping[str, float]


def measure_baseline(workload: Workload, k: int = 20, store: ModelStore | None = None,
                     tolerance: float = 0.02) -> BaselineSummary:
    """Production-order gap per query (pooled over its sessions).

    A query counts as having a gap when its average gap exceeds
    ``tolerance``, which absorbs finite-sample noise on unbiased queries.
    Gaps are measured against the true shares unless ``store`` is given.
    """
    if not workload.sessions:
        raise ValueError("workload has no sessions")
    store = store or workload.truth
    aspects = list(workload.config.true_shares)
    by_query: dict[str, list[Session]] = {}
    for s in workload.sessions:
        by_query.setdefault(s.query, []).append(s)
    gaps = {}
    for query, sess in by_query.items():
        model = store.get(query)
        if model is None:
            continue
        curve = pooled_gap_curve([s.candidates for s in sess], model, aspects, k)
        gaps[query] = sum(curve) / k
    if not gaps:
        return BaselineSummary(0.0, 0.0, {})
    values = list(gaps.values())
    fraction = sum(1 for g in values if g > tolerance) / len(values)
    return BaselineSummary(fraction, sum(values) / len(values), gaps)


def calibrate_bias(config: WorkloadConfig, target_mean_gap: float, k: int = 20,
                   tolerance: float = 0.02, iterations: int = 12) -> tuple[WorkloadConfig, BaselineSummary]:
    """Bisect ``ranker_bias`` in [0, 1] until the baseline mean gap hits the target.

    The seed stays fixed, so only the bias term moves between trials.
    Returns the best configuration found and its summary.
    """
    lo, hi = 0.0, 1.0
    best = None
    for _ in range(iterations):
        mid = (lo + hi) / 2
        trial = replace(config, ranker_bias=mid)
        summary = measure_baseline(generate_workload(trial, with_log=False), k, tolerance=tolerance)
        if best is None or abs(summary.mean_gap - target_mean_gap) < abs(best[1].mean_gap - target_mean_gap):
            best = (trial, summary)
        if summary.mean_gap < target_mean_gap:
            lo = mid
        else:
            hi = mid
    return best
