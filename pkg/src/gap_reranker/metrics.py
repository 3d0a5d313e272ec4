"""Purchase-impression gap, MRR and ranker comparison.

A value's gap contribution is ``max(share - impressed_share, 0)``: only
under-representation counts.  A prefix's gap is the mean contribution over
the modeled values of the in-scope aspects, and a ranking's gap is the mean
prefix gap over positions ``1..k``.

Across a query's sessions impressions are pooled: the impressed share at
position ``i`` is the fraction of all items shown in the first ``i`` slots
of every session that carry the value.  With one session this is exactly
``average_gap``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import (
    AspectValueKey,
    Candidate,
    Profile,
    QueryAspectModel,
    Session,
    aspect_values,
    normalize_query,
)
from .reranker import rerank

PERMUTATION_RESAMPLES = 10_000


@dataclass(frozen=True)
class GapBreakdown:
    per_aspect: Mapping[str, float]
    total: float
    k: int
    contributions: Mapping[AspectValueKey, float] = field(default_factory=dict)


@dataclass(frozen=True)
class EvalReport:
    alpha: float
    avg_gap_baseline: float
    avg_gap_reranked: float
    gap_difference: float
    mrr_baseline: float
    mrr_reranked: float
    mrr_shift: float
    p_value: float
    degenerate_baseline: bool = False
    n_sessions: int = 0
    n_queries: int = 0
    gap_curve_baseline: tuple[float, ...] = ()
    gap_curve_reranked: tuple[float, ...] = ()


def impressed_share(prefix: Sequence[Candidate], key: AspectValueKey) -> float:
    if not prefix:
        raise ValueError("impressed_share needs a non-empty prefix")
    hits = sum(1 for c in prefix if c.aspects.get(key.aspect) == key.value)
    return hits / len(prefix)


def _breakdown(shares: Mapping[AspectValueKey, float], model: QueryAspectModel,
               aspects: Sequence[str], k: int) -> GapBreakdown:
    contributions = {}
    per_aspect = {}
    for aspect in aspects:
        dist = model.distribution(aspect)
        if not dist:
            continue
        vals = []
        for value, target in dist.items():
            key = AspectValueKey(aspect, value)
            c = max(target - shares[key], 0.0)
            contributions[key] = c
            vals.append(c)
        per_aspect[aspect] = sum(vals) / len(vals)
    total = sum(contributions.values()) / len(contributions) if contributions else 0.0
    return GapBreakdown(per_aspect, total, k, contributions)


def prefix_gap(prefix: Sequence[Candidate], model: QueryAspectModel,
               aspects: Sequence[str]) -> GapBreakdown:
    if not prefix:
        raise ValueError("prefix_gap needs a non-empty prefix")
    shares = {key: impressed_share(prefix, key) for key in aspect_values(model, aspects)}
    return _breakdown(shares, model, aspects, len(prefix))


def _indicator_matrix(ranked: Sequence[Candidate], keys: Sequence[AspectValueKey],
                      k: int) -> np.ndarray:
    """``(k, len(keys))`` 0/1 matrix: does item at position i carry key j."""
    column = {key: j for j, key in enumerate(keys)}
    aspects = list(dict.fromkeys(key.aspect for key in keys))
    mat = np.zeros((k, len(keys)))
    for i, cand in enumerate(ranked[:k]):
        for aspect in aspects:
            value = cand.aspects.get(aspect)
            if value is not None:
                j = column.get((aspect, value))
                if j is not None:
                    mat[i, j] = 1.0
    return mat


def position_gap_curve(ranked: Sequence[Candidate], model: QueryAspectModel,
                       aspects: Sequence[str], k: int) -> list[float]:
    """Gap of each prefix ``ranked[:1] .. ranked[:k]``."""
    if k < 1 or k > len(ranked):
        raise IndexError(f"k={k} outside 1..{len(ranked)}")
    return pooled_gap_curve([ranked], model, aspects, k)


def average_gap(ranked: Sequence[Candidate], model: QueryAspectModel,
                aspects: Sequence[str], k: int) -> float:
    curve = position_gap_curve(ranked, model, aspects, k)
    return sum(curve) / k


def pooled_gap_curve(rankings: Sequence[Sequence[Candidate]], model: QueryAspectModel,
                     aspects: Sequence[str], k: int) -> list[float]:
    """Position-wise gap of a query with impressions pooled over its sessions.

    Sessions shorter than a position contribute all of their items to it.
    """
    if not rankings:
        raise ValueError("pooled_gap_curve needs at least one ranking")
    keys = aspect_values(model, aspects)
    if not keys:
        return [0.0] * k
    hits = np.zeros((k, len(keys)))
    shown = np.zeros(k)
    for ranked in rankings:
        n = min(k, len(ranked))
        if n == 0:
            continue
        cum = np.cumsum(_indicator_matrix(ranked, keys, n), axis=0)
        hits[:n] += cum
        hits[n:] += cum[-1]
        shown += np.minimum(np.arange(1, k + 1), n)
    if not shown.all():
        raise ValueError("every ranking is empty")
    targets = np.array([model.shares[key] for key in keys])
    shares = hits / shown[:, None]
    contrib = np.maximum(targets[None, :] - shares, 0.0)
    # sum in key order, like prefix_gap, so one-session results agree exactly
    total = contrib[:, 0].copy()
    for j in range(1, len(keys)):
        total += contrib[:, j]
    return (total / len(keys)).tolist()


def reciprocal_rank(ranked: Sequence[Candidate], purchased: Iterable[str]) -> float | None:
    """1/rank of the highest-ranked purchased item, ``None`` without purchases."""
    purchased = set(purchased)
    if not purchased:
        return None
    for rank, cand in enumerate(ranked, start=1):
        if cand.item_id in purchased:
            return 1.0 / rank
    return 0.0


def mrr(sessions: Iterable[tuple[Sequence[Candidate], Iterable[str]]]) -> float:
    """Mean reciprocal rank over sessions that have a purchase; 0 if none do."""
    rrs = [rr for ranked, bought in sessions
           if (rr := reciprocal_rank(ranked, bought)) is not None]
    return sum(rrs) / len(rrs) if rrs else 0.0


def paired_permutation_test(x: Sequence[float], y: Sequence[float],
                            resamples: int = PERMUTATION_RESAMPLES, seed: int = 0,
                            chunk: int = 1000) -> float:
    """Two-sided sign-flip permutation test on paired differences.

    Returns the fraction of resamples whose absolute mean difference is at
    least the observed one; identical inputs give exactly 1.0.
    """
    d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    if d.size == 0:
        return 1.0
    observed = abs(d.mean())
    if not np.any(d):
        return 1.0
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    # tolerance guards against float noise on permutations equal to the observed one
    eps = 1e-12 * max(1.0, observed)
    while done < resamples:
        n = min(chunk, resamples - done)
        signs = rng.integers(0, 2, size=(n, d.size)) * 2 - 1
        means = np.abs(signs @ d) / d.size
        hits += int(np.count_nonzero(means >= observed - eps))
        done += n
    return hits / resamples


def highest_gap_aspect(ranked: Sequence[Candidate], model: QueryAspectModel,
                       aspects: Sequence[str], k: int) -> str | None:
    """Aspect with the largest gap over ``ranked[:k]``; first in ``aspects`` on ties."""
    if k < 1 or k > len(ranked):
        raise IndexError(f"k={k} outside 1..{len(ranked)}")
    breakdown = prefix_gap(ranked[:k], model, aspects)
    best, best_gap = None, 0.0
    for aspect in aspects:
        gap = breakdown.per_aspect.get(aspect, 0.0)
        if gap > best_gap:
            best, best_gap = aspect, gap
    return best


def _relative(new: float, base: float) -> float:
    return (new - base) / base if base else 0.0


def compare_rankers(sessions: Sequence[Session], store, profile: Profile, alpha: float,
                    *, resamples: int = PERMUTATION_RESAMPLES, seed: int = 0,
                    reranked: Sequence[Session] | None = None) -> EvalReport:
    """Compare production order against the reranker at ``alpha``.

    Gaps are pooled per query over the top ``k`` and averaged across queries
    that have a model; MRR covers every session with a purchase.  ``store``
    needs a ``get(query)`` lookup (``ModelStore`` or a mapping wrapper).
    Pass precomputed ``reranked`` sessions to skip reranking.
    """
    if not sessions:
        raise ValueError("compare_rankers needs at least one session")
    if reranked is None:
        reranked_lists = [rerank(s, store.get(s.query), profile, alpha) for s in sessions]
    else:
        reranked_lists = [list(s.candidates) for s in reranked]

    by_query: dict[str, list[int]] = {}
    for i, s in enumerate(sessions):
        by_query.setdefault(normalize_query(s.query), []).append(i)

    k = profile.k
    base_curves, new_curves = [], []
    for query, idx in by_query.items():
        model = store.get(query)
        if model is None or not aspect_values(model, profile.aspects):
            continue
        base_curves.append(pooled_gap_curve(
            [sessions[i].candidates for i in idx], model, profile.aspects, k))
        new_curves.append(pooled_gap_curve(
            [reranked_lists[i] for i in idx], model, profile.aspects, k))

    if base_curves:
        curve_base = np.mean(base_curves, axis=0)
        curve_new = np.mean(new_curves, axis=0)
        gap_base = float(np.mean([np.mean(c) for c in base_curves]))
        gap_new = float(np.mean([np.mean(c) for c in new_curves]))
    else:
        curve_base = curve_new = np.zeros(k)
        gap_base = gap_new = 0.0

    degenerate = gap_base == 0.0
    gap_diff = 0.0 if degenerate else (gap_base - gap_new) / gap_base

    rr_base, rr_new = [], []
    for s, ranked in zip(sessions, reranked_lists):
        rb = reciprocal_rank(s.candidates, s.purchased_item_ids)
        if rb is not None:
            rr_base.append(rb)
            rr_new.append(reciprocal_rank(ranked, s.purchased_item_ids))
    mrr_base = sum(rr_base) / len(rr_base) if rr_base else 0.0
    mrr_new = sum(rr_new) / len(rr_new) if rr_new else 0.0
    p_value = paired_permutation_test(rr_base, rr_new, resamples, seed)

    return EvalReport(
        alpha=alpha,
        avg_gap_baseline=gap_base,
        avg_gap_reranked=gap_new,
        gap_difference=gap_diff,
        mrr_baseline=mrr_base,
        mrr_reranked=mrr_new,
        mrr_shift=_relative(mrr_new, mrr_base),
        p_value=p_value,
        degenerate_baseline=degenerate,
        n_sessions=len(sessions),
        n_queries=len(base_curves),
        gap_curve_baseline=tuple(float(x) for x in curve_base),
        gap_curve_reranked=tuple(float(x) for x in curve_new),
    )
