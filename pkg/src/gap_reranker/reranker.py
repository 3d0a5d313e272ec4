"""Sequential greedy reranking against per-query GMV shares.

Each position is filled with the remaining candidate maximizing

    final = best_match + (1 - alpha) / alpha * bridge
    bridge = sum over in-scope aspects of share(value) * delta(value)
    delta(value) = 1 - placed_with(value) / placed

so values already over-represented in the placed prefix lose their pull.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import (
    AspectValueKey,
    Candidate,
    Profile,
    QueryAspectModel,
    Session,
    validate_profile,
)

FeatureVector = dict  # AspectValueKey -> ais value


@dataclass
class ImpressionState:
    """Counts of aspect values among items placed so far."""

    placed: int = 0
    counts: dict[AspectValueKey, int] = field(default_factory=dict)

    def place(self, candidate: Candidate, aspects: Sequence[str]) -> None:
        self.placed += 1
        for aspect in aspects:
            value = candidate.aspects.get(aspect)
            if value is not None:
                key = AspectValueKey(aspect, value)
                self.counts[key] = self.counts.get(key, 0) + 1


def delta_feature(state: ImpressionState, key: AspectValueKey) -> float:
    if state.placed == 0:
        return 1.0
    delta = 1.0 - state.counts.get(key, 0) / state.placed
    return min(max(delta, 0.0), 1.0)


def ais_features(candidate: Candidate, state: ImpressionState,
                 aspects: Sequence[str]) -> FeatureVector:
    """Nonzero only on the values the candidate carries (one per aspect)."""
    features = {}
    for aspect in aspects:
        value = candidate.aspects.get(aspect)
        if value is not None:
            key = AspectValueKey(aspect, value)
            features[key] = delta_feature(state, key)
    return features


def bridge_score(candidate: Candidate, state: ImpressionState,
                 model: QueryAspectModel, aspects: Sequence[str]) -> float:
    total = 0.0
    for key, ais in ais_features(candidate, state, aspects).items():
        total += model.shares.get(key, 0.0) * ais
    return total


def bridge_multiplier(alpha: float) -> float:
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    return (1.0 - alpha) / alpha


def final_score(best_match: float, bridge: float, alpha: float) -> float:
    return best_match + bridge_multiplier(alpha) * bridge


def select_next(remaining: Sequence[Candidate], state: ImpressionState,
                model: QueryAspectModel, profile: Profile,
                alpha: float | None = None) -> int:
    """Index into ``remaining`` of the next candidate to place.

    ``remaining`` must be in original production order: ties on final score
    go to the higher best-match score, then to the earlier position.
    """
    if not remaining:
        raise ValueError("select_next needs at least one remaining candidate")
    if alpha is None:
        alpha = profile.resolve_alpha(model)
    best, best_key = 0, None
    for i, cand in enumerate(remaining):
        score = final_score(cand.best_match_score,
                            bridge_score(cand, state, model, profile.aspects), alpha)
        key = (score, cand.best_match_score)
        if best_key is None or key > best_key:
            best, best_key = i, key
    return best


class _Pool:
    """Array view of a candidate pool for the vectorized greedy loop.

    ``slots[a, i]`` indexes a flat counts vector; every aspect owns a block
    whose first entry is a zero-weight sink for missing or unmodeled values.
    """

    __slots__ = ("bm", "weights", "slots", "n_counts")

    def __init__(self, pool: Sequence[Candidate], model: QueryAspectModel,
                 aspects: Sequence[str]):
        n = len(pool)
        self.bm = np.fromiter((c.best_match_score for c in pool), dtype=float, count=n)
        self.weights = np.zeros((len(aspects), n))
        self.slots = np.zeros((len(aspects), n), dtype=np.intp)
        offset = 0
        for a, aspect in enumerate(aspects):
            dist = model.distribution(aspect)
            index = {v: offset + j + 1 for j, v in enumerate(dist)}
            w_row, s_row = self.weights[a], self.slots[a]
            s_row[:] = offset
            for i, cand in enumerate(pool):
                value = cand.aspects.get(aspect)
                if value in index:
                    s_row[i] = index[value]
                    w_row[i] = dist[value]
            offset += len(dist) + 1
        self.n_counts = offset


def _greedy_order(pool: Sequence[Candidate], model: QueryAspectModel,
                  aspects: Sequence[str], alpha: float, n_fill: int) -> list[int]:
    arrays = _Pool(pool, model, aspects)
    mult = bridge_multiplier(alpha)
    bm, weights, slots = arrays.bm, arrays.weights, arrays.slots
    counts = np.zeros(arrays.n_counts)
    available = np.ones(len(pool), dtype=bool)
    order = []
    for placed in range(n_fill):
        if placed == 0:
            contrib = weights
        else:
            # counts never exceed placed, so no clamp is needed here
            contrib = weights * (1.0 - counts[slots] / placed)
        # accumulate aspect by aspect to match the scalar path bit for bit
        bridge = contrib[0].copy()
        for row in contrib[1:]:
            bridge += row
        score = bm + mult * bridge
        score[~available] = -np.inf
        tied = np.flatnonzero(score == score.max())
        if len(tied) > 1:
            tb = bm[tied]
            tied = tied[tb == tb.max()]
        pick = int(tied[0])
        order.append(pick)
        available[pick] = False
        counts[slots[:, pick]] += 1.0
    return order


def rerank(session: Session, model: QueryAspectModel | None, profile: Profile,
           alpha: float | None = None) -> list[Candidate]:
    """Rerank the top ``k`` positions of a session from its top-``m`` pool.

    Pool members that are not selected keep their original relative order
    after the reranked prefix; candidates beyond ``m`` are untouched.
    Without a model the session is returned unchanged.
    """
    validate_profile(profile)
    candidates = list(session.candidates)
    if model is None or not candidates:
        return candidates
    if alpha is None:
        alpha = profile.resolve_alpha(model)
    bridge_multiplier(alpha)  # domain check before any work

    pool = candidates[: profile.m]
    n_fill = min(profile.k, len(pool))
    if alpha == 1.0:
        # final score reduces to best match; a stable sort keeps the tie rule
        order = sorted(range(len(pool)), key=lambda i: -pool[i].best_match_score)[:n_fill]
    else:
        order = _greedy_order(pool, model, profile.aspects, alpha, n_fill)

    chosen = set(order)
    head = [pool[i] for i in order]
    rest = [c for i, c in enumerate(pool) if i not in chosen]
    return head + rest + candidates[profile.m:]


def rerank_session(session: Session, model: QueryAspectModel | None, profile: Profile,
                   alpha: float | None = None) -> Session:
    return replace(session, candidates=tuple(rerank(session, model, profile, alpha)))
