"""Domain types shared by mining, reranking and evaluation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

SHARE_SUM_TOLERANCE = 1e-9
DEFAULT_ALPHA = 0.5
TIE_RULES = ("best_match_then_original_rank",)


class GapRerankerError(Exception):
    """Base class for all package errors."""


class ValidationError(GapRerankerError, ValueError):
    """A model, session or event violates its invariants."""


class ConfigurationError(GapRerankerError, ValueError):
    """A profile or workload configuration is unusable."""


class AspectValueKey(NamedTuple):
    aspect: str
    value: str


def normalize_query(query: str) -> str:
    """Lowercase, trim and collapse internal whitespace."""
    return " ".join(query.lower().split())


@dataclass(frozen=True)
class Candidate:
    item_id: str
    best_match_score: float
    aspects: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.best_match_score):
            raise ValidationError(
                f"candidate {self.item_id!r}: best_match_score must be finite, "
                f"got {self.best_match_score!r}"
            )

    def value_of(self, aspect: str) -> str | None:
        return self.aspects.get(aspect)


@dataclass(frozen=True)
class QueryAspectModel:
    """Per-query GMV-share distributions over aspect values, plus alpha.

    ``shares`` maps ``AspectValueKey`` to the share of that value within its
    aspect.  Values absent from the map carry no weight.
    """

    query: str
    shares: Mapping[AspectValueKey, float]
    alpha: float = DEFAULT_ALPHA
    event_count: int = 0

    def aspects(self) -> list[str]:
        seen: dict[str, None] = {}
        for key in self.shares:
            seen.setdefault(key.aspect, None)
        return list(seen)

    def distribution(self, aspect: str) -> dict[str, float]:
        return {k.value: s for k, s in self.shares.items() if k.aspect == aspect}

    def weight(self, aspect: str, value: str) -> float:
        return self.shares.get(AspectValueKey(aspect, value), 0.0)


@dataclass(frozen=True)
class Profile:
    """Reranker configuration: rerank the top ``k`` of a pool of ``m``."""

    k: int
    m: int
    aspects: tuple[str, ...]
    alpha_override: float | None = None
    tie_rule: str = TIE_RULES[0]

    def resolve_alpha(self, model: QueryAspectModel | None = None) -> float:
        if self.alpha_override is not None:
            return self.alpha_override
        if model is not None:
            return model.alpha
        return DEFAULT_ALPHA


@dataclass(frozen=True)
class Session:
    query: str
    candidates: tuple[Candidate, ...]
    purchased_item_ids: frozenset[str] = frozenset()

    def __post_init__(self):
        # accept lists for convenience; freeze them
        object.__setattr__(self, "candidates", tuple(self.candidates))
        object.__setattr__(self, "purchased_item_ids", frozenset(self.purchased_item_ids))
        ids = [c.item_id for c in self.candidates]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"session for {self.query!r} has duplicate item ids")
        stray = self.purchased_item_ids.difference(ids)
        if stray:
            raise ValidationError(
                f"session for {self.query!r} lists purchases outside its candidates: {sorted(stray)}"
            )


def _alpha_ok(alpha) -> bool:
    return isinstance(alpha, (int, float)) and math.isfinite(alpha) and 0.0 < alpha <= 1.0


def validate_model(model: QueryAspectModel) -> None:
    """Raise ``ValidationError`` unless every aspect distribution is proper."""
    problems = []
    if not _alpha_ok(model.alpha):
        problems.append(f"alpha must lie in (0, 1], got {model.alpha!r}")
    totals: dict[str, list[float]] = {}
    for key, share in model.shares.items():
        if not key.aspect or not key.value:
            problems.append(f"empty aspect or value identifier in {tuple(key)!r}")
        if not (0.0 <= share <= 1.0):
            problems.append(f"share of {key.aspect}={key.value} outside [0, 1]: {share!r}")
        totals.setdefault(key.aspect, []).append(share)
    for aspect, values in totals.items():
        total = math.fsum(values)
        if abs(total - 1.0) > SHARE_SUM_TOLERANCE:
            problems.append(f"shares for aspect {aspect!r} sum to {total!r}, expected 1")
    if model.event_count < 0:
        problems.append(f"event_count must be non-negative, got {model.event_count}")
    if problems:
        raise ValidationError(f"query {model.query!r}: " + "; ".join(problems))


def validate_profile(profile: Profile) -> None:
    """Raise ``ConfigurationError`` unless ``1 <= k < m`` and aspects are given."""
    if not isinstance(profile.k, int) or profile.k < 1:
        raise ConfigurationError(f"k must be a positive integer, got {profile.k!r}")
    if not isinstance(profile.m, int) or profile.m < 1:
        raise ConfigurationError(f"m must be a positive integer, got {profile.m!r}")
    if profile.k >= profile.m:
        raise ConfigurationError(f"k must be smaller than m, got k={profile.k}, m={profile.m}")
    if not profile.aspects:
        raise ConfigurationError("profile lists no aspects")
    if profile.alpha_override is not None and not _alpha_ok(profile.alpha_override):
        raise ConfigurationError(f"alpha must lie in (0, 1], got {profile.alpha_override!r}")
    if profile.tie_rule not in TIE_RULES:
        raise ConfigurationError(f"unknown tie_rule {profile.tie_rule!r}")


def validate_session(session: Session) -> None:
    """Check that a session is in production order (non-increasing best match).

    Reranked sessions legitimately fail this; only production input is held to it.
    """
    for prev, cur in zip(session.candidates, session.candidates[1:]):
        if cur.best_match_score > prev.best_match_score:
            raise ValidationError(
                f"session for {session.query!r} is not in production order: "
                f"{cur.item_id!r} scores above {prev.item_id!r}"
            )


def aspect_values(model: QueryAspectModel, aspects: Sequence[str]) -> list[AspectValueKey]:
    """Modeled keys restricted to ``aspects``, in aspect order."""
    keys = []
    for aspect in aspects:
        keys.extend(AspectValueKey(aspect, v) for v in model.distribution(aspect))
    return keys
