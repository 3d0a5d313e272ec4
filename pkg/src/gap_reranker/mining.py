"""Aggregate purchase logs into per-query GMV-share models.

Log records are JSON objects, one per line::

    {"query": "iphone", "item_id": "i1", "gmv": 100.0, "ts": 0,
     "aspects": {"condition": "new"}}

The model store is a single JSON document tagged ``gap-reranker-model/1``.
Shares are written as 17-significant-digit decimal strings so a
save/load cycle reproduces every float exactly.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .core import (
    DEFAULT_ALPHA,
    AspectValueKey,
    GapRerankerError,
    QueryAspectModel,
    ValidationError,
    normalize_query,
    validate_model,
)

STORE_VERSION = "gap-reranker-model/1"
DEFAULT_WINDOW_DAYS = 14


class ParseError(GapRerankerError, ValueError):
    def __init__(self, reason: str, line_number: int | None = None):
        self.reason = reason
        self.line_number = line_number
        where = f"line {line_number}: " if line_number is not None else ""
        super().__init__(where + reason)


class RangeError(ParseError):
    """A field parsed but its value is out of range (e.g. gmv <= 0)."""


class UnsupportedVersionError(GapRerankerError, ValueError):
    pass


@dataclass(frozen=True)
class PurchaseEvent:
    query: str
    item_id: str
    aspects: Mapping[str, str]
    gmv: float
    timestamp: int


@dataclass(frozen=True)
class ModelStore:
    models: Mapping[str, QueryAspectModel] = field(default_factory=dict)
    built_at: int = 0
    window_days: int = DEFAULT_WINDOW_DAYS

    def __post_init__(self):
        if self.window_days < 1:
            raise ValidationError(f"window_days must be positive, got {self.window_days}")
        for model in self.models.values():
            validate_model(model)

    def get(self, query: str) -> QueryAspectModel | None:
        return self.models.get(normalize_query(query))

    def __len__(self):
        return len(self.models)


def parse_log_record(line: str, line_number: int | None = None) -> PurchaseEvent:
    """Parse one log line into a ``PurchaseEvent``; extra fields are ignored."""
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", line_number) from None
    if not isinstance(rec, dict):
        raise ParseError("record is not an object", line_number)
    for name in ("query", "item_id", "gmv", "ts", "aspects"):
        if name not in rec:
            raise ParseError(f"missing required field {name!r}", line_number)

    query, item_id, gmv, ts, aspects = (
        rec["query"], rec["item_id"], rec["gmv"], rec["ts"], rec["aspects"])
    if not isinstance(query, str) or not normalize_query(query):
        raise ParseError("field 'query' must be a non-empty string", line_number)
    if not isinstance(item_id, str) or not item_id:
        raise ParseError("field 'item_id' must be a non-empty string", line_number)
    if isinstance(gmv, bool) or not isinstance(gmv, (int, float)):
        raise ParseError("field 'gmv' must be a number", line_number)
    if not math.isfinite(gmv) or gmv <= 0:
        raise RangeError(f"gmv must be positive, got {gmv!r}", line_number)
    if isinstance(ts, bool) or not isinstance(ts, int):
        raise ParseError("field 'ts' must be an integer", line_number)
    if ts < 0:
        raise RangeError(f"ts must be non-negative, got {ts}", line_number)
    if not isinstance(aspects, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in aspects.items()
    ):
        raise ParseError("field 'aspects' must be a flat string-to-string map", line_number)

    return PurchaseEvent(normalize_query(query), item_id, aspects, float(gmv), ts)


def format_log_record(event: PurchaseEvent) -> str:
    return json.dumps(
        {"query": event.query, "item_id": event.item_id, "gmv": event.gmv,
         "ts": event.timestamp, "aspects": dict(event.aspects)},
        sort_keys=True,
    )


def read_log(path, skip_bad: bool = False) -> tuple[list[PurchaseEvent], int]:
    """Read a log file.  Returns ``(events, skipped_line_count)``.

    Blank lines are ignored.  Without ``skip_bad`` the first malformed line
    raises ``ParseError`` carrying its 1-based line number.
    """
    events, skipped = [], 0
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                events.append(parse_log_record(line, n))
            except ParseError:
                if not skip_bad:
                    raise
                skipped += 1
    return events, skipped


def aggregate_shares(
    events: Iterable[PurchaseEvent],
    aspects: Sequence[str],
    smoothing: float = 0.0,
    *,
    alpha: float = DEFAULT_ALPHA,
    window_days: int = DEFAULT_WINDOW_DAYS,
) -> ModelStore:
    """Build GMV-share distributions per query and in-scope aspect.

    share(v) = (gmv(v) + smoothing) / (sum_u gmv(u) + smoothing * |observed values|)

    GMV totals use ``math.fsum``, which is exactly rounded, so the result
    does not depend on event order.
    """
    if not aspects:
        raise ValueError("aspects must be non-empty")
    if smoothing < 0 or not math.isfinite(smoothing):
        raise ValueError(f"smoothing must be a non-negative number, got {smoothing!r}")

    gmv = defaultdict(list)  # (query, aspect, value) -> [gmv, ...]
    counts: dict[str, int] = defaultdict(int)
    built_at = 0
    in_scope = set(aspects)
    for ev in events:
        q = normalize_query(ev.query)
        counts[q] += 1
        built_at = max(built_at, ev.timestamp)
        for aspect, value in ev.aspects.items():
            if aspect in in_scope:
                gmv[(q, aspect, value)].append(ev.gmv)

    per_query: dict[str, dict[str, dict[str, float]]] = defaultdict(lambda: defaultdict(dict))
    for (q, aspect, value), amounts in gmv.items():
        per_query[q][aspect][value] = math.fsum(amounts)

    models = {}
    for q in sorted(counts):
        shares = {}
        for aspect in aspects:
            sums = per_query.get(q, {}).get(aspect)
            if not sums:
                continue
            # fsum of per-value partials keeps the denominator order-free too
            total = math.fsum(x for a in sorted(sums) for x in gmv[(q, aspect, a)])
            denom = total + smoothing * len(sums)
            for value in sorted(sums):
                shares[AspectValueKey(aspect, value)] = (sums[value] + smoothing) / denom
        models[q] = QueryAspectModel(q, shares, alpha, counts[q])
    return ModelStore(models, built_at, window_days)


def _encode_store(store: ModelStore) -> dict:
    queries = {}
    for q, model in store.models.items():
        nested: dict[str, dict[str, str]] = {}
        for key, share in model.shares.items():
            nested.setdefault(key.aspect, {})[key.value] = format(share, ".17g")
        queries[q] = {"alpha": format(model.alpha, ".17g"),
                      "event_count": model.event_count, "shares": nested}
    return {"version": STORE_VERSION, "window_days": store.window_days,
            "built_at": store.built_at, "queries": queries}


def save_store(store: ModelStore, destination) -> None:
    text = json.dumps(_encode_store(store), indent=1, sort_keys=True)
    Path(destination).write_text(text + "\n", encoding="utf-8")


def load_store(source) -> ModelStore:
    try:
        doc = json.loads(Path(source).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"model store is not valid JSON ({exc.msg})", exc.lineno) from None
    if not isinstance(doc, dict) or "version" not in doc:
        raise ParseError("model store has no version field")
    if doc["version"] != STORE_VERSION:
        raise UnsupportedVersionError(
            f"unsupported model store version {doc['version']!r}; expected {STORE_VERSION!r}")
    try:
        models = {}
        for q, entry in doc["queries"].items():
            shares = {
                AspectValueKey(aspect, value): float(text)
                for aspect, values in entry["shares"].items()
                for value, text in values.items()
            }
            models[q] = QueryAspectModel(q, shares, float(entry["alpha"]), int(entry["event_count"]))
        return ModelStore(models, int(doc["built_at"]), int(doc["window_days"]))
    except (KeyError, TypeError, AttributeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ParseError(f"corrupted model store: {exc!r}") from None
