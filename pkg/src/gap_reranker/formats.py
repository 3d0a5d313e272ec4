"""Session files and profile files.

Session file: one JSON object per line::

    {"query": "iphone", "purchased": ["i7"],
     "candidates": [{"item_id": "i1", "best_match_score": 2.5,
                     "aspects": {"condition": "new"}}, ...]}

Profile file: ``key = value`` per line, ``#`` starts a comment::

    k = 20
    m = 50
    alpha = 0.5
    aspects = condition, buying_format
    sweep = 1.0, 0.8, 0.5, 0.2
    model = model.json
    sessions = sessions.jsonl
    out = results

Relative paths are resolved against the profile file's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .core import (
    TIE_RULES,
    Candidate,
    ConfigurationError,
    Profile,
    Session,
    ValidationError,
    validate_profile,
    validate_session,
)
from .mining import ParseError

PROFILE_KEYS = ("k", "m", "alpha", "aspects", "tie_rule", "sweep", "model", "sessions", "out")
PATH_KEYS = ("model", "sessions", "out")


def session_to_record(session: Session) -> dict:
    return {
        "query": session.query,
        "candidates": [
            {"item_id": c.item_id, "best_match_score": c.best_match_score,
             "aspects": dict(c.aspects)}
            for c in session.candidates
        ],
        "purchased": sorted(session.purchased_item_ids),
    }


def session_from_record(rec, line_number: int | None = None) -> Session:
    try:
        cands = tuple(
            Candidate(str(c["item_id"]), float(c["best_match_score"]), dict(c.get("aspects", {})))
            for c in rec["candidates"]
        )
        return Session(str(rec["query"]), cands, frozenset(rec.get("purchased", ())))
    except (KeyError, TypeError, ValueError) as exc:
        reason = str(exc) if isinstance(exc, ValidationError) else f"bad session record: {exc!r}"
        raise ParseError(reason, line_number) from None


def write_sessions(sessions: Iterable[Session], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in sessions:
            fh.write(json.dumps(session_to_record(s), sort_keys=True) + "\n")


def read_sessions(path, production_order: bool = True) -> list[Session]:
    """Read a session file; by default every session must be in production order."""
    sessions = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", n) from None
            session = session_from_record(rec, n)
            if production_order:
                try:
                    validate_session(session)
                except ValidationError as exc:
                    raise ParseError(str(exc), n) from None
            sessions.append(session)
    return sessions


@dataclass(frozen=True)
class ProfileFile:
    profile: Profile
    sweep: tuple[float, ...] = ()
    paths: dict[str, Path] = field(default_factory=dict)


def _parse_alpha(text: str, key: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigurationError(f"{key}: not a number: {text!r}") from None
    if not (0.0 < value <= 1.0):
        raise ConfigurationError(f"{key}: alpha must lie in (0, 1], got {value!r}")
    return value


def parse_sweep(text: str) -> tuple[float, ...]:
    values = tuple(_parse_alpha(part.strip(), "sweep") for part in text.split(",") if part.strip())
    if not values:
        raise ConfigurationError("sweep lists no alpha values")
    return values


def parse_profile_text(text: str, base_dir: Path | None = None) -> ProfileFile:
    entries: dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"profile line {n}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in PROFILE_KEYS:
            raise ConfigurationError(f"profile line {n}: unknown key {key!r}")
        entries[key] = value

    for key in ("k", "m", "aspects"):
        if key not in entries:
            raise ConfigurationError(f"profile is missing required key {key!r}")
    try:
        k, m = int(entries["k"]), int(entries["m"])
    except ValueError:
        raise ConfigurationError("profile keys k and m must be integers") from None
    aspects = tuple(a.strip() for a in entries["aspects"].split(",") if a.strip())
    alpha = _parse_alpha(entries["alpha"], "alpha") if "alpha" in entries else None
    tie_rule = entries.get("tie_rule", TIE_RULES[0])
    profile = Profile(k, m, aspects, alpha, tie_rule)
    validate_profile(profile)

    sweep = parse_sweep(entries["sweep"]) if "sweep" in entries else ()
    base_dir = base_dir or Path(".")
    paths = {key: base_dir / entries[key] for key in PATH_KEYS if key in entries}
    return ProfileFile(profile, sweep, paths)


def read_profile(path) -> ProfileFile:
    path = Path(path)
    return parse_profile_text(path.read_text(encoding="utf-8"), path.parent)


def format_profile(profile: Profile, sweep: Sequence[float] = (), **paths) -> str:
    lines = [f"k = {profile.k}", f"m = {profile.m}",
             f"aspects = {', '.join(profile.aspects)}", f"tie_rule = {profile.tie_rule}"]
    if profile.alpha_override is not None:
        lines.append(f"alpha = {profile.alpha_override!r}")
    if sweep:
        lines.append("sweep = " + ", ".join(repr(a) for a in sweep))
    lines.extend(f"{key} = {value}" for key, value in paths.items())
    return "\n".join(lines) + "\n"
