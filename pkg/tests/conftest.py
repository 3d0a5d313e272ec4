import pytest

from gap_reranker.core import AspectValueKey, Candidate, Profile, QueryAspectModel, Session


def cand(item_id, bm, **aspects):
    return Candidate(item_id, bm, aspects)


def make_model(shares, alpha=0.5, query="q"):
    """``shares`` is nested: {aspect: {value: share}}."""
    flat = {AspectValueKey(a, v): s for a, d in shares.items() for v, s in d.items()}
    return QueryAspectModel(query, flat, alpha)


def make_session(candidates, purchased=(), query="q"):
    return Session(query, tuple(candidates), frozenset(purchased))


@pytest.fixture
def condition_model():
    return make_model({"condition": {"new": 0.5, "refurbished": 0.3, "old": 0.2}})


@pytest.fixture
def profile():
    return Profile(k=20, m=50, aspects=("condition",))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
