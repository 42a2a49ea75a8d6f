import pytest
from hypothesis import HealthCheck, settings

from torelli_fiber.graph_core import StableTree
from torelli_fiber.strata import ColoredStratum

settings.register_profile(
    "repo", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


def forked_stratum() -> ColoredStratum:
    """u1 -f1- u2 -f2- w(0), with w -f3- u3 and w -f4- u4; u2 alone has colour 1."""
    tree = StableTree.from_edges(
        {"u1": 1, "u2": 1, "w": 0, "u3": 1, "u4": 1},
        [("u1", "u2"), ("u2", "w"), ("w", "u3"), ("w", "u4")],
        ["f1", "f2", "f3", "f4"],
    )
    return ColoredStratum.make(tree, {"u1": 2, "u2": 1, "u3": 2, "u4": 2}, (1, 3))


@pytest.fixture
def forked() -> ColoredStratum:
    return forked_stratum()


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("TORELLI_FIBER_CACHE", str(tmp_path / "cache"))


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(number: int, ok: bool, detail: str) -> bool:
        _ACCEPTANCE[number] = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
        print(_ACCEPTANCE[number])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[n])
