from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def clean_corpus() -> Path:
    return FIXTURES / "clean50.jsonl"


@pytest.fixture
def dirty_corpus() -> Path:
    return FIXTURES / "dirty.jsonl"


@pytest.fixture
def attn_tiny() -> Path:
    return FIXTURES / "attn_tiny.json"


@pytest.fixture
def attn_small() -> Path:
    return FIXTURES / "attn_small.json"


# per-criterion lines recorded by the acceptance gate; replayed in the
# terminal summary so they survive output capture
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
