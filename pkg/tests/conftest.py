import pytest

from synth import synthetic_corpus

_ACCEPTANCE: list[tuple[str, str, str]] = []


def record_criterion(criterion: str, status: str, detail: str = "") -> None:
    _ACCEPTANCE.append((criterion, status, detail))


@pytest.fixture(scope="session")
def annotated():
    return synthetic_corpus(n_reports=8, seed=0)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, status, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{status:<5} {criterion}  {detail}".rstrip())
