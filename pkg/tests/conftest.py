import pytest

from outage_lab.constellation import build_constellation, build_mi_table


@pytest.fixture(scope="session")
def bpsk():
    return build_constellation("PSK", 1)


@pytest.fixture(scope="session")
def qpsk():
    return build_constellation("PSK", 2)


@pytest.fixture(scope="session")
def bpsk_table(bpsk):
    return build_mi_table(bpsk, 1e-3, 1e6, 48, 100_000, seed=3)


ACCEPTANCE_LINES = []


@pytest.fixture
def report(capsys):
    """Print one verdict line per acceptance criterion, even under capture."""

    def emit(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
