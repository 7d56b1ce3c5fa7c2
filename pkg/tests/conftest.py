import pytest

from cimtune.ising import WishartSpec, generate_wishart

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def wpe12():
    return generate_wishart(WishartSpec(12, 8, 7))


@pytest.fixture(scope="session")
def wpe8():
    return generate_wishart(WishartSpec(8, 6, 3))


@pytest.fixture
def acceptance_report():
    def report(label: str, ok: bool, detail: str = "") -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {label}" + (f" -- {detail}" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
