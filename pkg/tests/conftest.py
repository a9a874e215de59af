from pathlib import Path

import pytest

from lsmc_life import LapseDriverModel, RiskModels, calibrate_basis, calibrate_calamity, calibrate_trend
from lsmc_life.synthetic import reference_book, toy_book

DATA = Path(__file__).resolve().parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def ref_book():
    return reference_book()


@pytest.fixture(scope="session")
def toy():
    return toy_book()


@pytest.fixture(scope="session")
def models():
    return RiskModels(calibrate_trend(), calibrate_calamity(), calibrate_basis(0.35, 0.39), LapseDriverModel(0.05))


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance(capsys):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} -- {detail}"
        ACCEPTANCE_LINES.append((number, line))
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
