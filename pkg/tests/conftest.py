from importlib import resources

import pytest

from ucascade.backends.replay import ReplayDataset
from ucascade.backends.synthetic import synthetic_dataset

DATA = resources.files("ucascade") / "data"

BENCHMARK_SEED = 20250101
BENCHMARK_N = 2000


@pytest.fixture(scope="session")
def case_study_path():
    return str(DATA / "case_study.jsonl")


@pytest.fixture(scope="session")
def calibration_path():
    return str(DATA / "mosi_calibration.jsonl")


@pytest.fixture(scope="session")
def case_study(case_study_path):
    return ReplayDataset.load(case_study_path)


@pytest.fixture(scope="session")
def calibration_set(calibration_path):
    return ReplayDataset.load(calibration_path)


@pytest.fixture(scope="session")
def synth200():
    return synthetic_dataset(200, seed=11)


@pytest.fixture(scope="session")
def benchmark():
    return synthetic_dataset(BENCHMARK_N, seed=BENCHMARK_SEED)


# acceptance criteria: one PASS/FAIL line per criterion in the terminal summary
_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(num, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    num, title = mark.args
    prev = _ACCEPTANCE.get(num, (title, True))
    if rep.when == "call" or rep.failed:
        _ACCEPTANCE[num] = (title, prev[1] and rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        title, ok = _ACCEPTANCE[num]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {num:>2}. {title}")
