import numpy as np
import pytest

from nestedvar import OptionModel, SwapModel


@pytest.fixture(scope="session")
def option():
    return OptionModel(tau=0.5)


@pytest.fixture(scope="session")
def swap():
    return SwapModel.from_schedule()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one PASS/FAIL line per acceptance criterion in the terminal summary
_CRITERIA = {}


@pytest.fixture
def report(request):
    """Attach a one-line detail string to the running acceptance test."""
    def add(text):
        request.node.user_properties.append(("detail", text))
    return add


def pytest_runtest_logreport(report):
    marker = report.keywords.get("acceptance")
    if marker is None or report.when == "teardown" and report.passed:
        return
    number = int(report.nodeid.split("test_criterion_")[1].split("_")[0])
    detail = "; ".join(v for k, v in report.user_properties if k == "detail")
    prev = _CRITERIA.get(number)
    if report.when == "call" or report.failed or report.skipped:
        state = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        if prev is None or prev[0] == "PASS":
            _CRITERIA[number] = (state, detail or (prev[1] if prev else ""))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        state, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:>2}: {state}  {detail}")
