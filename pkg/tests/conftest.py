import numpy as np
import pytest

from iruwb.channel import ChannelParams
from iruwb.modem import SystemParams
from iruwb.pulse import DoubletAutocorrelation, autocorrelation, default_pulse

_CRITERIA: dict[str, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"CRITERION {number}: {'PASS' if passed else 'FAIL'} | {detail}"
    _CRITERIA[f"{number:02d}"] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[key])


@pytest.fixture(scope="session")
def pulse():
    return default_pulse()


@pytest.fixture(scope="session")
def R(pulse):
    return autocorrelation(pulse)


@pytest.fixture(scope="session")
def R_exact(pulse):
    return DoubletAutocorrelation(pulse.shape_parameter, pulse.duration)


@pytest.fixture
def chan():
    return ChannelParams()


@pytest.fixture
def sys15():
    return SystemParams.from_mbps(15.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
