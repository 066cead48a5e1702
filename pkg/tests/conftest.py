import warnings

import pytest

from fwmscrap.errors import ModelValidityWarning


@pytest.fixture(autouse=True)
def _quiet_validity():
    # figure presets sit outside the large-detuning validity range on purpose
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ModelValidityWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[key])
