import pytest

from swarmsplit import SimConfig


@pytest.fixture
def small_config():
    """A short, busy scenario that exercises transfers in well under a second."""
    return SimConfig(worker_count=12, area_side_m=8000.0, placement_granularity=6, max_sim_time_s=6.0, seed=7)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
