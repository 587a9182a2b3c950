import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo runs")
    config.addinivalue_line("markers", "acceptance: full acceptance battery")


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run slow Monte Carlo tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)
