"""
Pytest configuration and fixtures.
"""

import json
import logging

import pytest

from mildlab.scenario import builtin_scenario
from mildlab.solver import GridSpec

# No jumps and an almost deterministic Wiener part: the forward scheme is then
# first order in dt and easy to check.
DETERMINISTIC_OVERRIDES = {
    "space": {"modes": 16},
    "noise": {
        "wiener": {"q_eigenvalues": {"scale": 1e-12}},
        "jumps": {"parameters": {"sizes": [], "rates": []}},
    },
    "coefficients": {"delta": 0.2, "additive": 1.0},
}


@pytest.fixture(autouse=True)
def _reset_mildlab_logger():
    """The CLI callback installs a non-propagating handler; undo it between tests."""
    yield
    logger = logging.getLogger("mildlab")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    logger.setLevel(logging.NOTSET)
    logger.propagate = True


@pytest.fixture
def linear_scenario():
    return builtin_scenario("linear_test")


@pytest.fixture
def zero_scenario():
    return builtin_scenario("zero")


@pytest.fixture
def small_paper_scenario():
    """The paper_example_5 family on 16 modes with the additive forcing switched on."""
    return builtin_scenario(
        "paper_example_5", {"space": {"modes": 16}, "coefficients": {"additive": 1.0}}
    )


@pytest.fixture
def deterministic_scenario():
    return builtin_scenario("paper_example_5", DETERMINISTIC_OVERRIDES)


@pytest.fixture
def short_grid():
    return GridSpec(t_start=0.0, t_end=1.0, dt=0.05, burn_in=1.0)


@pytest.fixture
def scenario_file(tmp_path):
    """A TOML scenario layered over the linear_test built-in."""
    path = tmp_path / "linear.toml"
    path.write_text(
        'builtin = "linear_test"\nname = "linear_from_file"\n\n'
        "[space]\nmodes = 8\n\n[coefficients]\ndelta = 0.5\n",
        encoding="utf-8",
    )
    return path


@pytest.fixture
def json_scenario_file(tmp_path):
    path = tmp_path / "zero.json"
    path.write_text(json.dumps({"builtin": "zero", "space": {"modes": 4}}), encoding="utf-8")
    return path
