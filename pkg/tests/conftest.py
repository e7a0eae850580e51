import numpy as np
import pytest

from dreminertia import (ENTSOE_PARAMS, AggregatedScenario, EstimatorConfig, Outage, ScenarioSpec,
                         StepChange, default_fleet, estimate_series, simulate_aggregated,
                         simulate_scenario)
from dreminertia.scenarios import preset, run_pipeline

OUTAGE_PU = -1455.0 / 570892.0

# criterion lines collected by test_acceptance and printed at the end
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def nominal_data():
    scen = AggregatedScenario(100.0, 1e-3, setpoint_steps=[StepChange(10.0, OUTAGE_PU)])
    return simulate_aggregated(ENTSOE_PARAMS, scen)


@pytest.fixture(scope="session")
def nominal_estimates(nominal_data):
    series, _ = nominal_data
    return estimate_series(series, EstimatorConfig(), keep_internals=True)


@pytest.fixture(scope="session")
def load_step_data():
    """Aggregated data with a load step; the true parameters never change."""
    scen = AggregatedScenario(30.0, 1e-3, load_steps=[StepChange(5.0, 0.0025)])
    series, truth = simulate_aggregated(ENTSOE_PARAMS, scen)
    est = estimate_series(series, EstimatorConfig(), keep_internals=True)
    return series, truth, est


@pytest.fixture(scope="session")
def fleet():
    return default_fleet(0)


@pytest.fixture(scope="session")
def multimachine_run(fleet):
    spec = ScenarioSpec(100.0, 1e-3, events=[Outage(10.0, 7)])
    series, truth = simulate_scenario(fleet, spec)
    est = estimate_series(series, EstimatorConfig())
    return series, truth, est


@pytest.fixture(scope="session")
def rescheduling_result():
    return run_pipeline(preset("rescheduling"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
