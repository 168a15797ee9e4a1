import numpy as np
import pytest

from coopest import (
    AgentModel,
    DirectedGraph,
    ExosystemSpec,
    Network,
    SynthesisParams,
    design_regulator,
    local_stacks,
    minimize_gamma,
)

EXAMPLE_A = (
    [[0.0, 1.0], [0.0, 0.0]],
    [[0.0, 1.0], [0.0, -1.0]],
    [[0.1, 1.0], [0.0, -1.0]],
    [[0.1, 1.0], [0.0, 0.0]],
)
CYCLE_EDGES = ((2, 1), (3, 2), (4, 3), (1, 4))

# one line per acceptance criterion, filled by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def example_network(omega=0.1, btilde=0.5):
    agents = [AgentModel(A, [[0.0], [1.0]], [[0.0], [btilde]], [[1.0, 0.0]]) for A in EXAMPLE_A]
    return Network(agents, DirectedGraph(4, CYCLE_EDGES), omega)


@pytest.fixture(scope="session")
def net():
    return example_network()


@pytest.fixture(scope="session")
def stacks(net):
    return local_stacks(net)


@pytest.fixture(scope="session")
def est_params(stacks):
    return SynthesisParams.uniform(stacks, alpha=0.1, pi=0.025)


@pytest.fixture(scope="session")
def est_design(net, stacks, est_params):
    """``(gamma_star, bank)`` for the identity-weighted estimation problem."""
    return minimize_gamma(net, stacks, est_params)


@pytest.fixture(scope="session")
def exo():
    return ExosystemSpec([[0.0, 1.0], [0.0, 0.0]], [[1.0, 0.0]])


@pytest.fixture(scope="session")
def full_design(net, stacks, exo):
    """``(gamma, bank, reg)`` for the regulator-weighted pipeline."""
    reg = design_regulator(net, exo, np.eye(2), mu=1.2, lambda_gain=0.1)
    params = SynthesisParams(alpha=0.1, pi=[0.025] * 4, W=reg.weights(net, stacks))
    gamma, bank = minimize_gamma(net, stacks, params)
    reg.set_gamma(gamma)
    return gamma, bank, reg


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
