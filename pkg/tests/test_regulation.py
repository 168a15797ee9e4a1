import math
from types import SimpleNamespace

import numpy as np
import pytest
import scipy.linalg as sla

from coopest import (
    AgentModel,
    ExosystemSpec,
    NoSolution,
    NoStabilizingSolution,
    design_regulator,
    estimator_weight,
    feedback_gain,
    performance_constants,
    solve_francis,
    solve_game_riccati,
)
from coopest.regulation import francis_residuals, riccati_quadratic, riccati_residual

# values printed with the example
TABLE = {
    1: ([[1, 0], [0, 1]], [[0, 0]]),
    2: ([[1, 0], [0, 1]], [[0, 1]]),
    3: ([[1, 0], [-0.1, 1]], [[-0.1, 0.9]]),
    4: ([[1, 0], [-0.1, 1]], [[0, -0.1]]),
}


def scalar_agent(a, b=1.0, bt=0.0):
    return AgentModel([[a]], [[b]], [[bt]], [[1.0]])


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_francis_matches_table(net, exo, k):
    Pi, Lam = solve_francis(net.agent(k), exo)
    Pi_ref, Lam_ref = (np.array(v, dtype=float) for v in TABLE[k])
    np.testing.assert_allclose(Pi, Pi_ref, atol=1e-8)
    np.testing.assert_allclose(Lam, Lam_ref, atol=1e-8)
    assert max(francis_residuals(net.agent(k), exo, Pi, Lam)) <= 1e-9
    # the tabulated values satisfy both equations up to rounding of 0.1
    assert max(francis_residuals(net.agent(k), exo, Pi_ref, Lam_ref)) <= 1e-15


def test_displayed_exosystem_is_rejected():
    with pytest.raises(ValueError, match="imaginary axis"):
        ExosystemSpec([[0, 0], [0, 1]], [[1, 0]])
    with pytest.raises(ValueError, match="observable"):
        ExosystemSpec([[0, 0], [0, 0]], [[1, 0]])


def test_francis_trivial_and_minimum_norm(net, exo):
    # (S, Gamma) = (0, 0) is not a valid exosystem but the equations still have the zero solution
    pair = SimpleNamespace(S=np.zeros((1, 1)), Gamma=np.zeros((1, 1)))
    Pi, Lam = solve_francis(AgentModel(-np.eye(2), [[0], [1]], [[0], [1]], [[1, 0]]), pair)
    np.testing.assert_allclose(Pi, 0, atol=1e-12)
    np.testing.assert_allclose(Lam, 0, atol=1e-12)
    a2 = net.agent(2)
    twin = AgentModel(a2.A, np.hstack([a2.B, a2.B]), a2.Btilde, a2.C)
    _, Lam = solve_francis(twin, exo)
    # duplicated input columns share the single-input solution equally
    np.testing.assert_allclose(Lam, [[0, 0.5], [0, 0.5]], atol=1e-12)


def test_francis_unsolvable():
    blind = AgentModel(np.zeros((2, 2)), [[0], [1]], [[0], [1]], [[0, 0]])
    with pytest.raises(NoSolution):
        solve_francis(blind, ExosystemSpec([[0, 1], [0, 0]], [[1, 0]]))


def test_scalar_riccati_closed_form():
    X = solve_game_riccati(scalar_agent(-1.0), np.zeros((1, 1)), [[1.0]], mu=1.0, lambda_gain=1.0)
    assert X[0, 0] == pytest.approx(-1 + math.sqrt(2), abs=1e-10)
    H = feedback_gain(scalar_agent(-1.0), X, 1.0)
    assert H[0, 0] == pytest.approx(-0.41421356, abs=1e-8)
    assert np.all(feedback_gain(scalar_agent(-1.0), np.zeros((1, 1)), 1.0) == 0)


def test_riccati_reduces_to_standard_are():
    rng = np.random.default_rng(4)
    A = rng.normal(size=(3, 3))
    B = rng.normal(size=(3, 2))
    agent = AgentModel(A, B, np.zeros((3, 1)), np.ones((1, 3)))
    R = np.eye(3) + 0.1 * np.ones((3, 3))
    lam = 0.7
    X = solve_game_riccati(agent, np.zeros((3, 2)), R, mu=1.0, lambda_gain=lam)
    X_ref = sla.solve_continuous_are(A, B, R, lam**2 * np.eye(2))
    np.testing.assert_allclose(X, X_ref, rtol=1e-9, atol=1e-10)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_example_riccati(net, exo, k):
    agent = net.agent(k)
    Pi, _ = solve_francis(agent, exo)
    X = solve_game_riccati(agent, Pi, np.eye(2), 1.2, 0.1)
    D = riccati_quadratic(agent, Pi, 1.2, 0.1)
    assert np.linalg.norm(riccati_residual(agent.A, np.eye(2), D, X)) <= 1e-8 * (1 + np.linalg.norm(X) ** 2)
    assert np.linalg.norm(X - X.T) <= 1e-12
    assert np.linalg.eigvalsh(X).min() > 0
    H = feedback_gain(agent, X, 0.1)
    assert np.linalg.eigvals(agent.A + agent.B @ H).real.max() < -1e-9


def test_riccati_without_stabilising_solution():
    with pytest.raises(NoStabilizingSolution):
        solve_game_riccati(scalar_agent(1.0, bt=1.0), np.zeros((1, 1)), [[1.0]], mu=0.5, lambda_gain=1.0)
    with pytest.raises(ValueError):
        solve_game_riccati(scalar_agent(1.0), np.zeros((1, 1)), [[-1.0]], mu=1.0, lambda_gain=1.0)


def test_estimator_weight(net, exo):
    agent = net.agent(3)
    Pi, _ = solve_francis(agent, exo)
    X = solve_game_riccati(agent, Pi, np.eye(2), 1.2, 0.1)
    W = estimator_weight(agent, X, 0.1, sigma_k=4)
    H = feedback_gain(agent, X, 0.1)
    np.testing.assert_allclose(W[:2, :2], 0.1**2 * H.T @ H, rtol=1e-12)
    assert np.all(W[2:, :] == 0) and np.all(W[:, 2:] == 0)
    assert np.linalg.eigvalsh(W).min() >= -1e-9
    no_input = AgentModel(agent.A, np.zeros((2, 1)), agent.Btilde, agent.C)
    assert np.all(estimator_weight(no_input, X, 0.1, 4) == 0)


def test_performance_constants():
    kappa, theta = performance_constants(1.2, 11.4368, 1)
    assert round(kappa, 2) == 11.50 and round(theta, 2) == 11.44
    assert performance_constants(1.2, 0.0, 1) == (1.2, 0.0)
    assert performance_constants(1.2, 5.0, 0)[0] == pytest.approx(1.2)
    for g in (0.3, 5.0, 40.0):
        k, t = performance_constants(1.2, g, 1)
        assert k**2 - t**2 == pytest.approx(1.44, rel=1e-12)


def test_design_regulator(net, stacks, exo):
    reg = design_regulator(net, exo, np.eye(2), 1.2, 0.1)
    assert reg.q_max == 1
    assert all(r <= 1e-8 * (1 + np.linalg.norm(X) ** 2) for r, X in zip(reg.riccati_residuals, reg.X))
    reg.set_gamma(3.0)
    assert reg.theta == 3.0 and reg.kappa == pytest.approx(math.sqrt(1.44 + 9.0))
    Ws = reg.weights(net, stacks)
    assert [W.shape for W in Ws] == [(4, 4)] * 4
