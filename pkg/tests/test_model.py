import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from coopest import (
    AgentModel,
    DimensionMismatch,
    DirectedGraph,
    IsolatedAgent,
    Network,
    check_iscc_detectability,
    global_system,
    local_stack,
    local_stacks,
    pbh_detectable,
)
from coopest.model import stack_selector


def unobservable_modes_stable(A, C):
    """Detectability via the unobservable subspace (independent of PBH)."""
    n = A.shape[0]
    O = np.vstack([C @ np.linalg.matrix_power(A, i) for i in range(n)])
    N = sla.null_space(O, rcond=1e-9)
    if N.shape[1] == 0:
        return True
    # A leaves the unobservable subspace invariant; restrict it there
    Ar = N.T @ A @ N
    return bool(np.linalg.eigvals(Ar).real.max() < -1e-12)


def test_local_stack_agent_one(net):
    s = local_stack(net, 1)
    assert s.neighbors == (2,) and s.sigma == 4
    np.testing.assert_array_equal(s.Astack, sla.block_diag(net.agent(1).A, net.agent(2).A))
    np.testing.assert_array_equal(s.Cstack, [[-1, 0, 1, 0]])
    np.testing.assert_array_equal(s.M[2], [[0, 0], [0, 0], [1, 0], [0, 1]])
    np.testing.assert_array_equal(s.Nsel[2], np.diag([0, 0, 1, 1]))
    np.testing.assert_array_equal(s.Nsel[2] @ s.M[2], s.M[2])


def test_local_stack_coupling_selects_neighbour_block():
    agents = [AgentModel(np.eye(n), np.ones((n, 1)), np.ones((n, 1)), np.ones((1, n))) for n in (1, 2, 3)]
    g = DirectedGraph(3, ((2, 1), (3, 1)))
    s = local_stack(Network(agents, g, 0.1), 1)
    rng = np.random.default_rng(0)
    xhat = rng.normal(size=s.sigma)
    xj = rng.normal(size=3)
    v = s.M[3] @ xj - s.Nsel[3] @ xhat
    sl = s.block_slice(2)
    np.testing.assert_allclose(v[sl], xj - xhat[sl])
    assert np.all(v[: sl.start] == 0)
    assert s.sigma == 1 + 2 + 3


def test_stack_output_matches_relative_measurements(net):
    rng = np.random.default_rng(1)
    x = rng.normal(size=8)
    y = [net.agent(k).C @ x[2 * (k - 1) : 2 * k] for k in range(1, 5)]
    for s in local_stacks(net):
        xk = stack_selector(net, s) @ x
        expected = np.concatenate([y[j - 1] - y[s.k - 1] for j in s.neighbors])
        np.testing.assert_allclose(s.Cstack @ xk, expected)


def test_global_output_is_per_edge_difference(net):
    gs = global_system(net)
    assert gs.A_glob.shape == (8, 8)
    x = np.random.default_rng(2).normal(size=8)
    y = [net.agent(k).C @ x[2 * (k - 1) : 2 * k] for k in range(1, 5)]
    expected = np.concatenate([y[j - 1] - y[k - 1] for (j, k) in net.graph.edges])
    np.testing.assert_allclose(gs.C_glob @ x, expected)


def test_single_agent_without_edges():
    a = AgentModel([[-1.0]], [[1.0]], [[1.0]], [[1.0]])
    gs = global_system(Network([a], DirectedGraph(1), 0.1))
    assert gs.C_glob.shape == (0, 1)


def test_isolated_agent_rejected():
    a = AgentModel([[-1.0]], [[1.0]], [[1.0]], [[1.0]])
    with pytest.raises(IsolatedAgent):
        local_stack(Network([a, a], DirectedGraph(2, ((1, 2),)), 0.1), 1)


def test_dimension_checks():
    with pytest.raises(DimensionMismatch):
        AgentModel(np.eye(2), np.ones((3, 1)), np.ones((2, 1)), np.ones((1, 2)))
    a = AgentModel(np.eye(2), np.ones((2, 1)), np.ones((2, 1)), np.ones((1, 2)))
    b = AgentModel(np.eye(2), np.ones((2, 1)), np.ones((2, 1)), np.ones((2, 2)))
    with pytest.raises(DimensionMismatch):
        Network([a, b], DirectedGraph(2), 0.1)
    with pytest.raises(DimensionMismatch):
        Network([a], DirectedGraph(2), 0.1)
    with pytest.raises(ValueError):
        Network([a], DirectedGraph(1), 0.0)


def test_pbh_examples(net):
    assert pbh_detectable([[0, 1], [0, 0]], [[1, 0]])[0]
    assert pbh_detectable(-np.eye(2), np.zeros((1, 2)))[0]
    s = local_stack(net, 1)
    ok, bad = pbh_detectable(s.Astack, s.Cstack)
    assert not ok and any(abs(z) < 1e-9 for z in bad)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 4), st.integers(1, 2), st.integers(0, 2**31 - 1), st.booleans())
def test_pbh_agrees_with_unobservable_subspace(n, r, seed, structured):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    C = rng.normal(size=(r, n))
    if structured and n > 1:
        # block-triangular pair with an unobservable part of random stability
        k = int(rng.integers(1, n))
        A[:k, k:] = 0.0
        C[:, :k] = 0.0
        A[:k, :k] = rng.normal(size=(k, k)) - rng.choice([0.0, 3.0]) * np.eye(k)
    ok, _ = pbh_detectable(A, C)
    assert ok == unobservable_modes_stable(A, C)


def test_iscc_detectability(net):
    assert check_iscc_detectability(net).passed
    unstable = AgentModel([[1.0]], [[1.0]], [[1.0]], [[1.0]])
    rep = check_iscc_detectability(Network([unstable, unstable], DirectedGraph(2), 0.1))
    assert len(rep.components) == 2 and not rep.passed
    assert all(c.offending_eigenvalues == [1.0] for c in rep.components)
    stable = AgentModel([[-1.0]], [[1.0]], [[1.0]], [[3.0]])
    rep = check_iscc_detectability(Network([stable, unstable, unstable], DirectedGraph(3, ((1, 2), (2, 3))), 0.1))
    assert rep.passed and [c.vertices for c in rep.components] == [(1,)]
    d = rep.to_dict()
    assert d["passed"] and d["isccs"][0]["vertices"] == [1]
