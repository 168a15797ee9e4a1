"""Agent/network data model, local estimator stacks and detectability checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatch, IsolatedAgent
from .graph import DirectedGraph, incidence_matrix, scc_decompose

PBH_TOL = 1e-9
UNSTABLE_REAL_PART = -1e-12


def _as_matrix(a, name):
    a = np.array(a, dtype=float)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise DimensionMismatch(f"{name} must be a 2-D matrix")
    return a


@dataclass(frozen=True)
class AgentModel:
    """One agent ``dx/dt = A x + B u + Btilde xi``, ``y = C x``."""

    A: np.ndarray
    B: np.ndarray
    Btilde: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        for name in ("A", "B", "Btilde", "C"):
            object.__setattr__(self, name, _as_matrix(getattr(self, name), name))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n:
            raise DimensionMismatch(f"B has {self.B.shape[0]} rows, expected {n}")
        if self.Btilde.shape[0] != n:
            raise DimensionMismatch(f"Btilde has {self.Btilde.shape[0]} rows, expected {n}")
        if self.C.shape[1] != n:
            raise DimensionMismatch(f"C has {self.C.shape[1]} columns, expected {n}")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def d(self):
        return self.Btilde.shape[1]

    @property
    def r(self):
        return self.C.shape[0]


@dataclass(frozen=True)
class Network:
    agents: tuple[AgentModel, ...]
    graph: DirectedGraph
    omega: float

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        if self.graph.n_vertices != len(self.agents):
            raise DimensionMismatch(
                f"graph has {self.graph.n_vertices} vertices but there are {len(self.agents)} agents"
            )
        rs = {a.r for a in self.agents}
        if len(rs) != 1 or 0 in rs:
            raise DimensionMismatch(f"all agents need the same positive output dimension, got {sorted(rs)}")
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")

    @property
    def N(self):
        return len(self.agents)

    @property
    def r(self):
        return self.agents[0].r

    def agent(self, k):
        """Agent by 1-based id."""
        return self.agents[k - 1]

    def state_offsets(self):
        """Start index of each agent's state in the global vector (plus the total)."""
        return np.concatenate([[0], np.cumsum([a.n for a in self.agents])]).astype(int)


@dataclass(frozen=True)
class LocalStack:
    """Matrices of the augmented system seen by the estimator at agent ``k``.

    Block order is the agent itself first, then its in-neighbours in ascending
    id order. ``M[j]`` and ``Nsel[j]`` are keyed by neighbour id.
    """

    k: int
    neighbors: tuple[int, ...]
    dims: tuple[int, ...]
    Astack: np.ndarray
    Cstack: np.ndarray
    Bstack: np.ndarray
    Btilde_stack: np.ndarray
    M: dict = field(default_factory=dict)
    Nsel: dict = field(default_factory=dict)

    @property
    def sigma(self):
        return self.Astack.shape[0]

    @property
    def members(self):
        return (self.k,) + self.neighbors

    @property
    def n_self(self):
        return self.dims[0]

    @property
    def p(self):
        return len(self.neighbors)

    def block_slice(self, i):
        """Slice of block ``i`` (0 = self) inside the stacked state."""
        start = int(sum(self.dims[:i]))
        return slice(start, start + self.dims[i])

    def coupling_sum(self):
        """``sum_j a_kj N_j^(k)``."""
        return sum(self.Nsel.values(), np.zeros((self.sigma, self.sigma)))


@dataclass(frozen=True)
class GlobalSystem:
    A_glob: np.ndarray
    B_glob: np.ndarray
    Btilde_glob: np.ndarray
    C_glob: np.ndarray
    incidence: np.ndarray

    @property
    def n(self):
        return self.A_glob.shape[0]


def local_stack(net, k):
    """Build the local stack for agent ``k`` (1-based)."""
    neighbors = tuple(net.graph.in_neighbors(k))
    if not neighbors:
        raise IsolatedAgent(f"agent {k} has no in-neighbours and receives no measurements")
    members = (k,) + neighbors
    models = [net.agent(i) for i in members]
    dims = tuple(a.n for a in models)
    sigma = sum(dims)
    r = net.r

    Astack = sla.block_diag(*[a.A for a in models])
    Bstack = sla.block_diag(*[a.B for a in models])
    Btilde_stack = sla.block_diag(*[a.Btilde for a in models])

    Cstack = np.zeros((r * len(neighbors), sigma))
    offsets = np.concatenate([[0], np.cumsum(dims)])
    M = {}
    Nsel = {}
    for i, j in enumerate(neighbors):
        rows = slice(i * r, (i + 1) * r)
        Cstack[rows, : dims[0]] = -models[0].C
        cols = slice(offsets[i + 1], offsets[i + 2])
        Cstack[rows, cols] = models[i + 1].C
        Mj = np.zeros((sigma, dims[i + 1]))
        Mj[cols, :] = np.eye(dims[i + 1])
        M[j] = Mj
        Nsel[j] = Mj @ Mj.T
    return LocalStack(k, neighbors, dims, Astack, Cstack, Bstack, Btilde_stack, M, Nsel)


def local_stacks(net):
    return [local_stack(net, k) for k in range(1, net.N + 1)]


def stack_selector(net, stack):
    """Matrix ``T`` with ``x^(k) = T @ x`` for the global state ``x``."""
    offsets = net.state_offsets()
    T = np.zeros((stack.sigma, offsets[-1]))
    row = 0
    for i in stack.members:
        n_i = net.agent(i).n
        T[row : row + n_i, offsets[i - 1] : offsets[i - 1] + n_i] = np.eye(n_i)
        row += n_i
    return T


def global_system(net):
    E = incidence_matrix(net.graph)
    A_glob = sla.block_diag(*[a.A for a in net.agents])
    B_glob = sla.block_diag(*[a.B for a in net.agents])
    Btilde_glob = sla.block_diag(*[a.Btilde for a in net.agents])
    C_blk = sla.block_diag(*[a.C for a in net.agents])
    C_glob = np.kron(E, np.eye(net.r)) @ C_blk if E.size else np.zeros((0, A_glob.shape[0]))
    return GlobalSystem(A_glob, B_glob, Btilde_glob, C_glob, E)


def pbh_detectable(A, C, tol=PBH_TOL):
    """Popov-Belevitch-Hautus detectability test.

    Returns ``(detectable, offending)`` where ``offending`` lists the
    eigenvalues with non-negative real part at which ``[A - lam I; C]`` loses
    rank. Rank is decided from singular values relative to the largest one.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    C = np.asarray(C, dtype=float).reshape(-1, n)
    offending = []
    for lam in np.linalg.eigvals(A):
        if lam.real < UNSTABLE_REAL_PART:
            continue
        pencil = np.vstack([A - lam * np.eye(n), C.astype(complex)])
        s = np.linalg.svd(pencil, compute_uv=False)
        rank = int(np.sum(s > tol * max(s[0], np.finfo(float).tiny)))
        if rank < n:
            offending.append(complex(lam))
    return not offending, offending


@dataclass
class IsccResult:
    vertices: tuple[int, ...]
    detectable: bool
    offending_eigenvalues: list


@dataclass
class DetectabilityReport:
    components: list
    global_detectable: bool
    global_offending: list

    @property
    def passed(self):
        return all(c.detectable for c in self.components)

    def to_dict(self):
        def eig(z):
            return [z.real, z.imag]

        return {
            "passed": self.passed,
            "global_detectable": self.global_detectable,
            "global_offending_eigenvalues": [eig(z) for z in self.global_offending],
            "isccs": [
                {
                    "vertices": list(c.vertices),
                    "detectable": c.detectable,
                    "offending_eigenvalues": [eig(z) for z in c.offending_eigenvalues],
                }
                for c in self.components
            ],
        }


def check_iscc_detectability(net):
    """Necessary condition for estimator existence: every iSCC subsystem is detectable.

    For each independent strongly connected component the block-diagonal
    dynamics of its agents are paired with the relative outputs along the
    component's own edges, and the PBH test is applied.
    """
    scc = scc_decompose(net.graph)
    results = []
    for comp in scc.independent_components():
        sub, ids = net.graph.subgraph(comp)
        A = sla.block_diag(*[net.agent(i).A for i in ids])
        if sub.n_edges:
            C_blk = sla.block_diag(*[net.agent(i).C for i in ids])
            C = np.kron(incidence_matrix(sub), np.eye(net.r)) @ C_blk
        else:
            C = np.zeros((0, A.shape[0]))
        ok, bad = pbh_detectable(A, C)
        results.append(IsccResult(tuple(ids), ok, bad))
    gs = global_system(net)
    g_ok, g_bad = pbh_detectable(gs.A_glob, gs.C_glob)
    return DetectabilityReport(results, g_ok, g_bad)
