"""Joint LMI synthesis of the cooperative estimator gains.

Each agent ``k`` contributes one block LMI in its own variables
``(P^(k), F^(k), G^(k))`` that also references the top-left blocks
``P_11^(j)`` of its in-neighbours, so all agents are solved together as one
semidefinite feasibility problem. Gains are recovered afterwards as
``L = P^-1 G`` and ``K = P^-1 F``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np
import scipy.linalg as sla

from .errors import (
    DimensionMismatch,
    Infeasible,
    InfeasibleAtUpperBound,
    NumericalFailure,
    SingularP,
)
from .model import global_system, local_stacks

log = logging.getLogger(__name__)

DEFAULT_SOLVER = "CLARABEL"
DEFAULT_EPS = 1e-6
DEFAULT_BRACKET = (0.1, 100.0)
BISECTION_RTOL = 1e-2
# the solver is asked for this multiple of the margin so the returned point
# still clears the nominal margin after solver round-off
SOLVER_MARGIN_FACTOR = 2.0

_FEASIBLE = {cp.OPTIMAL, cp.OPTIMAL_INACCURATE}
_INFEASIBLE = {cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE}


@dataclass(frozen=True)
class SynthesisParams:
    """Design parameters for the estimator LMIs.

    ``pi`` and ``W`` are per agent (index ``k - 1``). ``eps`` scales the
    strictness margin; agent ``k`` uses ``eps * (1 + ||A^(k)||_2)``.
    """

    alpha: float
    pi: tuple
    W: tuple
    gamma: float | None = None
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        object.__setattr__(self, "pi", tuple(float(p) for p in self.pi))
        object.__setattr__(self, "W", tuple(np.asarray(w, dtype=float) for w in self.W))
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if any(not p > 0 for p in self.pi):
            raise ValueError("every pi_k must be positive")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("gamma must be positive")
        for i, w in enumerate(self.W):
            if w.ndim != 2 or w.shape[0] != w.shape[1]:
                raise DimensionMismatch(f"W[{i}] must be square")
            if not np.allclose(w, w.T, atol=1e-12 * (1 + np.abs(w).max(initial=0))):
                raise ValueError(f"W[{i}] is not symmetric")
            if w.size and np.linalg.eigvalsh(w).min() < -1e-10 * (1 + np.abs(w).max()):
                raise ValueError(f"W[{i}] is not positive semidefinite")

    @classmethod
    def uniform(cls, stacks, alpha, pi, weight_self=None, **kw):
        """Same ``pi`` everywhere; ``W^(k) = blockdiag(weight_self, 0)``.

        ``weight_self`` defaults to the identity on the agent's own state.
        """
        Ws = []
        for s in stacks:
            top = np.eye(s.n_self) if weight_self is None else np.asarray(weight_self, dtype=float)
            Ws.append(sla.block_diag(top, np.zeros((s.sigma - s.n_self, s.sigma - s.n_self))))
        return cls(alpha=alpha, pi=[pi] * len(stacks), W=Ws, **kw)

    def margin(self, stack):
        return self.eps * (1.0 + np.linalg.norm(stack.Astack, 2))


def _is_expr(x):
    return isinstance(x, cp.Expression)


def _bmat(blocks):
    if any(_is_expr(b) for row in blocks for b in row):
        return cp.bmat(blocks)
    return np.block(blocks)


def _top_left(P, n, sigma):
    """``blockdiag(P_11, 0)`` for the leading ``n x n`` block of ``P``."""
    E = np.zeros((sigma, sigma))
    E[:n, :n] = np.eye(n)
    return E @ P @ E


def assemble_Q(stack, P, F, G, params, out_degree):
    """The ``Q^(k)`` matrix; works on numpy arrays and on cvxpy expressions."""
    sigma = stack.sigma
    for name, X, cols in (("P", P, sigma), ("F", F, sigma), ("G", G, stack.Cstack.shape[0])):
        if tuple(X.shape) != (sigma, cols):
            raise DimensionMismatch(f"{name} has shape {tuple(X.shape)}, expected {(sigma, cols)}")
    A = stack.Astack
    GC = G @ stack.Cstack
    FN = F @ stack.coupling_sum()
    Q = P @ A + A.T @ P - GC - GC.T - FN - FN.T + params.alpha * P
    pi_k = params.pi[stack.k - 1]
    if out_degree:
        Q = Q + out_degree * pi_k * _top_left(P, stack.n_self, sigma)
    return Q


def lmi_blocks(stack, P, F, G, P11_neighbors, params, gamma2, out_degree, omega):
    """Block rows of the agent-``k`` LMI matrix (not yet negated-margin shifted).

    Block order: error, measurement noise, model disturbance, then one block
    per in-neighbour.
    """
    sigma = stack.sigma
    rp = stack.Cstack.shape[0]
    dk = stack.Btilde_stack.shape[1]
    nbr_dims = list(stack.dims[1:])
    W = params.W[stack.k - 1]
    if W.shape != (sigma, sigma):
        raise DimensionMismatch(f"W for agent {stack.k} has shape {W.shape}, expected {(sigma, sigma)}")
    if not stack.neighbors:
        raise DimensionMismatch(f"agent {stack.k} has an empty neighbour list")

    Q = assemble_Q(stack, P, F, G, params, out_degree)
    PB = P @ stack.Btilde_stack
    FM = [F @ stack.M[j] for j in stack.neighbors]

    def Z(a, b):
        return np.zeros((a, b))

    row0 = [Q + W, -omega * G, PB] + FM
    row1 = [-omega * G.T, -gamma2 * np.eye(rp), Z(rp, dk)] + [Z(rp, nj) for nj in nbr_dims]
    row2 = [PB.T, Z(dk, rp), -gamma2 * np.eye(dk)] + [Z(dk, nj) for nj in nbr_dims]
    rows = [row0, row1, row2]
    for i, j in enumerate(stack.neighbors):
        nj = nbr_dims[i]
        row = [FM[i].T, Z(nj, rp), Z(nj, dk)]
        for i2, nj2 in enumerate(nbr_dims):
            if i2 == i:
                row.append(-params.pi[j - 1] * P11_neighbors[i])
            else:
                row.append(Z(nj, nj2))
        rows.append(row)
    return rows


def lmi_size(stack):
    return stack.sigma + stack.Cstack.shape[0] + stack.Btilde_stack.shape[1] + sum(stack.dims[1:])


def permute_blocks(blocks, order):
    """Symmetric permutation of a block matrix given as nested lists."""
    return [[blocks[i][j] for j in order] for i in order]


@dataclass
class CoupledLmi:
    """All agents' LMIs over the joint variables.

    ``gamma2`` is a cvxpy parameter so bisection re-solves without rebuilding.
    """

    net: object
    stacks: list
    params: SynthesisParams
    P: list
    F: list
    G: list
    gamma2: cp.Parameter
    blocks: list
    margins: list
    constraints: list = field(default_factory=list)
    _problem: cp.Problem | None = None

    @property
    def gamma(self):
        return math.sqrt(self.gamma2.value)

    def set_gamma(self, gamma):
        if not gamma > 0:
            raise ValueError("gamma must be positive")
        self.gamma2.value = float(gamma) ** 2

    def matrix(self, k, order=None):
        """Symmetrised LMI expression of agent ``k`` (optionally block-permuted)."""
        blocks = self.blocks[k - 1]
        if order is not None:
            blocks = permute_blocks(blocks, order)
        M = _bmat(blocks)
        return (M + M.T) / 2

    @property
    def problem(self):
        if self._problem is None:
            self._problem = cp.Problem(cp.Minimize(0), self.constraints)
        return self._problem


def assemble_coupled_lmi(net, stacks, params, gamma, block_orders=None):
    """Build the joint feasibility problem at a fixed ``gamma``.

    ``block_orders`` optionally maps agent id to a permutation of its block
    rows/columns; feasibility does not depend on it.
    """
    if len(params.W) != net.N or len(params.pi) != net.N:
        raise DimensionMismatch("params need one pi and one W per agent")
    P = [cp.Variable((s.sigma, s.sigma), symmetric=True, name=f"P{s.k}") for s in stacks]
    F = [cp.Variable((s.sigma, s.sigma), name=f"F{s.k}") for s in stacks]
    G = [cp.Variable((s.sigma, s.Cstack.shape[0]), name=f"G{s.k}") for s in stacks]
    gamma2 = cp.Parameter(nonneg=True, name="gamma2")
    lmi = CoupledLmi(net, list(stacks), params, P, F, G, gamma2, [], [])
    lmi.set_gamma(gamma)

    out_deg = [len(net.graph.out_neighbors(k)) for k in range(1, net.N + 1)]
    constraints = []
    for s in stacks:
        i = s.k - 1
        P11_nbrs = [P[j - 1][: net.agent(j).n, : net.agent(j).n] for j in s.neighbors]
        blocks = lmi_blocks(s, P[i], F[i], G[i], P11_nbrs, params, gamma2, out_deg[i], net.omega)
        lmi.blocks.append(blocks)
        margin = params.margin(s)
        lmi.margins.append(margin)
        order = None if block_orders is None else block_orders.get(s.k)
        size = lmi_size(s)
        solver_margin = SOLVER_MARGIN_FACTOR * margin
        constraints.append(lmi.matrix(s.k, order) << -solver_margin * np.eye(size))
        constraints.append(P[i] >> solver_margin * np.eye(s.sigma))
    lmi.constraints = constraints
    return lmi


@dataclass
class LmiSolution:
    P: list
    F: list
    G: list
    status: str
    gamma: float
    lmi_max_eigs: list
    p_min_eigs: list


def evaluate_lmis(net, stacks, params, gamma, P, F, G):
    """Numerically assemble each agent's LMI for given variable values.

    Returns ``(max eigenvalue of each LMI matrix, min eigenvalue of each P)``.
    """
    out_deg = [len(net.graph.out_neighbors(k)) for k in range(1, net.N + 1)]
    lmi_max, p_min = [], []
    for s in stacks:
        i = s.k - 1
        P11_nbrs = [P[j - 1][: net.agent(j).n, : net.agent(j).n] for j in s.neighbors]
        blocks = lmi_blocks(s, P[i], F[i], G[i], P11_nbrs, params, gamma**2, out_deg[i], net.omega)
        M = np.block(blocks)
        lmi_max.append(float(np.linalg.eigvalsh((M + M.T) / 2).max()))
        p_min.append(float(np.linalg.eigvalsh(P[i]).min()))
    return lmi_max, p_min


def solve_feasibility(lmi, solver=DEFAULT_SOLVER, **solver_opts):
    """Solve the joint LMI problem and certify the result against the margins.

    Raises
    ------
    Infeasible
        Solver proved infeasibility, or its answer fails the margin check.
    NumericalFailure
        Solver stopped for any other reason.
    """
    prob = lmi.problem
    try:
        with warnings.catch_warnings():
            # inaccurate statuses are reported through the status check below
            warnings.simplefilter("ignore", UserWarning)
            prob.solve(solver=solver, **solver_opts)
    except cp.error.SolverError as exc:
        raise NumericalFailure("solver_error", str(exc)) from exc
    status = prob.status
    if status in _INFEASIBLE:
        raise Infeasible(status)
    if status not in _FEASIBLE:
        raise NumericalFailure(status)
    if status != cp.OPTIMAL:
        log.warning("solver reports %s at gamma=%g; accepted only after the margin check", status, lmi.gamma)

    P = [(v.value + v.value.T) / 2 for v in lmi.P]
    F = [np.array(v.value) for v in lmi.F]
    G = [np.array(v.value) for v in lmi.G]
    lmi_max, p_min = evaluate_lmis(lmi.net, lmi.stacks, lmi.params, lmi.gamma, P, F, G)
    for k, (lm, pm, margin) in enumerate(zip(lmi_max, p_min, lmi.margins), start=1):
        if lm > -margin or pm < margin:
            log.debug("agent %d fails margin check: lmi max %.3e, P min %.3e, margin %.3e", k, lm, pm, margin)
            raise Infeasible("verification_failed")
    return LmiSolution(P, F, G, status, lmi.gamma, lmi_max, p_min)


def recover_gains(P, F, G, eps=0.0):
    """``L = P^-1 G`` and ``K = P^-1 F`` via a Cholesky solve."""
    P = np.asarray(P, dtype=float)
    P = (P + P.T) / 2
    lam_min = np.linalg.eigvalsh(P).min()
    if lam_min <= 0 or lam_min < eps / 2:
        raise SingularP(f"P has smallest eigenvalue {lam_min:.3e} (threshold {eps / 2:.3e})")
    chol = sla.cho_factor(P)
    L = sla.cho_solve(chol, np.asarray(G, dtype=float))
    K = sla.cho_solve(chol, np.asarray(F, dtype=float))
    return L, K


@dataclass
class EstimatorBank:
    """Designed cooperative estimators, one per agent (index ``k - 1``)."""

    stacks: list
    P: list
    L: list
    K: list
    F: list
    G: list
    gamma: float
    params: SynthesisParams
    status: str = "optimal"
    margins: list = field(default_factory=list)

    @property
    def I0_weighting(self):
        return self.P

    @property
    def W(self):
        return list(self.params.W)

    def condition_numbers(self):
        return [float(np.linalg.cond(P)) for P in self.P]

    def initial_cost(self, net, x0):
        """``I_0 = sum_k x0^(k)' P^(k) x0^(k)`` for a global initial state."""
        from .model import stack_selector

        x0 = np.asarray(x0, dtype=float)
        total = 0.0
        for s, P in zip(self.stacks, self.P):
            xk = stack_selector(net, s) @ x0
            total += float(xk @ P @ xk)
        return total

    def with_gains(self, L=None, K=None):
        """Copy with some gains replaced (used for fault-injection checks)."""
        return EstimatorBank(
            self.stacks, self.P, L if L is not None else self.L, K if K is not None else self.K,
            self.F, self.G, self.gamma, self.params, self.status, self.margins,
        )


def bank_from_solution(lmi, sol):
    Ls, Ks = [], []
    for P, F, G, margin in zip(sol.P, sol.F, sol.G, lmi.margins):
        L, K = recover_gains(P, F, G, eps=margin)
        Ls.append(L)
        Ks.append(K)
    return EstimatorBank(lmi.stacks, sol.P, Ls, Ks, sol.F, sol.G, sol.gamma, lmi.params, sol.status, list(lmi.margins))


def design_at_gamma(net, params, gamma, stacks=None, solver=DEFAULT_SOLVER):
    """Feasibility design at a fixed performance level."""
    stacks = local_stacks(net) if stacks is None else stacks
    lmi = assemble_coupled_lmi(net, stacks, params, gamma)
    return bank_from_solution(lmi, solve_feasibility(lmi, solver=solver))


def _bisect(feasible_at, bracket, rtol):
    """Geometric bisection for the smallest feasible level.

    ``feasible_at(g)`` returns a result or ``None``. Returns the smallest
    feasible level probed and its result.
    """
    lo, hi = (float(b) for b in bracket)
    if not 0 < lo < hi:
        raise ValueError(f"invalid bracket {bracket}")
    best = feasible_at(hi)
    if best is None:
        raise InfeasibleAtUpperBound("infeasible", f"LMIs infeasible at upper bracket gamma={hi:g}")
    best_g = hi
    res = feasible_at(lo)
    if res is not None:
        return lo, res
    while (hi - lo) / hi > rtol:
        mid = math.sqrt(lo * hi)
        res = feasible_at(mid)
        if res is None:
            lo = mid
        else:
            hi, best_g, best = mid, mid, res
    return best_g, best


def minimize_gamma(net, stacks=None, params=None, bracket=DEFAULT_BRACKET, rtol=BISECTION_RTOL, solver=DEFAULT_SOLVER):
    """Smallest feasible ``gamma`` (to ``rtol``) by bisection, with its design."""
    stacks = local_stacks(net) if stacks is None else stacks
    lmi = assemble_coupled_lmi(net, stacks, params, bracket[1])

    def feasible_at(g):
        lmi.set_gamma(g)
        try:
            return solve_feasibility(lmi, solver=solver)
        except Infeasible:
            return None
        except NumericalFailure as exc:
            # CLARABEL stops with an error on some infeasible instances
            log.info("solver failure at gamma=%g (%s); treated as infeasible", g, exc.status)
            return None

    gamma_star, sol = _bisect(feasible_at, bracket, rtol)
    lmi.set_gamma(gamma_star)
    return gamma_star, bank_from_solution(lmi, sol)


def default_global_weight(net, params):
    """Block-diagonal of each agent's own-state weight (top-left block of ``W^(k)``)."""
    return sla.block_diag(*[params.W[k][: a.n, : a.n] for k, a in enumerate(net.agents)])


@dataclass
class CentralizedDesign:
    P: np.ndarray
    L: np.ndarray
    gamma: float
    status: str


class _CentralLmi:
    def __init__(self, net, W_glob, eps=DEFAULT_EPS):
        gs = global_system(net)
        n = gs.n
        ny = gs.C_glob.shape[0]
        W_glob = np.asarray(W_glob, dtype=float)
        if W_glob.shape != (n, n):
            raise DimensionMismatch(f"W_glob has shape {W_glob.shape}, expected {(n, n)}")
        Bt = gs.Btilde_glob
        nd = Bt.shape[1]
        self.margin = eps * (1.0 + np.linalg.norm(gs.A_glob, 2))
        self.P = cp.Variable((n, n), symmetric=True, name="Pc")
        self.Y = cp.Variable((n, ny), name="Yc")
        self.gamma2 = cp.Parameter(nonneg=True, name="gamma2c")
        P, Y, A, C = self.P, self.Y, gs.A_glob, gs.C_glob
        blocks = [
            [P @ A + A.T @ P - Y @ C - (Y @ C).T + W_glob, P @ Bt, -net.omega * Y],
            [(P @ Bt).T, -self.gamma2 * np.eye(nd), np.zeros((nd, ny))],
            [-net.omega * Y.T, np.zeros((ny, nd)), -self.gamma2 * np.eye(ny)],
        ]
        M = cp.bmat(blocks)
        size = n + nd + ny
        sm = SOLVER_MARGIN_FACTOR * self.margin
        cons = [(M + M.T) / 2 << -sm * np.eye(size), P >> sm * np.eye(n)]
        self.problem = cp.Problem(cp.Minimize(0), cons)
        self._num = (A, C, Bt, W_glob, net.omega, nd, ny)

    def solve(self, gamma, solver=DEFAULT_SOLVER):
        self.gamma2.value = float(gamma) ** 2
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)
                self.problem.solve(solver=solver)
        except cp.error.SolverError as exc:
            raise NumericalFailure("solver_error", str(exc)) from exc
        st = self.problem.status
        if st in _INFEASIBLE:
            raise Infeasible(st)
        if st not in _FEASIBLE:
            raise NumericalFailure(st)
        A, C, Bt, W, om, nd, ny = self._num
        P = (self.P.value + self.P.value.T) / 2
        Y = self.Y.value
        M = np.block([
            [P @ A + A.T @ P - Y @ C - (Y @ C).T + W, P @ Bt, -om * Y],
            [(P @ Bt).T, -gamma**2 * np.eye(nd), np.zeros((nd, ny))],
            [-om * Y.T, np.zeros((ny, nd)), -gamma**2 * np.eye(ny)],
        ])
        if np.linalg.eigvalsh((M + M.T) / 2).max() > -self.margin or np.linalg.eigvalsh(P).min() < self.margin:
            raise Infeasible("verification_failed")
        return CentralizedDesign(P, np.linalg.solve(P, Y), float(gamma), st)


def centralized_baseline(net, W_glob, gamma, eps=DEFAULT_EPS, solver=DEFAULT_SOLVER):
    """Whether a centralized full-order H-infinity filter reaches level ``gamma``.

    Bounded-real-lemma LMI for the global error system
    ``de/dt = (A - L C) e + Btilde xi - omega L eta`` with output ``W^(1/2) e``.
    """
    try:
        _CentralLmi(net, W_glob, eps).solve(gamma, solver)
    except Infeasible:
        return False
    return True


def minimize_centralized_gamma(net, W_glob, bracket=DEFAULT_BRACKET, rtol=BISECTION_RTOL, eps=DEFAULT_EPS, solver=DEFAULT_SOLVER):
    prob = _CentralLmi(net, W_glob, eps)

    def feasible_at(g):
        try:
            return prob.solve(g, solver)
        except (Infeasible, NumericalFailure):
            return None

    return _bisect(feasible_at, bracket, rtol)
