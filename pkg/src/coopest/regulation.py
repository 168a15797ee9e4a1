"""Output-regulation design: Francis equations, game Riccati equation, gains.

Every agent tracks a shared internal model ``dzeta/dt = S zeta`` with output
``Gamma zeta``. The regulator equations pick ``(Pi_k, Lambda_k)`` so that
``x_k = Pi_k zeta`` is an invariant trajectory with ``C_k x_k = Gamma zeta``.
The state-feedback part ``H_k`` comes from an indefinite Riccati equation
whose disturbance channels carry the model disturbance and the internal-model
mismatch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatch, NoSolution, NoStabilizingSolution, NotPositiveDefinite

FRANCIS_TOL = 1e-9
FRANCIS_FAIL = 1e-6
IMAG_AXIS_TOL = 1e-9
RICCATI_TOL = 1e-8
MAX_NEWTON = 5


@dataclass(frozen=True)
class ExosystemSpec:
    """Internal model ``(S, Gamma)``; must be observable with spectrum on the imaginary axis."""

    S: np.ndarray
    Gamma: np.ndarray

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.S, dtype=float))
        Gamma = np.atleast_2d(np.asarray(self.Gamma, dtype=float))
        nu = S.shape[0]
        if S.shape != (nu, nu):
            raise DimensionMismatch("S must be square")
        if Gamma.shape[1] != nu:
            raise DimensionMismatch(f"Gamma has {Gamma.shape[1]} columns, expected {nu}")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "Gamma", Gamma)
        eig = np.linalg.eigvals(S)
        if np.max(np.abs(eig.real)) > 1e-9:
            raise ValueError(f"S must have all eigenvalues on the imaginary axis, got {eig}")
        obs = np.vstack([Gamma @ np.linalg.matrix_power(S, i) for i in range(nu)])
        if np.linalg.matrix_rank(obs) < nu:
            raise ValueError("(S, Gamma) is not observable")

    @property
    def nu(self):
        return self.S.shape[0]


def solve_francis(agent, exo):
    """Solve ``A Pi + B Lambda = Pi S``, ``C Pi = Gamma`` for ``(Pi, Lambda)``.

    The two matrix equations are vectorised (column-major) into one linear
    system; the minimum-norm least-squares solution is returned. ``exo`` may
    be any object with ``S`` and ``Gamma`` attributes; the exosystem
    conditions are not needed to solve the equations themselves.
    """
    A, B, C = agent.A, agent.B, agent.C
    S = np.atleast_2d(np.asarray(exo.S, dtype=float))
    Gamma = np.atleast_2d(np.asarray(exo.Gamma, dtype=float))
    n, m, nu = agent.n, agent.m, S.shape[0]
    if Gamma.shape[0] != C.shape[0]:
        raise DimensionMismatch(f"Gamma has {Gamma.shape[0]} rows, agent output has {C.shape[0]}")
    I_nu = np.eye(nu)
    top = np.hstack([np.kron(I_nu, A) - np.kron(S.T, np.eye(n)), np.kron(I_nu, B)])
    bottom = np.hstack([np.kron(I_nu, C), np.zeros((C.shape[0] * nu, m * nu))])
    lhs = np.vstack([top, bottom])
    rhs = np.concatenate([np.zeros(n * nu), Gamma.flatten(order="F")])
    sol, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    resid = np.linalg.norm(lhs @ sol - rhs)
    if resid > FRANCIS_FAIL * (1.0 + np.linalg.norm(rhs)):
        raise NoSolution(f"Francis equations unsolvable (least-squares residual {resid:.3e})")
    Pi = sol[: n * nu].reshape((n, nu), order="F")
    Lam = sol[n * nu :].reshape((m, nu), order="F")
    return Pi, Lam


def francis_residuals(agent, exo, Pi, Lam):
    """Frobenius norms of the two Francis equation residuals."""
    r1 = np.linalg.norm(agent.A @ Pi + agent.B @ Lam - Pi @ exo.S)
    r2 = np.linalg.norm(agent.C @ Pi - exo.Gamma)
    return r1, r2


def riccati_quadratic(agent, Pi, mu, lambda_gain):
    """Indefinite quadratic coefficient ``B B'/lambda^2 - (Bt Bt' + Pi Pi')/mu^2``."""
    return (agent.B @ agent.B.T) / lambda_gain**2 - (agent.Btilde @ agent.Btilde.T + Pi @ Pi.T) / mu**2


def riccati_residual(A, R, D, X):
    return X @ A + A.T @ X + R - X @ D @ X


def solve_game_riccati(agent, Pi, R, mu, lambda_gain):
    """Stabilising solution of ``X A + A' X + R - X D X = 0``.

    ``D`` is the indefinite coefficient from :func:`riccati_quadratic`. The
    solution is read off the stable invariant subspace of the Hamiltonian
    ``[[A, -D], [-R, -A']]`` (ordered real Schur form) and polished with
    Newton steps on the Riccati residual.
    """
    if not (mu > 0 and lambda_gain > 0):
        raise ValueError("mu and lambda must be positive")
    A = agent.A
    n = agent.n
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if R.shape != (n, n):
        raise DimensionMismatch(f"R has shape {R.shape}, expected {(n, n)}")
    if np.linalg.eigvalsh((R + R.T) / 2).min() <= 0:
        raise ValueError("R must be positive definite")
    D = riccati_quadratic(agent, Pi, mu, lambda_gain)

    H = np.block([[A, -D], [-R, -A.T]])
    eig = np.linalg.eigvals(H)
    if np.min(np.abs(eig.real)) < IMAG_AXIS_TOL * max(1.0, np.abs(eig).max()):
        raise NoStabilizingSolution("Hamiltonian has eigenvalues on the imaginary axis")
    T, Z, sdim = sla.schur(H, output="real", sort="lhp")
    if sdim != n:
        raise NoStabilizingSolution(f"stable subspace has dimension {sdim}, expected {n}")
    U1, U2 = Z[:n, :n], Z[n:, :n]
    if np.linalg.cond(U1) > 1e12:
        raise NoStabilizingSolution("stable subspace basis is singular")
    X = np.linalg.solve(U1.T, U2.T).T
    X = (X + X.T) / 2

    def target(X):
        return RICCATI_TOL * (1.0 + np.linalg.norm(X) ** 2)

    for _ in range(MAX_NEWTON):
        Res = riccati_residual(A, R, D, X)
        Acl = A - D @ X
        dX = sla.solve_continuous_lyapunov(Acl.T, -Res)
        X = X + (dX + dX.T) / 2
        X = (X + X.T) / 2
        if np.linalg.norm(riccati_residual(A, R, D, X)) <= 0.1 * target(X):
            break
    res = np.linalg.norm(riccati_residual(A, R, D, X))
    if res > target(X):
        raise NoStabilizingSolution(f"Riccati residual {res:.3e} after refinement")
    if np.linalg.eigvalsh(X).min() <= 0:
        raise NotPositiveDefinite(f"Riccati solution has eigenvalues {np.linalg.eigvalsh(X)}")
    Acl = A - (agent.B @ agent.B.T @ X) / lambda_gain**2
    if np.linalg.eigvals(Acl).real.max() >= -1e-9:
        raise NoStabilizingSolution("A - B B' X / lambda^2 is not Hurwitz")
    return X


def feedback_gain(agent, X, lambda_gain):
    return -(agent.B.T @ X) / lambda_gain**2


def estimator_weight(agent, X, lambda_gain, sigma_k, n_k=None):
    """``blockdiag(X B B' X / lambda^2, 0)`` of size ``sigma_k``."""
    n_k = agent.n if n_k is None else n_k
    top = X @ agent.B @ agent.B.T @ X / lambda_gain**2
    top = (top + top.T) / 2
    W = np.zeros((sigma_k, sigma_k))
    W[:n_k, :n_k] = top
    return W


def performance_constants(mu, gamma, q_max):
    """Closed-loop gains ``(kappa, theta)`` with ``kappa^2 = mu^2 + q_max gamma^2``."""
    return math.sqrt(mu**2 + q_max * gamma**2), gamma


@dataclass
class RegulatorDesign:
    """Controller data for all agents (lists indexed by ``k - 1``)."""

    exo: ExosystemSpec
    Pi: list
    Lambda: list
    X: list
    H: list
    R: list
    mu: float
    lambda_gain: float
    q_max: int
    kappa: float | None = None
    theta: float | None = None
    francis_residuals: list = field(default_factory=list)
    riccati_residuals: list = field(default_factory=list)

    def weights(self, net, stacks):
        return [estimator_weight(net.agent(s.k), X, self.lambda_gain, s.sigma) for s, X in zip(stacks, self.X)]

    def set_gamma(self, gamma):
        self.kappa, self.theta = performance_constants(self.mu, gamma, self.q_max)


def design_regulator(net, exo, R, mu, lambda_gain):
    """Francis + Riccati + feedback gain for every agent of ``net``.

    ``R`` is a single matrix or one per agent.
    """
    from .graph import degrees

    Rs = list(R) if isinstance(R, (list, tuple)) else [R] * net.N
    if len(Rs) != net.N:
        raise DimensionMismatch(f"need {net.N} weights R_k, got {len(Rs)}")
    Pis, Lams, Xs, Hs, fres, rres = [], [], [], [], [], []
    for agent, Rk in zip(net.agents, Rs):
        Pi, Lam = solve_francis(agent, exo)
        X = solve_game_riccati(agent, Pi, Rk, mu, lambda_gain)
        Pis.append(Pi)
        Lams.append(Lam)
        Xs.append(X)
        Hs.append(feedback_gain(agent, X, lambda_gain))
        fres.append(francis_residuals(agent, exo, Pi, Lam))
        D = riccati_quadratic(agent, Pi, mu, lambda_gain)
        rres.append(float(np.linalg.norm(riccati_residual(agent.A, np.asarray(Rk, float), D, X))))
    _, out_deg = degrees(net.graph)
    return RegulatorDesign(
        exo, Pis, Lams, Xs, Hs, [np.asarray(r, dtype=float) for r in Rs], mu, lambda_gain,
        int(out_deg.max()), francis_residuals=fres, riccati_residuals=rres,
    )
