"""Single-worker optimizers: SGD, GD, Nesterov AGD, the generalized
accelerated step, mirror descent, and dual averaging.

Trajectories store every iterate (lab usage); the federated engine has its
own streaming loop built on the same step functions.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .composite import conjugate_map
from .numerics import RngStream
from .problems import CompositeProblem, ProblemHandle


@dataclass
class AcState:
    """Main / aggregate iterate pair of generalized accelerated SGD, plus
    the last coupling (middle) point when materialized."""

    x: np.ndarray
    x_ag: np.ndarray
    x_md: Optional[np.ndarray] = None


@dataclass
class DaState:
    """Dual averaging state: dual vector, step counter, and the primal
    image x = conjugate_map(geo, reg, eta * t, y)."""

    y: np.ndarray
    t: int
    x: np.ndarray


def coupling_point(state: AcState, beta: float) -> np.ndarray:
    """x_md = beta^-1 x + (1 - beta^-1) x_ag (beta = 1 short-circuits so the
    degenerate coupling is bit-exact)."""
    if beta == 1.0:
        return state.x
    binv = 1.0 / beta
    return binv * state.x + (1.0 - binv) * state.x_ag


def acsgd_step(state: AcState, g, alpha: float, beta: float, gamma: float,
               eta: float) -> AcState:
    """One generalized accelerated step.

    x_ag+ <- x_md - eta * g;  x+ <- (1 - 1/alpha) x + (1/alpha) x_md - gamma * g
    with x_md from coupling_point.  alpha = beta = 1 collapses to plain SGD
    on x with step gamma.
    """
    if alpha < 1.0 or beta < 1.0:
        raise ValueError("alpha and beta must be >= 1")
    x_md = coupling_point(state, beta)
    x_ag_new = x_md - eta * np.asarray(g)
    if alpha == 1.0:
        x_new = x_md - gamma * np.asarray(g)
    else:
        ainv = 1.0 / alpha
        x_new = (1.0 - ainv) * state.x + ainv * x_md - gamma * np.asarray(g)
    return AcState(x=x_new, x_ag=x_ag_new, x_md=x_md)


def nesterov_params(l: float, mu: float) -> tuple:
    """(alpha, beta, gamma, eta) reproducing classic strongly-convex AGD:
    eta = 1/L, gamma = 1/sqrt(L mu), alpha = sqrt(kappa), beta = sqrt(kappa)+1."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    if l < mu:
        raise ValueError("need l >= mu")
    kappa = l / mu
    rk = np.sqrt(kappa)
    return rk, rk + 1.0, 1.0 / np.sqrt(l * mu), 1.0 / l


def sgd_run(p: ProblemHandle, eta: float, steps: int, x0, rng: RngStream,
            client: int = 0) -> list:
    """x_{k+1} = x_k - eta * client_grad(client, x_k); returns steps+1 iterates."""
    x = np.asarray(x0, dtype=np.float64).copy()
    traj = [x.copy()]
    for _ in range(steps):
        g = p.client_grad(client, x, rng)
        x = x - eta * g
        traj.append(x.copy())
    return traj


def gd_run(p: ProblemHandle, eta: float, steps: int, x0) -> list:
    """Deterministic full-gradient descent; same shapes as sgd_run."""
    x = np.asarray(x0, dtype=np.float64).copy()
    traj = [x.copy()]
    for _ in range(steps):
        x = x - eta * p.full_grad(x)
        traj.append(x.copy())
    return traj


def agd_run(p: ProblemHandle, l: float, mu: float, x0, x_ag0,
            steps: int) -> list:
    """Nesterov's AGD for mu-strongly-convex, l-smooth objectives.

    Implemented through acsgd_step with the classic hyperparameter map
    (see nesterov_params), querying exact gradients at the coupling point:
        x_md  = x/(sqrt(k)+1) + x_ag sqrt(k)/(sqrt(k)+1)
        x_ag+ = x_md - (1/l) grad F(x_md)
        x+    = (1-1/sqrt(k)) x + (1/sqrt(k)) x_md - grad F(x_md)/sqrt(l mu)
    """
    alpha, beta, gamma, eta = nesterov_params(l, mu)
    state = AcState(x=np.asarray(x0, dtype=np.float64).copy(),
                    x_ag=np.asarray(x_ag0, dtype=np.float64).copy())
    traj = [state]
    for _ in range(steps):
        x_md = coupling_point(state, beta)
        g = p.full_grad(x_md)
        state = acsgd_step(state, g, alpha, beta, gamma, eta)
        traj.append(state)
    return traj


def dual_averaging_run(cp: CompositeProblem, eta: float, steps: int, x0,
                       rng: RngStream, client: int = 0) -> list:
    """Composite dual averaging:
    y_0 = grad h(x_0); y_{t+1} = y_t - eta grad f(grad (h + eta t psi)*(y_t)).
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if not cp.reg.feasible(x0):
        raise ValueError("x0 must lie in dom psi")
    y = cp.geo.h_grad(x0).copy()
    x = conjugate_map(cp.geo, cp.reg, 0.0, y)
    traj = [DaState(y=y.copy(), t=0, x=x.copy())]
    for t in range(steps):
        g = cp.smooth.client_grad(client, x, rng)
        y = y - eta * g
        x = conjugate_map(cp.geo, cp.reg, eta * (t + 1), y)
        traj.append(DaState(y=y.copy(), t=t + 1, x=x.copy()))
    return traj


def mirror_descent_run(cp: CompositeProblem, eta: float, steps: int, x0,
                       rng: RngStream, client: int = 0) -> list:
    """Composite-objective mirror descent (Bregman proximal gradient):
    x+ <- grad (h + eta psi)*(grad h(x) - eta grad f(x; xi))."""
    x = np.asarray(x0, dtype=np.float64).copy()
    if not cp.reg.feasible(x):
        raise ValueError("x0 must lie in dom psi")
    traj = [x.copy()]
    for _ in range(steps):
        g = cp.smooth.client_grad(client, x, rng)
        x = conjugate_map(cp.geo, cp.reg, eta, cp.geo.h_grad(x) - eta * g)
        traj.append(x.copy())
    return traj
