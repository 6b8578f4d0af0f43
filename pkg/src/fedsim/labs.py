"""Diagnostic experiments as first-class operations: iterate-bias Monte
Carlo with its SDE prediction, the accelerated-gradient instability
recursion, and the heterogeneous lower-bound trajectory verifier.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .federated import FedConfig, fedavg_run, feddualavg_run, fedmid_run
from .numerics import RngStream
from .problems import CompositeProblem, HeteroPairProblem, ProblemHandle
from .sequential import gd_run, sgd_run

_CHUNK = 1 << 16     # Monte Carlo repetitions per stream chunk


@dataclass
class BiasEstimate:
    """Mean SGD-vs-GD iterate gap at step k with its Monte Carlo error."""

    mean_bias: np.ndarray
    std_error: np.ndarray
    reps: int
    k: int
    eta: float


@dataclass
class DivergenceTrace:
    """Difference trajectory of two AGD instances under the three-step
    curvature schedule (F'' = L when t mod 3 == 1, else mu)."""

    kappa: float
    epsilon: float
    blocks: int
    pairs: list                      # (delta_ag, delta) per step t = 0..3K
    growth_ratios: list              # per-3-step-block scalar factor
    block_factor: float              # -2 (1 - 1/sqrt(kappa))^3
    block_matrix: np.ndarray         # [[1/2, 1/(2 rk)], [rk/2, 1/2]]
    warned: bool = False             # kappa < 25: guarantee not claimed

    @property
    def final_delta_ag(self) -> float:
        return self.pairs[-1][0]

    @property
    def final_delta(self) -> float:
        return self.pairs[-1][1]


def measure_bias(p: ProblemHandle, eta: float, k: int, reps: int, seed: int,
                 x0=None) -> BiasEstimate:
    """Mean of `reps` independent SGD trajectories minus the GD trajectory
    from the same start (default: the optimum), at step k."""
    return bias_sweep(p, eta, [k], reps, seed, x0)[k]


def bias_sweep(p: ProblemHandle, eta: float, ks, reps: int, seed: int,
               x0=None) -> dict:
    """measure_bias at several checkpoints sharing one set of trajectories."""
    if reps < 2:
        raise ValueError("reps must be >= 2")
    ks = sorted(int(k) for k in ks)
    if x0 is None:
        if p.optimum is None:
            raise ValueError("x0 defaults to the optimum, which is unknown")
        x0 = p.optimum[0]
    x0 = np.asarray(x0, dtype=np.float64)
    kmax = ks[-1]
    z = gd_run(p, eta, kmax, x0)

    if p.has_scalar_fast_path:
        sums, sqs = _scalar_mc(p, eta, ks, reps, seed, float(x0[0]))
        out = {}
        for k in ks:
            mean = sums[k] / reps
            var = (sqs[k] - reps * mean * mean) / (reps - 1)
            se = np.sqrt(max(var, 0.0) / reps)
            out[k] = BiasEstimate(np.array([mean - z[k][0]]),
                                  np.array([se]), reps, k, eta)
        return out

    # generic path: one stream per repetition, fixed-order reduction
    acc = {k: np.zeros(p.dim) for k in ks}
    sq = {k: np.zeros(p.dim) for k in ks}
    for j in range(reps):
        traj = sgd_run(p, eta, kmax, x0, RngStream(seed, j))
        for k in ks:
            acc[k] += traj[k]
            sq[k] += traj[k] ** 2
    out = {}
    for k in ks:
        mean = acc[k] / reps
        var = (sq[k] - reps * mean ** 2) / (reps - 1)
        se = np.sqrt(np.maximum(var, 0.0) / reps)
        out[k] = BiasEstimate(mean - z[k], se, reps, k, eta)
    return out


def _scalar_mc(p: ProblemHandle, eta, ks, reps, seed, x0):
    """Vectorized 1-D Monte Carlo in fixed-order chunks, one RNG stream per
    chunk, checkpoint sums accumulated in chunk order."""
    sums = {k: 0.0 for k in ks}
    sqs = {k: 0.0 for k in ks}
    kmax = ks[-1]
    kset = set(ks)
    done = 0
    chunk_idx = 0
    while done < reps:
        n = min(_CHUNK, reps - done)
        stream = RngStream(seed, chunk_idx)
        noise = p.draw_noise(stream, n * kmax).reshape(kmax, n)
        x = np.full(n, x0)
        for t in range(kmax):
            x = x - eta * (p.drift_batch(x) + noise[t])
            if t + 1 in kset:
                sums[t + 1] += float(x.sum())
                sqs[t + 1] += float((x * x).sum())
        done += n
        chunk_idx += 1
    return sums, sqs


def predict_bias_sde(p: ProblemHandle, eta: float, k: int, x0) -> float:
    """Small-eta SDE prediction of the iterate bias from x0:
    -(1/4) eta^3 k^2 Var F'''(x0), with Var the exact per-draw
    gradient-noise variance.

    (The quarter constant is the Kolmogorov-backward-equation result with
    the standard 1/2 diffusion factor; it matches the third-order bias
    upper bound and Monte Carlo.)
    """
    if p.noise_var is None:
        raise ValueError("instance does not expose its exact noise variance")
    f3 = p.third_derivative(np.asarray(x0, dtype=np.float64))
    return -0.25 * eta ** 3 * k ** 2 * p.noise_var * f3


def fit_bias_exponent(points) -> float:
    """Least-squares slope of log |bias| against log k."""
    points = list(points)
    if len(points) < 4:
        raise ValueError("need at least 4 points")
    ks = np.array([float(k) for k, _ in points])
    bs = np.array([float(abs(b)) for _, b in points])
    if np.any(bs == 0.0):
        raise ValueError("zero bias among points")
    a = np.vstack([np.log(ks), np.ones(len(points))]).T
    slope, _ = np.linalg.lstsq(a, np.log(bs), rcond=None)[0]
    return float(slope)


# ---------------------------------------------------------------------------
# AGD instability


def instability_step_matrices(kappa: float) -> tuple:
    """(M_mu, M_L): 2x2 difference propagation for one AGD step when the
    local curvature is mu (t mod 3 != 1) or L (t mod 3 == 1)."""
    rk = np.sqrt(kappa)
    m_mu = np.array([[1.0 - 1.0 / rk, (rk - 1.0) / kappa],
                     [0.0, 1.0 - 1.0 / rk]])
    m_l = np.array([[0.0, 0.0],
                    [1.0 - rk, 0.0]])
    return m_mu, m_l


def agd_divergence(kappa: float, blocks: int, epsilon: float,
                   enforce_guarantee: bool = True) -> DivergenceTrace:
    """Evolve the initial difference (eps, eps) through 3*blocks AGD steps
    under the alternating curvature schedule and report growth."""
    if kappa <= 1:
        raise ValueError("kappa must exceed 1")
    if blocks < 1:
        raise ValueError("need at least one block")
    warned = kappa < 25.0
    if warned and enforce_guarantee:
        raise ValueError("the 1.02^K guarantee needs kappa >= 25 "
                         "(pass enforce_guarantee=False to run anyway)")
    rk = np.sqrt(kappa)
    m_mu, m_l = instability_step_matrices(kappa)
    block_factor = -2.0 * (1.0 - 1.0 / rk) ** 3
    block_matrix = np.array([[0.5, 0.5 / rk], [0.5 * rk, 0.5]])
    v = np.array([epsilon, epsilon])
    pairs = [(float(v[0]), float(v[1]))]
    ratios = []
    for t in range(3 * blocks):
        v = (m_l if t % 3 == 1 else m_mu) @ v
        pairs.append((float(v[0]), float(v[1])))
        if t % 3 == 2 and t >= 5:
            prev = pairs[t - 2][0]
            if prev != 0.0:
                ratios.append(pairs[t + 1][0] / prev)
    return DivergenceTrace(kappa=float(kappa), epsilon=float(epsilon),
                           blocks=int(blocks), pairs=pairs,
                           growth_ratios=ratios, block_factor=block_factor,
                           block_matrix=block_matrix, warned=warned)


# ---------------------------------------------------------------------------
# heterogeneous lower-bound trajectory


def hetero_ab(eta: float, l: float, k: int) -> tuple:
    """Closed forms of the per-round affine recursion x+ = a x + b zeta*:
    a = ((1 - eta L/4)^K + (1 - eta L/8)^K) / 2,
    b = (2/L)(1 - (1 - eta L/4)^K) - (4/L)(1 - (1 - eta L/8)^K)."""
    p4 = (1.0 - 0.25 * eta * l) ** k
    p8 = (1.0 - 0.125 * eta * l) ** k
    a = 0.5 * (p4 + p8)
    b = (2.0 / l) * (1.0 - p4) - (4.0 / l) * (1.0 - p8)
    return a, b


def hetero_lb_trajectory(eta: float, l: float, k: int, r: int,
                         zeta_star: float, x0: float = 0.0) -> tuple:
    """Run deterministic FedAvg on the heterogeneous quadratic pair and
    compare with the telescoped closed form a^R x0 + (1-a^R)/(1-a) b zeta*.

    Returns (simulated, closed_form, a, b).
    """
    if eta > 2.0 / l:
        raise ValueError("need eta <= 2/L")
    problem = HeteroPairProblem(l, zeta_star)
    cfg = FedConfig(clients=2, local_steps=k, rounds=r, eta_client=eta, seed=0)
    rec = fedavg_run(problem, cfg, np.array([x0]))
    simulated = float(rec.final["x"][0])
    a, b = hetero_ab(eta, l, k)
    closed = a ** r * x0 + (1.0 - a ** r) / (1.0 - a) * b * zeta_star
    return simulated, closed, a, b


def verify_b_bound(eta: float, l: float, k: int) -> bool:
    """Check b <= -(0.001/L) min(1, (eta L K)^2)."""
    if eta > 2.0 / l:
        raise ValueError("need eta <= 2/L")
    if k < 2:
        raise ValueError("need K >= 2")
    _, b = hetero_ab(eta, l, k)
    return b <= -(0.001 / l) * min(1.0, (eta * l * k) ** 2)


# ---------------------------------------------------------------------------
# curse of primal averaging


def curse_demo(cp_lasso: CompositeProblem, cfg: FedConfig,
               rounds: Optional[int] = None) -> dict:
    """Run FedMiD and FedDualAvg on a lasso instance with identical budgets
    and report sparsity-recovery metric series for both."""
    from .metrics import sparsity_evaluators
    if "x_real" not in cp_lasso.meta:
        raise ValueError("lasso instance must carry its ground truth")
    if rounds is not None:
        cfg = FedConfig(**{**cfg.to_dict(), "rounds": rounds,
                           "record_snapshots": cfg.record_snapshots})
    evals = sparsity_evaluators(cp_lasso)
    x0 = np.zeros(cp_lasso.smooth.dim)
    rec_mid = fedmid_run(cp_lasso, cfg, x0, evaluators=evals)
    rec_da = feddualavg_run(cp_lasso, cfg, x0, evaluators=evals)
    assert rec_mid.metadata["grad_calls_total"] == \
        rec_da.metadata["grad_calls_total"]
    return {
        "fedmid": rec_mid,
        "feddualavg": rec_da,
        "final": {
            "fedmid": {name: rec_mid.series[name][-1][1] for name in evals},
            "feddualavg": {name: rec_da.series[name][-1][1] for name in evals},
        },
    }
