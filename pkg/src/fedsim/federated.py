"""Round-based federated simulation engine: FedAvg, FedAc (I/II/vanilla),
FedMiD, FedDualAvg, their only-server-proximal ablations, and the minibatch
baselines, with shadow-sequence and potential instrumentation.

Determinism contract: every client owns the stream (seed, client_id),
consumed sequentially across the rounds it participates in; client
contributions are reduced in ascending client-id order; the server update
with eta_server = 1 is the plain average of participating client states, so
the classic algorithm listings (and the reduction lattice: M=1 == SGD,
K=1 == minibatch, psi == 0 == FedAvg) hold bit-exactly.
"""

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .composite import ZERO_REG, conjugate_map
from .numerics import RngStream, shuffled
from .problems import CompositeProblem, ProblemHandle
from .sequential import AcState, acsgd_step, coupling_point

_SAMPLING_STREAM = 1 << 63


@dataclass
class FedConfig:
    """Budget axes and engine options shared by all federated algorithms."""

    clients: int
    local_steps: int
    rounds: int
    eta_client: float
    eta_server: float = 1.0
    sample_size: Optional[int] = None          # S; None means all M
    seed: int = 0
    averaging_mode: str = "final"              # final | uniform | rho_weighted | xhat
    eval_every: int = 1
    rho_mu: Optional[float] = None             # mu for rho_weighted weights
    record_snapshots: bool = False             # per-step client state snapshots

    def __post_init__(self):
        if min(self.clients, self.local_steps, self.rounds) < 1:
            raise ValueError("clients, local_steps, rounds must be >= 1")
        if self.eta_client <= 0 or self.eta_server <= 0:
            raise ValueError("learning rates must be positive")
        s = self.sample_size
        if s is not None and not (1 <= s <= self.clients):
            raise ValueError("sample_size must lie in [1, clients]")
        if self.averaging_mode not in ("final", "uniform", "rho_weighted", "xhat"):
            raise ValueError("unknown averaging_mode %r" % self.averaging_mode)
        if self.averaging_mode == "rho_weighted" and self.rho_mu is None:
            raise ValueError("rho_weighted averaging requires rho_mu")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")

    @property
    def s_or_m(self) -> int:
        return self.clients if self.sample_size is None else self.sample_size

    def to_dict(self) -> dict:
        return {
            "clients": self.clients, "local_steps": self.local_steps,
            "rounds": self.rounds, "eta_client": self.eta_client,
            "eta_server": self.eta_server, "sample_size": self.sample_size,
            "seed": self.seed, "averaging_mode": self.averaging_mode,
            "eval_every": self.eval_every, "rho_mu": self.rho_mu,
        }


@dataclass
class FedAcParams:
    """FedAc hyperparameter map; gamma/alpha/beta derive from (variant, mu,
    eta, K) unless explicitly overridden."""

    variant: str            # I | II | vanilla
    mu: float
    eta: float
    gamma: Optional[float] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None

    def derive(self, local_steps: int) -> tuple:
        if self.variant not in ("I", "II", "vanilla"):
            raise ValueError("unknown FedAc variant %r" % self.variant)
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        gamma = self.gamma
        if gamma is None:
            if self.variant == "vanilla":
                gamma = np.sqrt(self.eta / self.mu)
            else:
                gamma = max(np.sqrt(self.eta / (self.mu * local_steps)),
                            self.eta)
        alpha = self.alpha
        beta = self.beta
        if alpha is None:
            if self.variant == "II":
                alpha = 1.5 / (gamma * self.mu) - 0.5
            else:
                alpha = 1.0 / (gamma * self.mu)
        if beta is None:
            if self.variant == "II":
                if alpha <= 1.0:
                    raise ValueError(
                        "variant II needs alpha > 1 (gamma*mu too large)")
                beta = (2.0 * alpha ** 2 - 1.0) / (alpha - 1.0)
            else:
                beta = alpha + 1.0
        if alpha < 1.0 or beta < 1.0:
            raise ValueError(
                "derived alpha=%g, beta=%g invalid (need >= 1); "
                "gamma*mu > 1 for this eta/K" % (alpha, beta))
        return float(alpha), float(beta), float(gamma), float(self.eta)


@dataclass
class RunRecord:
    """Metric series keyed by (round, name) plus final iterates; fully
    determined by (config, problem, seed)."""

    algorithm: str
    config: dict
    series: dict = field(default_factory=dict)
    final: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    snapshots: Optional[dict] = None
    wall_time: float = 0.0       # informational; excluded from artifacts

    def add(self, name: str, rnd: int, value: float):
        self.series.setdefault(name, []).append((int(rnd), float(value)))

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "run_record",
            "algorithm": self.algorithm,
            "config": self.config,
            "metadata": _jsonable(self.metadata),
            "series": {k: [[r, v] for r, v in rows]
                       for k, rows in sorted(self.series.items())},
            "final": {k: _jsonable(v) for k, v in sorted(self.final.items())},
        }


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [float(x) for x in v.reshape(-1)]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


# ---------------------------------------------------------------------------
# engine helpers


def client_streams(cfg: FedConfig) -> list:
    """One persistent stream per client for the whole run."""
    return [RngStream(cfg.seed, m) for m in range(cfg.clients)]


def _check_clients(p: ProblemHandle, cfg: FedConfig):
    """Heterogeneous instances pin the client count; homogeneous ones
    (num_clients == 1) accept any M."""
    if p.num_clients > 1 and cfg.clients != p.num_clients:
        raise ValueError(
            "problem defines %d clients but config asks for %d"
            % (p.num_clients, cfg.clients))


def _participants(cfg: FedConfig, rnd: int) -> np.ndarray:
    """Participating client ids for one round, ascending."""
    if cfg.s_or_m == cfg.clients:
        return np.arange(cfg.clients)
    perm = shuffled(RngStream(cfg.seed, _SAMPLING_STREAM + rnd), cfg.clients)
    return np.sort(perm[:cfg.s_or_m])


def _server_combine(x_server, finals, eta_server):
    """Average-of-finals at eta_server = 1 (exact classic form), otherwise
    x + eta_server * mean(finals - x)."""
    stack = np.stack(finals, axis=0)
    if eta_server == 1.0:
        return stack.mean(axis=0)
    return x_server + eta_server * (stack - x_server).mean(axis=0)


class _Averager:
    """Running weighted average of the shadow sequence x_bar^{(r,k)}."""

    def __init__(self, cfg: FedConfig, dim: int):
        self.mode = cfg.averaging_mode
        self.acc = np.zeros(dim)
        self.weight = 0.0
        if self.mode == "rho_weighted":
            t_total = cfg.local_steps * cfg.rounds
            decay = 1.0 - 0.5 * cfg.eta_client * cfg.rho_mu
            # rho^{(r,k)} propto (1 - eta mu / 2)^{KR - (rK + k) - 1}
            self.step_weight = lambda t: decay ** (t_total - t - 1)
        else:
            self.step_weight = lambda t: 1.0

    def update(self, t: int, xbar: np.ndarray):
        if self.mode in ("uniform", "rho_weighted", "xhat"):
            w = self.step_weight(t)
            self.acc = self.acc + w * xbar
            self.weight += w

    def output(self, final_point: np.ndarray) -> np.ndarray:
        if self.mode == "final" or self.weight == 0.0:
            return final_point
        return self.acc / self.weight


def _evaluate(rec: RunRecord, cfg: FedConfig, rnd: int, point: np.ndarray,
              evaluators: dict, grad_calls: int):
    rec.add("grad_calls", rnd, float(grad_calls))
    for name, fn in (evaluators or {}).items():
        if np.all(np.isfinite(point)):
            rec.add(name, rnd, float(fn(point)))
        else:
            # diverged trajectory; keep the row so budgets still line up
            rec.add(name, rnd, float("nan"))


def _want_eval(cfg: FedConfig, rnd: int) -> bool:
    return rnd % cfg.eval_every == 0 or rnd == cfg.rounds


def _base_metadata(p: ProblemHandle, cfg: FedConfig) -> dict:
    md = {"dim": p.dim, "problem_clients": p.num_clients}
    if p.optimum is not None:
        md["f_star"] = p.optimum[1]
    return md


# ---------------------------------------------------------------------------
# FedAvg and minibatch baselines



def _quiet(fn):
    """Run bodies ignore FP overflow/invalid: learning-rate sweeps cross
    stability thresholds on purpose; diverged points surface as inf/nan
    metrics, not warnings."""
    import functools

    @functools.wraps(fn)
    def wrapped(*args, **kwargs):
        with np.errstate(over="ignore", invalid="ignore", under="ignore"):
            return fn(*args, **kwargs)
    return wrapped

@_quiet
def fedavg_run(p: ProblemHandle, cfg: FedConfig, x0=None,
               evaluators: Optional[dict] = None) -> RunRecord:
    """Local SGD with server averaging (server-learning-rate form)."""
    t0 = time.perf_counter()
    _check_clients(p, cfg)
    x = np.zeros(p.dim) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    streams = client_streams(cfg)
    rec = RunRecord("fedavg", cfg.to_dict(), metadata=_base_metadata(p, cfg))
    rec.metadata["eval_point"] = "averaging_mode output (%s)" % cfg.averaging_mode
    avg = _Averager(cfg, p.dim)
    snaps = {"xbar": []} if cfg.record_snapshots else None
    track_shadow = snaps is not None or avg.mode != "final"
    grad_calls = 0
    for r in range(cfg.rounds):
        part = _participants(cfg, r)
        states = [x.copy() for _ in part]
        for k in range(cfg.local_steps):
            if track_shadow:
                xbar_t = np.stack(states, axis=0).mean(axis=0)
                avg.update(r * cfg.local_steps + k, xbar_t)
                if snaps is not None:
                    snaps["xbar"].append(xbar_t)
            for i, m in enumerate(part):
                g = p.client_grad(int(m), states[i], streams[m])
                states[i] = states[i] - cfg.eta_client * g
            grad_calls += len(part)
        x = _server_combine(x, states, cfg.eta_server)
        if _want_eval(cfg, r + 1):
            _evaluate(rec, cfg, r + 1, avg.output(x), evaluators, grad_calls)
    rec.final["x"] = x
    rec.final["output"] = avg.output(x)
    rec.metadata["grad_calls_total"] = grad_calls
    rec.snapshots = snaps
    rec.wall_time = time.perf_counter() - t0
    return rec


@_quiet
def minibatch_sgd_run(p: ProblemHandle, cfg: FedConfig, x0=None,
                      evaluators: Optional[dict] = None) -> RunRecord:
    """R steps of SGD with batch size M*K (all draws at the round point);
    bit-identical to fedavg_run when K = 1."""
    t0 = time.perf_counter()
    _check_clients(p, cfg)
    x = np.zeros(p.dim) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    streams = client_streams(cfg)
    rec = RunRecord("minibatch_sgd", cfg.to_dict(), metadata=_base_metadata(p, cfg))
    rec.metadata["eval_point"] = "x"
    grad_calls = 0
    for r in range(cfg.rounds):
        part = _participants(cfg, r)
        finals = []
        for m in part:
            draws = [p.client_grad(int(m), x, streams[m])
                     for _ in range(cfg.local_steps)]
            gbar_m = np.stack(draws, axis=0).mean(axis=0)
            finals.append(x - cfg.eta_client * gbar_m)
            grad_calls += cfg.local_steps
        x = _server_combine(x, finals, cfg.eta_server)
        if _want_eval(cfg, r + 1):
            _evaluate(rec, cfg, r + 1, x, evaluators, grad_calls)
    rec.final["x"] = x
    rec.final["output"] = x
    rec.metadata["grad_calls_total"] = grad_calls
    rec.wall_time = time.perf_counter() - t0
    return rec


@_quiet
def minibatch_acsgd_run(p: ProblemHandle, cfg: FedConfig, mu: float, x0=None,
                        evaluators: Optional[dict] = None) -> RunRecord:
    """Accelerated minibatch baseline: one generalized accelerated step per
    round on the M*K-sample averaged gradient, hyperparameters from the
    strong-convexity estimate (variant-I map at K = 1)."""
    t0 = time.perf_counter()
    _check_clients(p, cfg)
    params = FedAcParams("I", mu=mu, eta=cfg.eta_client)
    alpha, beta, gamma, eta = params.derive(1)
    x = np.zeros(p.dim) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    state = AcState(x=x, x_ag=x.copy())
    streams = client_streams(cfg)
    rec = RunRecord("minibatch_acsgd", cfg.to_dict(), metadata=_base_metadata(p, cfg))
    rec.metadata["eval_point"] = "x_ag"
    rec.metadata["acsgd"] = {"alpha": alpha, "beta": beta, "gamma": gamma,
                             "eta": eta}
    grad_calls = 0
    for r in range(cfg.rounds):
        part = _participants(cfg, r)
        x_md = coupling_point(state, beta)
        client_means = []
        for m in part:
            draws = [p.client_grad(int(m), x_md, streams[m])
                     for _ in range(cfg.local_steps)]
            client_means.append(np.stack(draws, axis=0).mean(axis=0))
            grad_calls += cfg.local_steps
        gbar = np.stack(client_means, axis=0).mean(axis=0)
        state = acsgd_step(state, gbar, alpha, beta, gamma, eta)
        if _want_eval(cfg, r + 1):
            _evaluate(rec, cfg, r + 1, state.x_ag, evaluators, grad_calls)
    rec.final["x"] = state.x
    rec.final["x_ag"] = state.x_ag
    rec.final["output"] = state.x_ag
    rec.metadata["grad_calls_total"] = grad_calls
    rec.wall_time = time.perf_counter() - t0
    return rec


# ---------------------------------------------------------------------------
# FedAc


@_quiet
def fedac_run(p: ProblemHandle, cfg: FedConfig, params: FedAcParams, x0=None,
              evaluators: Optional[dict] = None) -> RunRecord:
    """Federated accelerated SGD: clients run K generalized accelerated
    steps; the server averages both the main and the aggregate sequences."""
    t0 = time.perf_counter()
    _check_clients(p, cfg)
    alpha, beta, gamma, eta = params.derive(cfg.local_steps)
    x = np.zeros(p.dim) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    x_ag = x.copy()
    streams = client_streams(cfg)
    rec = RunRecord("fedac", cfg.to_dict(), metadata=_base_metadata(p, cfg))
    rec.metadata["eval_point"] = "x_ag"
    rec.metadata["acsgd"] = {"variant": params.variant, "alpha": alpha,
                             "beta": beta, "gamma": gamma, "eta": eta}
    snaps = ({"x_clients": [], "x_ag_clients": []}
             if cfg.record_snapshots else None)
    grad_calls = 0
    for r in range(cfg.rounds):
        part = _participants(cfg, r)
        states = [AcState(x=x.copy(), x_ag=x_ag.copy()) for _ in part]
        for k in range(cfg.local_steps):
            if snaps is not None:
                snaps["x_clients"].append(
                    np.stack([s.x for s in states], axis=0))
                snaps["x_ag_clients"].append(
                    np.stack([s.x_ag for s in states], axis=0))
            for i, m in enumerate(part):
                x_md = coupling_point(states[i], beta)
                g = p.client_grad(int(m), x_md, streams[m])
                states[i] = acsgd_step(states[i], g, alpha, beta, gamma, eta)
            grad_calls += len(part)
        x = _server_combine(x, [s.x for s in states], cfg.eta_server)
        x_ag = _server_combine(x_ag, [s.x_ag for s in states], cfg.eta_server)
        if _want_eval(cfg, r + 1):
            _evaluate(rec, cfg, r + 1, x_ag, evaluators, grad_calls)
    rec.final["x"] = x
    rec.final["x_ag"] = x_ag
    rec.final["output"] = x_ag
    rec.metadata["grad_calls_total"] = grad_calls
    rec.snapshots = snaps
    rec.wall_time = time.perf_counter() - t0
    return rec


# ---------------------------------------------------------------------------
# composite algorithms


def _eta_tilde(cfg: FedConfig, r: int, k: int) -> float:
    """Cumulative psi coefficient of FedDualAvg at local step (r, k)."""
    return (cfg.eta_server * cfg.eta_client * r * cfg.local_steps
            + cfg.eta_client * k)


@_quiet
def fedmid_run(cp: CompositeProblem, cfg: FedConfig, x0=None,
               evaluators: Optional[dict] = None,
               client_prox: bool = True) -> RunRecord:
    """Federated mirror descent: proximal client steps, proximal server step.
    client_prox=False gives the only-server-proximal ablation."""
    t0 = time.perf_counter()
    p = cp.smooth
    _check_clients(p, cfg)
    x = np.zeros(p.dim) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    if not cp.reg.feasible(x):
        raise ValueError("x0 must lie in dom psi")
    client_reg = cp.reg if client_prox else ZERO_REG
    streams = client_streams(cfg)
    name = "fedmid" if client_prox else "fedmid_osp"
    rec = RunRecord(name, cfg.to_dict(), metadata=_base_metadata(p, cfg))
    rec.metadata["eval_point"] = "averaging_mode output (%s)" % cfg.averaging_mode
    avg = _Averager(cfg, p.dim)
    snaps = {"xbar": []} if cfg.record_snapshots else None
    track_shadow = snaps is not None or avg.mode != "final"
    grad_calls = 0
    for r in range(cfg.rounds):
        part = _participants(cfg, r)
        states = [x.copy() for _ in part]
        for k in range(cfg.local_steps):
            if track_shadow:
                xbar_t = np.stack(states, axis=0).mean(axis=0)
                avg.update(r * cfg.local_steps + k, xbar_t)
                if snaps is not None:
                    snaps["xbar"].append(xbar_t)
            for i, m in enumerate(part):
                g = p.client_grad(int(m), states[i], streams[m])
                states[i] = conjugate_map(
                    cp.geo, client_reg, cfg.eta_client,
                    cp.geo.h_grad(states[i]) - cfg.eta_client * g)
            grad_calls += len(part)
        if snaps is not None:
            snaps.setdefault("x_clients_end", []).append(
                np.stack(states, axis=0))
        eta_srv = cfg.eta_server * cfg.eta_client * cfg.local_steps
        if cfg.eta_server == 1.0:
            dual_point = np.stack(states, axis=0).mean(axis=0)
        else:
            delta = (np.stack(states, axis=0) - x).mean(axis=0)
            dual_point = cp.geo.h_grad(x) + cfg.eta_server * delta
        x = conjugate_map(cp.geo, cp.reg, eta_srv, dual_point)
        if _want_eval(cfg, r + 1):
            _evaluate(rec, cfg, r + 1, avg.output(x), evaluators, grad_calls)
    rec.final["x"] = x
    rec.final["output"] = avg.output(x)
    rec.metadata["grad_calls_total"] = grad_calls
    rec.snapshots = snaps
    rec.wall_time = time.perf_counter() - t0
    return rec


def fedmid_osp_run(cp: CompositeProblem, cfg: FedConfig, x0=None,
                   evaluators: Optional[dict] = None) -> RunRecord:
    """FedMiD with the client proximal operation skipped."""
    return fedmid_run(cp, cfg, x0, evaluators, client_prox=False)


@_quiet
def feddualavg_run(cp: CompositeProblem, cfg: FedConfig, x0=None,
                   evaluators: Optional[dict] = None,
                   client_prox: bool = True) -> RunRecord:
    """Federated dual averaging: clients accumulate gradients in dual space
    with the cumulative prox coefficient eta~; the server averages duals.
    client_prox=False gives the only-server-proximal ablation."""
    t0 = time.perf_counter()
    p = cp.smooth
    _check_clients(p, cfg)
    x0 = np.zeros(p.dim) if x0 is None else np.asarray(x0, dtype=np.float64)
    if not cp.reg.feasible(x0):
        raise ValueError("x0 must lie in dom psi")
    y = cp.geo.h_grad(x0).copy()
    streams = client_streams(cfg)
    name = "feddualavg" if client_prox else "feddualavg_osp"
    rec = RunRecord(name, cfg.to_dict(), metadata=_base_metadata(p, cfg))
    rec.metadata["eval_point"] = \
        "averaging_mode output (%s, server primal retrieve)" \
        % cfg.averaging_mode
    avg = _Averager(cfg, p.dim)
    snaps = ({"y_clients": [], "grads": [], "eta_tilde": []}
             if cfg.record_snapshots else None)
    grad_calls = 0
    x_server = x0.copy()
    for r in range(cfg.rounds):
        part = _participants(cfg, r)
        duals = [y.copy() for _ in part]
        for k in range(cfg.local_steps):
            et = _eta_tilde(cfg, r, k)
            if snaps is not None:
                # client duals BEFORE this step's update
                snaps["y_clients"].append(np.stack(duals, axis=0))
                snaps["eta_tilde"].append(et)
            grads_k = [] if snaps is not None else None
            for i, m in enumerate(part):
                if client_prox:
                    x_mk = conjugate_map(cp.geo, cp.reg, et, duals[i])
                else:
                    x_mk = conjugate_map(cp.geo, ZERO_REG, et, duals[i])
                g = p.client_grad(int(m), x_mk, streams[m])
                if grads_k is not None:
                    grads_k.append(g)
                duals[i] = duals[i] - cfg.eta_client * g
            grad_calls += len(part)
            if snaps is not None:
                snaps["grads"].append(np.stack(grads_k, axis=0))
            # shadow primal for the x_hat average: k+1 uses eta~(r, k+1)
            if cfg.averaging_mode == "xhat":
                ybar = np.stack(duals, axis=0).mean(axis=0)
                xhat = conjugate_map(cp.geo, cp.reg,
                                     _eta_tilde(cfg, r, k + 1), ybar)
                avg.update(r * cfg.local_steps + k, xhat)
        if snaps is not None:
            # duals at the round end (the k = K snapshot)
            snaps.setdefault("y_clients_end", []).append(
                np.stack(duals, axis=0))
        y = _server_combine(y, duals, cfg.eta_server)
        if _want_eval(cfg, r + 1):
            eta_srv = cfg.eta_server * cfg.eta_client * (r + 1) * cfg.local_steps
            x_server = conjugate_map(cp.geo, cp.reg, eta_srv, y)
            _evaluate(rec, cfg, r + 1, avg.output(x_server), evaluators,
                      grad_calls)
    eta_srv = cfg.eta_server * cfg.eta_client * cfg.rounds * cfg.local_steps
    x_server = conjugate_map(cp.geo, cp.reg, eta_srv, y)
    rec.final["x"] = x_server
    rec.final["y"] = y
    rec.final["output"] = avg.output(x_server)
    rec.metadata["grad_calls_total"] = grad_calls
    rec.snapshots = snaps
    rec.wall_time = time.perf_counter() - t0
    return rec


def feddualavg_osp_run(cp: CompositeProblem, cfg: FedConfig, x0=None,
                       evaluators: Optional[dict] = None) -> RunRecord:
    """FedDualAvg with the client proximal operation skipped."""
    return feddualavg_run(cp, cfg, x0, evaluators, client_prox=False)


# ---------------------------------------------------------------------------
# instrumentation


def shadow_series(rec: RunRecord, cp: Optional[CompositeProblem] = None) -> list:
    """Per-step shadow sequence from a snapshot-enabled run.

    FedDualAvg (eta_server = 1): [(ybar, xhat)] per local step, where ybar
    is the client-dual average before the step and xhat its primal image
    under the step's eta~.  Primal algorithms: the client averages xbar.
    """
    if rec.snapshots is None:
        raise ValueError("run was not recorded with snapshots enabled")
    if rec.algorithm.startswith("feddualavg"):
        if cp is None:
            raise ValueError("composite problem required for dual shadow")
        snaps = rec.snapshots
        out = []
        for y_cl, et in zip(snaps["y_clients"], snaps["eta_tilde"]):
            ybar = y_cl.mean(axis=0)
            out.append((ybar, conjugate_map(cp.geo, cp.reg, et, ybar)))
        return out
    if "xbar" not in rec.snapshots:
        raise ValueError("no shadow snapshots in record")
    return list(rec.snapshots["xbar"])


def potentials(rec: RunRecord, p: ProblemHandle, mu: float) -> list:
    """Per recorded step: (Psi, Phi) with
    Psi = mean_m F(x_ag,m) - F* + (mu/2) ||xbar - x*||^2 and
    Phi = F(xbar_ag) - F* + (mu/6) ||xbar - x*||^2."""
    if p.optimum is None:
        raise ValueError("potentials require a known optimum")
    if rec.snapshots is None or "x_ag_clients" not in rec.snapshots:
        raise ValueError("run was not recorded with accelerated snapshots")
    x_star, f_star = p.optimum
    out = []
    for x_cl, ag_cl in zip(rec.snapshots["x_clients"],
                           rec.snapshots["x_ag_clients"]):
        xbar = x_cl.mean(axis=0)
        ag_bar = ag_cl.mean(axis=0)
        dist2 = float(np.sum((xbar - x_star) ** 2))
        psi = float(np.mean([p.value(v) for v in ag_cl])) - f_star \
            + 0.5 * mu * dist2
        phi = p.value(ag_bar) - f_star + mu / 6.0 * dist2
        out.append((psi, phi))
    return out
