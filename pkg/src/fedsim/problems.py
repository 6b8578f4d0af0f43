"""Stochastic objectives: the generic per-client oracle interface plus all
synthetic instances (quadratics, piecewise-quadratic bias instances, the
4-D lower-bound construction, the log-cosh third-order instance, logistic
regression, and the lasso / low-rank recovery generators).

Conventions
-----------
* ``sigma`` is the gradient-noise bound: E ||grad f - grad F_m||_2^2 <= sigma^2
  per draw.  ``noise_var`` is the exact per-draw variance when the noise is
  additive and state-independent (used by the SDE bias predictor).
* ``client_grad(m, x, rng)`` makes exactly one draw call on ``rng`` per
  invocation (or none when the instance is deterministic), so round-offset
  streams line up between sequential and federated runs.
"""

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .composite import EUCLIDEAN, Geometry, Regularizer, conjugate_map, l1_reg, nuclear_reg
from .numerics import (RngStream, gaussian, uniform_sym,
                       uniform_sym_vec, uniforms)

# stream ids reserved for dataset generation (client streams use low ids)
_DATA_STREAM = 1 << 62


class ProblemHandle:
    """Base stochastic objective with per-client gradient oracles."""

    dim: int = 1
    num_clients: int = 1
    smooth_l: float = 0.0        # smoothness bound L
    strong_mu: float = 0.0       # strong convexity mu >= 0
    sigma: float = 0.0           # per-draw gradient noise bound
    q_third: Optional[float] = None
    zeta: Optional[float] = None
    noise_var: Optional[float] = None
    optimum: Optional[tuple] = None   # (x_star, f_star) when known

    def value(self, x) -> float:
        raise NotImplementedError

    def full_grad(self, x) -> np.ndarray:
        """(1/M) sum_m grad F_m(x)."""
        raise NotImplementedError

    def client_full_grad(self, m: int, x) -> np.ndarray:
        """grad F_m(x); homogeneous instances share full_grad."""
        return self.full_grad(x)

    def client_grad(self, m: int, x, rng: RngStream) -> np.ndarray:
        """One stochastic gradient draw for client m."""
        raise NotImplementedError

    def third_derivative(self, x) -> float:
        raise NotImplementedError("instance does not expose F'''")

    # 1-D Monte Carlo fast path (additive gradient noise) -----------------
    def drift_batch(self, x: np.ndarray) -> np.ndarray:
        """Elementwise F'(x) for a batch of scalar states."""
        raise NotImplementedError

    def draw_noise(self, rng: RngStream, n: int) -> np.ndarray:
        """n additive gradient-noise draws (zero when deterministic)."""
        raise NotImplementedError

    @property
    def has_scalar_fast_path(self) -> bool:
        return self.dim == 1 and type(self).drift_batch is not ProblemHandle.drift_batch


@dataclass
class CompositeProblem:
    """Phi(x) = F(x) + psi(x): a smooth handle plus regularizer/geometry."""

    smooth: ProblemHandle
    reg: Regularizer
    geo: Geometry = EUCLIDEAN
    meta: dict = field(default_factory=dict)
    _optimum: Optional[tuple] = None

    def phi(self, x) -> float:
        return self.smooth.value(x) + self.reg.psi_value(x)

    def optimum(self, max_iter: int = 10 ** 6, tol: float = 1e-12) -> tuple:
        """(x_star, phi_star) via a deterministic proximal-gradient oracle.

        Iterates x <- prox_{eta psi}(x - eta grad F(x)) with eta = 1/L until
        the gradient-mapping norm falls below tol; cached per instance.
        """
        if self._optimum is None:
            self._optimum = composite_prox_gd(self, max_iter=max_iter, tol=tol)
        return self._optimum


def composite_prox_gd(cp: CompositeProblem, x0=None, max_iter: int = 10 ** 6,
                      tol: float = 1e-12) -> tuple:
    """Deterministic proximal-gradient solve of a composite problem."""
    p = cp.smooth
    eta = 1.0 / p.smooth_l
    x = np.zeros(p.dim) if x0 is None else np.asarray(x0, dtype=np.float64)
    for _ in range(max_iter):
        x_new = conjugate_map(cp.geo, cp.reg, eta, x - eta * p.full_grad(x))
        gap = float(np.linalg.norm(x_new - x)) / eta
        x = x_new
        if gap < tol:
            break
    return x, cp.phi(x)


# ---------------------------------------------------------------------------
# quadratics


class QuadraticProblem(ProblemHandle):
    """F_m(x) = 0.5 x^T A x + (c + shift_m)^T x, mean(shift_m) = 0.

    Gradient noise is additive Gaussian with total variance sigma^2
    (N(0, sigma^2/d) per coordinate).
    """

    def __init__(self, a, c, per_client_shift=None, sigma=0.0):
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("A must be square")
        if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
            raise ValueError("A must be symmetric")
        c = np.asarray(c, dtype=np.float64)
        self.a = a
        self.c = c
        self.dim = a.shape[0]
        if per_client_shift is None:
            self.shifts = None
            self.num_clients = 1
        else:
            shifts = np.asarray(per_client_shift, dtype=np.float64)
            mean_shift = shifts.mean(axis=0)
            if not np.allclose(mean_shift, 0.0, atol=1e-12):
                raise ValueError("client shifts must average to zero")
            self.shifts = shifts
            self.num_clients = shifts.shape[0]
        self.sigma = float(sigma)
        self.noise_var = self.sigma ** 2 if sigma else 0.0
        eigs = np.linalg.eigvalsh(a)
        if eigs[0] < -1e-10 * max(1.0, eigs[-1]):
            raise ValueError("A must be positive semidefinite")
        self.smooth_l = float(max(eigs[-1], 0.0))
        self.strong_mu = float(max(eigs[0], 0.0))
        self.q_third = 0.0
        if self.shifts is not None:
            self.zeta = float(np.sqrt(np.mean(
                np.sum(self.shifts ** 2, axis=1))))
        if eigs[0] > 1e-12 * max(1.0, eigs[-1]):
            x_star = np.linalg.solve(a, -c)
            self.optimum = (x_star, self.value(x_star))

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        return 0.5 * float(x @ self.a @ x) + float(self.c @ x)

    def full_grad(self, x):
        return self.a @ x + self.c

    def client_full_grad(self, m, x):
        g = self.a @ x + self.c
        if self.shifts is not None:
            g = g + self.shifts[m]
        return g

    def client_grad(self, m, x, rng):
        g = self.client_full_grad(m, x)
        if self.sigma > 0.0:
            g = g + gaussian(rng, self.dim) * (self.sigma / np.sqrt(self.dim))
        return g

    def third_derivative(self, x):
        return 0.0

    def drift_batch(self, x):
        if self.dim != 1:
            raise NotImplementedError
        return self.a[0, 0] * x + self.c[0]

    def draw_noise(self, rng, n):
        if self.sigma == 0.0:
            return np.zeros(n)
        return gaussian(rng, n) * self.sigma


def make_quadratic(a, c, per_client_shift=None, sigma=0.0) -> QuadraticProblem:
    return QuadraticProblem(a, c, per_client_shift, sigma)


# ---------------------------------------------------------------------------
# 1-D piecewise-quadratic bias instances


class _Scalar1d(ProblemHandle):
    """Shared plumbing for 1-D instances with additive gradient noise."""

    dim = 1
    num_clients = 1

    def value(self, x):
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        return float(self._value(x)[0])

    def full_grad(self, x):
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        return self.drift_batch(x)

    def client_grad(self, m, x, rng):
        return self.full_grad(x) + self.draw_noise(rng, 1)


class PiecewiseQuadraticProblem(_Scalar1d):
    """F(x) = (L/24) psi(x) with psi(x) = x^2 (x >= 0), x^2/2 (x < 0);
    stochastic gradient adds xi ~ N(0, sigma^2)."""

    def __init__(self, l, sigma):
        if l <= 0 or sigma <= 0:
            raise ValueError("l and sigma must be positive")
        self.l_param = float(l)
        self.sigma = float(sigma)
        self.noise_var = self.sigma ** 2
        self.smooth_l = self.l_param / 12.0   # max F'' over both branches
        self.strong_mu = self.l_param / 24.0
        self.optimum = (np.zeros(1), 0.0)

    def _value(self, x):
        psi = np.where(x >= 0, x * x, 0.5 * x * x)
        return (self.l_param / 24.0) * psi

    def drift_batch(self, x):
        return (self.l_param / 24.0) * np.where(x >= 0, 2.0 * x, x)

    def draw_noise(self, rng, n):
        return gaussian(rng, n) * self.sigma


def make_piecewise_quadratic(l, sigma) -> PiecewiseQuadraticProblem:
    return PiecewiseQuadraticProblem(l, sigma)


class BiasDemoProblem(_Scalar1d):
    """The iterate-bias demonstration instance: F(x) = x^2 for x >= 0 and
    x^2/10 for x < 0, f(x; xi) = F(x) + xi x with xi ~ N(0, 0.01)."""

    def __init__(self):
        self.sigma = 0.1            # N(0, 0.01) read as variance 0.01
        self.noise_var = 0.01
        self.smooth_l = 2.0
        self.strong_mu = 0.2
        self.optimum = (np.zeros(1), 0.0)

    def _value(self, x):
        return np.where(x >= 0, x * x, 0.1 * x * x)

    def drift_batch(self, x):
        return np.where(x >= 0, 2.0 * x, 0.2 * x)

    def draw_noise(self, rng, n):
        return gaussian(rng, n) * self.sigma


def make_bias_demo() -> BiasDemoProblem:
    return BiasDemoProblem()


class LogCoshProblem(_Scalar1d):
    """Third-order-smooth instance
    F(x) = (3/8) L x^2 + (L^3 / 64 Q^2) phi(4Q x / L),
    phi(u) = integral_0^u log cosh, with gradient noise xi ~ U[-sigma, sigma]
    entering as + xi x (see ledger: the source prints "+ xi").

    F'' in [L/2, L]; F'''(0) = Q.
    """

    def __init__(self, l, q, sigma):
        if l <= 0 or q <= 0 or sigma <= 0:
            raise ValueError("l, q, sigma must be positive")
        self.l_param = float(l)
        self.q_param = float(q)
        self.sigma = float(sigma)
        self.noise_var = self.sigma ** 2 / 3.0   # Var U[-s, s]
        self.smooth_l = self.l_param
        self.strong_mu = self.l_param / 2.0
        self.q_third = self.q_param
        self.optimum = (np.zeros(1), 0.0)

    def _phi(self, u):
        # phi(u) = integral_0^u log cosh t dt (odd); for |u| >= 0.5
        # use log cosh t = t - log 2 + log1p(e^{-2t}) whose tail integrates
        # to a fast dilogarithm series, for |u| < 0.5 a Taylor series
        u = np.asarray(u, dtype=np.float64)
        au = np.abs(u)
        big = au >= 0.5
        val = np.empty_like(au)
        ub = au[big]
        val[big] = (0.5 * ub * ub - ub * np.log(2.0)
                    + _int_log1p_exp_neg2(ub))
        val[~big] = _phi_taylor(au[~big])
        return np.sign(u) * val

    def _value(self, x):
        scale = self.l_param ** 3 / (64.0 * self.q_param ** 2)
        return 0.375 * self.l_param * x * x \
            + scale * self._phi(4.0 * self.q_param / self.l_param * x)

    def drift_batch(self, x):
        u = 4.0 * self.q_param / self.l_param * x
        logcosh = np.abs(u) - np.log(2.0) + np.log1p(np.exp(-2.0 * np.abs(u)))
        return 0.75 * self.l_param * x \
            + self.l_param ** 2 / (16.0 * self.q_param) * logcosh

    def second_derivative(self, x):
        u = 4.0 * self.q_param / self.l_param * float(np.asarray(x).reshape(-1)[0])
        return 0.75 * self.l_param + 0.25 * self.l_param * np.tanh(u)

    def third_derivative(self, x):
        u = 4.0 * self.q_param / self.l_param * float(np.asarray(x).reshape(-1)[0])
        return self.q_param / np.cosh(u) ** 2

    def draw_noise(self, rng, n):
        if n == 1:
            return np.array([uniform_sym(rng, self.sigma)])
        return uniform_sym_vec(rng, self.sigma, n)


def _int_log1p_exp_neg2(u):
    """integral_0^u log1p(exp(-2t)) dt for u >= 0.5 (elementwise).

    Equals (pi^2/24) + (1/2) Li2(-e^{-2u}); z = e^{-2u} <= e^-1 here, so
    48 dilogarithm terms put the truncation error below 1e-22.
    """
    z = np.exp(-2.0 * np.asarray(u, dtype=np.float64))
    acc = np.zeros_like(z)
    zk = np.array(z, copy=True)
    for k in range(1, 49):
        acc += ((-1) ** (k + 1)) * zk / (k * k)
        zk = zk * z
    return np.pi ** 2 / 24.0 - 0.5 * acc


_PHI_TAYLOR = None


def _phi_taylor(u):
    """Taylor series of integral_0^u log cosh on |u| < 0.5 (error < 1e-16).

    Coefficients of log cosh t = sum c_k t^{2k} are integrated termwise;
    they are generated once from the tanh series via polynomial division.
    """
    global _PHI_TAYLOR
    if _PHI_TAYLOR is None:
        # log cosh' = tanh; build tanh Taylor coefficients t^{2k+1} by
        # dividing sinh and cosh series, then integrate twice
        nterm = 16
        sinh_c = [1.0 / _factorial(2 * k + 1) for k in range(nterm + 1)]
        cosh_c = [1.0 / _factorial(2 * k) for k in range(nterm + 1)]
        tanh_c = []
        rem = sinh_c[:]
        for k in range(nterm):
            q = rem[k]
            tanh_c.append(q)
            for j in range(k, nterm + 1):
                rem[j] -= q * cosh_c[j - k]
        # tanh t = sum tanh_c[k] t^{2k+1}; phi'' = log cosh' ... integrate:
        # log cosh t = sum tanh_c[k] t^{2k+2} / (2k+2)
        # phi(u)     = sum tanh_c[k] u^{2k+3} / ((2k+2)(2k+3))
        _PHI_TAYLOR = [tanh_c[k] / ((2 * k + 2) * (2 * k + 3))
                       for k in range(nterm)]
    u = np.asarray(u, dtype=np.float64)
    u2 = u * u
    acc = np.zeros_like(u)
    for coef in reversed(_PHI_TAYLOR):
        acc = acc * u2 + coef
    return acc * u2 * u


def _factorial(n):
    out = 1
    for i in range(2, n + 1):
        out *= i
    return out


def make_logcosh_instance(l, q, sigma) -> LogCoshProblem:
    return LogCoshProblem(l, q, sigma)


# ---------------------------------------------------------------------------
# 4-D lower-bound construction


class Lb4dProblem(ProblemHandle):
    """Four decoupled coordinates: piecewise-quadratic-with-noise, a slightly
    convex quadratic, a sharp quadratic, and a heterogeneous quadratic whose
    curvature (L/8 vs L/16) and shift (+/- zeta*) depend on client parity.

    Clients with odd 0-based id take the (L/8, +zeta*) branch, whose
    gradient at the origin is -zeta*.
    """

    dim = 4

    def __init__(self, l, sigma, mu, zeta_star, m):
        if m < 2 or m % 2:
            raise ValueError("m must be even and >= 2")
        self.l_param = float(l)
        self.sigma = float(sigma)
        self.mu_param = float(mu)
        self.zeta_star = float(zeta_star)
        self.num_clients = int(m)
        self.noise_var = self.sigma ** 2
        self.smooth_l = float(l)
        self.strong_mu = min(self.l_param / 24.0, self.mu_param)
        self.zeta = float(zeta_star)
        self.optimum = (np.zeros(4), 0.0)

    def _f1_grad(self, x1):
        return (self.l_param / 24.0) * (2.0 * x1 if x1 >= 0 else x1)

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        psi = x[0] ** 2 if x[0] >= 0 else 0.5 * x[0] ** 2
        return float((self.l_param / 24.0) * psi
                     + 0.5 * self.mu_param * x[1] ** 2
                     + 0.5 * self.l_param * x[2] ** 2
                     + (3.0 / 32.0) * self.l_param * x[3] ** 2)

    def full_grad(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.array([
            self._f1_grad(x[0]),
            self.mu_param * x[1],
            self.l_param * x[2],
            (3.0 / 16.0) * self.l_param * x[3],
        ])

    def client_full_grad(self, m, x):
        x = np.asarray(x, dtype=np.float64)
        if m % 2 == 1:     # (xi2, xi3) = (1, +zeta*): f4 = L x^2 / 8 - x zeta*
            g4 = 0.25 * self.l_param * x[3] - self.zeta_star
        else:              # (xi2, xi3) = (2, -zeta*): f4 = L x^2 / 16 + x zeta*
            g4 = 0.125 * self.l_param * x[3] + self.zeta_star
        return np.array([
            self._f1_grad(x[0]),
            self.mu_param * x[1],
            self.l_param * x[2],
            g4,
        ])

    def client_grad(self, m, x, rng):
        g = self.client_full_grad(m, x)
        if self.sigma > 0.0:
            g[0] += float(gaussian(rng, 1)[0]) * self.sigma
        return g


def make_lb4d(l, sigma, mu, zeta_star, m) -> Lb4dProblem:
    return Lb4dProblem(l, sigma, mu, zeta_star, m)


class HeteroPairProblem(ProblemHandle):
    """The f4 component alone, as a deterministic 2-client 1-D problem
    (used by the heterogeneous lower-bound trajectory lab)."""

    dim = 1
    num_clients = 2

    def __init__(self, l, zeta_star):
        self.l_param = float(l)
        self.zeta_star = float(zeta_star)
        self.sigma = 0.0
        self.noise_var = 0.0
        self.smooth_l = self.l_param / 4.0
        self.strong_mu = self.l_param / 8.0
        self.zeta = float(zeta_star)
        self.optimum = (np.zeros(1), 0.0)

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        return float((3.0 / 32.0) * self.l_param * x[0] ** 2)

    def full_grad(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.array([(3.0 / 16.0) * self.l_param * x[0]])

    def client_full_grad(self, m, x):
        x = np.asarray(x, dtype=np.float64)
        if m % 2 == 1:
            return np.array([0.25 * self.l_param * x[0] - self.zeta_star])
        return np.array([0.125 * self.l_param * x[0] + self.zeta_star])

    def client_grad(self, m, x, rng):
        return self.client_full_grad(m, x)


# ---------------------------------------------------------------------------
# logistic regression


def _log1pexp(z):
    """log(1 + exp(z)), stable for large |z|."""
    out = np.empty_like(z)
    pos = z > 0
    out[pos] = z[pos] + np.log1p(np.exp(-z[pos]))
    out[~pos] = np.log1p(np.exp(z[~pos]))
    return out


def _sigmoid_neg(m):
    """sigma(-m) = 1 / (1 + exp(m)) without overflow (elementwise)."""
    m = np.asarray(m, dtype=np.float64)
    out = np.empty_like(m)
    pos = m > 0
    e = np.exp(-m[pos])
    out[pos] = e / (1.0 + e)
    out[~pos] = 1.0 / (1.0 + np.exp(m[~pos]))
    return out


class LogRegProblem(ProblemHandle):
    """l2-regularized logistic regression over client shards.

    F_m(x) = mean over client-m rows of log(1 + exp(-b <a, x>))
             + (lam/2) ||x||^2.
    client_grad samples one row uniformly from the client's shard.
    """

    def __init__(self, features, labels, lam, client_partition):
        a = np.asarray(features, dtype=np.float64)
        b = np.asarray(labels, dtype=np.float64)
        if set(np.unique(b)) - {-1.0, 1.0}:
            raise ValueError("labels must be +/- 1")
        self.features = a
        self.labels = b
        self.lam = float(lam)
        self.shards = [np.asarray(ix, dtype=np.intp) for ix in client_partition]
        if any(len(s) == 0 for s in self.shards):
            raise ValueError("empty client shard")
        covered = np.sort(np.concatenate(self.shards))
        if not np.array_equal(covered, np.arange(a.shape[0])):
            raise ValueError("partition must cover all rows exactly once")
        self.num_clients = len(self.shards)
        self.dim = a.shape[1]
        self.strong_mu = self.lam
        row_norm2 = float(np.max(np.sum(a * a, axis=1)))
        self.smooth_l = self.lam + row_norm2 / 4.0
        self.sigma = None
        self._solve_optimum()

    def _margins(self, rows, x):
        return self.labels[rows] * (self.features[rows] @ x)

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        per_client = [float(np.mean(_log1pexp(-self._margins(s, x))))
                      for s in self.shards]
        return float(np.mean(per_client)) + 0.5 * self.lam * float(x @ x)

    def client_full_grad(self, m, x):
        x = np.asarray(x, dtype=np.float64)
        s = self.shards[m]
        mz = self._margins(s, x)
        w = -self.labels[s] * _sigmoid_neg(mz)
        return self.features[s].T @ w / len(s) + self.lam * x

    def full_grad(self, x):
        grads = [self.client_full_grad(m, x) for m in range(self.num_clients)]
        return np.mean(grads, axis=0)

    def client_grad(self, m, x, rng):
        s = self.shards[m]
        gen = rng._generator()
        idx = int(gen.integers(0, len(s)))
        rng.counter += 1
        row = s[idx]
        a = self.features[row]
        b = self.labels[row]
        mz = b * float(a @ x)
        w = -b * float(_sigmoid_neg(np.array([mz]))[0])
        return a * w + self.lam * x

    def _solve_optimum(self):
        """Newton solve; the problem is lam-strongly convex."""
        if self.lam <= 0:
            return
        x = np.zeros(self.dim)
        a = self.features
        b = self.labels
        n = a.shape[0]
        # uniform-over-clients weights (shards may be unequal)
        wrow = np.concatenate([
            np.full(len(s), 1.0 / (self.num_clients * len(s)))
            for s in self.shards])
        rows = np.concatenate(self.shards)
        aw = a[rows]
        bw = b[rows]
        for _ in range(100):
            mz = bw * (aw @ x)
            p = _sigmoid_neg(mz)
            grad = aw.T @ (wrow * (-bw) * p) + self.lam * x
            if np.linalg.norm(grad) < 1e-13:
                break
            d = wrow * p * (1.0 - p)
            hess = (aw * d[:, None]).T @ aw + self.lam * np.eye(self.dim)
            x = x - np.linalg.solve(hess, grad)
        self.optimum = (x, self.value(x))


def make_logreg(features, labels, lam, client_partition) -> LogRegProblem:
    return LogRegProblem(features, labels, lam, client_partition)


def make_logreg_synthetic(d, n, m, lam, seed, margin_scale=3.0,
                          normalize=True) -> LogRegProblem:
    """Gaussian features (row-normalized unless normalize=False) with labels
    from a logistic model; rows are split into m equal contiguous shards."""
    if n % m:
        raise ValueError("n must be divisible by m")
    stream = RngStream(seed, _DATA_STREAM)
    a = gaussian(stream, n * d).reshape(n, d)
    if normalize:
        a /= np.linalg.norm(a, axis=1, keepdims=True)
    w_true = gaussian(stream, d)
    w_true *= margin_scale / np.linalg.norm(w_true)
    logits = a @ w_true
    p = 1.0 / (1.0 + np.exp(-logits))    # labels via logistic sampling
    b = np.where(uniforms(stream, n) < p, 1.0, -1.0)
    shard = n // m
    partition = [np.arange(i * shard, (i + 1) * shard) for i in range(m)]
    return LogRegProblem(a, b, lam, partition)


# ---------------------------------------------------------------------------
# least squares with intercept (lasso / low-rank recovery)


class LstsqProblem(ProblemHandle):
    """Per-client least squares with an unregularized intercept coordinate:
    F_m(w, w0) = mean over client rows of (a^T w + w0 - b)^2."""

    def __init__(self, client_features, client_targets):
        self.client_features = [np.asarray(f, dtype=np.float64)
                                for f in client_features]
        self.client_targets = [np.asarray(t, dtype=np.float64)
                               for t in client_targets]
        self.num_clients = len(client_features)
        d = self.client_features[0].shape[1]
        self.dim = d + 1
        # Hessian of F is 2 * mean_m (1/n_m) Atil_m^T Atil_m
        h = np.zeros((self.dim, self.dim))
        for f in self.client_features:
            atil = np.concatenate([f, np.ones((f.shape[0], 1))], axis=1)
            h += 2.0 * atil.T @ atil / f.shape[0]
        h /= self.num_clients
        self._hess = h
        eigs = np.linalg.eigvalsh(h)
        self.smooth_l = float(eigs[-1])
        self.strong_mu = float(max(eigs[0], 0.0))
        self.sigma = None

    def _residual(self, m, x):
        f = self.client_features[m]
        return f @ x[:-1] + x[-1] - self.client_targets[m]

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        vals = [float(np.mean(self._residual(m, x) ** 2))
                for m in range(self.num_clients)]
        return float(np.mean(vals))

    def client_full_grad(self, m, x):
        x = np.asarray(x, dtype=np.float64)
        f = self.client_features[m]
        r = self._residual(m, x)
        g = np.empty(self.dim)
        g[:-1] = 2.0 * f.T @ r / f.shape[0]
        g[-1] = 2.0 * float(np.mean(r))
        return g

    def full_grad(self, x):
        grads = [self.client_full_grad(m, x) for m in range(self.num_clients)]
        return np.mean(grads, axis=0)

    def client_grad(self, m, x, rng):
        f = self.client_features[m]
        gen = rng._generator()
        idx = int(gen.integers(0, f.shape[0]))
        rng.counter += 1
        a = f[idx]
        r = float(a @ x[:-1]) + x[-1] - float(self.client_targets[m][idx])
        g = np.empty(self.dim)
        g[:-1] = 2.0 * r * a
        g[-1] = 2.0 * r
        return g


def make_lasso_synthetic(d1, d0, m, n_per_client, lam, seed,
                         noiseless=False) -> CompositeProblem:
    """Sparse-recovery dataset: ground truth (1_{d1}, 0_{d0}), per-client
    feature mean mu_m ~ N(0, I), observations a = mu_m + delta and
    b = a^T x_real + x0_real + eps."""
    if min(d1, d0, m, n_per_client) < 1:
        raise ValueError("all counts must be positive")
    d = d1 + d0
    x_real = np.concatenate([np.ones(d1), np.zeros(d0)])
    stream = RngStream(seed, _DATA_STREAM)
    x0_real = float(gaussian(stream, 1)[0])
    feats, targs = [], []
    for _ in range(m):
        mu = gaussian(stream, d)
        delta = gaussian(stream, n_per_client * d).reshape(n_per_client, d)
        a = mu[None, :] + delta
        eps = np.zeros(n_per_client) if noiseless else gaussian(stream, n_per_client)
        b = a @ x_real + x0_real + eps
        feats.append(a)
        targs.append(b)
    smooth = LstsqProblem(feats, targs)
    meta = {"x_real": x_real, "x0_real": x0_real, "d": d, "d1": d1,
            "noiseless": bool(noiseless), "kind": "lasso"}
    return CompositeProblem(smooth, l1_reg(lam, apply_dim=d), EUCLIDEAN, meta)


def make_lowrank_synthetic(d, r, m, n_per_client, lam, seed,
                           noiseless=False) -> CompositeProblem:
    """Low-rank recovery dataset: ground truth diag(I_r, 0) in R^{d x d},
    observations <A, X> + x0_real + eps with A = mu_m + delta."""
    if r > d:
        raise ValueError("rank r must be <= d")
    x_real = np.zeros((d, d))
    x_real[:r, :r] = np.eye(r)
    flat_real = x_real.reshape(-1)
    stream = RngStream(seed, _DATA_STREAM)
    x0_real = float(gaussian(stream, 1)[0])
    feats, targs = [], []
    for _ in range(m):
        mu = gaussian(stream, d * d)
        delta = gaussian(stream, n_per_client * d * d).reshape(n_per_client, -1)
        a = mu[None, :] + delta
        eps = np.zeros(n_per_client) if noiseless else gaussian(stream, n_per_client)
        b = a @ flat_real + x0_real + eps
        feats.append(a)
        targs.append(b)
    smooth = LstsqProblem(feats, targs)
    meta = {"x_real": x_real, "x0_real": x0_real, "d": d, "rank": r,
            "noiseless": bool(noiseless), "kind": "lowrank"}
    return CompositeProblem(smooth, nuclear_reg(lam, d, d, apply_dim=d * d),
                            EUCLIDEAN, meta)


# ---------------------------------------------------------------------------
# l2 augmentation


class AugmentedProblem(ProblemHandle):
    """F~(x) = F(x) + (lam/2) ||x - x0||^2 around the inner handle."""

    def __init__(self, inner: ProblemHandle, lam: float, x0):
        if lam <= 0:
            raise ValueError("lam must be positive")
        self.inner = inner
        self.lam = float(lam)
        self.x0 = np.asarray(x0, dtype=np.float64)
        self.dim = inner.dim
        self.num_clients = inner.num_clients
        self.smooth_l = inner.smooth_l + lam
        self.strong_mu = inner.strong_mu + lam
        self.sigma = inner.sigma
        self.noise_var = inner.noise_var
        self.zeta = inner.zeta
        if isinstance(inner, QuadraticProblem):
            a_aug = inner.a + lam * np.eye(inner.dim)
            x_star = np.linalg.solve(a_aug, lam * self.x0 - inner.c)
            self.optimum = (x_star, self.value(x_star))

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        d = x - self.x0
        return self.inner.value(x) + 0.5 * self.lam * float(d @ d)

    def full_grad(self, x):
        return self.inner.full_grad(x) + self.lam * (np.asarray(x) - self.x0)

    def client_full_grad(self, m, x):
        return self.inner.client_full_grad(m, x) \
            + self.lam * (np.asarray(x) - self.x0)

    def client_grad(self, m, x, rng):
        return self.inner.client_grad(m, x, rng) \
            + self.lam * (np.asarray(x) - self.x0)


def augment_l2(p: ProblemHandle, lam: float, x0) -> AugmentedProblem:
    return AugmentedProblem(p, lam, x0)


# ---------------------------------------------------------------------------
# dataset CSV round-trip


def export_dataset_csv(path, cp_or_problem):
    """One row per sample: client_id, features..., label."""
    if isinstance(cp_or_problem, CompositeProblem):
        smooth = cp_or_problem.smooth
    else:
        smooth = cp_or_problem
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if isinstance(smooth, LstsqProblem):
            for m in range(smooth.num_clients):
                f = smooth.client_features[m]
                t = smooth.client_targets[m]
                for i in range(f.shape[0]):
                    writer.writerow([m, *(repr(float(v)) for v in f[i])]
                                    + [repr(float(t[i]))])
        elif isinstance(smooth, LogRegProblem):
            for m, shard in enumerate(smooth.shards):
                for row in shard:
                    writer.writerow(
                        [m, *(repr(float(v)) for v in smooth.features[row])]
                        + [repr(float(smooth.labels[row]))])
        else:
            raise ValueError("no tabular dataset behind this problem")


def import_dataset_csv(path):
    """Returns (client_ids, features, labels) arrays from the export schema."""
    ids, feats, labels = [], [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            ids.append(int(row[0]))
            feats.append([float(v) for v in row[1:-1]])
            labels.append(float(row[-1]))
    return np.asarray(ids), np.asarray(feats), np.asarray(labels)
