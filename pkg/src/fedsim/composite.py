"""Composite-optimization geometry: distance-generating functions,
regularizers, Bregman divergences, and the conjugate (proximal) maps used
by mirror descent and dual averaging.

Only the euclidean distance-generating function h(x) = 0.5 ||x||^2 ships;
the Geometry seam stays because the underlying theory is stated for general
Bregman geometry.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .numerics import jacobi_svd

INF = float("inf")

# relative slack when deciding membership of constraint sets, so that points
# produced by the exact projection formulas count as feasible
_FEAS_RTOL = 1e-9


@dataclass(frozen=True)
class Geometry:
    """Distance-generating function h; 1-strongly convex w.r.t. ||.||_2."""

    kind: str = "euclidean"

    def __post_init__(self):
        if self.kind != "euclidean":
            raise ValueError("unsupported geometry: %r" % self.kind)

    def h_value(self, x) -> float:
        return 0.5 * float(np.dot(x, x))

    def h_grad(self, x) -> np.ndarray:
        return x


EUCLIDEAN = Geometry()


@dataclass(frozen=True)
class Regularizer:
    """Closed convex regularizer psi, possibly extended-valued.

    kind: zero | l1 | l2_ball | l1_ball | nuclear | l2_square.
    For 'nuclear', (rows, cols) give the matrix shape of the regularized
    block.  apply_dim restricts psi to the first apply_dim coordinates
    (trailing coordinates, e.g. an intercept, pass through unregularized);
    None means the whole vector.
    """

    kind: str = "zero"
    lam: float = 0.0
    radius: float = 0.0
    rows: int = 0
    cols: int = 0
    apply_dim: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("zero", "l1", "l2_ball", "l1_ball", "nuclear",
                             "l2_square"):
            raise ValueError("unknown regularizer kind %r" % self.kind)
        if self.kind in ("l2_ball", "l1_ball") and self.radius <= 0:
            raise ValueError("ball constraint needs a positive radius")
        if self.kind == "nuclear" and (self.rows <= 0 or self.cols <= 0):
            raise ValueError("nuclear norm needs the matrix shape")

    def _block(self, x):
        if self.apply_dim is None:
            return x
        return x[:self.apply_dim]

    def psi_value(self, x) -> float:
        """psi(x); +inf outside a constraint set."""
        z = self._block(np.asarray(x, dtype=np.float64))
        if self.kind == "zero":
            return 0.0
        if self.kind == "l1":
            return self.lam * float(np.sum(np.abs(z)))
        if self.kind == "l2_square":
            return self.lam * float(np.dot(z, z))
        if self.kind == "l2_ball":
            r = float(np.linalg.norm(z))
            return 0.0 if r <= self.radius * (1 + _FEAS_RTOL) else INF
        if self.kind == "l1_ball":
            r = float(np.sum(np.abs(z)))
            return 0.0 if r <= self.radius * (1 + _FEAS_RTOL) else INF
        # nuclear
        mat = z.reshape(self.rows, self.cols)
        _, s, _ = jacobi_svd(mat)
        return self.lam * float(np.sum(s))

    def feasible(self, x) -> bool:
        return self.psi_value(x) < INF


ZERO_REG = Regularizer("zero")


def l1_reg(lam, apply_dim=None) -> Regularizer:
    return Regularizer("l1", lam=lam, apply_dim=apply_dim)


def l2_ball(radius, apply_dim=None) -> Regularizer:
    return Regularizer("l2_ball", radius=radius, apply_dim=apply_dim)


def l1_ball(radius, apply_dim=None) -> Regularizer:
    return Regularizer("l1_ball", radius=radius, apply_dim=apply_dim)


def nuclear_reg(lam, rows, cols, apply_dim=None) -> Regularizer:
    return Regularizer("nuclear", lam=lam, rows=rows, cols=cols,
                       apply_dim=apply_dim)


def l2_square_reg(lam, apply_dim=None) -> Regularizer:
    return Regularizer("l2_square", lam=lam, apply_dim=apply_dim)


def bregman(geo: Geometry, x, y) -> float:
    """Bregman divergence D_h(x, y) = h(x) - h(y) - <grad h(y), x - y>."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("dimension mismatch in bregman")
    d = x - y
    return geo.h_value(x) - geo.h_value(y) - float(np.dot(geo.h_grad(y), d))


def soft_threshold(y, tau: float) -> np.ndarray:
    """Componentwise sign(y_i) * max(|y_i| - tau, 0)."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    y = np.asarray(y, dtype=np.float64)
    return np.sign(y) * np.maximum(np.abs(y) - tau, 0.0)


def svt(a, tau: float) -> np.ndarray:
    """Singular-value thresholding: U diag(max(s - tau, 0)) V^T."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    u, s, v = jacobi_svd(a)
    s = np.maximum(s - tau, 0.0)
    return (u * s) @ v.T


def project_l1_ball(y, r: float) -> np.ndarray:
    """Euclidean projection of y onto {x : ||x||_1 <= r} (sort-based)."""
    if r <= 0:
        raise ValueError("radius must be positive")
    y = np.asarray(y, dtype=np.float64)
    ay = np.abs(y)
    if float(np.sum(ay)) <= r:
        return y
    u = np.sort(ay)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, u.size + 1)
    rho = int(np.max(np.nonzero(u * idx > css - r)[0])) + 1
    theta = (css[rho - 1] - r) / rho
    return np.sign(y) * np.maximum(ay - theta, 0.0)


def _project_l2_ball(y, r):
    norm = float(np.linalg.norm(y))
    if norm <= r:
        return y
    return y * (r / norm)


def conjugate_map(geo: Geometry, reg: Regularizer, eta: float, y) -> np.ndarray:
    """argmin_x { -<y, x> + eta * psi(x) + h(x) }, i.e. grad (h + eta psi)*.

    Euclidean h only; dispatches to the closed form for each regularizer
    kind.  eta = 0 (or psi = 0) reduces to the identity map grad h* = id.
    """
    if eta < 0:
        raise ValueError("eta must be non-negative")
    if geo.kind != "euclidean":
        raise ValueError("unsupported geometry %r" % geo.kind)
    y = np.asarray(y, dtype=np.float64)
    # eta * psi vanishes at eta = 0 (constraint kinds included), leaving
    # grad h* = identity
    if reg.kind == "zero" or eta == 0.0:
        return y
    if reg.apply_dim is None:
        return _prox_block(reg, eta, y)
    head = _prox_block(reg, eta, y[:reg.apply_dim])
    return np.concatenate([head, y[reg.apply_dim:]])


def _prox_block(reg: Regularizer, eta: float, y: np.ndarray) -> np.ndarray:
    if reg.kind == "l1":
        return soft_threshold(y, eta * reg.lam)
    if reg.kind == "l2_ball":
        return _project_l2_ball(y, reg.radius)
    if reg.kind == "l1_ball":
        return project_l1_ball(y, reg.radius)
    if reg.kind == "l2_square":
        return y / (1.0 + 2.0 * eta * reg.lam)
    if reg.kind == "nuclear":
        out = svt(y.reshape(reg.rows, reg.cols), eta * reg.lam)
        return out.reshape(-1)
    raise ValueError("unsupported (geometry, regularizer) pair: %r" % reg.kind)
