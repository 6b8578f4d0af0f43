"""Dense linear algebra and deterministic random streams.

Vectors and matrices are plain float64 numpy arrays (1-D and 2-D
respectively).  Randomness goes through :class:`RngStream`, a counter-based
stream: every draw is a pure function of (seed, stream_id, counter), so
clients and Monte Carlo chunks can be evaluated in any order, or in
parallel, without changing results.
"""

from dataclasses import dataclass

import numpy as np


def as_vec(data) -> np.ndarray:
    """Validate and return a finite float64 1-D array."""
    v = np.asarray(data, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("expected a non-empty 1-D array")
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite component in vector")
    return v


def as_mat(data, rows=None, cols=None) -> np.ndarray:
    """Validate and return a finite float64 2-D array."""
    a = np.asarray(data, dtype=np.float64)
    if rows is not None:
        a = a.reshape(rows, cols)
    if a.ndim != 2 or a.size == 0:
        raise ValueError("expected a non-empty 2-D array")
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite entry in matrix")
    return a


@dataclass
class RngStream:
    """Counter-based random stream.

    Output is a pure function of the (seed, stream_id, counter) triple:
    each draw call positions a Philox generator at counter word 2, so two
    calls at distinct counters can never overlap (2^128 blocks apart) and
    replaying the triple reproduces the draw bit for bit.  Distinct
    stream_ids key statistically independent Philox streams.
    """

    seed: int
    stream_id: int = 0
    counter: int = 0

    def _generator(self) -> np.random.Generator:
        key = np.array([self.seed & MASK64, self.stream_id & MASK64],
                       dtype=np.uint64)
        ctr = np.array([0, 0, self.counter & MASK64, 0], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key, counter=ctr))

    def clone(self) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self.counter)


MASK64 = (1 << 64) - 1


def gaussian(stream: RngStream, n: int) -> np.ndarray:
    """n i.i.d. standard normal variates; advances the counter by n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = stream._generator().standard_normal(n)
    stream.counter += n
    return out


def uniform_sym(stream: RngStream, half_width: float) -> float:
    """One variate uniform on [-half_width, +half_width]."""
    if half_width <= 0:
        raise ValueError("half_width must be positive")
    u = stream._generator().uniform(-half_width, half_width)
    stream.counter += 1
    return float(u)


def uniform_sym_vec(stream: RngStream, half_width: float, n: int) -> np.ndarray:
    """n variates uniform on [-half_width, +half_width]; advances by n."""
    if half_width <= 0:
        raise ValueError("half_width must be positive")
    out = stream._generator().uniform(-half_width, half_width, size=n)
    stream.counter += n
    return out


def uniforms(stream: RngStream, n: int) -> np.ndarray:
    """n variates uniform on [0, 1); advances the counter by n."""
    out = stream._generator().random(n)
    stream.counter += n
    return out


def shuffled(stream: RngStream, n: int) -> np.ndarray:
    """A deterministic permutation of range(n); advances the counter by n."""
    out = stream._generator().permutation(n)
    stream.counter += n
    return out


class SvdConvergenceError(RuntimeError):
    """Jacobi sweeps did not reach the off-diagonal tolerance."""


_MAX_SWEEPS = 100
_TOURNAMENT_CACHE: dict = {}


def _tournament_rounds(n: int) -> list:
    """Round-robin schedule covering all column pairs (i < j) of range(n)
    in n-ish rounds of disjoint pairs (circle method; cached per n)."""
    if n in _TOURNAMENT_CACHE:
        return _TOURNAMENT_CACHE[n]
    m = n if n % 2 == 0 else n + 1     # pad a bye for odd n
    others = list(range(1, m))
    rounds = []
    for _ in range(m - 1):
        lineup = [0] + others
        ii, jj = [], []
        for k in range(m // 2):
            a, b = lineup[k], lineup[m - 1 - k]
            if a < n and b < n:
                ii.append(min(a, b))
                jj.append(max(a, b))
        if ii:
            rounds.append((np.array(ii, dtype=np.intp),
                           np.array(jj, dtype=np.intp)))
        others = others[-1:] + others[:-1]
    _TOURNAMENT_CACHE[n] = rounds
    return rounds


def jacobi_svd(a) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD of a small dense matrix via one-sided (Hestenes) Jacobi.

    Returns (U, s, V) with a = U @ diag(s) @ V.T, singular values sorted
    descending.  Designed for desk-scale inputs (<= 64 x 64); raises
    SvdConvergenceError if 100 sweeps do not orthogonalize the columns.
    """
    a = as_mat(a)
    m, n = a.shape
    if max(m, n) > 64:
        raise ValueError("jacobi_svd is limited to 64 x 64 inputs")
    if m < n:
        u, s, v = jacobi_svd(a.T)
        return v, s, u

    w = np.array(a, order="F")         # fresh copy; columns rotated in place
    v = np.asfortranarray(np.eye(n))
    fro2 = float(np.sum(a * a))
    if fro2 == 0.0:
        return np.eye(m, n), np.zeros(n), v

    # cyclic-by-tournament sweeps: each scheduling round rotates a set of
    # disjoint column pairs simultaneously (exact: rotations on disjoint
    # pairs commute).  Rotate while |cos(angle between columns)| exceeds
    # ~1e-15, comfortably below the 1e-10 reconstruction contract.
    rounds = _tournament_rounds(n)
    for _ in range(_MAX_SWEEPS):
        rotated = False
        for ii, jj in rounds:
            p = w[:, ii]
            q = w[:, jj]
            app = np.sum(p * p, axis=0)
            aqq = np.sum(q * q, axis=0)
            apq = np.sum(p * q, axis=0)
            mask = apq * apq > 1e-30 * app * aqq
            if not np.any(mask):
                continue
            rotated = True
            im = ii[mask]
            jm = jj[mask]
            apq_m = apq[mask]
            theta = (aqq[mask] - app[mask]) / (2.0 * apq_m)
            t = np.where(theta >= 0.0, 1.0, -1.0) \
                / (np.abs(theta) + np.hypot(1.0, theta))
            c = 1.0 / np.hypot(1.0, t)
            s = c * t
            pm = w[:, im]
            qm = w[:, jm]
            w[:, im] = c * pm - s * qm
            w[:, jm] = s * pm + c * qm
            pv = v[:, im]
            qv = v[:, jm]
            v[:, im] = c * pv - s * qv
            v[:, jm] = s * pv + c * qv
        if not rotated:
            break
    else:
        raise SvdConvergenceError(
            "one-sided Jacobi did not converge in %d sweeps "
            "(ill-conditioned input?)" % _MAX_SWEEPS)

    w = np.ascontiguousarray(w)
    v = np.ascontiguousarray(v)
    sig = np.sqrt(np.sum(w * w, axis=0))
    order = np.argsort(-sig, kind="stable")
    sig = sig[order]
    w = w[:, order]
    v = v[:, order]

    u = np.zeros((m, n))
    rank_tol = 1e-14 * max(sig[0], 1.0) if n else 0.0
    for i in range(n):
        if sig[i] > rank_tol:
            u[:, i] = w[:, i] / sig[i]
        else:
            sig[i] = 0.0
            u[:, i] = _orthonormal_fill(u[:, :i], m)
    return u, sig, v


def _orthonormal_fill(u_prev: np.ndarray, m: int) -> np.ndarray:
    """A unit vector orthogonal to the columns of u_prev (Gram-Schmidt)."""
    for k in range(m):
        cand = np.zeros(m)
        cand[k] = 1.0
        if u_prev.shape[1]:
            cand -= u_prev @ (u_prev.T @ cand)
        norm = float(np.linalg.norm(cand))
        if norm > 1e-8:
            return cand / norm
    raise SvdConvergenceError("could not complete orthonormal basis")
