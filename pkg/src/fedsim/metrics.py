"""Evaluation metrics: suboptimality, sparsity recovery (density,
precision, recall, F1), and recovered rank.

Magnitude convention: coordinates (or singular values) with absolute value
below 1e-2 count as zero.
"""

import numpy as np

from .numerics import jacobi_svd
from .problems import CompositeProblem, ProblemHandle

ZERO_THRESHOLD = 1e-2

METRIC_NAMES = ("suboptimality", "density", "precision", "recall", "f1",
                "rank", "potential_psi", "potential_phi", "grad_calls")


def support(x, threshold: float = ZERO_THRESHOLD) -> np.ndarray:
    return np.abs(np.asarray(x)) > threshold


def density(x, threshold: float = ZERO_THRESHOLD) -> float:
    """Fraction of coordinates counted as nonzero."""
    x = np.asarray(x)
    return float(np.count_nonzero(support(x, threshold))) / x.size


def precision_recall_f1(x, true_support) -> tuple:
    """Support recovery scores against a boolean ground-truth mask."""
    est = support(x)
    true_support = np.asarray(true_support, dtype=bool)
    tp = int(np.count_nonzero(est & true_support))
    fp = int(np.count_nonzero(est & ~true_support))
    fn = int(np.count_nonzero(~est & true_support))
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return prec, rec, f1


def recovered_rank(mat, threshold: float = ZERO_THRESHOLD) -> int:
    """Number of singular values above the magnitude threshold."""
    _, s, _ = jacobi_svd(np.asarray(mat, dtype=np.float64))
    return int(np.count_nonzero(s > threshold))


def suboptimality_evaluator(p: ProblemHandle):
    """point -> F(point) - F*; requires a known optimum."""
    if p.optimum is None:
        raise ValueError("suboptimality requires a known optimum")
    f_star = p.optimum[1]
    return lambda x: p.value(x) - f_star


def composite_suboptimality_evaluator(cp: CompositeProblem):
    """point -> Phi(point) - Phi*, with Phi* from the cached prox-GD oracle."""
    _, phi_star = cp.optimum()
    return lambda x: cp.phi(x) - phi_star


def sparsity_evaluators(cp: CompositeProblem) -> dict:
    """density / precision / recall / f1 evaluators for a lasso instance
    (ground truth from the generator; the intercept coordinate is excluded)."""
    x_real = cp.meta["x_real"]
    d = cp.meta["d"]
    mask = support(x_real, 0.5)
    return {
        "density": lambda x: density(x[:d]),
        "precision": lambda x: precision_recall_f1(x[:d], mask)[0],
        "recall": lambda x: precision_recall_f1(x[:d], mask)[1],
        "f1": lambda x: precision_recall_f1(x[:d], mask)[2],
    }


def rank_evaluator(cp: CompositeProblem):
    """Recovered rank of the matrix block of a low-rank instance."""
    d = cp.meta["d"]
    return lambda x: float(recovered_rank(np.asarray(x)[:d * d].reshape(d, d)))
