import os

import numpy as np
import pytest

from fedsim import problems as P
from fedsim.numerics import RngStream


def numeric_derivative(f, x, order=1, h=1e-5):
    if order == 1:
        return (f(x + h) - f(x - h)) / (2 * h)
    if order == 2:
        return (f(x + h) - 2 * f(x) + f(x - h)) / h ** 2
    raise ValueError(order)


# ---------------------------------------------------------------------------
# quadratic


def test_quadratic_identity_optimum():
    p = P.make_quadratic(np.eye(2), np.zeros(2))
    assert np.allclose(p.optimum[0], 0.0)
    assert p.optimum[1] == 0.0


def test_quadratic_linear_solve_optimum():
    p = P.make_quadratic(np.diag([2.0]), np.array([-2.0]))
    assert np.allclose(p.optimum[0], [1.0])


def test_quadratic_shifts_cancel_in_mean():
    zeta = 0.8
    p0 = P.make_quadratic(np.eye(2), np.array([0.3, -0.2]))
    p = P.make_quadratic(np.eye(2), np.array([0.3, -0.2]),
                         per_client_shift=[[zeta, 0.0], [-zeta, 0.0]])
    x = np.array([1.5, -0.7])
    assert np.array_equal(p.full_grad(x), p0.full_grad(x))


def test_quadratic_rejects_asymmetric():
    with pytest.raises(ValueError):
        P.make_quadratic(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros(2))


def test_quadratic_smoothness_constants():
    a = np.diag([0.5, 3.0])
    p = P.make_quadratic(a, np.zeros(2))
    assert p.smooth_l == 3.0
    assert p.strong_mu == 0.5


# ---------------------------------------------------------------------------
# piecewise quadratic / bias demo


def test_piecewise_values():
    p = P.make_piecewise_quadratic(l=12.0, sigma=1.0)
    # psi(1) = 1, psi(-2) = 2
    assert p.value([1.0]) == 12.0 / 24.0
    assert p.value([-2.0]) == 12.0 / 24.0 * 2.0
    assert p.full_grad(np.array([0.0]))[0] == 0.0
    assert p.full_grad(np.array([1.0]))[0] == 12.0 / 12.0
    assert p.full_grad(np.array([-1.0]))[0] == -12.0 / 24.0


def test_bias_demo_figure_instance():
    p = P.make_bias_demo()
    assert p.value([1.0]) == 1.0
    assert p.value([-1.0]) == pytest.approx(0.1)
    assert np.array_equal(p.optimum[0], np.zeros(1))
    assert p.smooth_l == 2.0          # max second derivative over branches
    assert p.noise_var == 0.01        # N(0, 0.01) read as variance


# ---------------------------------------------------------------------------
# log-cosh instance


def test_logcosh_derivative_identities():
    p = P.make_logcosh_instance(l=2.0, q=3.0, sigma=1.0)
    assert p.third_derivative(0.0) == pytest.approx(3.0, abs=1e-12)
    assert p.second_derivative(0.0) == pytest.approx(1.5, abs=1e-12)
    assert p.full_grad(np.array([0.0]))[0] == pytest.approx(0.0, abs=1e-15)


def test_logcosh_second_derivative_range():
    p = P.make_logcosh_instance(l=2.0, q=0.7, sigma=1.0)
    for x in np.linspace(-8, 8, 41):
        f2 = p.second_derivative(x)
        assert 1.0 - 1e-12 <= f2 <= 2.0 + 1e-12
        fd = numeric_derivative(lambda t: p.drift_batch(np.array([t]))[0], x)
        assert fd == pytest.approx(f2, rel=1e-6, abs=1e-8)


def test_logcosh_value_consistent_with_drift():
    p = P.make_logcosh_instance(l=1.0, q=1.5, sigma=1.0)
    # trapezoid quadrature of F' reproduces F (independent oracle)
    for x_end in (0.4, 1.3, -2.1):
        grid = np.linspace(0.0, x_end, 20001)
        vals = p.drift_batch(grid)
        integral = np.trapezoid(vals, grid)
        assert p.value([x_end]) == pytest.approx(integral, abs=1e-9)


def test_logcosh_noise_is_uniform():
    p = P.make_logcosh_instance(l=1.0, q=1.0, sigma=0.7)
    draws = p.draw_noise(RngStream(1, 0), 20000)
    assert np.all(np.abs(draws) <= 0.7)
    assert draws.var() == pytest.approx(0.7 ** 2 / 3.0, rel=0.05)
    assert p.noise_var == pytest.approx(0.7 ** 2 / 3.0)


# ---------------------------------------------------------------------------
# 4-D lower-bound instance


def test_lb4d_gradients():
    p = P.make_lb4d(l=8.0, sigma=1.0, mu=0.5, zeta_star=2.0, m=4)
    assert np.array_equal(p.full_grad(np.zeros(4)), np.zeros(4))
    # odd ids take the (1, +zeta*) branch: gradient -zeta* at the origin
    assert p.client_full_grad(1, np.zeros(4))[3] == -2.0
    assert p.client_full_grad(0, np.zeros(4))[3] == 2.0
    # F4(x) = (3/32) L x^2
    assert p.value(np.array([0.0, 0.0, 0.0, 1.0])) == 3.0 / 32.0 * 8.0


def test_lb4d_rejects_odd_m():
    with pytest.raises(ValueError):
        P.make_lb4d(1.0, 1.0, 0.1, 0.5, m=3)


def test_lb4d_noise_only_on_first_coordinate():
    p = P.make_lb4d(l=8.0, sigma=1.5, mu=0.5, zeta_star=2.0, m=2)
    x = np.array([0.3, -0.4, 0.1, 0.9])
    rng = RngStream(3, 0)
    draws = np.array([p.client_grad(0, x, rng) for _ in range(200)])
    assert np.all(draws[:, 1] == draws[0, 1])
    assert np.all(draws[:, 3] == draws[0, 3])
    assert draws[:, 0].std() > 0.5


# ---------------------------------------------------------------------------
# logistic regression


def test_logreg_zero_feature_gradient():
    p = P.make_logreg(np.array([[0.0], [0.0]]), np.array([1.0, -1.0]),
                      lam=0.1, client_partition=[[0], [1]])
    x = np.array([0.7])
    assert np.allclose(p.full_grad(x), 0.1 * x)


def test_logreg_single_sample_gradient():
    p = P.make_logreg(np.array([[1.0]]), np.array([1.0]), 0.0, [[0]])
    assert p.full_grad(np.zeros(1))[0] == pytest.approx(-0.5)


def test_logreg_loss_at_zero():
    p = P.make_logreg(np.array([[1.0, 2.0], [0.5, -1.0]]),
                      np.array([1.0, -1.0]), 0.0, [[0], [1]])
    assert p.value(np.zeros(2)) == pytest.approx(np.log(2.0))


def test_logreg_rejects_bad_labels():
    with pytest.raises(ValueError):
        P.make_logreg(np.ones((2, 1)), np.array([1.0, 0.0]), 0.0, [[0], [1]])


def test_logreg_rejects_empty_shard():
    with pytest.raises(ValueError):
        P.make_logreg(np.ones((2, 1)), np.array([1.0, -1.0]), 0.0, [[0, 1], []])


def test_logreg_synthetic_deterministic_and_solved():
    a = P.make_logreg_synthetic(d=10, n=64, m=4, lam=1e-2, seed=3)
    b = P.make_logreg_synthetic(d=10, n=64, m=4, lam=1e-2, seed=3)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.labels, b.labels)
    assert np.linalg.norm(a.full_grad(a.optimum[0])) < 1e-10


def test_logreg_constants():
    p = P.make_logreg_synthetic(d=6, n=32, m=2, lam=0.05, seed=1)
    assert p.strong_mu == 0.05
    max_row = float(np.max(np.sum(p.features ** 2, axis=1)))
    assert p.smooth_l == pytest.approx(0.05 + max_row / 4.0)


# ---------------------------------------------------------------------------
# gradient oracle properties (shared across instances)


def _instances():
    return [
        P.make_quadratic(np.diag([1.0, 2.0]), np.array([0.5, -1.0]),
                         per_client_shift=[[0.1, 0.0], [-0.1, 0.0]],
                         sigma=0.6),
        P.make_piecewise_quadratic(l=6.0, sigma=0.8),
        P.make_bias_demo(),
        P.make_logcosh_instance(l=1.0, q=1.0, sigma=1.0),
        P.make_lb4d(l=4.0, sigma=0.5, mu=0.25, zeta_star=1.0, m=2),
    ]


@pytest.mark.parametrize("idx", range(5))
def test_unbiasedness(idx):
    p = _instances()[idx]
    rng_x = np.random.default_rng(100 + idx)
    for trial in range(3):
        x = rng_x.standard_normal(p.dim)
        for m in range(p.num_clients):
            stream = RngStream(17 + trial, m)
            n = 20000
            acc = np.zeros(p.dim)
            for _ in range(n):
                acc += p.client_grad(m, x, stream)
            emp = acc / n
            truth = p.client_full_grad(m, x)
            sig = p.sigma if p.sigma else 0.0
            tol = 4.0 * max(sig, 1e-12) / np.sqrt(n) + 1e-12
            assert np.linalg.norm(emp - truth) < max(tol, 1e-9)


@pytest.mark.parametrize("idx", range(5))
def test_noise_bound(idx):
    p = _instances()[idx]
    if not p.sigma:
        pytest.skip("deterministic instance")
    x = np.random.default_rng(idx).standard_normal(p.dim)
    stream = RngStream(23, 0)
    truth = p.client_full_grad(0, x)
    n = 20000
    total = 0.0
    for _ in range(n):
        g = p.client_grad(0, x, stream)
        total += float(np.sum((g - truth) ** 2))
    assert total / n <= p.sigma ** 2 * 1.05


def test_homogeneous_clients_share_gradient():
    p = P.make_piecewise_quadratic(l=3.0, sigma=0.5)
    x = np.array([0.37])
    for m in range(4):
        assert np.array_equal(p.client_full_grad(m, x), p.full_grad(x))


@pytest.mark.parametrize("idx", range(5))
def test_smoothness_bound_valid(idx):
    p = _instances()[idx]
    rng = np.random.default_rng(idx)
    for _ in range(50):
        x = rng.standard_normal(p.dim) * 2
        y = rng.standard_normal(p.dim) * 2
        lhs = np.linalg.norm(p.full_grad(x) - p.full_grad(y))
        assert lhs <= p.smooth_l * np.linalg.norm(x - y) * (1 + 1e-9)


# ---------------------------------------------------------------------------
# lasso / low-rank generators


def test_lasso_noiseless_zero_residual_at_truth():
    cp = P.make_lasso_synthetic(d1=4, d0=4, m=2, n_per_client=16, lam=0.01,
                                seed=5, noiseless=True)
    xr = np.concatenate([cp.meta["x_real"], [cp.meta["x0_real"]]])
    assert cp.smooth.value(xr) < 1e-20


def test_lasso_same_seed_identical():
    a = P.make_lasso_synthetic(4, 4, 2, 8, 0.1, seed=5)
    b = P.make_lasso_synthetic(4, 4, 2, 8, 0.1, seed=5)
    for fa, fb in zip(a.smooth.client_features, b.smooth.client_features):
        assert np.array_equal(fa, fb)


def test_lasso_paper_shape():
    cp = P.make_lasso_synthetic(d1=512, d0=512, m=64, n_per_client=128,
                                lam=0.1, seed=1)
    total = sum(f.shape[0] for f in cp.smooth.client_features)
    assert total == 8192
    assert cp.smooth.dim == 1025    # 1024 features + intercept


def test_lowrank_truth_and_shape():
    cp = P.make_lowrank_synthetic(d=6, r=2, m=2, n_per_client=20, lam=0.01,
                                  seed=7, noiseless=True)
    xr = np.concatenate([cp.meta["x_real"].reshape(-1), [cp.meta["x0_real"]]])
    assert cp.smooth.value(xr) < 1e-18
    assert np.linalg.matrix_rank(cp.meta["x_real"]) == 2


def test_lowrank_paper_shape():
    cp = P.make_lowrank_synthetic(d=32, r=16, m=64, n_per_client=4, lam=0.1,
                                  seed=2)
    assert cp.meta["x_real"].shape == (32, 32)
    assert np.linalg.matrix_rank(cp.meta["x_real"]) == 16
    assert len(cp.smooth.client_features) == 64


def test_lowrank_rejects_rank_above_dim():
    with pytest.raises(ValueError):
        P.make_lowrank_synthetic(d=4, r=5, m=2, n_per_client=4, lam=0.1, seed=1)


# ---------------------------------------------------------------------------
# augmentation


def test_augment_matches_inner_at_center():
    q = P.make_quadratic(np.diag([2.0]), np.array([-2.0]))
    x0 = np.array([3.0])
    aug = P.augment_l2(q, lam=0.5, x0=x0)
    assert np.array_equal(aug.full_grad(x0), q.full_grad(x0))
    assert aug.value(x0) == q.value(x0)
    assert aug.smooth_l == q.smooth_l + 0.5
    assert aug.strong_mu == q.strong_mu + 0.5


def test_augment_quadratic_optimum():
    q = P.make_quadratic(np.diag([2.0]), np.array([-2.0]))
    x0 = np.array([3.0])
    aug = P.augment_l2(q, lam=0.5, x0=x0)
    expected = np.linalg.solve(q.a + 0.5 * np.eye(1), 0.5 * x0 - q.c)
    assert np.allclose(aug.optimum[0], expected)


def test_augment_rejects_nonpositive_lam():
    q = P.make_quadratic(np.eye(1), np.zeros(1))
    with pytest.raises(ValueError):
        P.augment_l2(q, 0.0, np.zeros(1))


# ---------------------------------------------------------------------------
# dataset CSV round-trip


def test_dataset_csv_roundtrip(tmp_path):
    cp = P.make_lasso_synthetic(d1=2, d0=2, m=3, n_per_client=4, lam=0.1,
                                seed=9)
    path = os.path.join(tmp_path, "data.csv")
    P.export_dataset_csv(path, cp)
    ids, feats, labels = P.import_dataset_csv(path)
    assert ids.shape == (12,)
    assert feats.shape == (12, 4)
    stacked = np.concatenate(cp.smooth.client_features, axis=0)
    targets = np.concatenate(cp.smooth.client_targets)
    assert np.array_equal(feats, stacked)
    assert np.array_equal(labels, targets)
    assert ids.tolist() == [0] * 4 + [1] * 4 + [2] * 4
