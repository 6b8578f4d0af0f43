"""Deterministic federated-optimization simulation library."""

from .composite import (Geometry, Regularizer, bregman, conjugate_map,
                        l1_ball, l1_reg, l2_ball, l2_square_reg, nuclear_reg,
                        project_l1_ball, soft_threshold, svt)
from .federated import (FedAcParams, FedConfig, RunRecord, fedac_run,
                        fedavg_run, feddualavg_osp_run, feddualavg_run,
                        fedmid_osp_run, fedmid_run, minibatch_acsgd_run,
                        minibatch_sgd_run, potentials, shadow_series)
from .labs import (BiasEstimate, DivergenceTrace, agd_divergence, bias_sweep,
                   curse_demo, fit_bias_exponent, hetero_lb_trajectory,
                   measure_bias, predict_bias_sde, verify_b_bound)
from .numerics import RngStream, gaussian, jacobi_svd, uniform_sym
from .problems import (CompositeProblem, ProblemHandle, augment_l2,
                       make_bias_demo, make_lasso_synthetic, make_lb4d,
                       make_logcosh_instance, make_logreg,
                       make_logreg_synthetic, make_lowrank_synthetic,
                       make_piecewise_quadratic, make_quadratic)
from .sequential import (AcState, DaState, acsgd_step, agd_run,
                         dual_averaging_run, gd_run, mirror_descent_run,
                         sgd_run)

__version__ = "0.1.0"
