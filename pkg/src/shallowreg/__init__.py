"""Regularization of ill-posed inverse problems by width-expanding two-layer ReLU networks."""

from .discretization import Grid, NoisyData, add_noise, relative_l2_error, rms_norm
from .operators import AutoConvolution, EIT2D, FredholmGreen, OperatorError, make_operator
from .optimize import ForwardProblem, Objective, Penalty, objective_value, train_fixed_width
from .regularization import (RunRecord, RunRow, Schedule, run_algorithm1, run_algorithm2,
                             run_tikhonov)
from .shallow_net import (TwoLayerNet, evaluate, expand_width, param_gradient, path_norm,
                          project_constraints, sobolev_norms)

__version__ = "0.1.0"

__all__ = [
    "Grid", "NoisyData", "add_noise", "relative_l2_error", "rms_norm",
    "AutoConvolution", "EIT2D", "FredholmGreen", "OperatorError", "make_operator",
    "ForwardProblem", "Objective", "Penalty", "objective_value", "train_fixed_width",
    "RunRecord", "RunRow", "Schedule", "run_algorithm1", "run_algorithm2", "run_tikhonov",
    "TwoLayerNet", "evaluate", "expand_width", "param_gradient", "path_norm",
    "project_constraints", "sobolev_norms",
]
