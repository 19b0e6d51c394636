"""Plain vs adaptive gradient descent on under- and over-parameterized least squares.

Submodules:

``linalg``          dense helpers (Cholesky solves, power iteration)
``models``          ``Dataset``, ``Objective``, loss and gradient
``optimizers``      GD / AdaGrad / AdaGrad variant / RMSProp / Adam / constant D
``closed_form``     unrolled closed forms of the recursions
``solutions``       least-squares, minimum-norm, ridge and fixed-point references
``counterexamples`` structured datasets and decision rules
``experiments``     Monte-Carlo tables and the self-verification suite
``cli``             command-line front end
"""
from .counterexamples import GeneratorSpec, Rule, evaluate_accuracy, generate, quantize
from .experiments import ExperimentReport, ExperimentSpec, preset, run_experiment, verify_suite
from .models import Dataset, Generator, Objective, gradient, loss
from .optimizers import Kind, OptimizerSpec, Trajectory, default_step_size, final_model, run
from .solutions import (
    adagrad_variant_fixed_point,
    least_squares_solution,
    min_norm_solution,
    ridge_solution,
)

__version__ = "0.1.0"
