"""Convex training of mixture distributions over network parameters.

Instead of descending on one weight vector, the trainer keeps a mixture
distribution over parameter space and runs projected gradient descent on the
mixture coefficients, estimating losses and gradients from sampled model
ensembles. Exact small-instance oracles (module oracle) verify the convexity
and minimum-matching claims the method rests on; module baseline provides
conventional SGD/Adam reference trainings; module cli is the command line.
"""

from .basis import (Envelope, MixtureBasis, envelope_density, envelope_sample,
                    make_angle_basis, make_gauss_uniform_basis, mixture_density,
                    sample_mixture, sample_product, scaled_translated)
from .data import (ClassificationDataset, FourierJumpTarget, RegressionDataset,
                   gen_target, load_mnist_idx, sample_regression)
from .engine import (TrainConfig, TrainedMixture, TrainState, estimate_ensemble,
                     estimate_gradient, load_mixture, normalize_gradient, predict,
                     save_mixture, train)
from .loss import EmpiricalL2, SoftmaxCrossEntropy
from .oracle import (DiscreteInstance, convexity_probe, exact_gradient, exact_loss,
                     mc_consistency, verification_suite, verify_linear_case, verify_prop1)
from .simplex import SimplexVector, project_to_simplex, sample_categorical

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "SimplexVector", "project_to_simplex", "sample_categorical",
    "Envelope", "MixtureBasis", "envelope_density", "envelope_sample",
    "scaled_translated", "make_angle_basis", "make_gauss_uniform_basis",
    "mixture_density", "sample_mixture", "sample_product",
    "EmpiricalL2", "SoftmaxCrossEntropy",
    "FourierJumpTarget", "RegressionDataset", "ClassificationDataset",
    "gen_target", "sample_regression", "load_mnist_idx",
    "TrainConfig", "TrainState", "TrainedMixture", "train", "predict",
    "estimate_ensemble", "estimate_gradient", "normalize_gradient",
    "save_mixture", "load_mixture",
    "DiscreteInstance", "exact_loss", "exact_gradient", "verify_prop1",
    "verify_linear_case", "convexity_probe", "mc_consistency", "verification_suite",
]
