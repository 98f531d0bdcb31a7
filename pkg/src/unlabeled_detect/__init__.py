"""Binary hypothesis testing from unlabeled (permuted) discrete observations."""
from .assignment import AssignmentResult, AuctionConfig, auction_sp, brute_force, hungarian
from .detectors import DetectorOutput, decide, detector_a, detector_b, glrt, labeled_llr, ulr
from .errors import ConfigurationError, DomainError, RefusalError, SolverError, UnlabeledDetectError
from .experiments import ExperimentConfig, build_experiment, exp1_model, exp2_model, exp3_model, worked_example_model
from .exponents import (
    ExponentCurve,
    LabeledExponent,
    UnlabeledExponent,
    exponent_curve,
    legendre_psi,
    omega_labeled,
    omega_unlabeled,
)
from .montecarlo import RocCurve, ThresholdRule, bench, empirical_exponents, roc, roc_curves
from .probability import DistributionClass, HypothesisModel, Pmf, TypeVector, sample, type_vector
from .trellis import LogLikMatrix, Path, RowGroupedBenefit, build_loglik

__version__ = "0.1.0"
