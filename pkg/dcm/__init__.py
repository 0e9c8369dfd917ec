from ._ChoiceModel import (
    ChoiceDataset,
    ChoiceModel,
    ChoiceObservation,
    DimensionError,
    EmptyObservationsWarning,
    ParameterVector,
    UtilitySpec,
    choice_probabilities,
    choice_probabilities_batch,
    deterministic_utility,
    expected_accuracy,
    ll_gradient,
    ll_hessian,
    log_likelihood,
    predict_accuracy,
    sample_choice,
    sample_choices,
)
from ._Estimation import EstimationResult, estimate
from ._CrossValidation import CVResult, FoldResult, Grouping, k_fold_cv
from ._Files import read_model, read_observations, read_spec, write_model, write_observations, write_spec
from ._Synthetic import (
    EVACUATION_FACTORS,
    FIREWORK_FACTORS,
    evacuation_model,
    firework_model,
    synthesize_observations,
)

__all__ = [
    "ChoiceDataset",
    "ChoiceModel",
    "ChoiceObservation",
    "DimensionError",
    "EmptyObservationsWarning",
    "ParameterVector",
    "UtilitySpec",
    "choice_probabilities",
    "choice_probabilities_batch",
    "deterministic_utility",
    "expected_accuracy",
    "ll_gradient",
    "ll_hessian",
    "log_likelihood",
    "predict_accuracy",
    "sample_choice",
    "sample_choices",
    "EstimationResult",
    "estimate",
    "CVResult",
    "FoldResult",
    "Grouping",
    "k_fold_cv",
    "read_model",
    "read_observations",
    "read_spec",
    "write_model",
    "write_observations",
    "write_spec",
    "EVACUATION_FACTORS",
    "FIREWORK_FACTORS",
    "evacuation_model",
    "firework_model",
    "synthesize_observations",
]

__version__ = "1.0.0"
__author__ = "Dashtiss"
__license__ = "MIT"
