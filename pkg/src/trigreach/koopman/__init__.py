from .analysis import (ErrorReport, error_bound, lifted_residuals, one_step_residuals,
                       propagate_residuals, propagated_error)
from .basis import MonomialBasis, MonomialFeatures, basis_size, lift, recover
from .estimator import EDMDc
from .model import (LiftedModel, RankDeficiencyWarning, fit_edmdc, predict,
                    predict_lifted)
from .stable import StabilizationWarning, project_stable, spectral_radius

__all__ = [
    "EDMDc", "ErrorReport", "LiftedModel", "MonomialBasis", "MonomialFeatures",
    "RankDeficiencyWarning", "StabilizationWarning", "basis_size", "error_bound",
    "fit_edmdc", "lift", "lifted_residuals", "one_step_residuals", "predict",
    "predict_lifted", "project_stable", "propagate_residuals", "propagated_error",
    "recover", "spectral_radius",
]
