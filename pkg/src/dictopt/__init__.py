"""Dynamical-system learning with trainable basis-function dictionaries.

Parametric EDMD (Koopman operators), parametric SINDy and parametric
PDE-FIND share one alternating Adam loop that updates the dictionary
parameters together with the linear model coefficients.
"""

from .data import GridField, TrajectoryData
from .dictionary import Dictionary, gaussian_dictionary
from .io import load_model, read_dataset, save_model, write_dataset
from .koopman import KoopmanModel, fit_edmd, fit_parametric_edmd, vamp2_score
from .optimizers import OptimizerConfig, alternating_adam
from .sysid import PdeModel, SindyModel, fit_parametric_pdefind, fit_parametric_sindy

__version__ = "0.1.0"

__all__ = [
    "Dictionary",
    "GridField",
    "KoopmanModel",
    "OptimizerConfig",
    "PdeModel",
    "SindyModel",
    "TrajectoryData",
    "alternating_adam",
    "fit_edmd",
    "fit_parametric_edmd",
    "fit_parametric_pdefind",
    "fit_parametric_sindy",
    "gaussian_dictionary",
    "load_model",
    "read_dataset",
    "save_model",
    "vamp2_score",
    "write_dataset",
]
