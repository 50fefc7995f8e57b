"""Learning few-measurement entanglement witnesses for two-qubit states."""

from .quantum import (
    DensityMatrix,
    EntanglementLabel,
    FEATURE_NAMES,
    NumericIntegrityError,
    det_partial_transpose,
    features_from_state,
    is_entangled,
    min_eigenvalue_pt,
    partial_transpose,
    pauli_basis,
    random_density_matrix,
    state_from_features,
    twirl_cylindrical,
    werner_state,
)
from .data import Dataset, generate, load, save, split
from .nn import MlpModel, TrainConfig, code_weights, forward, model_new, train
from .witness import (
    CalibrationDegenerateError,
    WitnessReport,
    calibrate_threshold,
    evaluate,
    sweep_measurements,
)

__version__ = "0.1.0"
