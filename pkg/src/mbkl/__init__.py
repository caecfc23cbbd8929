"""Learned combinations of random decision-stump kernels.

Train an SVM whose kernel is a nonnegative weighted sum of thousands of
binary stump kernels: polarity initialization from class-conditional firing
proportions, an L1 solve for the shared stump weights, then a one-vs-rest
squared-hinge output layer on the explicit weighted feature map.
"""

from ._backend import backend_name
from .cv import RunReport, grid_table, run_cv, select_c
from .data import (Dataset, NormalizationParams, apply_normalization,
                   fit_logistic_normalizer, load_csv, load_features_csv,
                   load_sparse_text, stratified_kfold, write_sparse_text)
from .errors import DataError, MbklError, TrainingError
from .kernel import (CorrelationReport, KernelMatrix, chi2_distance,
                     distance_correlation_report, gram_matrix, mbk_kernel,
                     sqrt_theta_map)
from .linsvm import LinearModel, SolverConfig, best_bias, train_l1, train_l2
from .model_io import load_model, model_to_json, save_model
from .pipeline import (LinearBaselineModel, MbklModel, Step0Signs, StumpBank,
                       TrainConfig, evaluate, predict, predict_batch,
                       step0_sign, train, train_baseline)
from .stumps import BitMatrix, Stump, evaluate_stump, generate_stumps

__version__ = "1.0.0"

__all__ = [
    "BitMatrix", "CorrelationReport", "DataError", "Dataset",
    "KernelMatrix", "LinearBaselineModel", "LinearModel", "MbklError",
    "MbklModel", "NormalizationParams", "RunReport", "SolverConfig",
    "Step0Signs", "Stump", "StumpBank", "TrainConfig", "TrainingError",
    "apply_normalization", "backend_name", "best_bias", "chi2_distance",
    "distance_correlation_report", "evaluate", "evaluate_stump",
    "fit_logistic_normalizer", "generate_stumps", "gram_matrix",
    "grid_table", "load_csv", "load_features_csv", "load_model",
    "load_sparse_text", "mbk_kernel", "model_to_json", "predict",
    "predict_batch", "run_cv", "save_model", "select_c", "sqrt_theta_map",
    "step0_sign", "stratified_kfold", "train", "train_baseline", "train_l1",
    "train_l2", "write_sparse_text",
]
