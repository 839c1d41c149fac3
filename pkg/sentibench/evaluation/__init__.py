from .benchmark import BenchmarkResult, run_benchmark
from .emoticons import EMOTICONS, ChiSquaredResult, chi_squared_emoticons
from .metrics import accuracy, confusion_matrix, macro_average, mean_and_std, per_class_accuracy
from .report import BenchmarkReport, build_report, write_report
from .results import CellFailure, RunResult
from .significance import PairSignificance, SignificanceMatrix, approx_rand_test, exact_rand_test, runs_significance, significance_matrix
from .tuning import tune_hyperparameters

__all__ = [
    "BenchmarkReport",
    "BenchmarkResult",
    "CellFailure",
    "ChiSquaredResult",
    "EMOTICONS",
    "PairSignificance",
    "RunResult",
    "SignificanceMatrix",
    "accuracy",
    "approx_rand_test",
    "build_report",
    "chi_squared_emoticons",
    "confusion_matrix",
    "exact_rand_test",
    "macro_average",
    "mean_and_std",
    "per_class_accuracy",
    "run_benchmark",
    "runs_significance",
    "significance_matrix",
    "tune_hyperparameters",
    "write_report",
]
