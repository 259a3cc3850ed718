"""One-vs-rest multi-label linear classification toolkit."""

from .data import (DataFormatError, FoldPlan, SparseDataset, SplitPlan,
                   load_folds, load_split, make_folds, make_split,
                   parse_dataset, parse_label_file, save_folds, save_split,
                   save_svmlight)
from .solver import (BinaryModel, BinaryProblem, ConvergenceError,
                     decision_value, objective_and_gradient, train_binary)
from .trainer import (CGrid, OvRModel, cv_f1_for_C, default_c_grid, load_model,
                      save_model, train_ovr_basic, train_ovr_basic_C)
from .calibration import (CostChoice, CostGrid, ThresholdResult, build_cost_grid,
                          calibrate_cost_sensitive, calibrate_thresholding,
                          sweep_threshold)
from .predict import (GroundTruthUsageWarning, PredictionSet, decision_matrix,
                      predict_basic, predict_no_empty, predict_top_k,
                      predict_unrealistic)
from .metrics import (ConfusionCounts, MetricsReport, confusion, evaluate,
                      instance_f1, macro_f1, micro_f1, micro_upper_bound,
                      multiclass_accuracy, precision_at_k)
from .theory import (CheckReport, DemoReport, SyntheticRanking, check_theorem1,
                     check_theorem2, check_theorem3, gen_perfect_ranking,
                     overestimation_demo, run_all_checks)
from .experiment import ExperimentConfig, ExperimentResult, run_experiment

__version__ = "0.1.0"
