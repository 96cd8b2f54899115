"""Population-graph clustering with an ARMA encoder, a modularity objective
and dual-view contrastive regularization, on a small numpy autodiff core."""
from .config import PipelineOptions, RunConfig, format_config, load_config_file
from .datasets import FeatureMatrix, RoiVoxelDump, gen_sbm, load_features, roi_histogram_features
from .encoder import EmaTeacher, EncoderParams, load_checkpoint, save_checkpoint
from .errors import (ArmaC3Error, ConfigError, ContractError, DataError, DegenerateError, DimensionError,
                     FormatError, NumericError)
from .graphbuild import SubjectGraph, build_graph, cosine_similarity, sparsify
from .metrics import EvalReport, aggregate_runs, align_labels, classification_metrics, roc_auc, wilcoxon_signed_rank
from .pipeline import ablation_sweep, evaluate_checkpoint, run_semisupervised, run_unsupervised
from .trainer import make_splits, train_semisupervised, train_unsupervised

__version__ = "0.1.0"
