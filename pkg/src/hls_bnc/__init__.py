"""Hierarchical linear smoothing for Bayesian network classifier CPTs."""

from .classifier import BayesianNetworkClassifier, BncModel, SmootherConfig, predict_class, predict_posterior, train
from .cpt_tree import CptTree, DesignMatrix, build_design, build_tree
from .data import Dataset, FoldPlan, Schema, gen_synthetic, load_csv, make_folds
from .discretize import MDLPDiscretizer, fit_mdlp
from .evaluation import EvalResult, ModelConfig, WdlRecord, run_cv, time_fit, wdl
from .exceptions import ConfigError, NumericalError, ParseError
from .fixtures import list_fixtures, load_fixture
from .hls_bayes import GlsConfig, fit_bayes
from .hls_map import fit_lasso, fit_ridge, fit_ridge_cv
from .smoothing import additive_cpt
from .structure import NetworkStructure, learn_structure

__version__ = "0.1.0"

__all__ = [
    "BayesianNetworkClassifier",
    "BncModel",
    "ConfigError",
    "CptTree",
    "Dataset",
    "DesignMatrix",
    "EvalResult",
    "FoldPlan",
    "GlsConfig",
    "MDLPDiscretizer",
    "ModelConfig",
    "NetworkStructure",
    "NumericalError",
    "ParseError",
    "Schema",
    "SmootherConfig",
    "WdlRecord",
    "additive_cpt",
    "build_design",
    "build_tree",
    "fit_bayes",
    "fit_lasso",
    "fit_mdlp",
    "fit_ridge",
    "fit_ridge_cv",
    "gen_synthetic",
    "learn_structure",
    "list_fixtures",
    "load_csv",
    "load_fixture",
    "make_folds",
    "predict_class",
    "predict_posterior",
    "run_cv",
    "time_fit",
    "train",
    "wdl",
]
