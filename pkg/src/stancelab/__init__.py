"""Stance measurement and turnaround analysis for micro-blogging debates."""

__version__ = "0.1.0"

from .calibration import PlattModel, fit_platt, stance_band
from .corpus import Corpus, MicroPost, UserProfile, load_corpus
from .features import FeatureMatrix, build_matrix
from .gbt import BoostedModel, BoostParams, train
from .stats import log_odds_prior, ols_regress, tukey_hsd, turnaround

__all__ = [
    "__version__",
    "Corpus", "MicroPost", "UserProfile", "load_corpus",
    "FeatureMatrix", "build_matrix",
    "BoostedModel", "BoostParams", "train",
    "PlattModel", "fit_platt", "stance_band",
    "log_odds_prior", "ols_regress", "tukey_hsd", "turnaround",
]
