"""Native tree ensembles: random forest, SAMME AdaBoost, softmax gradient boosting."""

from .adaboost import AdaBoost, fit_adaboost, samme_alpha
from .forest import RandomForest, fit_random_forest
from .gbt import GradientBoosting, fit_gbt, leaf_weight
from .persist import load_model, save_model
from .tree import DecisionTree, fit_tree

__all__ = [
    "AdaBoost", "DecisionTree", "GradientBoosting", "RandomForest", "fit_adaboost",
    "fit_gbt", "fit_random_forest", "fit_tree", "leaf_weight", "load_model", "samme_alpha",
    "save_model",
]
