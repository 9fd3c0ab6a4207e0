"""Save and load fitted ensembles."""

from __future__ import annotations

import numpy as np

from ..container import read_container, write_container
from .adaboost import AdaBoost, Stage
from .forest import RandomForest
from .gbt import GradientBoosting
from .tree import DecisionTree

MAGIC = b"CSEVMDL\x00"
VERSION = 1

_NODE_FIELDS = ("feature", "threshold", "missing_left", "left", "right", "value",
                "n_samples", "gain")


def _pack_trees(trees: list[DecisionTree]) -> dict[str, np.ndarray]:
    ptr = np.zeros(len(trees) + 1, np.int64)
    for i, t in enumerate(trees):
        ptr[i + 1] = ptr[i] + t.n_nodes
    out = {"tree_ptr": ptr}
    for name in _NODE_FIELDS:
        out[name] = np.concatenate([getattr(t, name) for t in trees])
    return out


def _unpack_trees(arrays, n_features, classes) -> list[DecisionTree]:
    ptr = arrays["tree_ptr"]
    trees = []
    for i in range(len(ptr) - 1):
        sl = slice(ptr[i], ptr[i + 1])
        fields = {name: arrays[name][sl].copy() for name in _NODE_FIELDS}
        fields["missing_left"] = fields["missing_left"].astype(bool)
        trees.append(DecisionTree(**fields, n_features=n_features, classes=classes))
    return trees


def save_model(model, path, *, extra: dict | None = None) -> None:
    """Write a fitted RandomForest, AdaBoost or GradientBoosting model."""
    header = {"n_features": model.n_features, "classes": model.classes.tolist(),
              "params": model.params, "extra": extra or {}}
    if isinstance(model, RandomForest):
        header.update(algorithm="RF", features_per_split=model.features_per_split,
                      bootstrap=model.bootstrap, seed=model.seed)
        trees = model.trees
    elif isinstance(model, AdaBoost):
        header.update(algorithm="AdaBoost", max_stages=model.max_stages,
                      alphas=[s.alpha for s in model.stages],
                      errors=[s.error for s in model.stages])
        trees = [s.tree for s in model.stages]
    elif isinstance(model, GradientBoosting):
        header.update(algorithm="GBT", learning_rate=model.learning_rate,
                      lambda_l2=model.lambda_l2, alpha_l1=model.alpha_l1,
                      gamma_min_gain=model.gamma_min_gain, max_depth=model.max_depth,
                      base_score=model.base_score, n_rounds=model.n_rounds,
                      train_loss=model.train_loss, valid_loss=model.valid_loss,
                      best_round=model.best_round)
        trees = [t for rnd in model.rounds for t in rnd]
    else:
        raise TypeError(f"cannot persist {type(model).__name__}")
    arrays = _pack_trees(trees) if trees else {}
    arrays_out = {k: (v.astype(np.uint8) if k == "missing_left" else v) for k, v in arrays.items()}
    write_container(path, MAGIC, VERSION, header, arrays_out)


def load_model(path):
    header, arrays = read_container(path, MAGIC, (VERSION,))
    classes = np.asarray(header["classes"])
    d = header["n_features"]
    trees = _unpack_trees(arrays, d, classes) if arrays else []
    algo = header["algorithm"]
    if algo == "RF":
        return RandomForest(trees=trees, classes=classes, n_features=d,
                            features_per_split=header["features_per_split"],
                            bootstrap=header["bootstrap"], seed=header["seed"],
                            params=header["params"])
    if algo == "AdaBoost":
        stages = [Stage(t, a, e) for t, a, e in zip(trees, header["alphas"], header["errors"])]
        return AdaBoost(stages=stages, classes=classes, n_features=d,
                        max_stages=header["max_stages"], params=header["params"])
    if algo == "GBT":
        K = len(classes)
        for t in trees:
            t.classes = None
        rounds = [trees[i:i + K] for i in range(0, len(trees), K)]
        return GradientBoosting(rounds=rounds, classes=classes, n_features=d,
                                learning_rate=header["learning_rate"],
                                lambda_l2=header["lambda_l2"], alpha_l1=header["alpha_l1"],
                                gamma_min_gain=header["gamma_min_gain"],
                                max_depth=header["max_depth"], base_score=header["base_score"],
                                train_loss=header["train_loss"], valid_loss=header["valid_loss"],
                                best_round=header["best_round"], params=header["params"])
    raise ValueError(f"{path}: unknown algorithm {algo!r}")
