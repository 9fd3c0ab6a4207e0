"""Experiment settings, configurations, and stable seed derivation."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

FEATURIZERS = ("TFIDF", "W2V")
BASELINE = "None"
MODELS = ("RF", "AdaBoost", "GBT")

STAGE_ORDER = (
    "restrict_to_view",
    "clean_features",
    "encode_categoricals",
    "stratified_split",
    "fit_text_featurizer_on_train",
    "importance_forest_and_top_k",
    "fuse_features",
    "smote_train_only",
    "train_and_tune_on_validation",
    "evaluate_on_test",
)


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from any JSON-serializable parts."""
    blob = json.dumps(list(parts), separators=(",", ":")).encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "little") >> 1


@dataclass
class SplitSettings:
    proportions: tuple[float, float, float] = (0.70, 0.15, 0.15)
    drop_threshold: float = 0.50
    min_per_class: int = 10


@dataclass
class SmoteSettings:
    k_neighbors: int = 5
    target: str = "majority"


@dataclass
class TextSettings:
    tfidf_max_vocab: int = 500
    w2v_dim: int = 100
    w2v_window: int = 5
    w2v_negatives: int = 5
    w2v_epochs: int = 15
    w2v_min_count: int = 2
    w2v_learning_rate: float = 0.025
    w2v_workers: int = 1
    pooling: str = "mean"
    stopwords: list[str] = field(default_factory=list)


@dataclass
class SelectSettings:
    top_k: int = 100
    n_trees: int = 200
    features_per_split: str = "sqrt"
    fit_on: str = "smote_resampled_train"


@dataclass
class RFSettings:
    n_trees: int = 300
    features_per_split: str = "sqrt"
    bootstrap: bool = True
    max_depth: int | None = None
    min_samples_leaf: int = 1


@dataclass
class AdaBoostSettings:
    max_stages: int = 200
    max_depth: int = 2


@dataclass
class GBTSettings:
    n_rounds: int = 300
    learning_rate: float = 0.1
    lambda_l2: float = 1.0
    alpha_l1: float = 0.0
    gamma_min_gain: float = 0.0
    max_depth: int = 6
    base_score: float = 0.0
    early_stopping_rounds: int = 20
    grid_learning_rate: tuple[float, ...] = (0.05, 0.1)
    grid_max_depth: tuple[int, ...] = (4, 6)


@dataclass
class Settings:
    """Every resolved default of the pipeline; serialized into each run manifest."""

    split: SplitSettings = field(default_factory=SplitSettings)
    smote: SmoteSettings = field(default_factory=SmoteSettings)
    text: TextSettings = field(default_factory=TextSettings)
    select: SelectSettings = field(default_factory=SelectSettings)
    rf: RFSettings = field(default_factory=RFSettings)
    adaboost: AdaBoostSettings = field(default_factory=AdaBoostSettings)
    gbt: GBTSettings = field(default_factory=GBTSettings)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Settings":
        kwargs = {}
        for f in dataclasses.fields(cls):
            sub = data.get(f.name, {})
            sub_cls = f.default_factory().__class__
            known = {g.name for g in dataclasses.fields(sub_cls)}
            unknown = set(sub) - known
            if unknown:
                raise ValueError(f"unknown settings in [{f.name}]: {sorted(unknown)}")
            values = {}
            for k, v in sub.items():
                values[k] = tuple(v) if isinstance(v, list) and k != "stopwords" else v
            kwargs[f.name] = sub_cls(**values)
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown settings sections: {sorted(unknown)}")
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "Settings":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ExperimentConfig:
    view_id: str
    featurizer: str
    model: str
    master_seed: int = 0
    skip_reason: str | None = None

    @property
    def config_id(self) -> str:
        return f"{self.view_id}|{self.featurizer}|{self.model}"

    @property
    def config_seed(self) -> int:
        return derive_seed(self.master_seed, self.view_id, self.featurizer, self.model)

    @property
    def is_baseline(self) -> bool:
        return self.featurizer == BASELINE

    def to_dict(self) -> dict:
        return {"config_id": self.config_id, "view_id": self.view_id,
                "featurizer": self.featurizer, "model": self.model,
                "master_seed": self.master_seed, "config_seed": self.config_seed,
                "skip_reason": self.skip_reason}
