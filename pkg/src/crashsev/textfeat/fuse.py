"""Concatenate structured and text features under a fixed column schema."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..prep import TEXT, FeatureMatrix

TEXT_PREFIX = "nlp:"


@dataclass(frozen=True)
class FusionSchema:
    structured_names: tuple[str, ...]
    text_names: tuple[str, ...]

    @property
    def feature_names(self) -> list[str]:
        return [*self.structured_names, *(TEXT_PREFIX + n for n in self.text_names)]

    def fuse(self, structured: np.ndarray, text: np.ndarray | None) -> np.ndarray:
        """Concatenate vectors or row-aligned matrices, structured block first."""
        structured = np.asarray(structured, dtype=np.float64)
        text = np.zeros(structured.shape[:-1] + (0,)) if text is None else np.asarray(text, float)
        if structured.shape[-1] != len(self.structured_names):
            raise ValueError(f"expected {len(self.structured_names)} structured features, "
                             f"got {structured.shape[-1]}")
        if text.shape[-1] != len(self.text_names):
            raise ValueError(f"expected {len(self.text_names)} text features, got {text.shape[-1]}")
        if not (np.all(np.isfinite(structured)) and np.all(np.isfinite(text))):
            raise ValueError("cannot fuse non-finite features")
        return np.concatenate([structured, text], axis=-1)


def fuse_features(structured: FeatureMatrix, text: np.ndarray | None,
                  text_names=None) -> FeatureMatrix:
    """Append text columns (named ``nlp:<name>``, never missing) to a structured matrix."""
    if text is None:
        return structured
    text = np.asarray(text, dtype=np.float64)
    if text.shape[0] != structured.n_rows:
        raise ValueError(f"text block has {text.shape[0]} rows, structured has {structured.n_rows}")
    names = list(text_names) if text_names is not None else [str(i) for i in range(text.shape[1])]
    schema = FusionSchema(tuple(structured.feature_names), tuple(names))
    return replace(
        structured,
        values=schema.fuse(structured.values, text),
        missing_mask=np.hstack([structured.missing_mask, np.zeros(text.shape, dtype=bool)]),
        feature_names=schema.feature_names,
        kinds=[*structured.kinds, *([TEXT] * text.shape[1])])
