"""Tokenizer and TF-IDF vectorizer with a document-frequency-capped vocabulary."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..container import read_container, write_container
from ..diagnostics import Diagnostics

_TOKEN = re.compile(r"[^\W_]+")

TFIDF_MAGIC = b"CSEVTFI\x00"
TFIDF_VERSION = 1


def tokenize(text: str, stopwords: Iterable[str] | None = None) -> list[str]:
    """Lowercase and split on every run of non-alphanumeric characters."""
    tokens = _TOKEN.findall(text.lower())
    if stopwords:
        stop = set(stopwords)
        tokens = [t for t in tokens if t not in stop]
    return tokens


def idf_value(n_docs: int, df: int) -> float:
    return math.log(n_docs / (1 + df)) + 1.0


@dataclass
class TfidfModel:
    vocabulary: dict[str, int]
    n_docs: int
    doc_freq: dict[str, int]
    max_vocab: int

    def __post_init__(self):
        terms = self.terms
        self.idf = np.array([idf_value(self.n_docs, self.doc_freq[t]) for t in terms])

    @property
    def terms(self) -> list[str]:
        return sorted(self.vocabulary, key=self.vocabulary.__getitem__)

    def transform(self, docs: Sequence[Sequence[str]],
                  diagnostics: Diagnostics | None = None) -> np.ndarray:
        """Raw-count TF times IDF, L2-normalized per row; empty rows stay zero."""
        out = np.zeros((len(docs), len(self.vocabulary)))
        for r, doc in enumerate(docs):
            for tok, count in Counter(doc).items():
                col = self.vocabulary.get(tok)
                if col is not None:
                    out[r, col] = count * self.idf[col]
        norms = np.sqrt(np.einsum("ij,ij->i", out, out))
        empty = norms == 0
        if diagnostics is not None and empty.any():
            diagnostics.add("empty_tfidf_vector", n=int(empty.sum()))
        out[~empty] /= norms[~empty, None]
        return out

    def save(self, path) -> None:
        header = {"kind": "tfidf", "n_docs": self.n_docs, "max_vocab": self.max_vocab,
                  "terms": self.terms, "doc_freq": [self.doc_freq[t] for t in self.terms]}
        write_container(path, TFIDF_MAGIC, TFIDF_VERSION, header, {"idf": self.idf})

    @classmethod
    def load(cls, path) -> "TfidfModel":
        header, _ = read_container(path, TFIDF_MAGIC, (TFIDF_VERSION,))
        terms = header["terms"]
        return cls(vocabulary={t: i for i, t in enumerate(terms)}, n_docs=header["n_docs"],
                   doc_freq=dict(zip(terms, header["doc_freq"])), max_vocab=header["max_vocab"])


def tfidf_fit(corpus: Sequence[Sequence[str]], max_vocab: int = 500) -> TfidfModel:
    """Keep the ``max_vocab`` terms with the highest document frequency (ties lexicographic).

    Columns follow that ranking.
    """
    if not corpus:
        raise ValueError("cannot fit TF-IDF on an empty corpus")
    if max_vocab < 1:
        raise ValueError("max_vocab must be >= 1")
    df = Counter()
    for doc in corpus:
        df.update(set(doc))
    ranked = sorted(df.items(), key=lambda kv: (-kv[1], kv[0]))[:max_vocab]
    return TfidfModel(vocabulary={t: i for i, (t, _) in enumerate(ranked)}, n_docs=len(corpus),
                      doc_freq=dict(ranked), max_vocab=max_vocab)


def tfidf_transform(model: TfidfModel, doc: Sequence[str],
                    diagnostics: Diagnostics | None = None) -> np.ndarray:
    return model.transform([doc], diagnostics)[0]
