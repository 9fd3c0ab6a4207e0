"""Skip-gram word embeddings trained with negative sampling, plus mean-pooled documents."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..container import read_container, write_container
from ..diagnostics import Diagnostics
from . import _sgns

EMBED_MAGIC = b"CSEVEMB\x00"
EMBED_VERSION = 1


@dataclass
class EmbeddingModel:
    vocabulary: dict[str, int]
    input_vectors: np.ndarray
    context_vectors: np.ndarray
    counts: list[int]
    params: dict
    loss_history: list[float] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.input_vectors.shape[1]

    @property
    def terms(self) -> list[str]:
        return sorted(self.vocabulary, key=self.vocabulary.__getitem__)

    def vector(self, term: str) -> np.ndarray:
        return self.input_vectors[self.vocabulary[term]]

    def token_matrix(self, doc: Sequence[str]) -> np.ndarray:
        """Stack the vectors of in-vocabulary tokens, one row per token."""
        rows = [self.vocabulary[t] for t in doc if t in self.vocabulary]
        return self.input_vectors[rows].astype(np.float64)

    def cosine(self, a: str, b: str) -> float:
        u, v = self.vector(a).astype(np.float64), self.vector(b).astype(np.float64)
        return float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))

    def save(self, path) -> None:
        header = {"kind": "word2vec", "terms": self.terms, "counts": self.counts,
                  "params": self.params, "loss_history": self.loss_history}
        write_container(path, EMBED_MAGIC, EMBED_VERSION, header,
                        {"input_vectors": self.input_vectors.astype("<f4"),
                         "context_vectors": self.context_vectors.astype("<f4")})

    @classmethod
    def load(cls, path) -> "EmbeddingModel":
        header, arrays = read_container(path, EMBED_MAGIC, (EMBED_VERSION,))
        return cls(vocabulary={t: i for i, t in enumerate(header["terms"])},
                   input_vectors=arrays["input_vectors"],
                   context_vectors=arrays["context_vectors"], counts=header["counts"],
                   params=header["params"], loss_history=header["loss_history"])


def w2v_train(corpus: Sequence[Sequence[str]], dim: int = 100, window: int = 5,
              negatives: int = 5, epochs: int = 15, min_count: int = 2,
              learning_rate: float = 0.025, seed: int = 0, workers: int = 1) -> EmbeddingModel:
    """Train skip-gram embeddings with negative sampling.

    The learning rate decays linearly from ``learning_rate`` to near zero
    over all epochs. Negatives are drawn from the unigram distribution
    raised to 0.75. ``workers=1`` is bit-reproducible for a given seed;
    ``workers > 1`` trains document chunks concurrently and is not.
    """
    counts = Counter(t for doc in corpus for t in doc)
    kept = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    if not kept:
        raise ValueError(f"vocabulary is empty after applying min_count={min_count}")
    vocab = {t: i for i, t in enumerate(kept)}
    ids = [[vocab[t] for t in doc if t in vocab] for doc in corpus]
    lengths = np.array([len(d) for d in ids], dtype=np.int64)
    if not np.any(lengths >= 2) or window < 1:
        raise ValueError("corpus has no token pair within the window")
    doc_ptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    tokens = np.fromiter((t for d in ids for t in d), dtype=np.int32, count=int(doc_ptr[-1]))

    rng = np.random.default_rng(seed)
    V = len(kept)
    W_in = ((rng.random((V, dim)) - 0.5) / dim).astype(np.float32)
    W_out = np.zeros((V, dim), np.float32)
    freq = np.array([counts[t] for t in kept], dtype=np.float64) ** 0.75
    cum_neg = np.cumsum(freq)
    kernel_seed = int(rng.integers(1, 2**63))
    if workers > 1:
        n_chunks = max(workers * 4, 1)
        losses = _sgns.train_parallel(tokens, doc_ptr, W_in, W_out, cum_neg, window, negatives,
                                      epochs, learning_rate, kernel_seed, n_chunks)
    else:
        losses = _sgns.train_serial(tokens, doc_ptr, W_in, W_out, cum_neg, window, negatives,
                                    epochs, learning_rate, kernel_seed)
    if not (np.all(np.isfinite(W_in)) and np.all(np.isfinite(W_out))):
        raise FloatingPointError("word2vec training diverged")
    params = dict(dim=dim, window=window, negatives=negatives, epochs=epochs,
                  min_count=min_count, learning_rate=learning_rate, seed=seed, workers=workers)
    return EmbeddingModel(vocabulary=vocab, input_vectors=W_in, context_vectors=W_out,
                          counts=[counts[t] for t in kept], params=params,
                          loss_history=[float(x) for x in losses])


def embed_document(model: EmbeddingModel, doc: Sequence[str],
                   diagnostics: Diagnostics | None = None) -> np.ndarray:
    """Mean of the in-vocabulary token vectors; zero vector when there are none."""
    mat = model.token_matrix(doc)
    if len(mat) == 0:
        if diagnostics is not None:
            diagnostics.add("empty_embedding")
        return np.zeros(model.dim)
    return mat.mean(axis=0)


def embed_documents(model: EmbeddingModel, docs: Sequence[Sequence[str]],
                    diagnostics: Diagnostics | None = None) -> np.ndarray:
    out = np.zeros((len(docs), model.dim))
    for r, doc in enumerate(docs):
        out[r] = embed_document(model, doc, diagnostics)
    return out
