"""Narrative featurization: tokenizer, TF-IDF, skip-gram embeddings, feature fusion."""

from .fuse import TEXT_PREFIX, FusionSchema, fuse_features
from .tfidf import TfidfModel, idf_value, tfidf_fit, tfidf_transform, tokenize
from .word2vec import EmbeddingModel, embed_document, embed_documents, w2v_train

__all__ = [
    "TEXT_PREFIX", "EmbeddingModel", "FusionSchema", "TfidfModel", "embed_document",
    "embed_documents", "fuse_features", "idf_value", "tfidf_fit", "tfidf_transform", "tokenize",
    "w2v_train",
]
