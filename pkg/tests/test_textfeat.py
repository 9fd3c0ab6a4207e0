import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crashsev.diagnostics import Diagnostics
from crashsev.prep import NUMERIC, TEXT, FeatureMatrix
from crashsev.textfeat import (EmbeddingModel, FusionSchema, TfidfModel, embed_document,
                               embed_documents, fuse_features, idf_value, tfidf_fit,
                               tfidf_transform, tokenize, w2v_train)

WORDS = st.text(alphabet="abcxyz", min_size=1, max_size=4)


@pytest.mark.parametrize("text,tokens", [
    ("Unit 1 struck Unit 2.", ["unit", "1", "struck", "unit", "2"]),
    ("", []),
    ("REAR-ENDED", ["rear", "ended"]),
    ("v1_driver  fled!!", ["v1", "driver", "fled"]),
])
def test_tokenize(text, tokens):
    assert tokenize(text) == tokens


def test_tokenize_stopwords():
    assert tokenize("the car hit the pole", stopwords=["the"]) == ["car", "hit", "pole"]


@given(st.text())
def test_tokenize_idempotent_on_joined_output(text):
    toks = tokenize(text)
    assert tokenize(" ".join(toks)) == toks


@pytest.mark.parametrize("n,df,expected", [(2, 1, 1.0), (4, 1, 1.6931471805599454),
                                           (10, 10, 0.9046898201956751)])
def test_idf_values(n, df, expected):
    assert idf_value(n, df) == pytest.approx(expected, abs=1e-12)


@given(st.integers(1, 500), st.data())
def test_idf_non_increasing_in_df(n, data):
    a = data.draw(st.integers(1, n))
    b = data.draw(st.integers(a, n))
    assert idf_value(n, b) <= idf_value(n, a)


def test_vocabulary_ranks_by_document_frequency_then_term():
    model = tfidf_fit([["b", "a", "c"], ["b", "a"], ["d", "b"]], max_vocab=3)
    assert model.terms == ["b", "a", "c"]
    assert model.n_docs == 3 and model.doc_freq["b"] == 3


def test_empty_corpus_raises():
    with pytest.raises(ValueError):
        tfidf_fit([])


def test_single_token_doc_is_unit_vector():
    model = tfidf_fit([["car", "pole"], ["car"]])
    vec = tfidf_transform(model, ["pole"])
    assert vec.tolist() == [0.0, 1.0]


def test_transform_counts_and_ignores_oov():
    model = tfidf_fit([["a", "b"], ["a"], ["c"], ["d"]])
    vec = tfidf_transform(model, ["a", "a", "b", "zzz"])
    raw = np.zeros(len(model.terms))
    raw[model.vocabulary["a"]] = 2 * idf_value(4, 2)
    raw[model.vocabulary["b"]] = idf_value(4, 1)
    assert np.allclose(vec, raw / np.linalg.norm(raw))


def test_empty_doc_zero_vector_with_diagnostic():
    model = tfidf_fit([["a"]])
    diag = Diagnostics()
    assert not tfidf_transform(model, [], diag).any()
    assert not tfidf_transform(model, ["oov"], diag).any()
    assert diag["empty_tfidf_vector"] == 2


@given(st.lists(st.lists(WORDS, max_size=8), min_size=1, max_size=10),
       st.lists(st.lists(WORDS, max_size=8), min_size=1, max_size=5))
def test_tfidf_norm_is_zero_or_one(corpus, docs):
    model = tfidf_fit(corpus, max_vocab=5)
    norms = np.linalg.norm(model.transform(docs), axis=1)
    assert np.all((norms == 0) | (np.abs(norms - 1) <= 1e-9))


def test_tfidf_save_load(tmp_path):
    model = tfidf_fit([["a", "b"], ["b", "c"], ["c"]])
    model.save(tmp_path / "t.bin")
    back = TfidfModel.load(tmp_path / "t.bin")
    assert back.terms == model.terms and np.array_equal(back.idf, model.idf)


def interchangeable_corpus(seed=0, n_docs=400):
    """'crash' and 'collision' share every context; other terms are drawn at random."""
    rng = np.random.default_rng(seed)
    contexts = [("vehicle", "struck", "pole"), ("unit", "rear", "ended"),
                ("driver", "lost", "control")]
    filler = [f"w{i}" for i in range(60)]
    docs = []
    for _ in range(n_docs):
        ctx = contexts[rng.integers(len(contexts))]
        key = "crash" if rng.random() < 0.5 else "collision"
        pre = list(rng.choice(filler, 3))
        docs.append(pre + [ctx[0], ctx[1], key, ctx[2]] + list(rng.choice(filler, 3)))
    return docs


@pytest.fixture(scope="module")
def embeddings():
    return w2v_train(interchangeable_corpus(), dim=32, epochs=5, seed=7)


def test_interchangeable_terms_are_close(embeddings):
    rng = np.random.default_rng(0)
    others = [t for t in embeddings.terms if t not in ("crash", "collision")]
    sample = rng.choice(others, 50, replace=False)
    baseline = np.mean([embeddings.cosine("crash", t) for t in sample])
    assert embeddings.cosine("crash", "collision") > baseline


def test_training_is_bit_reproducible(embeddings):
    again = w2v_train(interchangeable_corpus(), dim=32, epochs=5, seed=7)
    assert again.input_vectors.tobytes() == embeddings.input_vectors.tobytes()


def test_loss_settles_over_second_half(embeddings):
    hist = embeddings.loss_history
    half = hist[len(hist) // 2:]
    assert all(b <= a * 1.05 for a, b in zip(half, half[1:]))


def test_token_matrix_shape(embeddings):
    doc = (["crash"] * 200)
    assert embeddings.token_matrix(doc).shape == (200, embeddings.dim)


def test_mean_pooling_cases(embeddings):
    w = "crash"
    assert np.allclose(embed_document(embeddings, [w]), embeddings.vector(w))
    assert np.allclose(embed_document(embeddings, [w, w]), embed_document(embeddings, [w]))
    diag = Diagnostics()
    assert not embed_document(embeddings, ["nope"], diag).any()
    assert diag["empty_embedding"] == 1


@given(st.permutations(["crash", "pole", "driver", "unit", "w1", "lost"]))
def test_pooling_is_order_invariant(embeddings, perm):
    base = embed_document(embeddings, ["crash", "pole", "driver", "unit", "w1", "lost"])
    assert np.allclose(embed_document(embeddings, perm), base, atol=1e-6)


def test_embed_documents_rows(embeddings):
    out = embed_documents(embeddings, [["crash"], [], ["pole"]])
    assert out.shape == (3, embeddings.dim) and not out[1].any()


def test_empty_vocabulary_raises():
    with pytest.raises(ValueError):
        w2v_train([["a", "b"]], min_count=2)


def test_embedding_save_load(tmp_path, embeddings):
    embeddings.save(tmp_path / "e.bin")
    back = EmbeddingModel.load(tmp_path / "e.bin")
    assert back.terms == embeddings.terms
    assert np.array_equal(back.input_vectors, embeddings.input_vectors)


def structured(n, d):
    X = np.arange(n * d, dtype=float).reshape(n, d)
    return FeatureMatrix(values=X, missing_mask=np.zeros_like(X, dtype=bool),
                         feature_names=[f"s{i}" for i in range(d)], labels=np.zeros(n, np.int64),
                         row_ids=np.arange(n).astype(object), kinds=[NUMERIC] * d)


@pytest.mark.parametrize("d1,d2", [(100, 100), (100, 500)])
def test_fusion_widths(d1, d2):
    out = fuse_features(structured(3, d1), np.ones((3, d2)))
    assert out.n_cols == d1 + d2
    assert out.feature_names[d1] == "nlp:0" and out.kinds[-1] == TEXT
    assert np.array_equal(out.values[:, :d1], structured(3, d1).values)


def test_fusion_identity_without_text():
    s = structured(2, 4)
    assert fuse_features(s, None) is s


def test_fusion_schema_rejects_mismatch():
    schema = FusionSchema(("a", "b"), ("t",))
    assert schema.fuse([1.0, 2.0], [3.0]).tolist() == [1.0, 2.0, 3.0]
    with pytest.raises(ValueError):
        schema.fuse([1.0, 2.0], [3.0, 4.0])
    with pytest.raises(ValueError):
        fuse_features(structured(2, 2), np.ones((3, 1)))


def test_idf_uses_natural_log():
    assert idf_value(4, 1) == pytest.approx(math.log(2) + 1)
