"""Tokenizer, vocabulary, two-document scoring, and keyword weighting."""

from __future__ import annotations

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from keywatch import stopwords
from keywatch.errors import (
    DivisionByZeroDocFreq,
    EmptyDescriptionSet,
    EmptyDocument,
    EmptyVocabulary,
    ZeroDifferenceVector,
)
from keywatch.induction import (
    Corpus,
    Provenance,
    TfidfMatrix,
    VectorizerConfig,
    build_corpus,
    build_vocabulary,
    derive_keyword_weights,
    idf,
    induce,
    keyword_model_hash,
    load_keyword_model,
    save_keyword_model,
    serialize_keyword_model,
    tf,
    tfidf_matrix,
    tokenize,
)

LN2 = math.log(2)


def _plain_config(**kwargs) -> VectorizerConfig:
    defaults = dict(max_features=100, min_df=1, max_df=1.0)
    defaults.update(kwargs)
    return VectorizerConfig(**defaults)


class TestTokenize:
    def test_token_grammar(self):
        # single-character runs are dropped by the >=2-char rule
        assert tokenize("A man, walking a bike.") == ["man", "walking", "bike"]

    def test_empty(self):
        assert tokenize("") == []

    def test_alphanumeric_runs(self):
        assert tokenize("X2-y9 X2") == ["x2", "y9", "x2"]

    def test_underscore_separates(self):
        assert tokenize("ab_cd") == ["ab", "cd"]

    @given(st.text(max_size=200))
    @settings(max_examples=200, deadline=None)
    def test_tokens_match_grammar(self, text):
        for token in tokenize(text):
            assert len(token) >= 2
            assert token == token.lower()
            assert all(ch.isalnum() for ch in token)


class TestBuildCorpus:
    def test_space_joined(self):
        corpus = build_corpus(["a b", "c"], ["d"])
        assert corpus.doc_normal == "a b c"
        assert corpus.doc_anomalous == "d"
        assert corpus.N == 2

    def test_empty_side(self):
        with pytest.raises(EmptyDescriptionSet) as err:
            build_corpus([], ["d"])
        assert err.value.side == "normal"

    def test_single_description_identity(self):
        corpus = build_corpus(["only one"], ["another"])
        assert corpus.doc_normal == "only one"
        assert corpus.doc_anomalous == "another"


class TestBuildVocabulary:
    def test_max_df_fraction_drops_shared_terms(self):
        # max_df 0.95 over two documents allows df <= floor(1.9) = 1
        corpus = build_corpus(["walkway people"], ["walkway bicycle"])
        vocab = build_vocabulary(corpus, _plain_config(max_df=0.95))
        assert vocab == ["bicycle", "people"]

    def test_identity_bounds_keep_everything(self):
        corpus = build_corpus(["walkway people"], ["walkway bicycle"])
        vocab = build_vocabulary(corpus, _plain_config(min_df=0, max_df=1.0))
        assert vocab == ["bicycle", "people", "walkway"]

    def test_all_stop_words_is_empty_vocabulary(self):
        corpus = build_corpus(["the and is"], ["or the and"])
        with pytest.raises(EmptyVocabulary):
            build_vocabulary(corpus, _plain_config())

    def test_max_features_keeps_most_frequent(self):
        corpus = build_corpus(
            ["common common common rare"], ["common middle middle other"]
        )
        vocab = build_vocabulary(corpus, _plain_config(max_features=2))
        # ranked by total count: common(4), middle(2); then sorted lexically
        assert vocab == ["common", "middle"]

    def test_tie_break_lexicographic(self):
        corpus = build_corpus(["zebra apple"], ["zebra apple mango"])
        vocab = build_vocabulary(corpus, _plain_config(max_features=2))
        # counts: zebra=2, apple=2, mango=1; tie between apple/zebra
        assert vocab == ["apple", "zebra"]

    def test_integer_min_df(self):
        corpus = build_corpus(["shared solo"], ["shared alone"])
        vocab = build_vocabulary(corpus, _plain_config(min_df=2))
        assert vocab == ["shared"]

    def test_determinism(self):
        corpus = build_corpus(["bb aa cc aa"], ["cc dd bb ee"])
        cfg = _plain_config(max_features=3)
        assert build_vocabulary(corpus, cfg) == build_vocabulary(corpus, cfg)


class TestVectorizerConfig:
    def test_ngram_rejected(self):
        with pytest.raises(ValueError):
            VectorizerConfig(ngram_n=2)

    def test_bad_fraction(self):
        with pytest.raises(ValueError):
            VectorizerConfig(min_df=1.5)

    def test_min_over_max(self):
        with pytest.raises(ValueError):
            VectorizerConfig(min_df=2, max_df=0.4)

    def test_unknown_stop_list(self):
        with pytest.raises(ValueError):
            VectorizerConfig(stop_words="klingon-v1")

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            VectorizerConfig(variant="tf-only")


class TestTf:
    def test_fraction(self):
        assert tf("bike", ["bike", "bike", "man"]) == pytest.approx(2 / 3)

    def test_absent_term(self):
        assert tf("car", ["bike", "man"]) == 0.0

    def test_identity(self):
        assert tf("bike", ["bike"]) == 1.0

    def test_empty_document(self):
        with pytest.raises(EmptyDocument):
            tf("bike", [])


class TestIdf:
    def test_shared_term_is_zero(self):
        assert idf("bike", (["bike"], ["bike", "man"])) == 0.0

    def test_single_document_term(self):
        assert idf("bike", (["bike"], ["man"])) == pytest.approx(LN2, abs=1e-15)

    def test_absent_term(self):
        with pytest.raises(DivisionByZeroDocFreq):
            idf("car", (["bike"], ["man"]))


class TestTfidfMatrix:
    def test_hand_computed_example(self):
        corpus = build_corpus(["man walking"], ["bike bike"])
        m = tfidf_matrix(corpus, ["bike", "man", "walking"], _plain_config())
        np.testing.assert_allclose(
            m.scores,
            [[0.0, LN2 / 2, LN2 / 2], [LN2, 0.0, 0.0]],
            atol=1e-15,
        )

    def test_shared_terms_score_zero(self):
        corpus = build_corpus(["walkway people"], ["walkway bicycle"])
        m = tfidf_matrix(corpus, ["walkway"], _plain_config())
        assert m.scores[0][0] == 0.0 and m.scores[1][0] == 0.0

    def test_identical_documents_all_zero(self):
        corpus = build_corpus(["bicycle walkway"], ["bicycle walkway"])
        vocab = build_vocabulary(corpus, _plain_config())
        m = tfidf_matrix(corpus, vocab, _plain_config())
        assert np.all(m.scores == 0.0)

    def test_denominator_counts_out_of_vocabulary_tokens(self):
        # "extra" is not in the vocabulary but still counts toward tf totals
        corpus = build_corpus(["bike extra extra extra"], ["man"])
        m = tfidf_matrix(corpus, ["bike"], _plain_config())
        assert m.scores[0][0] == pytest.approx(LN2 / 4, abs=1e-15)


class TestDeriveKeywordWeights:
    def test_hand_computed(self):
        m = TfidfMatrix(terms=("bike", "walking"), scores=np.array([[0.0, 0.8], [0.6, 0.0]]))
        model = derive_keyword_weights(m)
        np.testing.assert_allclose(model.weights, [0.6, -0.8], atol=1e-15)

    def test_zero_difference(self):
        m = TfidfMatrix(terms=("a1", "b2"), scores=np.array([[0.2, 0.3], [0.2, 0.3]]))
        with pytest.raises(ZeroDifferenceVector):
            derive_keyword_weights(m)

    def test_scale_invariance_of_normalization(self):
        m = TfidfMatrix(terms=("a1", "b2"), scores=np.array([[0.0, 0.0], [2.0, 0.0]]))
        model = derive_keyword_weights(m)
        np.testing.assert_allclose(model.weights, [1.0, 0.0], atol=1e-15)

    def test_unit_norm(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            scores = rng.random((2, 6))
            model = derive_keyword_weights(
                TfidfMatrix(terms=tuple(f"t{i}" for i in range(6)), scores=scores)
            )
            assert abs(np.linalg.norm(model.weights) - 1.0) <= 1e-9

    def test_sign_semantics(self):
        corpus = build_corpus(
            ["pedestrians walking walkway"], ["bicycle speeding walkway"]
        )
        cfg = _plain_config()
        model = induce(["pedestrians walking walkway"], ["bicycle speeding walkway"], cfg)
        by_term = dict(zip(model.terms, model.weights))
        assert by_term["bicycle"] > 0 and by_term["speeding"] > 0
        assert by_term["pedestrians"] < 0 and by_term["walking"] < 0
        assert by_term["walkway"] == 0.0
        del corpus


def brute_force_tfidf(corpus: Corpus, terms, stop_words):
    """Independent oracle: recompute the score definitions the slow way."""
    docs = []
    for raw in (corpus.doc_normal, corpus.doc_anomalous):
        tokens = []
        for token in tokenize(raw):
            if token not in stop_words:
                tokens.append(token)
        docs.append(tokens)
    scores = []
    for doc in docs:
        row = []
        for term in terms:
            count = 0
            for token in doc:
                if token == term:
                    count += 1
            term_tf = count / len(doc)
            n_docs_with_term = 0
            for other in docs:
                if term in other:
                    n_docs_with_term += 1
            term_idf = math.log(2 / n_docs_with_term)
            row.append(term_tf * term_idf)
        scores.append(row)
    return scores


class TestOracleEquivalence:
    def test_matches_brute_force_on_random_corpora(self):
        rng = random.Random(99)
        pool = [f"term{i:02d}" for i in range(40)]
        cfg = _plain_config(max_features=40, min_df=1, max_df=1.0)
        stop_words = cfg.stop_word_set()
        for _ in range(200):
            doc_a = " ".join(rng.choices(pool, k=rng.randint(3, 60)))
            doc_b = " ".join(rng.choices(pool, k=rng.randint(3, 60)))
            corpus = build_corpus([doc_a], [doc_b])
            vocab = build_vocabulary(corpus, cfg)
            matrix = tfidf_matrix(corpus, vocab, cfg)
            expected = brute_force_tfidf(corpus, vocab, stop_words)
            np.testing.assert_allclose(matrix.scores, expected, atol=1e-12, rtol=0)


class TestSmoothedVariant:
    def test_matches_library_vectorizer(self):
        sklearn_text = pytest.importorskip("sklearn.feature_extraction.text")
        cfg = _plain_config(variant="smoothed")
        corpus = build_corpus(
            ["people walking along the walkway near grass"],
            ["a bicycle speeding past people on the walkway"],
        )
        vocab = build_vocabulary(corpus, cfg)
        ours = tfidf_matrix(corpus, vocab, cfg)

        stop_words = cfg.stop_word_set()
        vectorizer = sklearn_text.TfidfVectorizer(
            vocabulary=vocab,
            tokenizer=lambda text: [t for t in tokenize(text) if t not in stop_words],
            preprocessor=lambda text: text,
            lowercase=False,
            norm="l2",
            smooth_idf=True,
            sublinear_tf=False,
            token_pattern=None,
        )
        theirs = vectorizer.fit_transform(
            [corpus.doc_normal, corpus.doc_anomalous]
        ).toarray()
        np.testing.assert_allclose(ours.scores, theirs, atol=1e-12)

    def test_smoothed_shared_terms_survive(self):
        cfg = _plain_config(variant="smoothed")
        corpus = build_corpus(["walkway people"], ["walkway bicycle"])
        m = tfidf_matrix(corpus, ["walkway"], cfg)
        assert m.scores[0][0] > 0 and m.scores[1][0] > 0


class TestSerialization:
    def _model(self):
        return induce(
            ["people walking on the walkway", "pedestrians strolling"],
            ["a bicycle speeding", "bicycle rider weaving"],
            _plain_config(max_features=10),
            Provenance(dataset="toy", seed=7, model_id="stub-model"),
        )

    def test_roundtrip(self, tmp_path):
        model = self._model()
        path = tmp_path / "keywords.tsv"
        save_keyword_model(model, path)
        loaded = load_keyword_model(path)
        assert loaded.terms == model.terms
        np.testing.assert_array_equal(loaded.weights, model.weights)
        assert loaded.vectorizer == model.vectorizer
        assert loaded.provenance == model.provenance
        assert keyword_model_hash(loaded) == keyword_model_hash(model)

    def test_deterministic_bytes(self):
        a = serialize_keyword_model(self._model())
        b = serialize_keyword_model(self._model())
        assert a.encode() == b.encode()

    def test_header_carries_stop_list_identity(self):
        text = serialize_keyword_model(self._model())
        assert f"stop_words\t{stopwords.STOP_LIST_ID}" in text
        assert f"stop_words_hash\t{stopwords.stop_list_hash()}" in text

    def test_df_types_survive_roundtrip(self, tmp_path):
        model = induce(
            ["people walking"], ["bicycle speeding"], _plain_config(min_df=1, max_df=0.95)
        )
        path = tmp_path / "keywords.tsv"
        save_keyword_model(model, path)
        loaded = load_keyword_model(path)
        assert isinstance(loaded.vectorizer.min_df, int)
        assert isinstance(loaded.vectorizer.max_df, float)


class TestEqSixProperties:
    def test_scale_invariance(self):
        rng = np.random.default_rng(11)
        terms = tuple(f"t{i}" for i in range(8))
        for _ in range(100):
            scores = rng.random((2, 8))
            scale = float(rng.uniform(1e-3, 1e3))
            base = derive_keyword_weights(TfidfMatrix(terms=terms, scores=scores))
            scaled = derive_keyword_weights(TfidfMatrix(terms=terms, scores=scores * scale))
            np.testing.assert_allclose(base.weights, scaled.weights, atol=1e-9)

    def test_log_base_cancels(self):
        # weights computed from ln- and log2-based scores agree, which is why
        # pinning the natural log is safe
        rng = np.random.default_rng(12)
        terms = tuple(f"t{i}" for i in range(5))
        tf_scores = rng.random((2, 5))
        in_one_doc = rng.random(5) < 0.5
        idf_ln = np.where(in_one_doc, math.log(2), 0.0)
        idf_log2 = np.where(in_one_doc, 1.0, 0.0)
        if not in_one_doc.any():
            in_one_doc[0] = True
            idf_ln[0] = math.log(2)
            idf_log2[0] = 1.0
        w_ln = derive_keyword_weights(TfidfMatrix(terms=terms, scores=tf_scores * idf_ln))
        w_log2 = derive_keyword_weights(TfidfMatrix(terms=terms, scores=tf_scores * idf_log2))
        np.testing.assert_allclose(w_ln.weights, w_log2.weights, atol=1e-12)
