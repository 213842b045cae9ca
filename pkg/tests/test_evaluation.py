import csv

import numpy as np
import pytest

from nnlda.corpus import SYNTHETIC_BAGS, Corpus, Document, SideSchema, Vocabulary
from nnlda.evaluation import (
    LiftTable,
    export_features,
    generate_comment,
    grouping_report,
    grouping_scores,
    infer_theta,
    infer_theta_matrix,
    lift,
    lift_all,
    log_perplexity,
    top_words,
    word_scores,
)
from nnlda.exceptions import EmptyEvaluation, MissingGoldLabels
from nnlda.prior import FixedPrior
from nnlda.trainer import TopicModel, TrainConfig


def _model(beta, alpha, vocab, schema=SideSchema()):
    K = len(alpha)
    return TopicModel(np.asarray(beta, dtype=float), FixedPrior(alpha), vocab, schema,
                      TrainConfig(n_topics=K, prior_kind="lda"))


def _corpus(word_lists, vocab, categories=None, sides=None, schema=SideSchema()):
    docs = tuple(
        Document(np.asarray(w, dtype=np.int64),
                 np.zeros(schema.dim) if sides is None else np.asarray(sides[i], dtype=float),
                 None, None if categories is None else categories[i])
        for i, w in enumerate(word_lists)
    )
    return Corpus(docs, vocab, schema)


class TestPerplexity:
    def test_perfect_model(self):
        vocab = Vocabulary(["only"])
        corpus = _corpus([[0, 0], [0]], vocab)
        assert log_perplexity(_model([[1.0]], [1.0], vocab), corpus) == pytest.approx(0.0, abs=1e-12)

    def test_uniform_beta(self):
        V = 7
        vocab = Vocabulary([f"w{i}" for i in range(V)])
        corpus = _corpus([[0, 3, 6], [1], [2, 2]], vocab)
        model = _model(np.full((1, V), 1 / V), [1.0], vocab)
        assert log_perplexity(model, corpus) == pytest.approx(np.log(V), rel=1e-12)

    def test_doc_order(self, trained_nnlda, small_synthetic):
        model, _ = trained_nnlda
        rev = Corpus(tuple(reversed(small_synthetic.docs)), small_synthetic.vocab,
                     small_synthetic.side_schema)
        assert log_perplexity(model, rev) == pytest.approx(log_perplexity(model, small_synthetic),
                                                           rel=1e-12)

    def test_empty(self):
        vocab = Vocabulary(["a"])
        with pytest.raises(EmptyEvaluation):
            log_perplexity(_model([[1.0]], [1.0], vocab), _corpus([[]], vocab))


class TestInferTheta:
    def test_empty_doc_is_prior_mean(self):
        vocab = Vocabulary(["a", "b"])
        model = _model([[0.5, 0.5], [0.5, 0.5]], [1.0, 3.0], vocab)
        doc = Document(np.zeros(0, dtype=np.int64), np.zeros(0))
        np.testing.assert_allclose(infer_theta(model, doc), [0.25, 0.75])

    def test_separable(self):
        vocab = Vocabulary(["a", "b", "c", "d"])
        beta = [[0.5, 0.5, 0.0, 0.0], [0.0, 0.0, 0.5, 0.5]]
        model = _model(np.asarray(beta) + 1e-12, [1.0, 1.0], vocab)
        theta = infer_theta(model, Document(np.array([0, 1, 0]), np.zeros(0)))
        assert theta.sum() == pytest.approx(1.0)
        assert theta[0] > theta[1]

    def test_matrix_matches_single(self, trained_nnlda, small_synthetic):
        model, _ = trained_nnlda
        mat = infer_theta_matrix(model, small_synthetic)
        for i in (0, 7, 150):
            np.testing.assert_allclose(mat[i], infer_theta(model, small_synthetic.docs[i]), rtol=1e-12)


class TestGrouping:
    def test_perfect(self):
        gold = ["a"] * 5 + ["b"] * 3 + ["c"] * 4
        pred = [2] * 5 + [0] * 3 + [1] * 4
        rep = grouping_report(gold, pred, 3)
        assert rep.metrics() == {"macro_precision": 1.0, "macro_recall": 1.0,
                                 "macro_f1": 1.0, "micro_f1": 1.0}
        assert rep.confusion.sum() == 12

    def test_permutation_invariant(self, rng):
        gold = list(rng.choice(["w", "x", "y", "z"], size=400))
        pred = rng.integers(0, 5, size=400)
        perm = rng.permutation(5)
        a = grouping_report(gold, pred, 5).metrics()
        b = grouping_report(gold, perm[pred], 5).metrics()
        assert a == b

    def test_hand_example(self):
        gold = ["a", "a", "a", "b", "b"]
        pred = [0, 0, 1, 1, 1]
        rep = grouping_report(gold, pred, 2)
        # a -> topic 0: P=1, R=2/3; b -> topic 1: P=2/3, R=1
        assert rep.macro_precision == pytest.approx(5 / 6)
        assert rep.macro_recall == pytest.approx(5 / 6)
        assert rep.macro_f1 == pytest.approx(0.8)
        assert rep.micro_f1 == pytest.approx(0.8)

    def test_unmatched_topic_counts_as_miss(self):
        rep = grouping_report(["a", "a", "b"], [0, 2, 1], 3)
        assert rep.micro_f1 == pytest.approx(2 * (2 / 2) * (2 / 3) / (1 + 2 / 3))

    def test_random_baseline(self, rng):
        gold = np.repeat(["a", "b", "c", "d"], 500)
        theta = rng.dirichlet(np.ones(4), size=2000)
        rep = grouping_report(list(gold), np.argmax(theta, axis=1), 4)
        assert rep.micro_f1 == pytest.approx(0.25, abs=0.05)

    def test_missing_gold(self, trained_nnlda):
        model, _ = trained_nnlda
        vocab = model.vocab
        corpus = _corpus([[0]], vocab, sides=[np.zeros(4)], schema=model.side_schema)
        with pytest.raises(MissingGoldLabels):
            grouping_scores(model, corpus)

    def test_trained_model(self, trained_nnlda, synthetic_2000):
        model, _ = trained_nnlda
        rep = grouping_scores(model, synthetic_2000)
        for v in rep.metrics().values():
            assert 0.0 <= v <= 1.0
        assert rep.micro_f1 > 0.5


class TestLift:
    def test_constant_side(self):
        vocab = Vocabulary(["a", "b", "c"])
        corpus = _corpus([[0, 1], [2], [0, 0, 2]], vocab)
        for d in corpus.docs:
            assert lift(corpus, d) == pytest.approx(1.0, abs=1e-3)

    def test_synthetic_mostly_below_one(self, synthetic_2000):
        assert np.mean(lift_all(synthetic_2000) < 1.0) > 0.5

    def test_duplication(self, synthetic_2000):
        # add-one smoothing makes this approximate; counts double, pseudocounts don't
        doubled = Corpus(synthetic_2000.docs * 2, synthetic_2000.vocab, synthetic_2000.side_schema)
        a = lift_all(synthetic_2000)
        b = lift_all(doubled)[: len(a)]
        np.testing.assert_allclose(b, a, rtol=0.05)

    def test_hand_value(self):
        schema = SideSchema((("s", ("u", "v")),))
        vocab = Vocabulary(["a", "b"])
        corpus = _corpus([[0, 0], [1]], vocab, sides=[[1, 0], [0, 1]], schema=schema)
        # P(a) = (2+1)/(3+2), P(a|u) = (2+1)/(2+2)
        expected = ((3 / 5) / (3 / 4)) ** 2
        assert LiftTable(corpus).lift(corpus.docs[0]) == pytest.approx(expected)


class TestFeatures:
    def test_shape_and_rows(self, trained_nnlda, synthetic_2000, tmp_path):
        model, _ = trained_nnlda
        path = tmp_path / "f.csv"
        export_features(model, synthetic_2000, path)
        rows = list(csv.reader(open(path)))
        assert rows[0] == ["doc_id", "theta_1", "theta_2", "theta_3", "theta_4", "label"]
        assert len(rows) == 2001
        assert all(len(r) == 6 for r in rows)
        sums = np.array([[float(x) for x in r[1:5]] for r in rows[1:]]).sum(axis=1)
        np.testing.assert_allclose(sums, 1.0, atol=1e-9)

    def test_deterministic(self, trained_nnlda, small_synthetic, tmp_path):
        model, _ = trained_nnlda
        export_features(model, small_synthetic, tmp_path / "a.csv")
        export_features(model, small_synthetic, tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


class TestGeneration:
    def test_degenerate_prior(self):
        vocab = Vocabulary(["a", "b", "c", "d"])
        beta = [[0.1, 0.4, 0.2, 0.3], [0.7, 0.1, 0.1, 0.1]]
        model = _model(beta, [1.0, 1e-12], vocab)
        assert generate_comment(model, np.zeros(0), 3) == ["b", "d", "c"]

    def test_scores_sum_to_one(self, trained_nnlda):
        model, _ = trained_nnlda
        assert word_scores(model, np.array([1.0, 0, 0, 1])).sum() == pytest.approx(1.0)

    def test_tv_quality(self, trained_nnlda):
        model, _ = trained_nnlda
        s = model.side_schema.encode({"product": "TV", "description": "quality"})
        words = generate_comment(model, s, 6)
        assert len(set(words)) == 6
        assert set(words) <= set(model.vocab.tokens)
        assert sum(w in SYNTHETIC_BAGS[("TV", "quality")] for w in words) >= 3

    def test_tie_break_vocab_order(self):
        vocab = Vocabulary(["a", "b", "c"])
        model = _model([[1 / 3, 1 / 3, 1 / 3]], [1.0], vocab)
        assert generate_comment(model, np.zeros(0), 2) == ["a", "b"]


class TestTopWords:
    def test_one_hot_row(self):
        vocab = Vocabulary(["a", "b", "c"])
        model = _model([[0.0, 1.0, 0.0]], [1.0], vocab)
        assert top_words(model, 0, 1) == ["b"]

    def test_clamp(self):
        vocab = Vocabulary(["a", "b", "c"])
        model = _model([[0.2, 0.5, 0.3]], [1.0], vocab)
        assert top_words(model, 0, 10) == ["b", "c", "a"]

    def test_out_of_range(self):
        vocab = Vocabulary(["a"])
        with pytest.raises(IndexError):
            top_words(_model([[1.0]], [1.0], vocab), 1, 1)

    def test_trained_topics_pure(self, trained_nnlda):
        model, _ = trained_nnlda
        bags = [set(b) for b in SYNTHETIC_BAGS.values()]
        pure = sum(any(set(top_words(model, k, 5)) <= b for b in bags) for k in range(4))
        assert pure >= 3
