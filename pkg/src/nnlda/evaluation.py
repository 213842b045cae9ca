"""Evaluation: perplexity, topic grouping, lift, feature export, comment generation."""

import csv
import math
from collections import Counter
from dataclasses import dataclass
from typing import List

import numpy as np
from scipy.optimize import linear_sum_assignment

from .corpus import Corpus, Document
from .exceptions import EmptyEvaluation, MissingGoldLabels
from .inference import estep_document
from .prior import alpha_for
from .trainer import TopicModel, _Prepared, run_estep


def log_perplexity(model: TopicModel, corpus: Corpus, n_threads=1):
    """Negative corpus ELBO per word, with a fresh E-step for every document.

    OOV words were already dropped when the corpus was encoded against the
    model vocabulary (see ``Corpus.n_oov``).
    """
    prep = _Prepared(corpus)
    n_words = sum(len(w) for w in prep.words)
    if n_words == 0:
        raise EmptyEvaluation("evaluation corpus contains no in-vocabulary words")
    _, elbo, _ = run_estep(prep.words, model.alphas(prep.side), model.beta, model.config, n_threads)
    return float(-np.sum(elbo) / n_words)


def infer_theta(model: TopicModel, doc: Document):
    """Posterior mean topic proportions xi / sum(xi)."""
    alpha = alpha_for(model.prior, doc.side)
    if len(doc) == 0:
        return alpha / alpha.sum()
    vd = estep_document(doc.words, alpha, model.beta, model.config.estep_tol,
                        model.config.estep_max_iter)
    return vd.xi / vd.xi.sum()


def infer_theta_matrix(model: TopicModel, corpus: Corpus, n_threads=1):
    """``infer_theta`` for every document, shape (M, K)."""
    alphas = model.alphas(corpus.side_matrix)
    theta = alphas / alphas.sum(axis=1, keepdims=True)
    prep = _Prepared(corpus)
    if prep.n_docs:
        xi, _, _ = run_estep(prep.words, alphas[prep.index], model.beta, model.config, n_threads)
        theta[prep.index] = xi / xi.sum(axis=1, keepdims=True)
    return theta


@dataclass
class GroupingReport:
    macro_precision: float
    macro_recall: float
    macro_f1: float
    micro_f1: float
    confusion: np.ndarray
    categories: List[str]
    topic_to_category: dict

    def metrics(self):
        return {
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "micro_f1": self.micro_f1,
        }


def _f1(p, r):
    return 0.0 if p + r == 0 else 2.0 * p * r / (p + r)


def grouping_report(gold, predicted_topics, n_topics):
    """Score topic assignments against gold categories.

    Topics are aligned to categories by maximum-weight matching on the
    confusion matrix; documents on unmatched topics count as misses.
    """
    if any(g is None for g in gold):
        raise MissingGoldLabels("every document needs a gold category")
    categories = sorted(set(gold))
    C = len(categories)
    if C > n_topics:
        raise ValueError(f"{C} gold categories exceed {n_topics} topics")
    cat_idx = {c: i for i, c in enumerate(categories)}
    confusion = np.zeros((C, n_topics), dtype=np.int64)
    for g, t in zip(gold, predicted_topics):
        confusion[cat_idx[g], t] += 1
    rows, cols = linear_sum_assignment(confusion, maximize=True)
    mapping = {int(t): categories[c] for c, t in zip(rows, cols)}

    tp = np.array([confusion[c, t] for c, t in zip(rows, cols)], dtype=float)
    gold_n = confusion.sum(axis=1)[rows].astype(float)
    pred_n = confusion.sum(axis=0)[cols].astype(float)
    precision = np.divide(tp, pred_n, out=np.zeros_like(tp), where=pred_n > 0)
    recall = np.divide(tp, gold_n, out=np.zeros_like(tp), where=gold_n > 0)
    f1 = np.array([_f1(p, r) for p, r in zip(precision, recall)])

    n_docs = confusion.sum()
    n_predicted = pred_n.sum()
    micro_p = tp.sum() / n_predicted if n_predicted else 0.0
    micro_r = tp.sum() / n_docs if n_docs else 0.0
    return GroupingReport(
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        micro_f1=float(_f1(micro_p, micro_r)),
        confusion=confusion,
        categories=categories,
        topic_to_category=mapping,
    )


def grouping_scores(model: TopicModel, corpus: Corpus, n_threads=1):
    """Assign each document its most probable topic and score against gold categories."""
    gold = corpus.categories
    if any(g is None for g in gold):
        raise MissingGoldLabels("corpus has documents without a gold category")
    theta = infer_theta_matrix(model, corpus, n_threads)
    # np.argmax returns the first maximum, i.e. ties go to the lowest index
    return grouping_report(gold, np.argmax(theta, axis=1), model.n_topics)


class LiftTable:
    """Add-one smoothed word and word-given-side frequencies of a corpus.

    Word probabilities are treated as independent within a document, so the
    side marginal cancels and lift reduces to a ratio of word products.
    """

    def __init__(self, corpus: Corpus):
        V = len(corpus.vocab)
        self.V = V
        self.word_counts = np.zeros(V)
        self.side_counts = {}
        for d in corpus.docs:
            key = d.side.tobytes()
            if key not in self.side_counts:
                self.side_counts[key] = np.zeros(V)
            np.add.at(self.side_counts[key], d.words, 1.0)
            np.add.at(self.word_counts, d.words, 1.0)
        self.total = self.word_counts.sum()

    def log_lift(self, doc: Document):
        p_w = (self.word_counts[doc.words] + 1.0) / (self.total + self.V)
        counts = self.side_counts.get(doc.side.tobytes(), np.zeros(self.V))
        p_w_s = (counts[doc.words] + 1.0) / (counts.sum() + self.V)
        return float(np.sum(np.log(p_w)) - np.sum(np.log(p_w_s)))

    def lift(self, doc: Document):
        return math.exp(self.log_lift(doc))


def lift(corpus: Corpus, doc: Document):
    """l(d) = P(w) P(s) / P(w, s) from smoothed corpus frequencies."""
    return LiftTable(corpus).lift(doc)


def lift_all(corpus: Corpus):
    table = LiftTable(corpus)
    return np.array([table.lift(d) for d in corpus.docs])


def export_features(model: TopicModel, corpus: Corpus, path, n_threads=1):
    """Write one row per document: id, theta_1..theta_K, label."""
    theta = infer_theta_matrix(model, corpus, n_threads)
    K = model.n_topics
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["doc_id", *[f"theta_{i + 1}" for i in range(K)], "label"])
        for i, (row, d) in enumerate(zip(theta, corpus.docs)):
            w.writerow([i, *[repr(float(x)) for x in row], "" if d.label is None else d.label])
    return theta


def word_scores(model: TopicModel, s):
    """Mixture of topic rows weighted by the prior mean topic proportions."""
    alpha = alpha_for(model.prior, s)
    theta = alpha / alpha.sum()
    return theta @ model.beta


def _top_indices(scores, n):
    order = np.argsort(-scores, kind="stable")
    return order[: max(0, min(n, len(scores)))]


def generate_comment(model: TopicModel, s, n_words):
    """The ``n_words`` highest-scoring distinct tokens for side vector ``s``."""
    if n_words < 1:
        raise ValueError("n_words must be >= 1")
    return model.vocab.decode(_top_indices(word_scores(model, s), n_words))


def top_words(model: TopicModel, topic, n=5):
    if not 0 <= topic < model.n_topics:
        raise IndexError(f"topic {topic} out of range [0, {model.n_topics})")
    return model.vocab.decode(_top_indices(model.beta[topic], n))


def topic_purity(model: TopicModel, bags, n=5):
    """Number of topics whose top-``n`` words all fall inside a single bag."""
    bag_sets = [set(b) for b in bags]
    return sum(
        any(set(top_words(model, k, n)) <= b for b in bag_sets) for k in range(model.n_topics)
    )


def category_counts(corpus: Corpus):
    return Counter(corpus.categories)
