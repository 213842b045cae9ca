"""scikit-learn compatible wrapper around the training and inference routines."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import evaluation, trainer
from ._validation import check_corpus
from .prior import AdamConfig


class NNLDA(TransformerMixin, BaseEstimator):
    """Topic model whose document prior is driven by side data.

    Parameters
    ----------
    n_topics : int
        Number of topics K.
    prior : {"nnlda", "dmr", "lda"}
        Neural-network prior, Dirichlet-multinomial regression, or a fixed
        symmetric prior (plain LDA).
    em_tol : float
        Relative change in corpus ELBO below which EM stops.
    learning_rate, weight_decay, batch_size : Adam settings for the prior.
    random_state : int
        Seed for topic initialization, network weights and minibatch order.
    n_threads : int
        Worker threads for the E-step; results do not depend on it.

    Attributes
    ----------
    model_ : TopicModel
    components_ : ndarray of shape (n_topics, n_words)
        Topic-word probabilities.
    report_ : TrainReport
    """

    def __init__(
        self,
        n_topics=4,
        prior="nnlda",
        em_tol=1e-4,
        max_em_iters=200,
        estep_tol=1e-5,
        estep_max_iter=100,
        learning_rate=0.001,
        weight_decay=0.1,
        batch_size=64,
        gamma_steps_per_em=None,
        random_state=0,
        n_threads=1,
    ):
        self.n_topics = n_topics
        self.prior = prior
        self.em_tol = em_tol
        self.max_em_iters = max_em_iters
        self.estep_tol = estep_tol
        self.estep_max_iter = estep_max_iter
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.gamma_steps_per_em = gamma_steps_per_em
        self.random_state = random_state
        self.n_threads = n_threads

    def _train_config(self):
        return trainer.TrainConfig(
            n_topics=self.n_topics,
            prior_kind=self.prior,
            em_tol=self.em_tol,
            max_em_iters=self.max_em_iters,
            estep_tol=self.estep_tol,
            estep_max_iter=self.estep_max_iter,
            adam=AdamConfig(lr=self.learning_rate, weight_decay=self.weight_decay,
                            batch_size=self.batch_size),
            gamma_steps_per_em=self.gamma_steps_per_em,
            seed=self.random_state if self.random_state is not None else 0,
        )

    def fit(self, X, y=None, side=None):
        """Fit on documents ``X`` (a Corpus, raw strings or token lists).

        ``side`` holds per-document side data when ``X`` is not a Corpus:
        a list of ``{column: category}`` dicts or a numeric (n_docs, q) array.
        ``y`` is ignored.
        """
        corpus = check_corpus(X, side)
        self.model_, self.report_ = trainer.fit(corpus, self._train_config(),
                                                n_threads=self.n_threads)
        self.components_ = self.model_.beta
        self.vocabulary_ = self.model_.vocab
        self.n_iter_ = self.report_.iterations
        return self

    def _corpus(self, X, side):
        check_is_fitted(self, "model_")
        return check_corpus(X, side, vocab=self.model_.vocab, side_schema=self.model_.side_schema)

    def transform(self, X, side=None):
        """Posterior topic proportions, shape (n_docs, n_topics)."""
        return evaluation.infer_theta_matrix(self._fitted(), self._corpus(X, side), self.n_threads)

    def _fitted(self):
        check_is_fitted(self, "model_")
        return self.model_

    def predict(self, X, side=None):
        """Most probable topic per document (ties go to the lowest index)."""
        return np.argmax(self.transform(X, side), axis=1)

    def perplexity(self, X, side=None):
        """Log-perplexity (negative per-word ELBO); lower is better."""
        return evaluation.log_perplexity(self._fitted(), self._corpus(X, side), self.n_threads)

    def score(self, X, y=None, side=None):
        """Per-word ELBO, i.e. the negated log-perplexity (higher is better)."""
        return -self.perplexity(X, side)

    def alpha(self, side):
        """Dirichlet parameters the fitted prior assigns to rows of ``side``."""
        model = self._fitted()
        if len(side) and isinstance(side[0], dict):
            side = np.stack([model.side_schema.encode(s) for s in side])
        return model.alphas(np.asarray(side, dtype=np.float64))
