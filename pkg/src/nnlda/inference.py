"""Per-document variational inference and the topic-word M-step.

The batched E-step runs many documents in lock-step over one flat array of
word tokens.  Each document keeps its own convergence flag and is frozen once
converged, so its trajectory is identical to running it alone.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch
from .numerics import dirichlet_expectation_log, log_gamma, logsumexp

BETA_FLOOR = 1e-12
ESTEP_TOL = 1e-5
ESTEP_MAX_ITER = 100


@dataclass
class VariationalDoc:
    phi: np.ndarray  # (N_d, K), rows on the simplex
    xi: np.ndarray  # (K,)
    elbo: float = np.nan
    converged: bool = True
    n_iter: int = 0


def update_phi(words, xi, beta):
    """Responsibilities phi_ni proportional to beta[i, w_n] * exp(psi(xi_i))."""
    words = np.asarray(words, dtype=np.int64)
    log_phi = np.log(beta[:, words].T) + dirichlet_expectation_log(xi)
    return np.exp(log_phi - logsumexp(log_phi, axis=1))


def update_xi(alpha, phi):
    return np.asarray(alpha, dtype=np.float64) + np.asarray(phi).sum(axis=0)


def _phi_entropy_terms(phi, log_phi):
    return np.where(phi > 0.0, phi * log_phi, 0.0)


def elbo_document(words, alpha, vd, beta):
    """Evidence lower bound of one document under (phi, xi).

    Sum of the prior, topic-assignment and word terms minus the entropy terms
    of q(theta) and q(z).
    """
    words = np.asarray(words, dtype=np.int64)
    alpha = np.asarray(alpha, dtype=np.float64)
    phi = np.asarray(vd.phi, dtype=np.float64)
    xi = np.asarray(vd.xi, dtype=np.float64)
    if phi.shape != (len(words), len(alpha)) or xi.shape != alpha.shape:
        raise DimensionMismatch("phi/xi shapes do not match the document and alpha")
    elog = dirichlet_expectation_log(xi)
    prior = log_gamma(alpha.sum()) - np.sum(log_gamma(alpha)) + np.dot(alpha - 1.0, elog)
    if len(words):
        log_beta = np.log(beta[:, words].T)
        with np.errstate(divide="ignore"):
            log_phi = np.log(phi)
        assign_and_words = np.sum(phi * (elog + log_beta))
        ent_z = -np.sum(_phi_entropy_terms(phi, log_phi))
    else:
        assign_and_words = 0.0
        ent_z = 0.0
    ent_theta = -(log_gamma(xi.sum()) - np.sum(log_gamma(xi)) + np.dot(xi - 1.0, elog))
    return float(prior + assign_and_words + ent_z + ent_theta)


def _segment_sum(values, offsets, n_segments):
    """Sum consecutive row blocks ``values[offsets[d]:offsets[d+1]]``."""
    out = np.zeros((n_segments,) + values.shape[1:])
    nonempty = offsets[1:] > offsets[:-1]
    if values.shape[0]:
        out[nonempty] = np.add.reduceat(values, offsets[:-1][nonempty], axis=0)
    return out


class _Batch:
    def __init__(self, word_lists):
        lengths = np.array([len(w) for w in word_lists], dtype=np.int64)
        self.n_docs = len(word_lists)
        self.lengths = lengths
        self.offsets = np.concatenate([[0], np.cumsum(lengths)])
        self.words = (
            np.concatenate([np.asarray(w, dtype=np.int64) for w in word_lists])
            if self.n_docs and lengths.sum()
            else np.zeros(0, dtype=np.int64)
        )
        self.doc_of = np.repeat(np.arange(self.n_docs), lengths)


def _batch_elbo(batch, alpha, xi, phi, log_phi, log_beta_tok, const_alpha):
    elog = dirichlet_expectation_log(xi)
    prior = const_alpha + np.sum((alpha - 1.0) * elog, axis=1)
    tok = phi * (elog[batch.doc_of] + log_beta_tok) - _phi_entropy_terms(phi, log_phi)
    per_doc_tok = _segment_sum(tok, batch.offsets, batch.n_docs).sum(axis=1)
    ent_theta = -(
        log_gamma(xi.sum(axis=1)) - np.sum(log_gamma(xi), axis=1) + np.sum((xi - 1.0) * elog, axis=1)
    )
    return prior + per_doc_tok + ent_theta


def estep_batch(word_lists, alphas, beta, tol=ESTEP_TOL, max_iter=ESTEP_MAX_ITER, trace=False):
    """Run the E-step for several documents at once.

    Returns ``(phi_tokens, xi, elbo, converged, n_iter, offsets[, history])``
    where ``phi_tokens`` stacks every document's phi rows in order.
    ``history`` (only with ``trace=True``) lists the per-document ELBO after
    initialization and after every iteration.
    """
    batch = _Batch(word_lists)
    alphas = np.asarray(alphas, dtype=np.float64)
    M = batch.n_docs
    K = beta.shape[0]
    if alphas.shape != (M, K):
        raise DimensionMismatch(f"alphas has shape {alphas.shape}, expected {(M, K)}")

    log_beta_tok = np.log(beta[:, batch.words].T)  # (T, K)
    const_alpha = log_gamma(alphas.sum(axis=1)) - np.sum(log_gamma(alphas), axis=1)

    phi = np.full((len(batch.words), K), 1.0 / K)
    log_phi = np.full_like(phi, -np.log(K))
    xi = alphas + batch.lengths[:, None] / K
    elbo = _batch_elbo(batch, alphas, xi, phi, log_phi, log_beta_tok, const_alpha)
    history = [elbo.copy()] if trace else None

    active = batch.lengths > 0
    converged = ~active
    n_iter = np.zeros(M, dtype=np.int64)
    for _ in range(max_iter):
        if not active.any():
            break
        tok_active = active[batch.doc_of]
        elog = dirichlet_expectation_log(xi)
        new_log_phi = log_beta_tok + elog[batch.doc_of]
        new_log_phi -= logsumexp(new_log_phi, axis=1)
        new_phi = np.exp(new_log_phi)
        phi = np.where(tok_active[:, None], new_phi, phi)
        log_phi = np.where(tok_active[:, None], new_log_phi, log_phi)
        new_xi = alphas + _segment_sum(phi, batch.offsets, M)
        xi = np.where(active[:, None], new_xi, xi)
        new_elbo = _batch_elbo(batch, alphas, xi, phi, log_phi, log_beta_tok, const_alpha)
        n_iter += active
        done = np.abs(new_elbo - elbo) <= tol * np.maximum(np.abs(elbo), 1e-8)
        elbo = np.where(active, new_elbo, elbo)
        if trace:
            history.append(elbo.copy())
        converged = converged | (active & done)
        active = active & ~done
    out = (phi, xi, elbo, converged, n_iter, batch.offsets)
    return out + (history,) if trace else out


def estep_document(words, alpha, beta, tol=ESTEP_TOL, max_iter=ESTEP_MAX_ITER):
    """Coordinate ascent on (phi, xi) for a single document.

    Starts from uniform phi and xi = alpha + N/K and alternates
    ``update_phi``/``update_xi`` until the relative ELBO change drops below
    ``tol``.  Hitting ``max_iter`` is reported through ``converged=False``.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    phi, xi, elbo, conv, n_iter, _ = estep_batch([words], alpha[None, :], beta, tol, max_iter)
    return VariationalDoc(phi=phi, xi=xi[0], elbo=float(elbo[0]), converged=bool(conv[0]),
                          n_iter=int(n_iter[0]))


def new_beta_stats(K, V):
    return np.zeros((K, V))


def accumulate_beta_stats(stats, words, phi):
    """Add phi_ni to ``stats[i, w_n]`` for every token (in place) and return ``stats``."""
    words = np.asarray(words, dtype=np.int64)
    V = stats.shape[1]
    for i in range(stats.shape[0]):
        stats[i] += np.bincount(words, weights=phi[:, i], minlength=V)
    return stats


def mstep_beta(stats, floor=BETA_FLOOR):
    """Row-normalize expected counts into a topic-word matrix."""
    smoothed = np.asarray(stats, dtype=np.float64) + floor
    return smoothed / smoothed.sum(axis=1, keepdims=True)
