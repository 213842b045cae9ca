"""Stochastic variational EM for LDA, DMR and neural-prior topic models."""

import copy
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from .corpus import Corpus, SideSchema, Vocabulary
from .exceptions import CorruptCheckpoint, NonFiniteGradient, SchemaVersionMismatch
from .inference import ESTEP_MAX_ITER, ESTEP_TOL, estep_batch, mstep_beta
from .prior import AdamConfig, AdamState, DMRPrior, FixedPrior, NeuralPrior, backward_and_step, init_neural

logger = logging.getLogger(__name__)

CHECKPOINT_SCHEMA = "nnlda.checkpoint/1"
# Fixed E-step chunk size: results never depend on how chunks map to threads.
CHUNK_SIZE = 256

PRIOR_ALIASES = {"lda": "fixed", "fixed": "fixed", "dmr": "dmr", "nnlda": "neural", "neural": "neural"}


@dataclass
class TrainConfig:
    n_topics: int = 4
    prior_kind: str = "neural"
    em_tol: float = 1e-4
    max_em_iters: int = 200
    estep_tol: float = ESTEP_TOL
    estep_max_iter: int = ESTEP_MAX_ITER
    adam: AdamConfig = field(default_factory=AdamConfig)
    gamma_steps_per_em: Optional[int] = None
    fixed_alpha: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.adam, dict):
            self.adam = AdamConfig(**self.adam)
        try:
            self.prior_kind = PRIOR_ALIASES[self.prior_kind]
        except KeyError:
            raise ValueError(f"unknown prior kind {self.prior_kind!r}") from None
        if self.n_topics < 1:
            raise ValueError("n_topics must be >= 1")
        if self.em_tol <= 0 or self.estep_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_em_iters < 1 or self.estep_max_iter < 1:
            raise ValueError("iteration limits must be >= 1")
        if self.gamma_steps_per_em is not None and self.gamma_steps_per_em < 0:
            raise ValueError("gamma_steps_per_em must be >= 0")


@dataclass
class TrainReport:
    elbo_trace: List[float] = field(default_factory=list)
    seconds: List[float] = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0

    @property
    def iterations(self):
        return len(self.elbo_trace)

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("iteration,elbo,seconds\n")
            for i, (e, s) in enumerate(zip(self.elbo_trace, self.seconds), start=1):
                fh.write(f"{i},{e!r},{s:.6f}\n")


@dataclass
class TopicModel:
    beta: np.ndarray
    prior: object
    vocab: Vocabulary
    side_schema: SideSchema
    config: TrainConfig

    @property
    def n_topics(self):
        return self.beta.shape[0]

    def alphas(self, S):
        return self.prior.alphas(S)


class _Prepared:
    """Training view of a corpus: non-empty documents only."""

    def __init__(self, corpus: Corpus):
        keep = [i for i, d in enumerate(corpus.docs) if len(d)]
        self.index = np.array(keep, dtype=np.int64)
        self.words = [corpus.docs[i].words for i in keep]
        self.side = corpus.side_matrix[self.index] if keep else np.zeros((0, corpus.side_dim))
        self.n_docs = len(keep)


class NonFiniteTraining(NonFiniteGradient):
    def __init__(self, msg, last_good):
        super().__init__(msg)
        self.last_good = last_good


def init_prior(cfg: TrainConfig, q, rng):
    K = cfg.n_topics
    if cfg.prior_kind == "fixed":
        return FixedPrior(np.full(K, cfg.fixed_alpha))
    if cfg.prior_kind == "dmr":
        return DMRPrior.zeros(q, K)
    if q < 1:
        raise ValueError("the neural prior needs at least one side feature")
    return init_neural(q, K, seed=int(rng.integers(2**32)))


def init_model(corpus: Corpus, cfg: TrainConfig):
    """Random Dirichlet(1) topic rows plus a freshly initialized prior."""
    rng = np.random.default_rng(cfg.seed)
    V = len(corpus.vocab)
    beta = mstep_beta(rng.dirichlet(np.ones(V), size=cfg.n_topics))
    prior = init_prior(cfg, corpus.side_dim, rng)
    return TopicModel(beta, prior, corpus.vocab, corpus.side_schema, cfg), rng


def run_estep(words, alphas, beta, cfg: TrainConfig, n_threads=1):
    """E-step over all documents in fixed-size chunks.

    Returns ``(xi, elbo, stats)`` with ``stats`` the expected topic-word
    counts.  Chunk partial sums are added in chunk order, so the output is
    bitwise independent of ``n_threads``.
    """
    M = len(words)
    K, V = beta.shape
    bounds = [(a, min(a + CHUNK_SIZE, M)) for a in range(0, M, CHUNK_SIZE)]

    def work(bound):
        a, b = bound
        phi, xi, elbo, _, _, offsets = estep_batch(
            words[a:b], alphas[a:b], beta, cfg.estep_tol, cfg.estep_max_iter
        )
        toks = np.concatenate(words[a:b]) if b > a else np.zeros(0, dtype=np.int64)
        stats = np.stack([np.bincount(toks, weights=phi[:, i], minlength=V) for i in range(K)])
        return xi, elbo, stats

    if n_threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    xi = np.concatenate([p[0] for p in parts]) if parts else np.zeros((0, K))
    elbo = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0)
    stats = np.zeros((K, V))
    for p in parts:
        stats += p[2]
    return xi, elbo, stats


def corpus_elbo(corpus: Corpus, model: TopicModel, n_threads=1):
    prep = _Prepared(corpus)
    _, elbo, _ = run_estep(prep.words, model.alphas(prep.side), model.beta, model.config, n_threads)
    return float(np.sum(elbo))


def gamma_updates(prior, side, xi, cfg: TrainConfig, rng):
    """Minibatch ascent on the prior objective with frozen E-step posteriors."""
    n = len(side)
    if n == 0 or not getattr(prior, "trainable", False):
        return []
    bs = cfg.adam.batch_size
    steps = cfg.gamma_steps_per_em
    if steps is None:
        steps = math.ceil(n / bs)
    values = []
    order = rng.permutation(n)
    pos = 0
    for _ in range(steps):
        if pos >= n:
            order = rng.permutation(n)
            pos = 0
        idx = order[pos:pos + bs]
        pos += bs
        values.append(backward_and_step(prior, side[idx], xi[idx], cfg.adam))
    return values


def em_iteration(prep, model: TopicModel, cfg: TrainConfig, rng, n_threads=1,
                 update_beta=True, update_prior=True):
    """One E-step / M-step sweep.  Updates ``model`` in place.

    Returns the corpus ELBO computed from the E-step, i.e. before this
    iteration's parameter updates.
    """
    if isinstance(prep, Corpus):
        prep = _Prepared(prep)
    alphas = model.alphas(prep.side)
    xi, elbo, stats = run_estep(prep.words, alphas, model.beta, cfg, n_threads)
    total = float(np.sum(elbo))
    if update_beta:
        model.beta = mstep_beta(stats)
    if update_prior:
        gamma_updates(model.prior, prep.side, xi, cfg, rng)
    return model, total


def _relative_change(new, old):
    return abs(new - old) / max(abs(old), 1e-8)


def fit(corpus: Corpus, cfg: TrainConfig, model: Optional[TopicModel] = None, n_threads=1,
        update_beta=True, update_prior=True):
    """Train until the relative corpus-ELBO change falls below ``cfg.em_tol``.

    Passing ``model`` continues from existing parameters (its config is
    replaced by ``cfg``); ``update_beta=False`` freezes the topics.
    """
    t0 = time.perf_counter()
    if model is None:
        model, rng = init_model(corpus, cfg)
    else:
        model = copy.deepcopy(model)
        model.config = cfg
        rng = np.random.default_rng(cfg.seed)
    if len(model.vocab) != len(corpus.vocab) or model.beta.shape[1] != len(corpus.vocab):
        raise ValueError("model and corpus vocabularies differ in size")
    prep = _Prepared(corpus)
    if prep.n_docs == 0:
        raise ValueError("corpus has no non-empty documents")
    report = TrainReport()
    last_good = copy.deepcopy(model)
    for it in range(cfg.max_em_iters):
        try:
            _, elbo = em_iteration(prep, model, cfg, rng, n_threads, update_beta, update_prior)
        except NonFiniteGradient as exc:
            raise NonFiniteTraining(f"iteration {it + 1}: {exc}", last_good) from exc
        report.elbo_trace.append(elbo)
        report.seconds.append(time.perf_counter() - t0)
        logger.debug("EM iteration %d: elbo=%.6f", it + 1, elbo)
        if not np.isfinite(elbo):
            raise NonFiniteTraining(f"iteration {it + 1}: corpus ELBO is not finite", last_good)
        last_good = copy.deepcopy(model)
        if it > 0 and _relative_change(elbo, report.elbo_trace[-2]) < cfg.em_tol:
            report.converged = True
            break
    report.wall_time = time.perf_counter() - t0
    logger.info("fit: %d iterations, converged=%s, elbo=%.4f",
                report.iterations, report.converged, report.elbo_trace[-1])
    return model, report


# --- checkpoints -----------------------------------------------------------

def _arr(x):
    return np.asarray(x, dtype=np.float64).tolist()


def _prior_to_dict(prior):
    out = {"kind": prior.kind, "params": {k: _arr(v) for k, v in prior.params().items()}}
    if getattr(prior, "trainable", False):
        st = prior.adam
        out["adam"] = {
            "step": st.step,
            "m": {k: _arr(v) for k, v in st.m.items()},
            "v": {k: _arr(v) for k, v in st.v.items()},
        }
    return out


def _prior_from_dict(d):
    p = {k: np.array(v, dtype=np.float64) for k, v in d["params"].items()}
    kind = d["kind"]
    if kind == "fixed":
        prior = FixedPrior(p["alpha"])
    elif kind == "dmr":
        prior = DMRPrior(p["lam"])
    elif kind == "neural":
        prior = NeuralPrior(p["W1"], p["b1"], p["W2"], p["b2"])
    else:
        raise CorruptCheckpoint(f"unknown prior kind {kind!r}")
    if "adam" in d:
        a = d["adam"]
        prior.adam = AdamState(
            step=int(a["step"]),
            m={k: np.array(v, dtype=np.float64) for k, v in a["m"].items()},
            v={k: np.array(v, dtype=np.float64) for k, v in a["v"].items()},
        )
    return prior


def model_to_dict(model: TopicModel):
    cfg = asdict(model.config)
    return {
        "schema": CHECKPOINT_SCHEMA,
        "K": model.n_topics,
        "V": len(model.vocab),
        "q": model.side_schema.dim,
        "prior_kind": model.prior.kind,
        "vocab": list(model.vocab.tokens),
        "side_schema": model.side_schema.to_dict(),
        "config": cfg,
        "beta": _arr(model.beta),
        "prior": _prior_to_dict(model.prior),
    }


def save_model(model: TopicModel, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)
        fh.write("\n")


def _check_shape(name, arr, shape):
    if arr.shape != shape:
        raise CorruptCheckpoint(f"{name} has shape {arr.shape}, expected {shape}")


def model_from_dict(d, vocab: Optional[Vocabulary] = None):
    if not isinstance(d, dict) or "schema" not in d:
        raise SchemaVersionMismatch("checkpoint has no schema id")
    if d["schema"] != CHECKPOINT_SCHEMA:
        raise SchemaVersionMismatch(f"checkpoint schema {d['schema']!r}, expected {CHECKPOINT_SCHEMA!r}")
    try:
        K, V, q = int(d["K"]), int(d["V"]), int(d["q"])
        stored_vocab = Vocabulary(d["vocab"])
        side_schema = SideSchema.from_dict(d["side_schema"])
        beta = np.array(d["beta"], dtype=np.float64)
        prior = _prior_from_dict(d["prior"])
        config = TrainConfig(**d["config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptCheckpoint(f"malformed checkpoint: {exc}") from exc
    if len(stored_vocab) != V:
        raise CorruptCheckpoint(f"vocabulary has {len(stored_vocab)} tokens, header says V={V}")
    if vocab is not None and len(vocab) != V:
        raise CorruptCheckpoint(f"checkpoint V={V} does not match supplied vocabulary V={len(vocab)}")
    if side_schema.dim != q:
        raise CorruptCheckpoint(f"side schema width {side_schema.dim} != q={q}")
    _check_shape("beta", beta, (K, V))
    if prior.kind != d.get("prior_kind", prior.kind):
        raise CorruptCheckpoint("prior kind header disagrees with prior payload")
    if prior.n_topics != K:
        raise CorruptCheckpoint(f"prior produces {prior.n_topics} topics, expected K={K}")
    if prior.kind != "fixed" and prior.side_dim != q:
        raise CorruptCheckpoint(f"prior expects side width {prior.side_dim}, expected q={q}")
    return TopicModel(beta, prior, stored_vocab, side_schema, config)


def load_model(path, vocab: Optional[Vocabulary] = None):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CorruptCheckpoint(f"{path}: not valid JSON ({exc.msg})") from exc
    return model_from_dict(data, vocab)
