"""Document-level Dirichlet priors: fixed (plain LDA), DMR and a two-layer network.

Every prior maps a side-data matrix ``S`` of shape (n_docs, q) to a strictly
positive matrix of Dirichlet parameters of shape (n_docs, K).  The trainable
priors expose a flat parameter dict so gradient checks and the optimizer can
treat them uniformly.
"""

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .exceptions import DimensionMismatch, DomainError, NonFiniteGradient
from .numerics import digamma, dirichlet_expectation_log, log_gamma

HIDDEN_WIDTH = 20
ALPHA_FLOOR = 1e-3


@dataclass
class AdamConfig:
    lr: float = 0.001
    weight_decay: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 64

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")


@dataclass
class AdamState:
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def softplus(x):
    return np.logaddexp(0.0, x)


def inverse_softplus(y):
    y = np.asarray(y, dtype=np.float64)
    # log(exp(y) - 1) without overflow for large y
    return y + np.log(-np.expm1(-y))


def sigmoid(x):
    return np.exp(-np.logaddexp(0.0, -x))


def _check_side(S, q):
    S = np.asarray(S, dtype=np.float64)
    if S.ndim == 1:
        S = S[None, :]
    if S.shape[1] != q:
        raise DimensionMismatch(f"side data has width {S.shape[1]}, prior expects {q}")
    return S


@dataclass
class FixedPrior:
    alpha: np.ndarray

    kind = "fixed"
    trainable = False

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.float64)

    @property
    def n_topics(self):
        return len(self.alpha)

    def alphas(self, S):
        n = 1 if np.ndim(S) < 2 else np.shape(S)[0]
        return np.tile(self.alpha, (n, 1))

    def params(self):
        return {"alpha": self.alpha}


class _TrainablePrior:
    trainable = True
    adam: AdamState

    def params(self) -> Dict[str, np.ndarray]:
        raise NotImplementedError

    def decayed(self):
        """Names of parameters subject to weight decay."""
        return ()

    def set_params(self, params):
        for k, v in params.items():
            setattr(self, k, np.array(v, dtype=np.float64))


@dataclass
class DMRPrior(_TrainablePrior):
    """alpha_dk = exp(lambda_k . [s_d; 1]); the last column of ``lam`` is the intercept."""

    lam: np.ndarray
    adam: AdamState = field(default_factory=AdamState)

    kind = "dmr"

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=np.float64)

    @classmethod
    def zeros(cls, q, K):
        return cls(np.zeros((K, q + 1)))

    @property
    def n_topics(self):
        return self.lam.shape[0]

    @property
    def side_dim(self):
        return self.lam.shape[1] - 1

    def params(self):
        return {"lam": self.lam}

    def decayed(self):
        return ("lam",)

    def _design(self, S):
        S = _check_side(S, self.side_dim)
        return np.hstack([S, np.ones((S.shape[0], 1))])

    def alphas(self, S):
        return np.exp(self._design(S) @ self.lam.T)

    def backward(self, S, dalpha):
        X = self._design(S)
        alpha = np.exp(X @ self.lam.T)
        return {"lam": (dalpha * alpha).T @ X}


@dataclass
class NeuralPrior(_TrainablePrior):
    """Two-layer ReLU network followed by softplus plus a small floor."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    adam: AdamState = field(default_factory=AdamState)

    kind = "neural"

    def __post_init__(self):
        for name in ("W1", "b1", "W2", "b2"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))

    @property
    def n_topics(self):
        return self.W2.shape[0]

    @property
    def side_dim(self):
        return self.W1.shape[1]

    def params(self):
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def decayed(self):
        return ("W1", "W2")

    def _forward(self, S):
        S = _check_side(S, self.side_dim)
        z1 = S @ self.W1.T + self.b1
        h = np.maximum(z1, 0.0)
        z2 = h @ self.W2.T + self.b2
        return S, z1, h, z2

    def alphas(self, S):
        z2 = self._forward(S)[3]
        return softplus(z2) + ALPHA_FLOOR

    def backward(self, S, dalpha):
        S, z1, h, z2 = self._forward(S)
        dz2 = dalpha * sigmoid(z2)
        dh = dz2 @ self.W2
        dz1 = dh * (z1 > 0.0)
        return {
            "W1": dz1.T @ S,
            "b1": dz1.sum(axis=0),
            "W2": dz2.T @ h,
            "b2": dz2.sum(axis=0),
        }


def init_neural(q, K, seed=0, width=HIDDEN_WIDTH):
    """Kaiming-normal weights (variance 2 / fan_in) and zero biases."""
    if q < 1 or K < 2:
        raise ValueError("need q >= 1 and K >= 2")
    rng = np.random.default_rng(seed)
    W1 = rng.normal(0.0, np.sqrt(2.0 / q), size=(width, q))
    W2 = rng.normal(0.0, np.sqrt(2.0 / width), size=(K, width))
    return NeuralPrior(W1, np.zeros(width), W2, np.zeros(K))


def init_constant(q, alpha_star, width=HIDDEN_WIDTH):
    """Network whose output is ``alpha_star`` for every input.

    Both weight matrices are zero and the output bias inverts the softplus
    link, so the constant is reproduced to rounding error.
    """
    alpha_star = np.asarray(alpha_star, dtype=np.float64)
    if np.any(alpha_star <= ALPHA_FLOOR):
        raise ValueError(f"alpha_star components must exceed the floor {ALPHA_FLOOR}")
    K = len(alpha_star)
    return NeuralPrior(
        np.zeros((width, q)),
        np.zeros(width),
        np.zeros((K, width)),
        inverse_softplus(alpha_star - ALPHA_FLOOR),
    )


def alpha_for(prior, s):
    """Dirichlet parameter for a single side vector ``s``."""
    if isinstance(prior, FixedPrior):
        return prior.alpha.copy()
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 1:
        raise DimensionMismatch("alpha_for expects a single side vector")
    return prior.alphas(s[None, :])[0]


def gamma_objective(alpha, xi):
    """Prior-dependent part of the ELBO, summed over rows of ``alpha``/``xi``."""
    alpha = np.atleast_2d(alpha)
    xi = np.atleast_2d(xi)
    elog = dirichlet_expectation_log(xi)
    return float(
        np.sum(log_gamma(alpha.sum(axis=1)))
        - np.sum(log_gamma(alpha))
        + np.sum((alpha - 1.0) * elog)
    )


def grad_elbo_wrt_alpha(alpha, xi):
    """d/d alpha of ``gamma_objective``; works row-wise on matrices."""
    alpha = np.asarray(alpha, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    if alpha.shape != xi.shape:
        raise DimensionMismatch(f"alpha {alpha.shape} vs xi {xi.shape}")
    axis = alpha.ndim - 1
    dig_sum = digamma(alpha.sum(axis=axis))
    if axis:
        dig_sum = dig_sum[:, None]
    return dig_sum - digamma(alpha) + dirichlet_expectation_log(xi)


def batch_gradient(prior, S, xi):
    """Objective and its gradient w.r.t. every prior parameter on one batch."""
    alpha = prior.alphas(S)
    value = gamma_objective(alpha, xi)
    grads = prior.backward(S, grad_elbo_wrt_alpha(alpha, xi))
    return value, grads


def backward_and_step(prior, S, xi, cfg: AdamConfig):
    """One Adam ascent step on the batch objective with decoupled weight decay.

    Returns the batch objective evaluated before the step.  Mutates ``prior``
    in place (parameters and optimizer state).
    """
    S = np.asarray(S, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    if len(S) == 0:
        raise ValueError("empty batch")
    try:
        with np.errstate(over="ignore"):
            value, grads = batch_gradient(prior, S, xi)
    except DomainError as exc:
        raise NonFiniteGradient(f"prior produced an invalid Dirichlet parameter: {exc}") from exc
    if not np.isfinite(value) or not all(np.all(np.isfinite(g)) for g in grads.values()):
        raise NonFiniteGradient("non-finite objective or gradient in prior update")

    st = prior.adam
    st.step += 1
    bc1 = 1.0 - cfg.beta1 ** st.step
    bc2 = 1.0 - cfg.beta2 ** st.step
    decayed = set(prior.decayed())
    params = prior.params()
    for name, p in params.items():
        # ascent: feed the negated gradient to a minimizing Adam
        g = -grads[name]
        m = st.m.get(name)
        v = st.v.get(name)
        if m is None:
            m = np.zeros_like(p)
            v = np.zeros_like(p)
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g
        st.m[name], st.v[name] = m, v
        update = cfg.lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
        if name in decayed and cfg.weight_decay:
            p = p * (1.0 - cfg.lr * cfg.weight_decay)
        setattr(prior, name, p - update)
    return value
