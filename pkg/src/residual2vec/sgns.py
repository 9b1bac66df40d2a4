"""Skip-gram trainer with negative sampling or NCE, for checking the theory.

Negative sampling with noise p0 asymptotically fits

    P(j | i) = p0(j) exp(u_i . v_j) / sum_j' p0(j') exp(u_i . v_j')

so the noise distribution acts as a baseline. NCE, which keeps the
ln p0(j) + c correction in its logit, fits the plain softmax instead.
"""
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, log_softmax, logsumexp

from ._rng import substream
from .graph import GraphError, degrees
from .residual import Embedding
from .transition import center_context_pairs, exact_window_transition, simulate_walks

NEGATIVE_SAMPLING = "negative-sampling"
NCE = "nce"


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class NoiseDistribution:
    probabilities: np.ndarray
    gamma: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if (p <= 0).any():
            raise GraphError("noise probabilities must be strictly positive")
        if abs(p.sum() - 1.0) > 1e-12:
            raise GraphError(f"noise probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "probabilities", p)

    @classmethod
    def uniform(cls, n):
        return cls(np.full(n, 1.0 / n), gamma=0.0)

    @classmethod
    def from_frequencies(cls, freq, gamma=1.0):
        """p0(l) proportional to freq(l)^gamma."""
        w = np.asarray(freq, dtype=float) ** gamma
        return cls(w / w.sum(), gamma)

    @classmethod
    def from_degrees(cls, g, gamma=1.0):
        return cls.from_frequencies(degrees(g), gamma)

    @property
    def n_nodes(self):
        return len(self.probabilities)


class AliasTable:
    """Walker/Vose alias method: O(n) setup, O(1) per draw."""

    def __init__(self, p):
        p = np.asarray(p, dtype=float)
        n = len(p)
        scaled = p * n / p.sum()
        self.prob = np.ones(n)
        self.alias = np.arange(n)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        while small and large:
            s, l = small.pop(), large.pop()
            self.prob[s] = scaled[s]
            self.alias[s] = l
            scaled[l] -= 1.0 - scaled[s]
            (small if scaled[l] < 1.0 else large).append(l)

    def draw(self, rng, size):
        k = rng.integers(0, len(self.prob), size=size)
        keep = rng.random(size) < self.prob[k]
        return np.where(keep, k, self.alias[k])


@dataclass(frozen=True)
class TrainerConfig:
    K: int = 16
    negatives: int = 5
    epochs: int = 5
    lr_start: float = 0.025
    lr_end: float = 0.0001
    objective: str = NEGATIVE_SAMPLING
    seed: int = 0

    def __post_init__(self):
        if self.negatives < 1:
            raise GraphError("need at least one negative sample")
        if not 0 < self.lr_end <= self.lr_start:
            raise GraphError("learning rate must be positive and non-increasing")
        if self.objective not in (NEGATIVE_SAMPLING, NCE):
            raise GraphError(f"unknown objective {self.objective!r}")


@dataclass(frozen=True)
class TrainedEmbedding(Embedding):
    losses: list = field(default_factory=list)
    nce_offset: float = None
    objective: str = NEGATIVE_SAMPLING


def pair_loss_and_grads(u, v_pos, v_neg, objective=NEGATIVE_SAMPLING, log_p0_pos=0.0, log_p0_neg=None, c=0.0):
    """Loss of one positive pair with its negatives, and gradients.

    Logits are u . v for negative sampling and u . v - ln p0(j) - c for NCE.
    Returns (loss, d_u, d_v_pos, d_v_neg, d_c).
    """
    v_neg = np.atleast_2d(v_neg)
    s_pos = u @ v_pos
    s_neg = v_neg @ u
    if objective == NCE:
        log_p0_neg = np.zeros(len(v_neg)) if log_p0_neg is None else np.asarray(log_p0_neg)
        s_pos = s_pos - log_p0_pos - c
        s_neg = s_neg - log_p0_neg - c
    loss = np.logaddexp(0, -s_pos) + np.logaddexp(0, s_neg).sum()
    g_pos = expit(s_pos) - 1.0
    g_neg = expit(s_neg)
    d_u = g_pos * v_pos + g_neg @ v_neg
    d_v_pos = g_pos * u
    d_v_neg = g_neg[:, None] * u[None, :]
    d_c = -(g_pos + g_neg.sum()) if objective == NCE else 0.0
    return float(loss), d_u, d_v_pos, d_v_neg, float(d_c)


@numba.njit(cache=True)
def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    z = np.exp(x)
    return z / (1.0 + z)


@numba.njit(cache=True)
def _log1pexp(x):
    if x > 30:
        return x
    return np.log1p(np.exp(x))


@numba.njit(cache=True)
def _sgd_epoch(U, V, c_arr, centers, contexts, negs, log_p0, nce, lr_start, lr_end, step0, total_steps):
    K = U.shape[1]
    k = negs.shape[1]
    grad_u = np.empty(K)
    loss = 0.0
    c = c_arr[0]
    for p in range(len(centers)):
        lr = lr_start - (lr_start - lr_end) * (step0 + p) / total_steps
        i = centers[p]
        grad_u[:] = 0.0
        dc = 0.0
        for q in range(k + 1):
            if q == 0:
                j = contexts[p]
            else:
                j = negs[p, q - 1]
            s = 0.0
            for a in range(K):
                s += U[i, a] * V[j, a]
            if nce:
                s -= log_p0[j] + c
            if q == 0:
                g = _sigmoid(s) - 1.0
                loss += _log1pexp(-s)
            else:
                g = _sigmoid(s)
                loss += _log1pexp(s)
            dc -= g
            for a in range(K):
                grad_u[a] += g * V[j, a]
                V[j, a] -= lr * g * U[i, a]
        for a in range(K):
            U[i, a] -= lr * grad_u[a]
        if nce:
            c -= lr * dc
    c_arr[0] = c
    return loss / max(len(centers), 1)


def train_pairs(centers, contexts, noise, cfg, n_nodes=None):
    """Sequential SGD over (center, context) pairs, one pass per epoch.

    Pairs are shuffled each epoch; negatives are drawn with replacement from
    an alias table over p0. The learning rate decays linearly over all
    updates. Deterministic given ``cfg.seed``.
    """
    centers = np.asarray(centers, dtype=np.int64)
    contexts = np.asarray(contexts, dtype=np.int64)
    if not len(centers):
        raise GraphError("corpus has no center-context pairs")
    n = n_nodes if n_nodes is not None else noise.n_nodes
    if noise.n_nodes != n:
        raise GraphError("noise distribution does not cover the node set")
    rng = substream(cfg.seed, "sgns")
    U = (rng.random((n, cfg.K)) - 0.5) / cfg.K
    V = np.zeros((n, cfg.K))
    log_p0 = np.log(noise.probabilities)
    nce = cfg.objective == NCE
    # Start c at ln k + ln N, its value when the model is uniform.
    c = np.array([np.log(cfg.negatives) + np.log(n)]) if nce else np.zeros(1)
    table = AliasTable(noise.probabilities)
    total = cfg.epochs * len(centers)
    losses = []
    rising = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(centers))
        negs = table.draw(rng, (len(centers), cfg.negatives))
        loss = _sgd_epoch(
            U, V, c, centers[order], contexts[order], negs, log_p0, nce,
            cfg.lr_start, cfg.lr_end, epoch * len(centers), total,
        )
        if not np.isfinite(loss):
            raise TrainingDiverged(f"loss became {loss} in epoch {epoch}")
        if losses and loss > losses[-1]:
            rising += 1
            if rising >= 3:
                raise TrainingDiverged(
                    f"loss increased for 3 consecutive epochs: {losses[-3:] + [loss]}"
                )
        else:
            rising = 0
        losses.append(float(loss))
    return TrainedEmbedding(
        in_vectors=U,
        out_vectors=V,
        singular_values=np.ones(cfg.K),
        alpha=None,
        losses=losses,
        nce_offset=float(c[0]) if nce else None,
        objective=cfg.objective,
    )


def train(corpus, T, noise, cfg):
    c, x = center_context_pairs(corpus.sequences, T)
    return train_pairs(c, x, noise, cfg, n_nodes=noise.n_nodes)


def model_log_distribution(e, noise, i=None):
    """ln P(j | i) = ln p0(j) + u_i . v_j - ln Z_i, all rows if i is None."""
    U = e.in_vectors if i is None else e.in_vectors[np.atleast_1d(i)]
    logits = U @ e.out_vectors.T + np.log(noise.probabilities)[None, :]
    out = log_softmax(logits, axis=1)
    return out if i is None or np.ndim(i) else out[0]


def model_distribution(e, noise, i=None):
    return np.exp(model_log_distribution(e, noise, i))


def mean_kl(target, model_log, rows=None):
    """Mean over rows of KL(target_i || model_i); rows with no mass are skipped."""
    target = np.asarray(target, dtype=float)
    if rows is None:
        rows = target.sum(axis=1) > 0
    t = target[rows]
    m = model_log[rows]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(t > 0, t * (np.log(t) - m), 0.0)
    return float(terms.sum(axis=1).mean())


def pair_counts(centers, contexts, n):
    C = np.zeros((n, n))
    np.add.at(C, (centers, contexts), 1.0)
    return C


def softmax_mle(counts, K, log_prior=None, seed=0, maxiter=5000):
    """Full-batch maximum likelihood of P(j|i) proportional to prior(j) exp(u_i . v_j).

    Reference fit for checking the stochastic trainers; L-BFGS on the exact
    log-likelihood of the count matrix. Returns (U, V).
    """
    C = np.asarray(counts, dtype=float)
    n = C.shape[0]
    b = np.zeros(n) if log_prior is None else np.asarray(log_prior, dtype=float)
    row_tot = C.sum(axis=1)
    rng = substream(seed, "softmax-mle")
    x0 = rng.standard_normal(2 * n * K) * 0.1

    def fg(x):
        U = x[: n * K].reshape(n, K)
        V = x[n * K :].reshape(n, K)
        L = U @ V.T + b[None, :]
        logp = L - logsumexp(L, axis=1, keepdims=True)
        f = -(C * logp).sum()
        G = np.exp(logp) * row_tot[:, None] - C
        return f, np.concatenate([(G @ V).ravel(), (G.T @ U).ravel()])

    res = minimize(fg, x0, jac=True, method="L-BFGS-B", options={"maxiter": maxiter, "gtol": 1e-9})
    return res.x[: n * K].reshape(n, K), res.x[n * K :].reshape(n, K)


def corpus_pairs(g, n_pairs, T, seed, walk_length=80):
    """Exactly ``n_pairs`` forward-window pairs from walks started at every node."""
    per_walk = (walk_length - T) * T
    walkers = max(1, int(np.ceil(n_pairs / (per_walk * g.n_nodes))))
    corpus = simulate_walks(g, walkers, walk_length, seed=seed)
    c, x = center_context_pairs(corpus.sequences, T)
    pick = np.sort(substream(seed, "pair-subsample").choice(len(c), size=n_pairs, replace=False))
    return c[pick], x[pick]


def verify_unbiasedness(g, noise, cfg, corpus_sizes, T=2, seed=0):
    """Train on growing corpora and report how far the fitted model is from the data.

    For each size: ``kl_empirical`` is the mean KL from the corpus' own
    P^_d(.|i) to the model, and ``kl_exact`` the same against the exact
    window transition. The model is the baselined softmax with the training
    noise for negative sampling, and the plain softmax for NCE.
    """
    if g.n_nodes > 50:
        raise GraphError("verification is meant for graphs with at most 50 nodes")
    n = g.n_nodes
    exact = exact_window_transition(g, T).dense()
    eval_noise = noise if cfg.objective == NEGATIVE_SAMPLING else NoiseDistribution.uniform(n)
    report = []
    for size in corpus_sizes:
        c, x = corpus_pairs(g, size, T, seed=seed + int(size))
        counts = pair_counts(c, x, n)
        emp = counts / np.maximum(counts.sum(axis=1, keepdims=True), 1)
        e = train_pairs(c, x, noise, cfg, n_nodes=n)
        logm = model_log_distribution(e, eval_noise)
        report.append(
            {
                "pairs": int(size),
                "kl_empirical": mean_kl(emp, logm),
                "kl_exact": mean_kl(exact, logm),
                "final_loss": e.losses[-1],
            }
        )
    return report
