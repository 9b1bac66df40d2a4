"""Residual matrix factorization.

    R_ij  = ln P_d(j | i) - ln P0(j | i)
    R~_ij = max(R_ij, 0)

R~ is factorized by truncated SVD and the singular values are split
between center and context vectors with exponent alpha.
"""
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import svds

from ._rng import substream
from .graph import GraphError, degrees, is_connected, n_components
from .nullmodels import (
    NodeGrouping,
    baseline_log_prob,
    baseline_matrix,
    baseline_stationary,
    config_model_baseline,
    erdos_renyi_baseline,
    fit_dcsbm,
)
from .transition import (
    DEFAULT_BLOCKS,
    block_approx_transition,
    exact_window_transition,
)

DEFAULT_T = 10
DEFAULT_K = 64
DEFAULT_ALPHA = 0.5
DENSE_SVD_MAX_N = 200


@dataclass(frozen=True)
class ResidualMatrix:
    matrix: sparse.csr_matrix
    T: int
    null_descriptor: str

    @property
    def n_nodes(self):
        return self.matrix.shape[0]


@dataclass(frozen=True)
class Embedding:
    in_vectors: np.ndarray
    out_vectors: np.ndarray
    singular_values: np.ndarray
    alpha: float

    @property
    def K(self):
        return len(self.singular_values)

    @property
    def n_nodes(self):
        return self.in_vectors.shape[0]

    def write_tsv(self, path, node_names=None, context=False, header=None):
        """``node_id dim_0 ... dim_{K-1}`` rows for U, followed by V rows when
        ``context`` is set (their node ids carry a ``ctx:`` prefix)."""
        names = node_names if node_names is not None else [str(i) for i in range(self.n_nodes)]
        with open(path, "w", encoding="utf-8") as fh:
            if header:
                for line in header.splitlines():
                    fh.write(f"# {line}\n")
            fh.write("\t".join(["node_id"] + [f"dim_{k}" for k in range(self.K)]) + "\n")
            _write_rows(fh, names, self.in_vectors)
            if context:
                _write_rows(fh, [f"ctx:{n}" for n in names], self.out_vectors)

    def write_sigma(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for s in self.singular_values:
                fh.write(f"{s:.17g}\n")


def _write_rows(fh, names, X):
    # Adding 0.0 turns -0.0 into 0.0.
    for name, row in zip(names, X + 0.0):
        fh.write(str(name))
        for x in row:
            fh.write(f"\t{x:.17g}")
        fh.write("\n")


def read_embedding_tsv(path):
    names, rows, ctx = [], [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("node_id"):
                continue
            parts = line.rstrip("\n").split("\t")
            vec = [float(x) for x in parts[1:]]
            if parts[0].startswith("ctx:"):
                ctx.append(vec)
            else:
                names.append(parts[0])
                rows.append(vec)
    return names, np.array(rows), (np.array(ctx) if ctx else None)


def _check_nodes(pd, base):
    if pd.n_nodes != base.n_nodes:
        raise GraphError(
            f"transition covers {pd.n_nodes} nodes but the baseline covers {base.n_nodes}"
        )


def _truncate(rows, cols, vals, n, T, name):
    keep = vals > 0
    M = sparse.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n))
    M.eliminate_zeros()
    return ResidualMatrix(matrix=M, T=T, null_descriptor=name)


def residual_log_ratio(pd, base):
    """Untruncated R on the support of P_d as (rows, cols, values)."""
    _check_nodes(pd, base)
    if pd.matrix is None:
        raise GraphError("untruncated residuals need a sparse (exact or empirical) transition")
    C = pd.matrix.tocoo()
    logp0 = baseline_log_prob(base, pd.T, C.row, C.col)
    if not np.isfinite(logp0).all():
        bad = ~np.isfinite(logp0)
        raise GraphError(
            f"baseline assigns zero probability to observed pair "
            f"({int(C.row[bad][0])}, {int(C.col[bad][0])}); "
            f"the null must dominate the observed support"
        )
    return C.row, C.col, np.log(C.data) - logp0


def residual_matrix(pd, base, chunk=512):
    """Sparse truncated residual R~; entries with R <= 0 are not stored."""
    _check_nodes(pd, base)
    n = pd.n_nodes
    name = base.describe()
    if pd.matrix is not None:
        r, c, v = residual_log_ratio(pd, base)
        return _truncate(r, c, v, n, pd.T, name)

    # Block-approximated rows are dense; build R~ one chunk of centers at a time.
    W = base.window_blocks(pd.T)
    g = base.labels
    with np.errstate(divide="ignore"):
        log_theta = np.log(base.theta)
        logW = np.log(W)
    parts = []
    for start, rows in pd.iter_row_chunks(chunk):
        logp0 = logW[g[start : start + len(rows)]][:, g] + log_theta[None, :]
        observed = rows > 0
        if not np.isfinite(logp0[observed]).all():
            raise GraphError("baseline assigns zero probability to an observed pair")
        with np.errstate(divide="ignore", invalid="ignore"):
            R = np.where(observed, np.log(rows) - logp0, 0.0)
        R[R < 0] = 0.0
        parts.append(sparse.csr_matrix(R))
    M = sparse.vstack(parts).tocsr()
    M.eliminate_zeros()
    return ResidualMatrix(matrix=M, T=pd.T, null_descriptor=name)


def _stationary(M):
    """Left Perron vector of a row-stochastic matrix (dense solve)."""
    n = M.shape[0]
    A = np.vstack([M.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    return pi


def node_marginals(pd, base):
    """(P_d(i), P_0(i)): stationary center frequencies of both chains."""
    return _stationary(pd.dense()), baseline_stationary(base, pd.T)


def residual_pmi(pd, base, i, j, marginals=None):
    """PMI under P_d minus PMI under P_0 for pairs (i, j).

    Joint distributions are P(i, j) = P(i) P(j | i), with P(i) the stationary
    center frequency of each chain and P(j) the context marginal. When the
    null preserves degrees the center marginals agree and this equals the
    untruncated residual ln P_d(j|i) - ln P0(j|i). Intended for small graphs.
    """
    _check_nodes(pd, base)
    i = np.atleast_1d(np.asarray(i))
    j = np.atleast_1d(np.asarray(j))
    Pd = pd.dense()
    P0 = baseline_matrix(base, pd.T)
    pi_d, pi_0 = marginals if marginals is not None else node_marginals(pd, base)
    ctx_d = pi_d @ Pd
    ctx_0 = pi_0 @ P0
    joint_d = pi_d[i] * Pd[i, j]
    joint_0 = pi_0[i] * P0[i, j]
    if (joint_d <= 0).any() or (joint_0 <= 0).any():
        raise GraphError("residual PMI is undefined for pairs with zero joint probability")
    pmi_d = np.log(joint_d) - np.log(pi_d[i]) - np.log(ctx_d[j])
    pmi_0 = np.log(joint_0) - np.log(pi_0[i]) - np.log(ctx_0[j])
    out = pmi_d - pmi_0
    return out if out.size > 1 else float(out[0])


def _fix_signs(left, right):
    idx = np.argmax(np.abs(left), axis=0)
    signs = np.sign(left[idx, np.arange(left.shape[1])])
    signs[signs == 0] = 1.0
    return left * signs, right * signs


def truncated_svd(r, K, seed=0, method="auto"):
    """Top-K singular triplets of R~, largest first.

    Dense LAPACK SVD for small matrices, ARPACK otherwise with a seeded
    start vector. Signs are fixed so the largest-magnitude entry of each
    left vector is positive.
    """
    M = r.matrix if isinstance(r, ResidualMatrix) else r
    n = min(M.shape)
    if not 1 <= K <= n:
        raise GraphError(f"K must be in [1, {n}], got {K}")
    if method == "auto":
        method = "dense" if n <= DENSE_SVD_MAX_N or K >= n - 1 else "arpack"
    if method == "dense":
        A = M.toarray() if sparse.issparse(M) else np.asarray(M)
        left, sigma, right_t = np.linalg.svd(A, full_matrices=False)
        left, sigma, right = left[:, :K], sigma[:K], right_t[:K].T
    elif method == "arpack":
        v0 = substream(seed, "svd").standard_normal(min(M.shape))
        left, sigma, right_t = svds(
            sparse.csr_matrix(M, dtype=float), k=K, v0=v0, tol=0, solver="arpack"
        )
        order = np.argsort(-sigma, kind="stable")
        left, sigma, right = left[:, order], sigma[order], right_t[order].T
    else:
        raise ValueError(f"unknown SVD method {method!r}")
    sigma = np.maximum(sigma, 0.0)
    left, right = _fix_signs(left, right)
    return left, sigma, right


def scale_embedding(left, sigma, right, alpha=DEFAULT_ALPHA):
    sigma = np.asarray(sigma, dtype=float)
    if (sigma < 0).any():
        raise GraphError("singular values must be nonnegative")
    U = left * sigma[None, :] ** alpha
    V = right * sigma[None, :] ** (1 - alpha)
    return Embedding(in_vectors=U, out_vectors=V, singular_values=sigma, alpha=alpha)


def make_baseline(g, null="config", grouping=None):
    if null == "config":
        return config_model_baseline(g)
    if null in ("erdos-renyi", "er"):
        return erdos_renyi_baseline(g.n_nodes)
    if null == "dcsbm":
        if grouping is None:
            raise GraphError("the dcsbm null needs a node grouping")
        if not isinstance(grouping, NodeGrouping):
            grouping = NodeGrouping.from_labels(grouping)
        return fit_dcsbm(g, grouping)
    raise GraphError(f"unknown null model {null!r}")


def residual2vec(
    g,
    null="config",
    grouping=None,
    T=DEFAULT_T,
    K=DEFAULT_K,
    approx="exact",
    n_blocks=DEFAULT_BLOCKS,
    alpha=DEFAULT_ALPHA,
    seed=0,
    max_nodes=None,
):
    """Embed ``g`` by factorizing its residual against the chosen null model."""
    if not is_connected(g):
        raise GraphError(f"graph is disconnected ({n_components(g)} components)")
    if K > g.n_nodes:
        raise GraphError(f"K={K} exceeds the number of nodes {g.n_nodes}")
    base = make_baseline(g, null, grouping)
    if approx == "exact":
        pd = exact_window_transition(g, T, max_nodes=max_nodes)
    elif approx == "block":
        pd = block_approx_transition(g, min(n_blocks, g.n_nodes), T)
    else:
        raise GraphError(f"unknown approximation {approx!r}")
    R = residual_matrix(pd, base)
    left, sigma, right = truncated_svd(R, K, seed=seed)
    return scale_embedding(left, sigma, right, alpha)


def config_offsets(g):
    """z_j = ln(d_j / 2m), the config-model baseline log-probability."""
    d = degrees(g)
    return np.log(d / d.sum())
