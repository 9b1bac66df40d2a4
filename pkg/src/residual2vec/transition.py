"""Window-averaged random-walk transition probabilities.

    P_d(j | i) = (1/T) sum_{t=1..T} P^t(i, j)

computed exactly (sparse-dense products), estimated from simulated walks,
or approximated by a coarse dcSBM for steps beyond the first.
"""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from ._rng import spawn
from .graph import GraphError, degrees, is_connected, n_components, transition_matrix
from .nullmodels import NodeGrouping, fit_dcsbm

DEFAULT_MAX_NODES = 20_000
DEFAULT_BLOCKS = 1000


class MemoryGuardError(GraphError):
    pass


@dataclass(frozen=True)
class WindowTransition:
    """Rows of P_d.

    Exact and empirical results hold a sparse matrix. Block approximations
    hold the low-rank form instead:

        P_d(j | i) = (P(i, j) + theta_j * Q(i, g_j)) / T

    and materialize rows on request.
    """

    T: int
    mode: str
    matrix: sparse.csr_matrix = None
    observed: np.ndarray = None
    first_step: sparse.csr_matrix = field(default=None, repr=False)
    row_groups: np.ndarray = field(default=None, repr=False)
    theta: np.ndarray = field(default=None, repr=False)
    labels: np.ndarray = field(default=None, repr=False)

    @property
    def n_nodes(self):
        m = self.matrix if self.matrix is not None else self.first_step
        return m.shape[0]

    def rows(self, start=0, stop=None):
        """Dense rows [start, stop)."""
        stop = self.n_nodes if stop is None else stop
        if self.matrix is not None:
            return self.matrix[start:stop].toarray()
        out = self.row_groups[start:stop][:, self.labels] * self.theta[None, :]
        out += self.first_step[start:stop].toarray()
        return out / self.T

    def row(self, i):
        return self.rows(i, i + 1)[0]

    def dense(self):
        return self.rows()

    def iter_row_chunks(self, chunk=512):
        for start in range(0, self.n_nodes, chunk):
            stop = min(start + chunk, self.n_nodes)
            yield start, self.rows(start, stop)


def _memory_cap_nodes(max_nodes):
    if max_nodes is not None:
        return max_nodes
    mb = os.environ.get("R2V_MEMORY_CAP_MB")
    if mb:
        # Exact mode keeps two dense N x N float64 buffers.
        return int(np.sqrt(float(mb) * 2**20 / 16))
    return DEFAULT_MAX_NODES


def exact_window_transition(g, T, max_nodes=None):
    if T < 1:
        raise GraphError(f"window size T must be >= 1, got {T}")
    if not is_connected(g):
        raise GraphError(f"graph is disconnected ({n_components(g)} components)")
    cap = _memory_cap_nodes(max_nodes)
    if g.n_nodes > cap:
        raise MemoryGuardError(
            f"exact window transition needs O(N^2) memory and N={g.n_nodes} "
            f"exceeds the cap of {cap}; use block_approx_transition instead"
        )
    P = transition_matrix(g)
    Pt = P.toarray()
    acc = Pt.copy()
    for _ in range(T - 1):
        Pt = P @ Pt
        acc += Pt
    acc /= T
    M = sparse.csr_matrix(acc)
    M.eliminate_zeros()
    return WindowTransition(T=T, mode="exact", matrix=M)


@dataclass(frozen=True)
class WalkCorpus:
    sequences: np.ndarray
    walkers_per_node: int
    walk_length: int
    seed: int

    @property
    def n_nodes(self):
        return int(self.sequences.max()) + 1 if self.sequences.size else 0

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for seq in self.sequences:
                fh.write(" ".join(map(str, seq)))
                fh.write("\n")

    @classmethod
    def read(cls, path, seed=-1):
        with open(path, encoding="utf-8") as fh:
            seqs = [list(map(int, line.split())) for line in fh if line.strip()]
        lengths = {len(s) for s in seqs}
        if len(lengths) != 1:
            raise GraphError("corpus walks must all have the same length")
        arr = np.array(seqs, dtype=np.int64)
        return cls(arr, walkers_per_node=-1, walk_length=arr.shape[1], seed=seed)


_WALK_CHUNK = 4096


def _walk_chunk(indptr, indices, cum, starts, walk_length, rng):
    out = np.empty((len(starts), walk_length), dtype=np.int64)
    cur = starts.copy()
    out[:, 0] = cur
    for step in range(1, walk_length):
        lo = indptr[cur]
        hi = indptr[cur + 1]
        base = np.where(lo > 0, cum[lo - 1], 0.0)
        target = base + rng.random(len(cur)) * (cum[hi - 1] - base)
        pos = np.searchsorted(cum, target, side="right")
        pos = np.minimum(np.maximum(pos, lo), hi - 1)
        cur = indices[pos]
        out[:, step] = cur
    return out


def simulate_walks(g, walkers_per_node=10, walk_length=80, seed=0, threads=1, starts=None):
    """Unbiased simple random walks, ``walkers_per_node`` from every node.

    Walkers are processed in fixed-size chunks, each with its own RNG
    substream spawned from ``seed``, so the result does not depend on how
    chunks are scheduled across threads.
    """
    if not is_connected(g):
        raise GraphError(f"graph is disconnected ({n_components(g)} components)")
    return _simulate(g, walkers_per_node, walk_length, seed, threads, starts)


def _simulate(g, walkers_per_node, walk_length, seed, threads=1, starts=None):
    S = g.stubs
    d = degrees(g)
    if starts is None:
        starts = np.arange(g.n_nodes)
    starts = np.repeat(np.asarray(starts, dtype=np.int64), walkers_per_node)
    if (d[starts] <= 0).any():
        raise GraphError("walks cannot start from an isolated node")
    cum = np.cumsum(S.data)
    chunks = [starts[k : k + _WALK_CHUNK] for k in range(0, len(starts), _WALK_CHUNK)]
    rngs = spawn(seed, "walks", len(chunks))
    job = lambda a: _walk_chunk(S.indptr, S.indices, cum, a[0], walk_length, a[1])
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(job, zip(chunks, rngs)))
    else:
        parts = [job(a) for a in zip(chunks, rngs)]
    seqs = np.concatenate(parts) if parts else np.empty((0, walk_length), dtype=np.int64)
    return WalkCorpus(seqs, walkers_per_node, walk_length, seed)


def center_context_pairs(sequences, T):
    """Forward-window pairs. The last T positions of each walk are never centers,
    so every center contributes exactly one context at each offset 1..T."""
    seqs = np.asarray(sequences)
    L = seqs.shape[1]
    if T >= L:
        raise GraphError(f"window T={T} must be shorter than the walk length {L}")
    centers = seqs[:, : L - T]
    ctx = [seqs[:, t : L - T + t] for t in range(1, T + 1)]
    c = np.tile(centers.ravel(), T)
    x = np.concatenate([a.ravel() for a in ctx])
    return c, x


def empirical_window_transition(corpus, T, n_nodes=None):
    seqs = corpus.sequences
    n = n_nodes if n_nodes is not None else corpus.n_nodes
    c, x = center_context_pairs(seqs, T)
    counts = sparse.coo_matrix((np.ones(len(c)), (c, x)), shape=(n, n)).tocsr()
    totals = np.asarray(counts.sum(axis=1)).ravel()
    observed = totals > 0
    inv = np.zeros(n)
    inv[observed] = 1.0 / totals[observed]
    M = (sparse.diags(inv) @ counts).tocsr()
    return WindowTransition(T=T, mode="empirical", matrix=M, observed=observed)


def degree_partition(g, n_blocks):
    """Nodes sorted by degree and cut into ``n_blocks`` bins of roughly equal
    stub mass. Every bin is nonempty; n_blocks = N gives singletons."""
    n = g.n_nodes
    if not 1 <= n_blocks <= n:
        raise GraphError(f"n_blocks must be in [1, N={n}], got {n_blocks}")
    d = degrees(g)
    order = np.lexsort((np.arange(n), d))
    total = d.sum()
    labels = np.empty(n, dtype=np.int64)
    b, cum = 0, 0.0
    for k, node in enumerate(order):
        labels[node] = b
        cum += d[node]
        remaining_bins = n_blocks - b - 1
        if remaining_bins > 0 and (
            cum >= (b + 1) * total / n_blocks or n - k - 1 == remaining_bins
        ):
            b += 1
    return NodeGrouping(labels, n_blocks)


def block_approx_transition(g, n_blocks=DEFAULT_BLOCKS, T=10, partition=None):
    """Exact first step, block-level dcSBM dynamics afterwards.

    For t >= 2 the walk takes one exact step i -> k and then moves between
    blocks with the fitted P_SBM for t - 1 steps, landing on j in proportion
    to theta_j = d_j / D_{g_j}:

        P^t(i, j) ~ sum_k P(i, k) theta_j [P_SBM^{t-1}]_{g_k, g_j}

    Storage is O(N B) and time O((N + M) B + T B^3). With one node per block
    this is exact.
    """
    if T < 1:
        raise GraphError(f"window size T must be >= 1, got {T}")
    n = g.n_nodes
    if partition is None or partition == "auto":
        if n_blocks > n:
            raise GraphError(f"n_blocks={n_blocks} exceeds N={n}")
        partition = degree_partition(g, n_blocks)
    elif partition.n_nodes != n:
        raise GraphError("partition does not cover the graph")
    if not is_connected(g):
        raise GraphError(f"graph is disconnected ({n_components(g)} components)")
    model = fit_dcsbm(g, partition)
    P = transition_matrix(g)
    Psbm = model.block_transition
    B = partition.n_groups
    # S = sum_{s=1..T-1} P_SBM^s
    S = np.zeros((B, B))
    Ps = np.eye(B)
    for _ in range(T - 1):
        Ps = Ps @ Psbm
        S += Ps
    Q = (P @ partition.indicator()) @ S
    return WindowTransition(
        T=T,
        mode="block",
        first_step=P,
        row_groups=np.asarray(Q),
        theta=model.theta,
        labels=partition.labels,
    )


def stationary_visit_frequency(g):
    if not is_connected(g):
        raise GraphError(f"graph is disconnected ({n_components(g)} components)")
    d = degrees(g)
    return d / d.sum()


def visit_frequency(corpus, n_nodes):
    return np.bincount(corpus.sequences.ravel(), minlength=n_nodes) / corpus.sequences.size


def row_correlations(a, b):
    """Pearson correlation of matching rows of two dense matrices."""
    a = a - a.mean(axis=1, keepdims=True)
    b = b - b.mean(axis=1, keepdims=True)
    num = (a * b).sum(axis=1)
    den = np.sqrt((a * a).sum(axis=1) * (b * b).sum(axis=1))
    with np.errstate(invalid="ignore", divide="ignore"):
        return num / den
