"""Link-prediction and community-detection evaluation protocols."""
import csv
import json
import time
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from ._rng import substream
from .graph import Graph, GraphError, is_connected, largest_component, n_components, spanning_tree_edges
from .nullmodels import NodeGrouping, baseline_log_prob, dcsbm_from_block_stubs, sample_dcsbm

DEFAULT_RHO = 0.5
DEFAULT_TAU = 3.0
DEFAULT_PAIRS = 10_000
# Mean degree about 21, near the LFR reference setting <k> = 20.
DEFAULT_DEGREE_SPEC = ("power-law", DEFAULT_TAU, 12, 100)


class EdgeRemovalCapped(UserWarning):
    pass


class NegativesCapped(UserWarning):
    pass


@dataclass(frozen=True)
class LinkPredictionSplit:
    train_graph: Graph
    positives: np.ndarray
    negatives: np.ndarray
    rho: float
    seed: int


def _pair_keys(pairs, n):
    pairs = np.sort(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), axis=1)
    return pairs[:, 0] * n + pairs[:, 1]


def split_for_link_prediction(g, rho=DEFAULT_RHO, seed=0):
    """Remove round(rho * M) edges outside a seeded spanning tree.

    Negatives are uniform non-edges of the original graph, distinct and
    without self-pairs. If fewer edges are removable than requested, all of
    them are removed and an EdgeRemovalCapped warning is issued. A graph too
    dense to supply as many non-edges gets all of them and a NegativesCapped
    warning.
    """
    if not 0 < rho < 1:
        raise GraphError(f"rho must lie in (0, 1), got {rho}")
    if not is_connected(g):
        raise GraphError(f"graph is disconnected ({n_components(g)} components)")
    n = g.n_nodes
    pairs, _ = g.edges()
    links = pairs[pairs[:, 0] != pairs[:, 1]]
    tree = _pair_keys(spanning_tree_edges(g, seed), n)
    removable = links[~np.isin(_pair_keys(links, n), tree)]
    requested = int(round(rho * len(links)))
    if requested > len(removable):
        warnings.warn(
            f"requested {requested} removals but only {len(removable)} edges lie "
            f"outside the spanning tree",
            EdgeRemovalCapped,
            stacklevel=2,
        )
    n_remove = min(requested, len(removable))
    rng = substream(seed, "split")
    pos = removable[np.sort(rng.choice(len(removable), size=n_remove, replace=False))]

    A = g.adjacency.tolil(copy=True)
    for i, j in pos:
        A[i, j] = 0
        A[j, i] = 0
    train = Graph(A.tocsr(), g.node_names)

    n_links = len(links)
    available = n * (n - 1) // 2 - n_links
    if available < len(pos):
        warnings.warn(
            f"only {available} non-edges exist for {len(pos)} removed edges",
            NegativesCapped,
            stacklevel=2,
        )
    neg = sample_non_edges(g, min(len(pos), available), substream(seed, "negatives"))
    return LinkPredictionSplit(train, pos, neg, rho, seed)


def sample_non_edges(g, count, rng):
    n = g.n_nodes
    pairs, _ = g.edges()
    taken = set(_pair_keys(pairs[pairs[:, 0] != pairs[:, 1]], n).tolist())
    available = n * (n - 1) // 2 - len(taken)
    if count > available:
        raise GraphError(f"cannot sample {count} non-edges; only {available} exist")
    out = []
    while len(out) < count:
        cand = rng.integers(0, n, size=(2 * (count - len(out)) + 16, 2))
        for i, j in np.sort(cand, axis=1):
            if i == j:
                continue
            key = i * n + j
            if key in taken:
                continue
            taken.add(key)
            out.append((i, j))
            if len(out) == count:
                break
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def link_scores(e, pairs, offsets=None, pair_offsets=None):
    """u_i . u_j + z_i + z_j, optionally plus a per-pair offset."""
    U = e.in_vectors if hasattr(e, "in_vectors") else np.asarray(e)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    i, j = pairs[:, 0], pairs[:, 1]
    s = np.einsum("ij,ij->i", U[i], U[j])
    if offsets is not None:
        z = np.asarray(offsets)
        s = s + z[i] + z[j]
    if pair_offsets is not None:
        s = s + np.asarray(pair_offsets)
    return s


def baseline_pair_offsets(model, T, pairs):
    """ln P0(j|i) + ln P0(i|j) for each pair, the pairwise form of z_i + z_j."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    i, j = pairs[:, 0], pairs[:, 1]
    W = model.window_blocks(T)
    return baseline_log_prob(model, T, i, j, W) + baseline_log_prob(model, T, j, i, W)


def auc_roc(positive_scores, negative_scores):
    """Mann-Whitney AUC with ties counted as one half."""
    pos = np.asarray(positive_scores, dtype=float).ravel()
    neg = np.asarray(negative_scores, dtype=float).ravel()
    if not len(pos) or not len(neg):
        raise GraphError("AUC needs at least one positive and one negative score")
    ranks = rankdata(np.concatenate([pos, neg]))
    u = ranks[: len(pos)].sum() - len(pos) * (len(pos) + 1) / 2
    return float(u / (len(pos) * len(neg)))


@dataclass(frozen=True)
class PlantedPartition:
    graph: Graph
    labels: NodeGrouping
    mu: float
    degree_spec: tuple
    expected_degrees: np.ndarray = None


def draw_degrees(n, degree_spec, rng):
    """``("regular", d)`` or ``("power-law", tau, d_min, d_max)``.

    Power-law degrees are continuous draws with density proportional to
    x^-tau on [d_min, d_max] (inverse CDF).
    """
    kind = degree_spec[0]
    if kind == "regular":
        d = float(degree_spec[1])
        if d <= 0:
            raise GraphError("regular degree must be positive")
        return np.full(n, d)
    if kind == "power-law":
        tau, lo, hi = map(float, degree_spec[1:4])
        if not 0 < lo <= hi or tau <= 1:
            raise GraphError(f"infeasible power-law degree spec {degree_spec}")
        u = rng.random(n)
        a = 1.0 - tau
        return (lo**a + u * (hi**a - lo**a)) ** (1.0 / a)
    raise GraphError(f"unknown degree spec {degree_spec!r}")


def planted_block_stubs(D, mu):
    """Symmetric stub matrix with a fraction mu of each group's stubs leaving it.

    Within-group stubs are (1 - mu) D_a. Leaving stubs are spread over the
    other groups in proportion to their stub totals and symmetrized, which
    is exact for equal group totals; otherwise a group's realized total
    deviates from D_a at second order in the imbalance.
    """
    D = np.asarray(D, dtype=float)
    total = D.sum()
    share = mu * D[:, None] * D[None, :] / (total - D)[:, None]
    E = (share + share.T) / 2
    np.fill_diagonal(E, (1.0 - mu) * D)
    return E


def generate_planted_partition(
    n, B=2, mu=0.1, degree_spec=None, seed=0, connected=True
):
    """dcSBM planted partition with B equal-size communities.

    With ``connected`` the graph is restricted to its largest component, so
    the returned graph can have slightly fewer than ``n`` nodes.
    """
    if B < 2:
        raise GraphError("a planted partition needs at least two groups")
    if not 0 <= mu <= 1:
        raise GraphError(f"mu must lie in [0, 1], got {mu}")
    if n < B:
        raise GraphError("need at least one node per group")
    if degree_spec is None:
        degree_spec = DEFAULT_DEGREE_SPEC
    rng = substream(seed, "planted-degrees")
    d = draw_degrees(n, degree_spec, rng)
    labels = np.arange(n) * B // n
    D = np.bincount(labels, weights=d, minlength=B)
    model = dcsbm_from_block_stubs(NodeGrouping(labels, B), d, planted_block_stubs(D, mu))
    g = sample_dcsbm(model, seed=seed)
    # Collapse to a simple graph: no self-loops, multi-edges become weight 1.
    A = g.adjacency.tolil()
    A.setdiag(0)
    A = A.tocsr()
    A.eliminate_zeros()
    A.data[:] = 1.0
    g = Graph(A)
    if connected:
        g, keep = largest_component(g)
        labels, d = labels[keep], d[keep]
    return PlantedPartition(g, NodeGrouping.from_labels(labels), mu, tuple(degree_spec), d)


def mixing_fraction(g, labels):
    """Fraction of edge stubs whose other end lies in a different group."""
    lab = labels.labels if isinstance(labels, NodeGrouping) else np.asarray(labels)
    C = g.stubs.tocoo()
    cross = C.data[lab[C.row] != lab[C.col]].sum()
    return float(cross / C.data.sum())


def cosine_similarity_pairs(U, i, j):
    a, b = U[i], U[j]
    num = np.einsum("ij,ij->i", a, b)
    den = np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / den, 0.0)


def community_similarity_auc(e, labels, n_pairs=DEFAULT_PAIRS, seed=0):
    U = e.in_vectors if hasattr(e, "in_vectors") else np.asarray(e)
    lab = labels.labels if isinstance(labels, NodeGrouping) else np.asarray(labels)
    n = len(lab)
    rng = substream(seed, "community-pairs")
    for _ in range(2):
        i = rng.integers(0, n, size=n_pairs)
        j = (i + rng.integers(1, n, size=n_pairs)) % n
        same = lab[i] == lab[j]
        if same.any() and (~same).any():
            sim = cosine_similarity_pairs(U, i, j)
            return auc_roc(sim[same], sim[~same])
    raise GraphError("sampled pairs contain only one class")


def bootstrap_ci(values, level=0.9, n_boot=10_000, seed=0):
    x = np.asarray(values, dtype=float)
    rng = substream(seed, "bootstrap")
    means = x[rng.integers(0, len(x), size=(n_boot, len(x)))].mean(axis=1)
    lo, hi = np.quantile(means, [(1 - level) / 2, (1 + level) / 2])
    return float(x.mean()), float(lo), float(hi)


def benchmark_record(task, graph, method, params, auc, seed, wall_time_ms):
    return {
        "task": task,
        "graph": graph,
        "method": method,
        "seed": seed,
        "params": params,
        "auc": auc,
        "wall_time_ms": wall_time_ms,
    }


def write_jsonl(records, fh):
    for r in records:
        fh.write(json.dumps(r, sort_keys=True))
        fh.write("\n")


def summarize(records, level=0.9, n_boot=10_000, seed=0):
    """Rows of (task, graph, method, n, mean, ci_low, ci_high) over seeds."""
    groups = {}
    for r in records:
        key = (r["task"], r["graph"], r["method"], json.dumps(r["params"], sort_keys=True))
        groups.setdefault(key, []).append(r["auc"])
    rows = []
    for (task, graph, method, params), aucs in sorted(groups.items()):
        mean, lo, hi = bootstrap_ci(aucs, level, n_boot, seed)
        rows.append((task, graph, method, params, len(aucs), mean, lo, hi))
    return rows


def write_summary_csv(rows, fh):
    w = csv.writer(fh)
    w.writerow(["task", "graph", "method", "params", "n", "mean", "ci_low", "ci_high"])
    for row in rows:
        w.writerow(row)


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.ms = (time.perf_counter() - self.t0) * 1000.0
