"""Degree-corrected stochastic block model used as the null random graph.

The analytic baseline is

    P0(j | i) = d_j / D_{g_j} * [ (1/T) sum_{t=1..T} P_SBM^t ]_{g_i, g_j}

where D_g is the stub total of group g and P_SBM(g, g') is the fraction of
group-g stubs whose edge ends in group g'. The soft configuration model
(B = 1) and the Erdos-Renyi multigraph (B = 1, equal degrees) are special
cases.
"""
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from ._rng import substream
from .graph import Graph, GraphError, degrees, from_edges


@dataclass(frozen=True)
class NodeGrouping:
    labels: np.ndarray
    n_groups: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise GraphError("labels must be a 1-d array")
        if len(labels) and (labels.min() < 0 or labels.max() >= self.n_groups):
            raise GraphError(f"labels must lie in [0, {self.n_groups})")
        counts = np.bincount(labels, minlength=self.n_groups)
        if (counts == 0).any():
            raise GraphError(f"group {int(np.argmin(counts))} is empty")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_labels(cls, labels):
        """Compact arbitrary hashable labels to 0..B-1 in sorted order."""
        uniq, inv = np.unique(np.asarray(labels), return_inverse=True)
        return cls(inv.ravel(), len(uniq))

    @property
    def n_nodes(self):
        return len(self.labels)

    def indicator(self):
        n = len(self.labels)
        return sparse.csr_matrix(
            (np.ones(n), (np.arange(n), self.labels)), shape=(n, self.n_groups)
        )


@dataclass(frozen=True)
class BaselineModel:
    grouping: NodeGrouping
    node_degrees: np.ndarray
    group_stubs: np.ndarray
    block_transition: np.ndarray
    name: str = "dcsbm"

    @property
    def n_nodes(self):
        return len(self.node_degrees)

    @property
    def n_groups(self):
        return self.grouping.n_groups

    @property
    def labels(self):
        return self.grouping.labels

    @property
    def theta(self):
        """Share of its group's stubs held by each node, d_j / D_{g_j}."""
        return self.node_degrees / self.group_stubs[self.labels]

    @property
    def block_stubs(self):
        """Symmetric B x B matrix of stub counts between groups."""
        return self.group_stubs[:, None] * self.block_transition

    def window_blocks(self, T):
        """(1/T) sum_{t=1..T} P_SBM^t."""
        return window_average(self.block_transition, T)

    def describe(self):
        return f"{self.name}(B={self.n_groups})"


def window_average(P, T):
    if T < 1:
        raise GraphError(f"window size T must be >= 1, got {T}")
    P = np.asarray(P, dtype=float)
    acc = np.zeros_like(P)
    Pt = np.eye(P.shape[0])
    for _ in range(T):
        Pt = Pt @ P
        acc += Pt
    return acc / T


def _model_from_stub_matrix(grouping, d, E, name):
    D = E.sum(axis=1)
    if (D <= 0).any():
        raise GraphError(f"group {int(np.argmin(D))} has no stubs")
    return BaselineModel(
        grouping=grouping,
        node_degrees=np.asarray(d, dtype=float),
        group_stubs=D,
        block_transition=E / D[:, None],
        name=name,
    )


def fit_dcsbm(g, grouping, name="dcsbm"):
    if grouping.n_nodes != g.n_nodes:
        raise GraphError(
            f"grouping covers {grouping.n_nodes} nodes, graph has {g.n_nodes}"
        )
    d = degrees(g)
    if (d <= 0).any():
        raise GraphError(f"node {int(np.argmin(d))} has zero degree")
    Z = grouping.indicator()
    E = np.asarray((Z.T @ g.stubs @ Z).todense())
    # Stub counts are symmetric by construction; remove rounding asymmetry.
    E = (E + E.T) / 2
    return _model_from_stub_matrix(grouping, d, E, name)


def config_model_baseline(g):
    return fit_dcsbm(g, NodeGrouping(np.zeros(g.n_nodes, dtype=np.int64), 1), name="config")


def erdos_renyi_baseline(n):
    if n < 1:
        raise GraphError("Erdos-Renyi baseline needs at least one node")
    grouping = NodeGrouping(np.zeros(n, dtype=np.int64), 1)
    return _model_from_stub_matrix(grouping, np.ones(n), np.array([[float(n)]]), "erdos-renyi")


def dcsbm_from_block_stubs(labels, node_degrees, block_stubs, name="dcsbm"):
    """Model with prescribed node degrees and group-to-group stub counts.

    ``block_stubs`` must be symmetric; its row sums should equal the group
    stub totals implied by ``node_degrees``.
    """
    grouping = labels if isinstance(labels, NodeGrouping) else NodeGrouping.from_labels(labels)
    E = np.asarray(block_stubs, dtype=float)
    if not np.allclose(E, E.T):
        raise GraphError("block stub matrix must be symmetric")
    return _model_from_stub_matrix(grouping, node_degrees, E, name)


def baseline_row(model, i, T):
    M = model.window_blocks(T)
    return model.theta * M[model.labels[i], model.labels]


def baseline_matrix(model, T):
    """Dense N x N baseline; intended for small graphs and verification."""
    M = model.window_blocks(T)
    g = model.labels
    return M[g][:, g] * model.theta[None, :]


def baseline_log_prob(model, T, rows, cols, window=None):
    """ln P0(cols | rows) elementwise, without materializing the N x N matrix."""
    M = model.window_blocks(T) if window is None else window
    g = model.labels
    with np.errstate(divide="ignore"):
        return np.log(model.theta[cols]) + np.log(M[g[rows], g[cols]])


def baseline_stationary(model, T=1):
    """Stationary distribution of the baseline chain, theta_j * rho_{g_j}.

    rho is the left Perron vector of the windowed block matrix, computed
    numerically so that the degree-bias identity can be checked rather than
    assumed.
    """
    M = model.window_blocks(T)
    rho = _left_perron(M)
    return model.theta * rho[model.labels]


def _left_perron(M):
    B = M.shape[0]
    A = np.vstack([M.T - np.eye(B), np.ones((1, B))])
    b = np.zeros(B + 1)
    b[-1] = 1.0
    rho, *_ = np.linalg.lstsq(A, b, rcond=None)
    return rho


def sample_dcsbm(model, seed=0):
    """Poisson multigraph with E[degree_i] = d_i and E[stubs(g, g')] = E_gg'.

    For g != g' the number of edges between the groups is Poisson(E_gg'),
    and within a group Poisson(E_gg / 2); endpoints are drawn in proportion
    to d / D. By Poisson splitting the pair (i, j) then carries
    Poisson(theta_i theta_j E_{g_i g_j}) edges and a self-loop count
    Poisson(theta_i^2 E_gg / 2).
    """
    rng = substream(seed, "dcsbm-sample")
    theta = model.theta
    labels = model.labels
    E = model.block_stubs
    members = [np.flatnonzero(labels == b) for b in range(model.n_groups)]
    probs = [theta[m] / theta[m].sum() for m in members]
    src, dst = [], []
    for a in range(model.n_groups):
        for b in range(a, model.n_groups):
            rate = E[a, b] / 2 if a == b else E[a, b]
            if rate <= 0:
                continue
            m = rng.poisson(rate)
            if m == 0:
                continue
            src.append(rng.choice(members[a], size=m, p=probs[a]))
            dst.append(rng.choice(members[b], size=m, p=probs[b]))
    n = model.n_nodes
    if not src:
        return Graph(sparse.csr_matrix((n, n)))
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    return from_edges(n, src, dst)


def read_grouping(path, n_nodes, node_names=None, default_group=None):
    """Read a ``node_id<TAB>group_label`` file into a NodeGrouping.

    Nodes missing from the file fall into ``default_group`` if given,
    otherwise a GraphError is raised.
    """
    index = None if node_names is None else {name: k for k, name in enumerate(node_names)}
    raw = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 2:
                raise GraphError(f"line {lineno}: expected node_id and group_label")
            node, label = parts
            if index is not None:
                if node not in index:
                    raise GraphError(f"line {lineno}: unknown node {node!r}")
                k = index[node]
            else:
                k = int(node)
                if not 0 <= k < n_nodes:
                    raise GraphError(f"line {lineno}: node {k} out of range")
            raw[k] = label
    missing = [k for k in range(n_nodes) if k not in raw]
    if missing and default_group is None:
        raise GraphError(f"{len(missing)} node(s) have no group, e.g. node {missing[0]}")
    for k in missing:
        raw[k] = str(default_group)
    labels = [raw[k] for k in range(n_nodes)]
    # Integer labels sort numerically, anything else lexicographically.
    if all(lab.lstrip("-").isdigit() for lab in labels):
        labels = [int(lab) for lab in labels]
    return NodeGrouping.from_labels(labels)


def write_grouping(grouping, path, node_names=None):
    with open(path, "w", encoding="utf-8") as fh:
        for k, lab in enumerate(grouping.labels):
            name = k if node_names is None else node_names[k]
            fh.write(f"{name}\t{lab}\n")
