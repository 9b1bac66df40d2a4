"""Weighted undirected multigraphs stored as symmetric CSR adjacency.

Self-loops follow the stub-counting convention: a loop of weight w at node i
adds 2w to the degree of i, so that the sum of degrees equals the number of
edge stubs 2m.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from ._rng import substream


class GraphError(ValueError):
    pass


class EdgeListParseError(GraphError):
    def __init__(self, lineno, line, reason):
        super().__init__(f"line {lineno}: {reason}: {line!r}")
        self.lineno = lineno


@dataclass(frozen=True)
class Graph:
    adjacency: sparse.csr_matrix
    node_names: list = field(default=None, repr=False)

    def __post_init__(self):
        A = sparse.csr_matrix(self.adjacency, dtype=float)
        A.eliminate_zeros()
        A.sum_duplicates()
        A.sort_indices()
        if A.shape[0] != A.shape[1]:
            raise GraphError(f"adjacency must be square, got {A.shape}")
        if A.nnz and A.data.min() < 0:
            raise GraphError("edge weights must be nonnegative")
        if (abs(A - A.T) > 1e-12 * max(1.0, abs(A).max() if A.nnz else 1.0)).nnz:
            raise GraphError("adjacency must be symmetric")
        # Duplicate edges summed in different orders can differ in the last bit.
        A = ((A + A.T) / 2).tocsr()
        A.sort_indices()
        object.__setattr__(self, "adjacency", A)

    @property
    def n_nodes(self):
        return self.adjacency.shape[0]

    @property
    def stubs(self):
        """Adjacency with self-loop weights doubled; rows sum to degrees."""
        A = self.adjacency
        return (A + sparse.diags(A.diagonal())).tocsr()

    @property
    def total_weight_2m(self):
        return float(self.degrees().sum())

    def degrees(self):
        return degrees(self)

    def weight(self, i, j):
        return float(self.adjacency[i, j])

    def edges(self):
        """Distinct node pairs (i <= j) with their weights."""
        U = sparse.triu(self.adjacency).tocoo()
        return np.column_stack([U.row, U.col]), U.data.copy()

    @property
    def n_edges(self):
        return int(sparse.triu(self.adjacency).nnz)


def from_edges(n_nodes, src, dst, weight=None, node_names=None):
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    w = np.ones(len(src)) if weight is None else np.asarray(weight, dtype=float)
    if len(w) and w.min() < 0:
        raise GraphError("edge weights must be nonnegative")
    loops = src == dst
    # Off-diagonal pairs enter twice (both directions); loops once.
    rows = np.concatenate([src, dst[~loops]])
    cols = np.concatenate([dst, src[~loops]])
    vals = np.concatenate([w, w[~loops]])
    A = sparse.coo_matrix((vals, (rows, cols)), shape=(n_nodes, n_nodes)).tocsr()
    return Graph(A, node_names)


def load_edge_list(stream, weighted=True, n_nodes=None):
    """Parse ``src dst [weight]`` lines. ``#`` lines and blank lines are skipped.

    Integer ids are used as dense indices directly. If any id is not a
    nonnegative integer, all ids are interned in order of first appearance
    and the mapping is kept in ``Graph.node_names``.
    """
    src, dst, wts = [], [], []
    for lineno, line in enumerate(stream, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        parts = text.split()
        if len(parts) not in (2, 3):
            raise EdgeListParseError(lineno, line, "expected 2 or 3 fields")
        w = 1.0
        if len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError:
                raise EdgeListParseError(lineno, line, "weight is not a number") from None
            if not np.isfinite(w):
                raise EdgeListParseError(lineno, line, "weight is not finite")
            if w < 0:
                raise GraphError(f"line {lineno}: negative weight {w}")
            if not weighted:
                w = 1.0
        src.append(parts[0])
        dst.append(parts[1])
        wts.append(w)

    ids = src + dst
    if all(s.isdigit() for s in ids):
        s = np.array([int(x) for x in src], dtype=np.int64)
        d = np.array([int(x) for x in dst], dtype=np.int64)
        n = int(max(s.max(initial=-1), d.max(initial=-1))) + 1
        names = None
    else:
        index = {}
        for x in _interleave(src, dst):
            index.setdefault(x, len(index))
        s = np.array([index[x] for x in src], dtype=np.int64)
        d = np.array([index[x] for x in dst], dtype=np.int64)
        n = len(index)
        names = list(index)
    if n_nodes is not None:
        if n_nodes < n:
            raise GraphError(f"n_nodes={n_nodes} but ids reach {n - 1}")
        n = n_nodes
    return from_edges(n, s, d, wts, node_names=names)


def _interleave(a, b):
    for x, y in zip(a, b):
        yield x
        yield y


def read_edge_list(path, weighted=True):
    with open(path, encoding="utf-8") as fh:
        return load_edge_list(fh, weighted=weighted)


def write_edge_list(g, path, header=None):
    pairs, w = g.edges()
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for (i, j), x in zip(pairs, w):
            fh.write(f"{_name(g, i)}\t{_name(g, j)}\t{x:.17g}\n")


def write_node_mapping(g, path):
    if g.node_names is None:
        raise GraphError("graph has integer node ids; no mapping to write")
    with open(path, "w", encoding="utf-8") as fh:
        for k, name in enumerate(g.node_names):
            fh.write(f"{name}\t{k}\n")


def _name(g, i):
    return str(i) if g.node_names is None else g.node_names[i]


def degrees(g):
    return np.asarray(g.stubs.sum(axis=1)).ravel()


def transition_matrix(g):
    """Row-stochastic simple random walk operator, P(i,j) = stubs(i,j) / d_i."""
    d = degrees(g)
    isolated = np.flatnonzero(d <= 0)
    if len(isolated):
        raise GraphError(
            f"node {_name(g, isolated[0])} is isolated "
            f"({len(isolated)} isolated node(s) in total)"
        )
    return (sparse.diags(1.0 / d) @ g.stubs).tocsr()


def n_components(g):
    return connected_components(g.adjacency, directed=False)[0]


def is_connected(g):
    return g.n_nodes > 0 and n_components(g) == 1


def largest_component(g):
    """Subgraph on the largest connected component and the kept node indices."""
    _, comp = connected_components(g.adjacency, directed=False)
    keep = np.flatnonzero(comp == np.bincount(comp).argmax())
    A = g.adjacency[keep][:, keep]
    names = None if g.node_names is None else [g.node_names[k] for k in keep]
    return Graph(A, names), keep


class _DisjointSet:
    def __init__(self, n):
        self.parent = np.arange(n)

    def find(self, x):
        p = self.parent
        root = x
        while p[root] != root:
            root = p[root]
        while p[x] != root:
            p[x], x = root, p[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def spanning_tree_edges(g, seed=0):
    """Kruskal on unit costs with edges visited in a seeded random order.

    Returns an (N-1, 2) array of pairs with i < j.
    """
    k = n_components(g)
    if k != 1:
        raise GraphError(f"graph is disconnected ({k} components)")
    pairs, _ = g.edges()
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    order = substream(seed, "spanning-tree").permutation(len(pairs))
    ds = _DisjointSet(g.n_nodes)
    tree = []
    for e in order:
        i, j = pairs[e]
        if ds.union(i, j):
            tree.append((i, j))
            if len(tree) == g.n_nodes - 1:
                break
    return np.array(sorted(tree), dtype=np.int64).reshape(-1, 2)
