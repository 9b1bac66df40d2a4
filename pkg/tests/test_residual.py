import numpy as np
import pytest
from hypothesis import given, settings
from scipy import sparse

from conftest import graph_from_lines, graphs_with_groups
from residual2vec.bench import generate_planted_partition
from residual2vec.graph import GraphError, from_edges
from residual2vec.nullmodels import (
    NodeGrouping,
    baseline_matrix,
    config_model_baseline,
    erdos_renyi_baseline,
    fit_dcsbm,
)
from residual2vec.residual import (
    Embedding,
    read_embedding_tsv,
    residual2vec,
    residual_log_ratio,
    residual_matrix,
    residual_pmi,
    node_marginals,
    scale_embedding,
    truncated_svd,
)
from residual2vec.transition import WindowTransition, block_approx_transition, exact_window_transition


def test_triangle_residual(triangle):
    pd = exact_window_transition(triangle, 2)
    R = residual_matrix(pd, config_model_baseline(triangle)).matrix.toarray()
    off = ~np.eye(3, dtype=bool)
    np.testing.assert_allclose(R[off], np.log(9 / 8), rtol=1e-12)
    assert np.log(9 / 8) == pytest.approx(0.1178, abs=1e-4)
    np.testing.assert_array_equal(np.diag(R), 0)
    _, _, v = residual_log_ratio(pd, config_model_baseline(triangle))
    assert v.min() == pytest.approx(np.log(3 / 4))


def test_stored_entries_positive_and_in_support(path4):
    pd = exact_window_transition(path4, 2)
    R = residual_matrix(pd, config_model_baseline(path4)).matrix
    assert (R.data > 0).all()
    support = pd.matrix.toarray() > 0
    assert support[R.nonzero()].all()
    # Truncating again changes nothing.
    np.testing.assert_array_equal(np.maximum(R.toarray(), 0), R.toarray())


def test_residual_of_null_is_zero():
    g = graph_from_lines("0 1", "1 2", "2 3", "3 0", "0 2", "3 4")
    model = fit_dcsbm(g, NodeGrouping(np.array([0, 0, 1, 1, 1]), 2))
    pd = WindowTransition(T=3, mode="exact", matrix=sparse.csr_matrix(baseline_matrix(model, 3)))
    R = residual_matrix(pd, model).matrix
    # Only rounding noise survives the truncation.
    assert R.nnz == 0 or R.data.max() < 1e-12
    assert residual_pmi(pd, model, 0, 4) == pytest.approx(0, abs=1e-12)


def test_complete_graph_with_loops_against_er():
    n = 5
    src, dst = np.triu_indices(n, 1)
    loops = np.arange(n)
    # Loops of weight 1/2 contribute one stub, so every row of P is 1/N.
    g = from_edges(
        n,
        np.concatenate([src, loops]),
        np.concatenate([dst, loops]),
        np.concatenate([np.ones(len(src)), np.full(n, 0.5)]),
    )
    pd = exact_window_transition(g, 4)
    np.testing.assert_allclose(pd.dense(), 1 / n)
    assert residual_matrix(pd, erdos_renyi_baseline(n)).matrix.nnz == 0


def test_baseline_must_cover_support(path4):
    pd = exact_window_transition(path4, 1)
    with pytest.raises(GraphError):
        residual_matrix(pd, erdos_renyi_baseline(3))


def test_residual_pmi_examples(triangle, path4):
    pd = exact_window_transition(triangle, 2)
    base = config_model_baseline(triangle)
    assert residual_pmi(pd, base, 0, 1) == pytest.approx(np.log(9 / 8), abs=1e-12)
    for g in (triangle, path4):
        pd = exact_window_transition(g, 2)
        base = config_model_baseline(g)
        for i in range(g.n_nodes):
            for j in range(g.n_nodes):
                if pd.dense()[i, j] > 0:
                    assert residual_pmi(pd, base, i, j) == pytest.approx(
                        residual_pmi(pd, base, j, i), abs=1e-12
                    )


def test_residual_pmi_zero_joint(path4):
    pd = exact_window_transition(path4, 1)
    with pytest.raises(GraphError, match="zero joint"):
        residual_pmi(pd, config_model_baseline(path4), 0, 3)


@settings(max_examples=30, deadline=None)
@given(graphs_with_groups())
def test_log_ratio_equals_residual_pmi(case):
    g, labels, B = case
    for base in (config_model_baseline(g), fit_dcsbm(g, NodeGrouping(labels, B))):
        pd = exact_window_transition(g, 3)
        marg = node_marginals(pd, base)
        np.testing.assert_allclose(marg[0], marg[1], atol=1e-10)
        r, c, v = residual_log_ratio(pd, base)
        np.testing.assert_allclose(residual_pmi(pd, base, r, c, marginals=marg), v, atol=1e-10)


def test_block_residual_matches_exact_at_full_resolution():
    pp = generate_planted_partition(60, seed=1)
    g = pp.graph
    base = fit_dcsbm(g, pp.labels)
    exact = residual_matrix(exact_window_transition(g, 5), base).matrix.toarray()
    part = NodeGrouping(np.arange(g.n_nodes), g.n_nodes)
    block = residual_matrix(block_approx_transition(g, g.n_nodes, 5, partition=part), base)
    np.testing.assert_allclose(block.matrix.toarray(), exact, atol=1e-8)


def test_svd_rank_one():
    rng = np.random.default_rng(0)
    a, b = rng.random(12), rng.random(12)
    M = np.outer(a, b)
    left, sigma, right = truncated_svd(M, 1)
    assert np.linalg.norm(M - left * sigma @ right.T) < 1e-10
    assert left[np.argmax(np.abs(left[:, 0])), 0] > 0


def test_svd_full_rank_on_graph():
    g = generate_planted_partition(10, degree_spec=("regular", 5), seed=0).graph
    R = residual_matrix(exact_window_transition(g, 3), config_model_baseline(g))
    n = R.n_nodes
    left, sigma, right = truncated_svd(R, n)
    A = R.matrix.toarray()
    assert np.linalg.norm(A - left * sigma @ right.T) / np.linalg.norm(A) < 1e-8


@pytest.mark.parametrize("method", ["dense", "arpack"])
def test_svd_eckart_young(method):
    rng = np.random.default_rng(1)
    A = np.maximum(rng.standard_normal((20, 20)), 0)
    full = np.linalg.svd(A, compute_uv=False)
    errs = []
    for K in range(1, 19):
        left, sigma, right = truncated_svd(sparse.csr_matrix(A), K, method=method)
        np.testing.assert_allclose(sigma, full[:K], rtol=1e-8)
        err = np.linalg.norm(A - left * sigma @ right.T)
        np.testing.assert_allclose(err, np.sqrt((full[K:] ** 2).sum()), rtol=1e-8)
        errs.append(err)
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))


def test_svd_rejects_bad_rank():
    with pytest.raises(GraphError):
        truncated_svd(np.eye(3), 4)
    with pytest.raises(GraphError):
        truncated_svd(np.eye(3), 0)


def test_arpack_is_deterministic():
    rng = np.random.default_rng(2)
    A = sparse.random(300, 300, density=0.05, random_state=rng)
    a = truncated_svd(A, 8, seed=3, method="arpack")
    b = truncated_svd(A, 8, seed=3, method="arpack")
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_scale_embedding_examples():
    rng = np.random.default_rng(0)
    left, _ = np.linalg.qr(rng.standard_normal((6, 3)))
    right, _ = np.linalg.qr(rng.standard_normal((6, 3)))
    sigma = np.array([3.0, 1.5, 0.0])
    half = scale_embedding(left, sigma, right, 0.5)
    norms = np.linalg.norm(half.in_vectors, axis=0) * np.linalg.norm(half.out_vectors, axis=0)
    np.testing.assert_allclose(norms, sigma, atol=1e-12)
    one = scale_embedding(left, sigma, right, 1.0)
    np.testing.assert_allclose(
        one.in_vectors @ one.out_vectors.T, half.in_vectors @ half.out_vectors.T, atol=1e-12
    )
    np.testing.assert_array_equal(half.in_vectors[:, 2], 0)
    np.testing.assert_array_equal(half.out_vectors[:, 2], 0)
    with pytest.raises(GraphError):
        scale_embedding(left, -sigma, right)


def test_pipeline_is_deterministic():
    g = generate_planted_partition(300, seed=0).graph
    a = residual2vec(g, K=16)
    b = residual2vec(g, K=16)
    np.testing.assert_array_equal(a.in_vectors, b.in_vectors)
    np.testing.assert_array_equal(a.out_vectors, b.out_vectors)
    assert (np.diff(a.singular_values) <= 0).all()


def test_communities_are_closer_inside():
    pp = generate_planted_partition(100, mu=0.05, degree_spec=("power-law", 3.0, 6, 30), seed=0)
    e = residual2vec(pp.graph, K=8)
    U = e.in_vectors / np.linalg.norm(e.in_vectors, axis=1, keepdims=True)
    S = U @ U.T
    lab = pp.labels.labels
    same = lab[:, None] == lab[None, :]
    off = ~np.eye(len(lab), dtype=bool)
    assert S[same & off].mean() > S[~same].mean()


@pytest.mark.parametrize("null", ["config", "erdos-renyi", "dcsbm"])
def test_pipeline_nulls_and_block(null):
    pp = generate_planted_partition(120, seed=5)
    grouping = pp.labels if null == "dcsbm" else None
    e = residual2vec(pp.graph, null=null, grouping=grouping, K=8, approx="block", n_blocks=20)
    assert e.in_vectors.shape == (pp.graph.n_nodes, 8)
    assert np.isfinite(e.in_vectors).all()


def test_pipeline_errors(triangle):
    with pytest.raises(GraphError, match="exceeds"):
        residual2vec(triangle, K=4)
    with pytest.raises(GraphError, match="grouping"):
        residual2vec(triangle, null="dcsbm", K=2)
    with pytest.raises(GraphError, match="unknown"):
        residual2vec(triangle, null="bogus", K=2)


def test_embedding_tsv_round_trip(tmp_path):
    e = Embedding(
        in_vectors=np.array([[1.0, -0.0], [0.1, 2.0]]),
        out_vectors=np.array([[3.0, 4.0], [5.0, 6.0]]),
        singular_values=np.array([2.0, 1.0]),
        alpha=0.5,
    )
    p = tmp_path / "e.tsv"
    e.write_tsv(p, node_names=["a", "b"], context=True, header="run 1")
    lines = p.read_text().splitlines()
    assert lines[0] == "# run 1"
    assert lines[1] == "node_id\tdim_0\tdim_1"
    assert "-0" not in lines[2]
    names, U, V = read_embedding_tsv(p)
    assert names == ["a", "b"]
    np.testing.assert_array_equal(U, e.in_vectors)
    np.testing.assert_array_equal(V, e.out_vectors)
