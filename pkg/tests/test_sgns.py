import numpy as np
import pytest

from conftest import graph_from_lines
from residual2vec.graph import GraphError, from_edges
from residual2vec.sgns import (
    NCE,
    NEGATIVE_SAMPLING,
    AliasTable,
    NoiseDistribution,
    TrainerConfig,
    TrainingDiverged,
    _sgd_epoch,
    corpus_pairs,
    mean_kl,
    model_distribution,
    model_log_distribution,
    pair_counts,
    pair_loss_and_grads,
    softmax_mle,
    train,
    train_pairs,
    verify_unbiasedness,
)
from residual2vec.residual import Embedding
from residual2vec.transition import simulate_walks

TEN_NODE_EDGES = [
    (0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (2, 3), (3, 4), (4, 5),
    (5, 6), (6, 7), (7, 8), (8, 9), (9, 5), (6, 8), (1, 9),
]


def ten_node_graph():
    src, dst = np.array(TEN_NODE_EDGES).T
    return from_edges(10, src, dst)


def _flat_loss(x, K, k, objective, lp_pos, lp_neg):
    u, vp, vn, c = x[:K], x[K : 2 * K], x[2 * K : -1].reshape(k, K), x[-1]
    return pair_loss_and_grads(u, vp, vn, objective, lp_pos, lp_neg, c)[0]


@pytest.mark.parametrize("objective", [NEGATIVE_SAMPLING, NCE])
def test_gradients_match_finite_differences(objective):
    rng = np.random.default_rng(0)
    K, k, h = 4, 3, 1e-6
    worst = 0.0
    for _ in range(100):
        x = rng.standard_normal(K + K + k * K + 1)
        lp_pos, lp_neg = np.log(rng.random()), np.log(rng.random(k))
        u, vp, vn, c = x[:K], x[K : 2 * K], x[2 * K : -1].reshape(k, K), x[-1]
        _, du, dvp, dvn, dc = pair_loss_and_grads(u, vp, vn, objective, lp_pos, lp_neg, c)
        analytic = np.concatenate([du, dvp, dvn.ravel(), [dc]])
        numeric = np.empty_like(x)
        for a in range(len(x)):
            e = np.zeros_like(x)
            e[a] = h
            numeric[a] = (
                _flat_loss(x + e, K, k, objective, lp_pos, lp_neg)
                - _flat_loss(x - e, K, k, objective, lp_pos, lp_neg)
            ) / (2 * h)
        if objective == NEGATIVE_SAMPLING:
            assert analytic[-1] == 0.0
        worst = max(worst, np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric))
    assert worst < 1e-5


@pytest.mark.parametrize("nce", [False, True])
def test_kernel_step_matches_python_gradients(nce):
    rng = np.random.default_rng(1)
    n, K, lr = 6, 3, 0.1
    U = rng.standard_normal((n, K))
    V = rng.standard_normal((n, K))
    log_p0 = np.log(np.full(n, 1 / n))
    c = np.array([0.7])
    obj = NCE if nce else NEGATIVE_SAMPLING
    _, du, dvp, dvn, dc = pair_loss_and_grads(
        U[0], V[1], V[[2, 3]], obj, log_p0[1], log_p0[[2, 3]], c[0]
    )
    U2, V2, c2 = U.copy(), V.copy(), c.copy()
    _sgd_epoch(U2, V2, c2, np.array([0]), np.array([1]), np.array([[2, 3]]), log_p0, nce, lr, lr, 0, 1)
    np.testing.assert_allclose(U2[0], U[0] - lr * du, atol=1e-12)
    np.testing.assert_allclose(V2[1], V[1] - lr * dvp, atol=1e-12)
    np.testing.assert_allclose(V2[[2, 3]], V[[2, 3]] - lr * dvn, atol=1e-12)
    np.testing.assert_allclose(c2[0], c[0] - lr * dc, atol=1e-12)


def test_noise_validation():
    with pytest.raises(GraphError):
        NoiseDistribution(np.array([0.5, 0.5, 0.0]))
    with pytest.raises(GraphError):
        NoiseDistribution(np.array([0.5, 0.6]))
    p = NoiseDistribution.from_frequencies([1, 4, 9], gamma=0.5).probabilities
    np.testing.assert_allclose(p, [1 / 6, 2 / 6, 3 / 6])
    star = graph_from_lines("0 1", "0 2", "0 3")
    np.testing.assert_allclose(NoiseDistribution.from_degrees(star).probabilities, [0.5] + [1 / 6] * 3)


def test_config_validation():
    with pytest.raises(GraphError):
        TrainerConfig(negatives=0)
    with pytest.raises(GraphError):
        TrainerConfig(lr_start=0.01, lr_end=0.1)
    with pytest.raises(GraphError):
        TrainerConfig(objective="hierarchical")


def test_alias_table_frequencies():
    p = np.array([0.5, 0.25, 0.125, 0.0625, 0.0625])
    draws = AliasTable(p).draw(np.random.default_rng(0), 200_000)
    np.testing.assert_allclose(np.bincount(draws, minlength=5) / len(draws), p, atol=0.005)


def test_model_distribution_properties():
    noise = NoiseDistribution(np.array([0.1, 0.2, 0.3, 0.4]))
    zero = Embedding(np.zeros((4, 2)), np.zeros((4, 2)), np.ones(2), 0.5)
    np.testing.assert_allclose(model_distribution(zero, noise, 2), noise.probabilities)
    rng = np.random.default_rng(0)
    e = Embedding(rng.standard_normal((4, 2)), rng.standard_normal((4, 2)), np.ones(2), 0.5)
    logits = e.in_vectors @ e.out_vectors.T
    softmax = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
    np.testing.assert_allclose(model_distribution(e, NoiseDistribution.uniform(4)), softmax)
    np.testing.assert_allclose(model_distribution(e, noise).sum(axis=1), 1.0)


def test_single_node_corpus():
    g = graph_from_lines("0 0")
    corpus = simulate_walks(g, walkers_per_node=10, walk_length=50)
    cfg = TrainerConfig(K=2, negatives=5, epochs=5)
    noise = NoiseDistribution(np.array([1.0]))
    e = train(corpus, 2, noise, cfg)
    np.testing.assert_allclose(model_distribution(e, noise, 0), [1.0])
    # At the optimum sigma(u.v) = 1/(k+1): the positive and negative gradients cancel.
    s = e.in_vectors[0] @ e.out_vectors[0]
    assert s == pytest.approx(-np.log(cfg.negatives), abs=0.05)


def test_training_is_deterministic(triangle):
    c, x = corpus_pairs(triangle, 2000, 2, seed=0)
    noise = NoiseDistribution.uniform(3)
    a = train_pairs(c, x, noise, TrainerConfig(K=3, seed=4))
    b = train_pairs(c, x, noise, TrainerConfig(K=3, seed=4))
    np.testing.assert_array_equal(a.in_vectors, b.in_vectors)
    np.testing.assert_array_equal(a.out_vectors, b.out_vectors)


def test_triangle_model_matches_empirical(triangle):
    c, x = corpus_pairs(triangle, 100_000, 2, seed=0)
    noise = NoiseDistribution.uniform(3)
    e = train_pairs(c, x, noise, TrainerConfig(K=3))
    counts = pair_counts(c, x, 3)
    emp = counts / counts.sum(axis=1, keepdims=True)
    assert mean_kl(emp, model_log_distribution(e, noise)) < 0.05


def test_divergence_is_detected(triangle):
    c, x = corpus_pairs(triangle, 3000, 2, seed=0)
    cfg = TrainerConfig(K=3, epochs=10, lr_start=1e6, lr_end=1e6)
    with pytest.raises(TrainingDiverged):
        train_pairs(c, x, NoiseDistribution.uniform(3), cfg)


def test_empty_corpus_rejected():
    with pytest.raises(GraphError, match="no center"):
        train_pairs([], [], NoiseDistribution.uniform(2), TrainerConfig())


def test_softmax_mle_recovers_full_rank():
    rng = np.random.default_rng(0)
    counts = rng.integers(1, 50, size=(5, 5)).astype(float)
    U, V = softmax_mle(counts, 5)
    L = U @ V.T
    model = np.exp(L) / np.exp(L).sum(axis=1, keepdims=True)
    np.testing.assert_allclose(model, counts / counts.sum(axis=1, keepdims=True), atol=1e-4)


def test_ns_kl_decreases_with_corpus_size():
    g = ten_node_graph()
    noise = NoiseDistribution.from_degrees(g)
    report = verify_unbiasedness(g, noise, TrainerConfig(K=10), [10**4, 10**5, 10**6])
    kl = [r["kl_empirical"] for r in report]
    assert kl[0] >= kl[1] >= kl[2]
    assert kl[2] < 0.01


def test_nce_close_to_softmax_mle():
    g = ten_node_graph()
    n = g.n_nodes
    c, x = corpus_pairs(g, 200_000, 2, seed=3)
    counts = pair_counts(c, x, n)
    emp = counts / counts.sum(axis=1, keepdims=True)
    noise = NoiseDistribution.from_degrees(g)
    e = train_pairs(c, x, noise, TrainerConfig(K=2, objective=NCE))
    kl_nce = mean_kl(emp, model_log_distribution(e, NoiseDistribution.uniform(n)))
    U, V = softmax_mle(counts, 2)
    L = U @ V.T
    kl_mle = mean_kl(emp, L - np.log(np.exp(L).sum(axis=1, keepdims=True)))
    assert kl_nce - kl_mle < 0.05


def test_verify_rejects_large_graphs():
    g = from_edges(60, np.arange(59), np.arange(1, 60))
    with pytest.raises(GraphError, match="at most 50"):
        verify_unbiasedness(g, NoiseDistribution.uniform(60), TrainerConfig(), [100])


@pytest.mark.xfail(
    strict=True,
    reason="with K < N the negative-sampling optimum is a different low-rank fit "
    "than softmax maximum likelihood, so its KL is not within 1.2x of the MLE",
)
def test_noise_absorption_within_factor_of_mle():
    g = ten_node_graph()
    n, K = g.n_nodes, 2
    noise = NoiseDistribution.from_degrees(g)
    ratios = []
    for seed in range(5):
        c, x = corpus_pairs(g, 100_000, 2, seed=seed)
        counts = pair_counts(c, x, n)
        emp = counts / counts.sum(axis=1, keepdims=True)
        e = train_pairs(c, x, noise, TrainerConfig(K=K, seed=seed))
        kl_ns = mean_kl(emp, model_log_distribution(e, noise))
        log_prior = np.log(noise.probabilities)
        U, V = softmax_mle(counts, K, log_prior=log_prior, seed=seed)
        L = U @ V.T + log_prior
        kl_mle = mean_kl(emp, L - np.log(np.exp(L).sum(axis=1, keepdims=True)))
        ratios.append(kl_ns / kl_mle)
    assert np.mean(ratios) <= 1.2
