"""Command-line entry point: ``r2v <command> [flags]``.

Every output starts with a ``# residual2vec {json}`` provenance line holding
the resolved run configuration. No timestamps are written, so reruns with the
same flags are byte-identical.
"""
import argparse
import json
import logging
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field

import networkx as nx
import numpy as np

from . import bench
from .graph import GraphError, degrees, is_connected, read_edge_list, write_edge_list, write_node_mapping
from .nullmodels import baseline_row, read_grouping, write_grouping
from .residual import DEFAULT_ALPHA, DEFAULT_K, DEFAULT_T, make_baseline, residual2vec
from .transition import DEFAULT_BLOCKS, simulate_walks, stationary_visit_frequency

NULLS = ("erdos-renyi", "config", "dcsbm")
OFFSET_VARIANTS = {"on": ("offset",), "off": ("no-offset",), "both": ("offset", "no-offset")}


@dataclass
class RunConfig:
    command: str
    input: str = None
    groups: str = None
    default_group: str = None
    null: str = "config"
    T: int = DEFAULT_T
    K: int = DEFAULT_K
    alpha: float = DEFAULT_ALPHA
    approx: str = "exact"
    blocks: int = DEFAULT_BLOCKS
    rho: float = bench.DEFAULT_RHO
    mu: float = 0.05
    tau: float = bench.DEFAULT_TAU
    n: int = 1000
    B: int = 2
    dmin: float = bench.DEFAULT_DEGREE_SPEC[2]
    dmax: float = bench.DEFAULT_DEGREE_SPEC[3]
    node: int = None
    walkers: int = 10
    length: int = 80
    pairs: int = bench.DEFAULT_PAIRS
    seed: int = 0
    seeds: int = 1
    threads: int = 1
    output: str = None
    extra: dict = field(default_factory=dict)

    def validate(self):
        need_input = {"embed", "stats", "nullprob", "walks"}
        if self.command in need_input and not self.input:
            raise GraphError(f"{self.command} needs --input")
        if self.null not in NULLS:
            raise GraphError(f"--null must be one of {NULLS}")
        if self.null == "dcsbm" and self.command in ("embed", "nullprob") and not self.groups:
            raise GraphError("--null dcsbm needs --groups")
        if self.T < 1:
            raise GraphError("--T must be >= 1")
        if self.K < 1:
            raise GraphError("--K must be >= 1")
        if not 0 <= self.alpha <= 1:
            raise GraphError("--alpha must lie in [0, 1]")
        if self.approx not in ("exact", "block"):
            raise GraphError("--approx must be exact or block")
        if self.blocks < 1:
            raise GraphError("--blocks must be >= 1")
        if not 0 < self.rho < 1:
            raise GraphError("--rho must lie in (0, 1)")
        if not 0 <= self.mu <= 1:
            raise GraphError("--mu must lie in [0, 1]")
        if self.seeds < 1:
            raise GraphError("--seeds must be >= 1")
        if self.command == "nullprob" and self.node is None:
            raise GraphError("nullprob needs --node")
        return self

    def header(self):
        return "residual2vec " + json.dumps(asdict(self), sort_keys=True)

    def seed_list(self):
        return list(range(self.seed, self.seed + self.seeds))


def _open_out(path):
    if path in (None, "-"):
        return _Stdout()
    return open(path, "w", encoding="utf-8")


class _Stdout:
    def __enter__(self):
        return sys.stdout

    def __exit__(self, *exc):
        sys.stdout.flush()


def _load(cfg):
    g = read_edge_list(cfg.input)
    grouping = None
    if cfg.groups:
        grouping = read_grouping(cfg.groups, g.n_nodes, g.node_names, cfg.default_group)
    return g, grouping


def cmd_embed(cfg):
    g, grouping = _load(cfg)
    if cfg.K > g.n_nodes:
        raise GraphError(f"--K {cfg.K} exceeds the number of nodes ({g.n_nodes})")
    e = residual2vec(
        g, cfg.null, grouping, T=cfg.T, K=cfg.K, approx=cfg.approx,
        n_blocks=cfg.blocks, alpha=cfg.alpha, seed=cfg.seed,
    )
    if not cfg.output:
        raise GraphError("embed needs --output")
    e.write_tsv(cfg.output, g.node_names, context=cfg.extra.get("export_context", False), header=cfg.header())
    sigma_path = cfg.extra.get("export_sigma")
    if sigma_path:
        e.write_sigma(sigma_path)
    if g.node_names is not None and cfg.extra.get("mapping"):
        write_node_mapping(g, cfg.extra["mapping"])
    return 0


def graph_stats(g):
    d = degrees(g)
    simple = nx.Graph()
    simple.add_nodes_from(range(g.n_nodes))
    pairs, _ = g.edges()
    simple.add_edges_from((int(i), int(j)) for i, j in pairs if i != j)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        r = nx.degree_assortativity_coefficient(simple) if simple.number_of_edges() else float("nan")
    values, counts = np.unique(d, return_counts=True)
    out = {
        "n_nodes": g.n_nodes,
        "n_edges": g.n_edges,
        "max_degree": float(d.max()) if len(d) else 0.0,
        "degree_distribution": {f"{v:g}": int(c) for v, c in zip(values, counts)},
        "assortativity": None if not np.isfinite(r) else float(r),
        "clustering_coefficient": float(nx.average_clustering(simple)),
        "connected": bool(is_connected(g)),
    }
    if out["connected"]:
        out["stationary_visit_frequency"] = stationary_visit_frequency(g).tolist()
    return out


def cmd_stats(cfg):
    g, _ = _load(cfg)
    stats = graph_stats(g)
    stats["run_config"] = asdict(cfg)
    with _open_out(cfg.output) as fh:
        json.dump(stats, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return 0


def cmd_nullprob(cfg):
    g, grouping = _load(cfg)
    base = make_baseline(g, cfg.null, grouping)
    node = cfg.node
    if g.node_names is not None:
        node = g.node_names.index(str(cfg.node)) if str(cfg.node) in g.node_names else None
    if node is None or not 0 <= node < g.n_nodes:
        raise GraphError(f"node {cfg.node} is not in the graph")
    row = baseline_row(base, node, cfg.T)
    names = g.node_names or [str(i) for i in range(g.n_nodes)]
    with _open_out(cfg.output) as fh:
        fh.write(f"# {cfg.header()}\n")
        fh.write("node_id\tprobability\n")
        for name, p in zip(names, row):
            fh.write(f"{name}\t{p:.17g}\n")
    return 0


def cmd_walks(cfg):
    g, _ = _load(cfg)
    corpus = simulate_walks(g, cfg.walkers, cfg.length, seed=cfg.seed, threads=cfg.threads)
    if not cfg.output:
        raise GraphError("walks needs --output")
    corpus.write(cfg.output)
    return 0


def _benchmark_graph(cfg, seed):
    if cfg.input:
        g, grouping = _load(cfg)
        return os.path.basename(cfg.input), g, grouping
    spec = ("power-law", cfg.tau, cfg.dmin, cfg.dmax)
    pp = bench.generate_planted_partition(cfg.n, cfg.B, cfg.mu, spec, seed=seed)
    return f"planted(n={cfg.n},B={cfg.B},mu={cfg.mu})", pp.graph, pp.labels


def _embed_for_bench(cfg, g, grouping, seed):
    K = min(cfg.K, g.n_nodes)
    return residual2vec(
        g, cfg.null, grouping, T=cfg.T, K=K, approx=cfg.approx,
        n_blocks=cfg.blocks, alpha=cfg.alpha, seed=seed,
    )


def cmd_linkpred(cfg):
    """Per seed: split, embed the train graph, score the held-out pairs."""
    records = []
    params = asdict(cfg)
    method = f"r2v-{cfg.null}"
    for seed in cfg.seed_list():
        name, g, grouping = _benchmark_graph(cfg, seed)
        with bench.Timer() as t:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", bench.EdgeRemovalCapped)
                split = bench.split_for_link_prediction(g, cfg.rho, seed=seed)
            if cfg.null == "dcsbm":
                grouping_train = grouping
            else:
                grouping_train = None
            e = _embed_for_bench(cfg, split.train_graph, grouping_train, seed)
        base = make_baseline(split.train_graph, cfg.null, grouping_train)
        scorers = {
            "offset": lambda p: bench.link_scores(
                e, p, pair_offsets=bench.baseline_pair_offsets(base, cfg.T, p)
            ),
            "no-offset": lambda p: bench.link_scores(e, p),
        }
        for variant in OFFSET_VARIANTS[cfg.extra.get("offset") or "on"]:
            scorer = scorers[variant]
            auc = bench.auc_roc(scorer(split.positives), scorer(split.negatives))
            records.append(bench.benchmark_record(
                "link-prediction", name, f"{method}/{variant}", params, auc, seed, round(t.ms, 3),
            ))
    _write_records(cfg, records)
    return 0


def cmd_commbench(cfg):
    records = []
    params = asdict(cfg)
    for seed in cfg.seed_list():
        name, g, labels = _benchmark_graph(cfg, seed)
        if labels is None:
            raise GraphError("commbench needs community labels (--groups) for an input graph")
        with bench.Timer() as t:
            e = _embed_for_bench(cfg, g, labels if cfg.null == "dcsbm" else None, seed)
        auc = bench.community_similarity_auc(e, labels, cfg.pairs, seed=seed)
        records.append(bench.benchmark_record(
            "community-detection", name, f"r2v-{cfg.null}", params, auc, seed, round(t.ms, 3),
        ))
    _write_records(cfg, records)
    return 0


def _write_records(cfg, records):
    with _open_out(cfg.output) as fh:
        bench.write_jsonl(records, fh)
    summary = cfg.extra.get("summary")
    if summary:
        with open(summary, "w", encoding="utf-8", newline="") as fh:
            bench.write_summary_csv(bench.summarize(records, seed=cfg.seed), fh)


def cmd_generate(cfg):
    if not cfg.extra.get("planted", True):
        raise GraphError("only --planted generation is supported")
    spec = ("power-law", cfg.tau, cfg.dmin, cfg.dmax)
    pp = bench.generate_planted_partition(cfg.n, cfg.B, cfg.mu, spec, seed=cfg.seed)
    if not cfg.output:
        raise GraphError("generate needs --output")
    write_edge_list(pp.graph, cfg.output, header=cfg.header())
    labels = cfg.extra.get("labels_output") or cfg.output + ".labels.tsv"
    write_grouping(pp.labels, labels)
    return 0


def cmd_summarize(cfg):
    with open(cfg.input, encoding="utf-8") as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    with _open_out(cfg.output) as fh:
        bench.write_summary_csv(bench.summarize(records, seed=cfg.seed), fh)
    return 0


COMMANDS = {
    "embed": cmd_embed,
    "stats": cmd_stats,
    "nullprob": cmd_nullprob,
    "walks": cmd_walks,
    "linkpred": cmd_linkpred,
    "commbench": cmd_commbench,
    "generate": cmd_generate,
    "summarize": cmd_summarize,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="r2v", description="residual2vec graph embedding")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--input")
        p.add_argument("--output")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)

    def model(p):
        p.add_argument("--groups")
        p.add_argument("--default-group", dest="default_group")
        p.add_argument("--null", choices=NULLS, default="config")
        p.add_argument("--T", type=int, default=DEFAULT_T)
        p.add_argument("--K", type=int, default=DEFAULT_K)
        p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
        p.add_argument("--approx", choices=("exact", "block"), default="exact")
        p.add_argument("--blocks", type=int, default=DEFAULT_BLOCKS)

    def planted(p):
        p.add_argument("--n", type=int, default=1000)
        p.add_argument("--B", type=int, default=2)
        p.add_argument("--mu", type=float, default=0.05)
        p.add_argument("--tau", type=float, default=bench.DEFAULT_TAU)
        p.add_argument("--dmin", type=float, default=bench.DEFAULT_DEGREE_SPEC[2])
        p.add_argument("--dmax", type=float, default=bench.DEFAULT_DEGREE_SPEC[3])

    p = sub.add_parser("embed", help="embed a graph")
    common(p)
    model(p)
    p.add_argument("--export-context", action="store_true")
    p.add_argument("--export-sigma")
    p.add_argument("--mapping", help="write the string-id mapping TSV here")

    p = sub.add_parser("stats", help="degree, stationary, assortativity and clustering statistics")
    common(p)

    p = sub.add_parser("nullprob", help="baseline probabilities P0(.|node)")
    common(p)
    model(p)
    p.add_argument("--node", required=True)

    p = sub.add_parser("walks", help="simulate random walks and write a corpus")
    common(p)
    p.add_argument("--walkers", type=int, default=10)
    p.add_argument("--length", type=int, default=80)

    p = sub.add_parser("linkpred", help="link prediction benchmark (JSON lines)")
    common(p)
    model(p)
    planted(p)
    p.add_argument("--rho", type=float, default=bench.DEFAULT_RHO)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--summary", help="also write a bootstrap CSV summary")
    p.add_argument(
        "--offset", choices=tuple(OFFSET_VARIANTS), default="on",
        help="score with baseline offsets, without them, or both (one record each)",
    )

    p = sub.add_parser("commbench", help="community detection benchmark (JSON lines)")
    common(p)
    model(p)
    planted(p)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--pairs", type=int, default=bench.DEFAULT_PAIRS)
    p.add_argument("--summary")

    p = sub.add_parser("generate", help="generate a planted-partition graph")
    common(p)
    planted(p)
    p.add_argument("--planted", action="store_true", default=True)
    p.add_argument("--labels-output", dest="labels_output")

    p = sub.add_parser("summarize", help="bootstrap CSV summary of JSON-lines records")
    common(p)
    return parser


_EXTRA = ("export_context", "export_sigma", "mapping", "summary", "planted", "labels_output", "offset")


def config_from_args(args):
    values = vars(args).copy()
    values.pop("verbose", None)
    extra = {k: values.pop(k) for k in _EXTRA if k in values}
    if values.get("node") is not None:
        node = values["node"]
        values["node"] = int(node) if str(node).isdigit() else node
    return RunConfig(extra=extra, **values).validate()


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        cfg = config_from_args(args)
        return COMMANDS[cfg.command](cfg)
    except (GraphError, OSError) as exc:
        print(f"r2v {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
