"""End-to-end acceptance checks: one printed PASS/FAIL line per guarantee.

The first five checks are property-based and run on bundled fixtures and
synthetic graphs. The remaining six reproduce reference accuracy numbers and
qualitative claims on the three converted citation datasets; when those
directories are absent the tests skip with instructions for generating them
(they are large downloads we do not bundle). Run with ``pytest -s`` to see
the scoreboard lines.
"""

import os
import time

import numpy as np
import pytest

from bgnn import autodiff as ad
from bgnn.aggregators import BilinearScope, bilinear_fast, bilinear_naive
from bgnn.analysis import agreement_table
from bgnn.autodiff import gradcheck
from bgnn.data import load_dataset
from bgnn.graph import SparseAdjacency, add_self_loops, khop_binarize
from bgnn.models import (ModelConfig, VARIANTS, build_context, forward,
                         init_params, predict, replace_config,
                         weight_matrix_names)
from bgnn.repro import DATASETS, MIXTURE_GRID, reproduction_config
from bgnn.synth import planted_partition, random_graph, tiny_fixture
from bgnn.training import random_splits, repeat_runs, train

pytestmark = pytest.mark.filterwarnings(
    "ignore:training loss increased:RuntimeWarning")

BILINEAR_VARIANTS = ("bgcn-a", "bgcn-t", "bgat-a", "bgat-t")

# Reference mean test accuracies (percent); a faithful run must land within
# ±1.5 points (run-to-run and reimplementation variance) on the fixed splits.
ACCURACY_TOLERANCE = 1.5
TWO_LAYER_TARGETS = {
    "gcn":    {"pubmed": 79.0, "cora": 81.5, "citeseer": 70.3},
    "bgcn-t": {"pubmed": 79.4, "cora": 82.0, "citeseer": 71.9},
    "gat":    {"pubmed": 79.0, "cora": 83.0, "citeseer": 72.5},
    "bgat-t": {"pubmed": 79.8, "cora": 84.2, "citeseer": 74.0},
}
ONE_LAYER_TARGETS = {
    "gcn":    {"pubmed": 76.9, "cora": 76.8, "citeseer": 69.1},
    "bgcn-t": {"pubmed": 78.0, "cora": 78.7, "citeseer": 70.6},
}
RANDOM_SPLIT_CORA_TARGET = 80.3
RANDOM_SPLIT_CORA_TOLERANCE = 2.0


def check(name, ok, detail=""):
    """Print one scoreboard line and assert the same condition."""
    print(f"{'PASS' if ok else 'FAIL'} — {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}" if detail else name


# ---------------------------------------------------------------------------
# shared helpers

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
_DATA_CACHE = {}
_MEAN_CACHE = {}


def converted_dataset(name):
    """Load a converted citation dataset or skip with build instructions."""
    if name not in _DATA_CACHE:
        candidates = []
        root = os.environ.get("BGNN_DATA_ROOT")
        if root:
            candidates.append(os.path.join(root, name))
        candidates.append(os.path.join(REPO_ROOT, "data", name))
        for path in candidates:
            if os.path.isdir(path):
                _DATA_CACHE[name] = load_dataset(path)
                break
        else:
            pytest.skip(
                f"converted dataset {name!r} not found (tried "
                f"{', '.join(candidates)}); convert the raw citation files "
                f"with the planetoid-convert tool under converter/ and set "
                f"BGNN_DATA_ROOT to its output directory")
    return _DATA_CACHE[name]


def mean_test_accuracy(dataset, variant, layers, runs=10):
    """Mean test accuracy (percent) over ``runs`` seeds, cached per cell."""
    key = (dataset, variant, layers)
    if key not in _MEAN_CACHE:
        cfg = reproduction_config(dataset, variant, layers=layers)
        result = repeat_runs(cfg, converted_dataset(dataset), seeds=range(runs))
        _MEAN_CACHE[key] = 100.0 * result["mean_test_acc"]
    return _MEAN_CACHE[key]


def model_config(variant, layers, alpha=0.5, seed=0, **kwargs):
    """Small-fixture config; bilinear variants get a valid mixture/beta."""
    if variant in BILINEAR_VARIANTS:
        beta = (1.0,) if layers == 1 else (0.5,) * 2
        return ModelConfig(variant=variant, layers=layers, alpha=alpha,
                           beta=beta, seed=seed, **kwargs)
    return ModelConfig(variant=variant, layers=layers, seed=seed, **kwargs)


def eval_logits(cfg, params, adj, features):
    return predict(cfg, params, build_context(adj, cfg), features)


def permute_graph(adj, features, perm):
    """Relabel nodes: node v becomes perm[v] in the returned graph."""
    edges = []
    for v in range(adj.num_nodes):
        for u in adj.neighbors(v):
            if v < u:
                a, b = int(perm[v]), int(perm[u])
                edges.append((min(a, b), max(a, b)))
    permuted = np.empty_like(features)
    permuted[perm] = features
    return SparseAdjacency.from_edges(adj.num_nodes, edges), permuted


def median_seconds(fn, repeats):
    times = []
    for _ in range(repeats):
        begin = time.perf_counter()
        fn()
        times.append(time.perf_counter() - begin)
    return float(np.median(times))


# ---------------------------------------------------------------------------
# property-based checks (no external data needed)

def test_fast_bilinear_matches_pairwise_oracle():
    """100 random instances, both scopes, 1- and 2-hop structures, <= 1e-10."""
    rng = np.random.default_rng(101)
    begin = time.perf_counter()
    worst = 0.0
    for trial in range(100):
        n = int(rng.integers(2, 51))
        f_dim = int(rng.integers(1, 9))
        c_dim = int(rng.integers(1, 9))
        adj = random_graph(int(rng.integers(1 << 30)), n,
                           float(rng.uniform(1.0, 6.0)))
        structure = add_self_loops(khop_binarize(adj, 1 + trial % 2))
        h = rng.normal(size=(n, f_dim))
        w = rng.normal(size=(f_dim, c_dim))
        tape = ad.Tape()
        hv, wv = tape.constant(h), tape.constant(w)
        for scope in BilinearScope:
            fast = bilinear_fast(hv, structure, wv, scope).value
            slow = bilinear_naive(h, structure, w, scope)
            worst = max(worst, float(np.max(np.abs(fast - slow))))
    elapsed = time.perf_counter() - begin
    check("fast bilinear == pairwise oracle, 100 instances, tol 1e-10, <10s",
          worst <= 1e-10 and elapsed < 10.0,
          f"worst abs diff {worst:.2e}, {elapsed:.1f}s")


def test_model_outputs_are_permutation_invariant():
    """All six variants x depths 1-2, 20 random relabelings, tol 1e-9."""
    data = planted_partition(17, num_nodes=48, num_features=8,
                             train_per_class=4, val_per_class=4,
                             test_per_class=4)
    rng = np.random.default_rng(18)
    begin = time.perf_counter()
    worst = 0.0
    for variant in VARIANTS:
        for depth in (1, 2):
            cfg = model_config(variant, depth, hidden_dim=8)
            params = init_params(cfg, data.num_features, data.num_classes,
                                 np.random.default_rng(19))
            plain = eval_logits(cfg, params, data.adjacency, data.features)
            for _ in range(20):
                perm = rng.permutation(data.num_nodes)
                adj_p, feats_p = permute_graph(data.adjacency, data.features,
                                               perm)
                permed = eval_logits(cfg, params, adj_p, feats_p)
                worst = max(worst,
                            float(np.max(np.abs(permed[perm] - plain))))
    elapsed = time.perf_counter() - begin
    check("permutation invariance, 6 variants x 2 depths x 20 trials, "
          "tol 1e-9, <30s",
          worst <= 1e-9 and elapsed < 30.0,
          f"worst abs diff {worst:.2e}, {elapsed:.1f}s")


def test_full_loss_gradients_match_finite_differences():
    """Training-loss gradcheck < 1e-5 for six variants x two depths."""
    data = tiny_fixture()
    begin = time.perf_counter()
    errors = {}
    for variant in VARIANTS:
        for depth in (1, 2):
            cfg = model_config(variant, depth, hidden_dim=4, dropout=0.0,
                               weight_decay=5e-4)
            ctx = build_context(data.adjacency, cfg)
            init = init_params(cfg, data.num_features, data.num_classes,
                               np.random.default_rng(23))
            names = sorted(init)

            def full_loss(tape, *arrays, _cfg=cfg, _ctx=ctx, _names=names):
                pvars = dict(zip(_names, arrays))
                logits = forward(_cfg, pvars, _ctx,
                                 tape.constant(data.features))
                loss = ad.masked_cross_entropy(logits, data.labels,
                                               data.train_mask)
                penalty = None
                for name in weight_matrix_names(pvars):
                    term = ad.frobenius_sq(pvars[name])
                    penalty = term if penalty is None else \
                        ad.add_scaled(penalty, term, 1.0, 1.0)
                return ad.add_scaled(loss, penalty, 1.0, _cfg.weight_decay)

            errors[f"{variant}/{depth}"] = gradcheck(
                full_loss, [init[name] for name in names])
    elapsed = time.perf_counter() - begin
    bad = {k: v for k, v in errors.items() if not v < 1e-5}
    check("full-loss gradcheck, 6 variants x 2 depths, rel err < 1e-5, <60s",
          not bad and elapsed < 60.0,
          f"failures {bad}, worst {max(errors.values()):.2e}, {elapsed:.1f}s")


def test_mixture_degenerates_and_interpolates():
    """alpha=0 equals the plain stack bit-for-bit; logits are affine in alpha."""
    data = tiny_fixture()
    plain_of = {"bgcn-a": "gcn", "bgcn-t": "gcn",
                "bgat-a": "gat", "bgat-t": "gat"}
    mismatches = []
    for variant, plain in plain_of.items():
        mixed_cfg = model_config(variant, 2, alpha=0.0, seed=5)
        plain_cfg = model_config(plain, 2, seed=5)
        mixed = eval_logits(
            mixed_cfg,
            init_params(mixed_cfg, data.num_features, data.num_classes,
                        np.random.default_rng(5)),
            data.adjacency, data.features)
        ref = eval_logits(
            plain_cfg,
            init_params(plain_cfg, data.num_features, data.num_classes,
                        np.random.default_rng(5)),
            data.adjacency, data.features)
        if not np.array_equal(mixed, ref):
            mismatches.append(f"{variant} != {plain}")

    worst_gap = 0.0
    for variant in BILINEAR_VARIANTS:
        for depth in (1, 2):
            logits = {}
            for alpha in (0.0, 0.5, 1.0):
                cfg = model_config(variant, depth, alpha=alpha, seed=6)
                params = init_params(cfg, data.num_features, data.num_classes,
                                     np.random.default_rng(6))
                logits[alpha] = eval_logits(cfg, params, data.adjacency,
                                            data.features)
            mid = 0.5 * (logits[0.0] + logits[1.0])
            worst_gap = max(worst_gap,
                            float(np.max(np.abs(logits[0.5] - mid))))
    check("alpha=0 bit-exact vs plain stacks; logits(1/2) == mean of "
          "endpoints, tol 1e-12",
          not mismatches and worst_gap <= 1e-12,
          f"mismatches {mismatches}, affinity gap {worst_gap:.2e}")


def test_fast_kernel_scales_linearly_and_beats_oracle():
    """Wall time grows <= 15x per 10x nonzeros; pairwise oracle >= 5x slower."""
    rng = np.random.default_rng(31)
    num_nodes = 2_000  # fixed, so only the edge arrays grow with nnz
    times, nnzs = [], []
    for i, degree in enumerate((4.0, 49.0, 499.0)):
        structure = add_self_loops(random_graph(40 + i, num_nodes, degree))
        h = rng.normal(size=(num_nodes, 16))
        w = rng.normal(size=(16, 16))
        tape = ad.Tape()
        hv, wv = tape.constant(h), tape.constant(w)
        run = lambda: bilinear_fast(hv, structure, wv, BilinearScope.ALL_PAIRS)
        run()  # warm caches before timing
        times.append(median_seconds(run, repeats=7))
        nnzs.append(structure.indices.size)
    growth = [times[i + 1] / times[i] for i in range(2)]

    dense = add_self_loops(random_graph(47, 300, 100.0))
    h = rng.normal(size=(300, 16))
    w = rng.normal(size=(16, 16))
    tape = ad.Tape()
    hv, wv = tape.constant(h), tape.constant(w)
    fast_s = median_seconds(
        lambda: bilinear_fast(hv, dense, wv, BilinearScope.ALL_PAIRS), 5)
    slow_s = median_seconds(
        lambda: bilinear_naive(h, dense, w, BilinearScope.ALL_PAIRS), 1)
    speedup = slow_s / fast_s
    check("fast kernel <=15x per nnz decade and >=5x faster than oracle at "
          "mean degree 100",
          max(growth) <= 15.0 and speedup >= 5.0,
          f"nnz {nnzs}, times {[f'{t:.4f}s' for t in times]}, "
          f"growth {[f'{g:.1f}x' for g in growth]}, oracle/fast "
          f"{speedup:.0f}x")


# ---------------------------------------------------------------------------
# quantitative reproduction (needs the converted citation datasets)

def test_two_layer_fixed_split_accuracy():
    """10-run mean accuracy per variant/dataset within +-1.5 points."""
    failures = []
    for dataset in DATASETS:
        for variant in ("gcn", "bgcn-t", "gat", "bgat-t"):
            got = mean_test_accuracy(dataset, variant, layers=2)
            want = TWO_LAYER_TARGETS[variant][dataset]
            if abs(got - want) > ACCURACY_TOLERANCE:
                failures.append(f"{variant}/{dataset}: {got:.1f} vs {want}")
    check("2-layer fixed-split means within +-1.5 (12 cells, 10 runs each)",
          not failures, "; ".join(failures))


def test_one_layer_fixed_split_accuracy():
    """Single-layer models hit their reference means within +-1.5 points."""
    failures = []
    for dataset in DATASETS:
        for variant in ("gcn", "bgcn-t"):
            got = mean_test_accuracy(dataset, variant, layers=1)
            want = ONE_LAYER_TARGETS[variant][dataset]
            if abs(got - want) > ACCURACY_TOLERANCE:
                failures.append(f"{variant}/{dataset}: {got:.1f} vs {want}")
    check("1-layer fixed-split means within +-1.5 (6 cells, 10 runs each)",
          not failures, "; ".join(failures))


def test_bilinear_variants_beat_plain_counterparts():
    """BGCN-T > GCN and BGAT-T > GAT on every dataset's 2-layer mean."""
    failures = []
    for dataset in DATASETS:
        for plain, bilinear in (("gcn", "bgcn-t"), ("gat", "bgat-t")):
            base = mean_test_accuracy(dataset, plain, layers=2)
            ours = mean_test_accuracy(dataset, bilinear, layers=2)
            if not ours > base:
                failures.append(
                    f"{bilinear} {ours:.1f} <= {plain} {base:.1f} on {dataset}")
    check("bilinear beats plain counterpart on every dataset (2-layer means)",
          not failures, "; ".join(failures))


def test_resampled_training_sets_keep_the_advantage():
    """BGCN-T mean > GCN mean over 10 resampled train sets; Cora ~80.3."""
    failures = []
    cora_mean = float("nan")
    for dataset in DATASETS:
        data = converted_dataset(dataset)
        splits = random_splits(data, num_splits=10, seed=0)
        accs = {"gcn": [], "bgcn-t": []}
        for index, split in enumerate(splits):
            for variant in accs:
                cfg = reproduction_config(dataset, variant, layers=2,
                                          seed=index)
                accs[variant].append(train(cfg, split).test_acc)
        means = {v: 100.0 * float(np.mean(a)) for v, a in accs.items()}
        if not means["bgcn-t"] > means["gcn"]:
            failures.append(f"{dataset}: bgcn-t {means['bgcn-t']:.1f} <= "
                            f"gcn {means['gcn']:.1f}")
        if dataset == "cora":
            cora_mean = means["bgcn-t"]
    if abs(cora_mean - RANDOM_SPLIT_CORA_TARGET) > RANDOM_SPLIT_CORA_TOLERANCE:
        failures.append(f"cora bgcn-t {cora_mean:.1f} not within "
                        f"{RANDOM_SPLIT_CORA_TOLERANCE} of "
                        f"{RANDOM_SPLIT_CORA_TARGET}")
    check("resampled-split means: bgcn-t > gcn on all datasets, cora ~80.3",
          not failures, "; ".join(failures))


def test_mixture_sweep_peaks_between_endpoints():
    """Best mixture weight beats both the plain and pure-bilinear endpoints."""
    failures = []
    for dataset in ("cora", "citeseer"):
        data = converted_dataset(dataset)
        base = reproduction_config(dataset, "bgcn-t", layers=2)
        accs = []
        for alpha in MIXTURE_GRID:
            cfg = replace_config(base, alpha=float(alpha))
            accs.append(repeat_runs(cfg, data, seeds=range(3))
                        ["mean_test_acc"])
        best = max(accs)
        if not (best > accs[0] and best > accs[-1]):
            failures.append(f"{dataset}: best {best:.3f} vs alpha=0 "
                            f"{accs[0]:.3f}, alpha=1 {accs[-1]:.3f}")
    check("mixture sweep peaks strictly inside (0, 1) on cora and citeseer",
          not failures, "; ".join(failures))


def test_nodes_rescued_by_bilinear_term_have_lower_degree():
    """Nodes only BGCN-T gets right sit in sparser two-hop neighborhoods."""
    failures = []
    for dataset in DATASETS:
        data = converted_dataset(dataset)
        logits = {}
        for variant in ("gcn", "bgcn-t"):
            cfg = reproduction_config(dataset, variant, layers=2)
            report = train(cfg, data)
            ctx = build_context(data.adjacency, cfg)
            logits[variant] = predict(cfg, report.params, ctx,
                                      ad.as_matrix(data.features))
        table = {row["category"]: row
                 for row in agreement_table(data, logits["gcn"],
                                            logits["bgcn-t"])}
        rescued = table["base_wrong_other_right"]["mean_degree"]
        both = table["both_right"]["mean_degree"]
        if not rescued < both:
            failures.append(f"{dataset}: rescued {rescued:.1f} >= "
                            f"both-right {both:.1f}")
    check("rescued nodes have lower mean two-hop degree than both-right "
          "nodes on all datasets",
          not failures, "; ".join(failures))
