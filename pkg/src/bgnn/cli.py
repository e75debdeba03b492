"""Command-line interface.

Subcommands:

* ``train``     — one training run; optional checkpoint, JSONL epoch log,
                  and reproducibility manifest
* ``sweep``     — grid search over dropout / weight decay / alpha / beta
* ``analyze``   — agreement breakdown between two checkpoints on one dataset
* ``gradcheck`` — numerical gradient verification of every operation family
* ``bench``     — kernel timings, optionally comparing compiled and numpy
                  backends for agreement

Exit codes: 0 success; 1 usage or configuration error; 2 dataset missing or
malformed; 3 numeric failure (divergence, gradcheck over tolerance, backend
disagreement). Dataset arguments are directories, resolved against
``$BGNN_DATA_ROOT`` when not found as given.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time

import numpy as np

import bgnn
from bgnn import autodiff as ad
from bgnn import backend
from bgnn.aggregators import (AttentionParams, BilinearScope, bilinear_fast,
                              linear_agg_gat, linear_agg_gcn)
from bgnn.analysis import agreement_table
from bgnn.data import DatasetFormatError, load_dataset, stats
from bgnn.graph import add_self_loops, gcn_normalize, khop_binarize
from bgnn.models import (ModelConfig, VARIANTS, beta_pair, build_context,
                         config_to_dict, load_checkpoint, predict,
                         save_checkpoint)
from bgnn.synth import random_features, random_graph, tiny_fixture
from bgnn.training import TrainingDiverged, grid_search, train

GRADCHECK_TOLERANCE = 1e-6
BENCH_TOLERANCE = 1e-10


def _resolve_dataset(arg):
    if os.path.isdir(arg):
        return arg
    root = os.environ.get("BGNN_DATA_ROOT")
    if root:
        candidate = os.path.join(root, arg)
        if os.path.isdir(candidate):
            return candidate
    raise DatasetFormatError(
        f"dataset directory {arg!r} not found (also tried $BGNN_DATA_ROOT"
        f"={root!r})" if root else
        f"dataset directory {arg!r} not found (set BGNN_DATA_ROOT to resolve "
        f"names against a data directory)")


def _parse_floats(text):
    return [float(tok) for tok in text.split(",") if tok.strip() != ""]


def _build_config(args):
    variant = args.variant
    is_bilinear = variant.startswith("b")
    if args.beta is not None and args.beta2 is not None:
        raise ValueError("pass either --beta or --beta2, not both")
    if is_bilinear:
        if args.beta is not None:
            beta = tuple(_parse_floats(args.beta))
        elif args.beta2 is not None:
            if args.layers != 2:
                raise ValueError("--beta2 implies a two-layer model")
            beta = beta_pair(args.beta2)
        else:
            beta = ()
        alpha = args.alpha
    else:
        if args.alpha not in (None, 0.0) or args.beta or args.beta2 is not None:
            raise ValueError(f"variant {variant!r} takes no alpha/beta")
        beta, alpha = (), 0.0
    return ModelConfig(
        variant=variant, layers=args.layers, hidden_dim=args.hidden,
        alpha=alpha if alpha is not None else 0.0, beta=beta,
        dropout=args.dropout, weight_decay=args.weight_decay,
        learning_rate=args.lr, max_epochs=args.max_epochs,
        patience=args.patience, seed=args.seed)


def _manifest(cfg, data, report):
    return {
        "package_version": bgnn.__version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "platform": platform.platform(),
        "kernel_backend": report.kernel_backend,
        "config": config_to_dict(cfg),
        "dataset": stats(data),
        "result": {k: v for k, v in report.summary().items()
                   if k not in ("event", "config")},
    }


def _add_model_flags(parser):
    parser.add_argument("--variant", required=True, choices=VARIANTS)
    parser.add_argument("--layers", type=int, default=2)
    parser.add_argument("--hidden", type=int, default=16)
    parser.add_argument("--alpha", type=float, default=None,
                        help="bilinear mixture weight in [0, 1]")
    parser.add_argument("--beta", default=None,
                        help="comma-separated per-hop weights summing to 1")
    parser.add_argument("--beta2", type=float, default=None,
                        help="scalar second-hop weight (two-layer shorthand)")
    parser.add_argument("--dropout", type=float, default=0.6)
    parser.add_argument("--weight-decay", type=float, default=5e-4)
    parser.add_argument("--lr", type=float, default=0.01)
    parser.add_argument("--max-epochs", type=int, default=2000)
    parser.add_argument("--patience", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)


def cmd_train(args):
    data = load_dataset(_resolve_dataset(args.data))
    cfg = _build_config(args)
    report = train(cfg, data, log_path=args.log_jsonl)
    if args.checkpoint:
        save_checkpoint(args.checkpoint, cfg, report.params)
    if args.manifest:
        with open(args.manifest, "w", encoding="utf-8") as fh:
            json.dump(_manifest(cfg, data, report), fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(f"dataset={data.name} variant={cfg.variant} layers={cfg.layers} "
          f"backend={report.kernel_backend}")
    print(f"best epoch {report.best_epoch}/{report.stopped_epoch}  "
          f"val acc {report.best_val_acc:.4f}  test acc {report.test_acc:.4f}  "
          f"({report.wall_time_s:.1f}s)")
    print(json.dumps(report.summary(), sort_keys=True))
    return 0


def cmd_sweep(args):
    data = load_dataset(_resolve_dataset(args.data))
    cfg = _build_config(args)
    grid = {}
    if args.grid_dropout:
        grid["dropout"] = _parse_floats(args.grid_dropout)
    if args.grid_weight_decay:
        grid["weight_decay"] = _parse_floats(args.grid_weight_decay)
    if args.grid_alpha:
        grid["alpha"] = _parse_floats(args.grid_alpha)
    if args.grid_beta:
        grid["beta"] = _parse_floats(args.grid_beta)
    if not grid:
        raise ValueError("sweep needs at least one --grid-* axis")

    out_fh = open(args.out, "w", encoding="utf-8") if args.out else None

    def progress(cell):
        line = json.dumps(cell, sort_keys=True)
        if out_fh:
            out_fh.write(line + "\n")
        if not args.quiet:
            print(line)

    try:
        result = grid_search(cfg, data, grid, progress=progress)
    finally:
        if out_fh:
            out_fh.close()
    best = result.best_report
    print(f"best: val acc {best.best_val_acc:.4f}  test acc {best.test_acc:.4f}")
    print(json.dumps(config_to_dict(result.best_config), sort_keys=True))
    return 0


def cmd_analyze(args):
    data = load_dataset(_resolve_dataset(args.data))
    records = []
    logits = []
    for path in (args.base, args.other):
        cfg, params = load_checkpoint(path)
        ctx = build_context(data.adjacency, cfg)
        logits.append(predict(cfg, params, ctx, ad.as_matrix(data.features)))
        records.append(cfg.variant)
    table = agreement_table(data, logits[0], logits[1])
    print(f"base={records[0]} ({args.base})  other={records[1]} ({args.other})")
    print(f"{'category':<24} {'count':>6} {'mean degree':>12} {'mean ratio':>11}")
    for row in table:
        print(f"{row['category']:<24} {row['count']:>6} "
              f"{row['mean_degree']:>12.2f} {row['mean_ratio']:>11.4f}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for row in table:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
    return 0


def _gradcheck_suite(seed):
    """(name, function, inputs) triples covering every operation family."""
    rng = np.random.default_rng(seed)
    data = tiny_fixture()
    adj = data.adjacency
    loops = add_self_loops(adj)
    two_hop = add_self_loops(khop_binarize(adj, 2))
    norm = gcn_normalize(loops)
    n, f, c = 6, 4, 2
    x = data.features + 0.1 * rng.normal(size=(n, f))
    w = rng.normal(size=(f, c))
    w2 = rng.normal(size=(c, c))
    a_src = rng.normal(size=(c, 1))
    a_dst = rng.normal(size=(c, 1))
    labels = data.labels
    mask = np.array([0, 2, 3], dtype=np.int64)

    checks = []

    def dense_chain(tape, xv, wv, wv2):
        h = ad.relu(ad.matmul(xv, wv))
        return ad.masked_cross_entropy(ad.matmul(h, wv2), labels, mask)
    checks.append(("dense matmul+relu+cross-entropy", dense_chain, [x, w, w2]))

    def gcn_path(tape, xv, wv):
        return ad.masked_cross_entropy(linear_agg_gcn(xv, norm, wv), labels, mask)
    checks.append(("gcn aggregation", gcn_path, [x, w]))

    def gat_path(tape, xv, wv, sv, dv):
        att = AttentionParams(sv, dv)
        out = linear_agg_gat(xv, loops, wv, att)
        return ad.masked_cross_entropy(out, labels, mask)
    checks.append(("gat attention aggregation", gat_path, [x, w, a_src, a_dst]))

    def ba_all(tape, xv, wv):
        out = bilinear_fast(xv, loops, wv, BilinearScope.ALL_PAIRS)
        return ad.masked_cross_entropy(out, labels, mask)
    checks.append(("bilinear all-pairs", ba_all, [x, w]))

    def ba_target(tape, xv, wv):
        out = bilinear_fast(xv, two_hop, wv, BilinearScope.TARGET_ONLY)
        return ad.masked_cross_entropy(out, labels, mask)
    checks.append(("bilinear target-only (two-hop)", ba_target, [x, w]))

    def misc(tape, xv, wv):
        h = ad.elu(ad.matmul(xv, wv))
        h = ad.log_softmax(h)
        pen = ad.frobenius_sq(wv)
        return ad.add_scaled(ad.masked_cross_entropy(h, labels, mask), pen, 1.0, 0.01)
    checks.append(("elu+log-softmax+frobenius", misc, [x, w]))

    return checks


def cmd_gradcheck(args):
    failed = 0
    for name, fn, inputs in _gradcheck_suite(args.seed):
        err = ad.gradcheck(fn, inputs)
        ok = err <= GRADCHECK_TOLERANCE
        print(f"{'PASS' if ok else 'FAIL'} {name}: max rel err {err:.3e} "
              f"(tolerance {GRADCHECK_TOLERANCE:.0e})")
        failed += 0 if ok else 1
    return 3 if failed else 0


def _bench_once(adj, feats, w_arr, repeats):
    """Median seconds for each kernel under the active backend."""
    loops = add_self_loops(adj)

    def timed(fn):
        best = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn()
            best.append(time.perf_counter() - t0)
        return float(np.median(best))

    results = {}
    results["spmm"] = timed(lambda: backend.spmm(loops.indptr, loops.indices,
                                                 None, feats))
    scores = feats[:, 0][loops.row_of_edge] * 0.1
    results["edge_softmax"] = timed(lambda: backend.edge_softmax(loops.indptr,
                                                                 scores))
    results["two_hop_spgemm"] = timed(lambda: khop_binarize(adj, 2))

    def bilinear_grad():
        tape = ad.Tape()
        xv = tape.constant(feats)
        wv = tape.variable(w_arr)
        out = bilinear_fast(xv, loops, wv, BilinearScope.ALL_PAIRS)
        loss = ad.frobenius_sq(out)
        tape.backward(loss)
        return wv.grad
    results["bilinear_fwd_bwd"] = timed(bilinear_grad)
    return results


def cmd_bench(args):
    sizes = [int(s) for s in args.nodes.split(",")]
    names = backend.available() if args.compare_backends else [backend.active()]
    rows = []
    disagree = False
    for n in sizes:
        adj = random_graph(args.seed, n, args.mean_degree)
        feats = random_features(args.seed + 1, n, args.features)
        w_arr = random_features(args.seed + 2, args.features, 8)
        loops = add_self_loops(adj)
        reference = None
        for name in names:
            with backend.use(name):
                timings = _bench_once(adj, feats, w_arr, args.repeats)
                probe = backend.spmm(loops.indptr, loops.indices, None, feats)
            row = {"nodes": n, "edges": adj.nnz // 2, "backend": name, **timings}
            rows.append(row)
            if reference is None:
                reference = probe
            elif not np.allclose(probe, reference, rtol=0.0, atol=BENCH_TOLERANCE):
                disagree = True
                print(f"ERROR: backend {name!r} disagrees with "
                      f"{names[0]!r} beyond {BENCH_TOLERANCE}", file=sys.stderr)
    kernels = ["spmm", "edge_softmax", "two_hop_spgemm", "bilinear_fwd_bwd"]
    header = f"{'nodes':>8} {'edges':>9} {'backend':<8}" + "".join(
        f" {k:>16}" for k in kernels)
    print(header)
    for row in rows:
        line = f"{row['nodes']:>8} {row['edges']:>9} {row['backend']:<8}"
        line += "".join(f" {row[k] * 1e3:>14.2f}ms" for k in kernels)
        print(line)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
    return 3 if disagree else 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bgnn", description="bilinear graph neural networks")
    parser.add_argument("--kernels", choices=["numpy", "cython"], default=None,
                        help="force a kernel backend for this invocation")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one training job")
    p_train.add_argument("--data", required=True)
    _add_model_flags(p_train)
    p_train.add_argument("--checkpoint", default=None,
                         help="write best parameters to this path")
    p_train.add_argument("--log-jsonl", default=None,
                         help="write per-epoch records to this path")
    p_train.add_argument("--manifest", default=None,
                         help="write a reproducibility manifest to this path")
    p_train.set_defaults(func=cmd_train)

    p_sweep = sub.add_parser("sweep", help="hyperparameter grid search")
    p_sweep.add_argument("--data", required=True)
    _add_model_flags(p_sweep)
    p_sweep.add_argument("--grid-dropout", default=None)
    p_sweep.add_argument("--grid-weight-decay", default=None)
    p_sweep.add_argument("--grid-alpha", default=None)
    p_sweep.add_argument("--grid-beta", default=None,
                         help="scalar second-hop weights (two-layer models)")
    p_sweep.add_argument("--out", default=None, help="write cells as JSONL")
    p_sweep.add_argument("--quiet", action="store_true")
    p_sweep.set_defaults(func=cmd_sweep)

    p_an = sub.add_parser("analyze",
                          help="agreement breakdown between two checkpoints")
    p_an.add_argument("--data", required=True)
    p_an.add_argument("--base", required=True, help="baseline checkpoint")
    p_an.add_argument("--other", required=True, help="comparison checkpoint")
    p_an.add_argument("--out", default=None, help="write records as JSONL")
    p_an.set_defaults(func=cmd_analyze)

    p_gc = sub.add_parser("gradcheck",
                          help="verify gradients by central differences")
    p_gc.add_argument("--seed", type=int, default=0)
    p_gc.set_defaults(func=cmd_gradcheck)

    p_bench = sub.add_parser("bench", help="kernel timings")
    p_bench.add_argument("--nodes", default="2000,20000",
                         help="comma-separated graph sizes")
    p_bench.add_argument("--mean-degree", type=float, default=5.0)
    p_bench.add_argument("--features", type=int, default=64)
    p_bench.add_argument("--repeats", type=int, default=5)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--compare-backends", action="store_true")
    p_bench.add_argument("--out", default=None, help="write rows as JSONL")
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on parse errors; the documented usage code is 1
        # (--help and friends exit 0 and pass through unchanged)
        return 1 if exc.code == 2 else (exc.code or 0)
    try:
        if args.kernels:
            with backend.use(args.kernels):
                return args.func(args) or 0
        return args.func(args) or 0
    except (DatasetFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
