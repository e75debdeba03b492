"""Synthetic graphs and datasets for tests, benchmarks, and demos.

Real citation-graph directories are produced by the separate converter
tool; everything here is generated, deterministic in the seed, and small
enough for fast tests (except the benchmark graphs, which scale with the
requested size).
"""

from __future__ import annotations

import numpy as np

from bgnn.data import GraphDataset
from bgnn.graph import SparseAdjacency


def tiny_fixture():
    """Hand-written six-node dataset covering the format's edge cases.

    Node 5 is isolated (degree 0) and has an all-zero feature row, so the
    empty feature line and zero-degree normalizer paths stay exercised.
    """
    edges = [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4)]
    adjacency = SparseAdjacency.from_edges(6, edges)
    features = np.array([
        [1.0, 0.0, 0.5, 0.0],
        [0.0, -1.25, 0.0, 0.1],
        [2.0, 0.0, 0.0, -0.75],
        [0.0, 0.3, -2.5, 0.0],
        [0.25, 0.0, 0.0, 1.5],
        [0.0, 0.0, 0.0, 0.0],
    ])
    labels = np.array([0, 0, 1, 1, 0, 1], dtype=np.int64)
    return GraphDataset(name="tiny", adjacency=adjacency, features=features,
                        labels=labels, num_classes=2,
                        train_mask=np.array([0, 3], dtype=np.int64),
                        val_mask=np.array([1, 4], dtype=np.int64),
                        test_mask=np.array([2, 5], dtype=np.int64))


def planted_partition(seed, num_nodes=120, num_classes=3, num_features=16,
                      p_in=0.10, p_out=0.01, noise=0.8, train_per_class=10,
                      val_per_class=10, test_per_class=15):
    """Clustered random graph with class-mean features plus Gaussian noise.

    Edges within a class appear with probability ``p_in``, across classes
    with ``p_out``. Splits take the first train/val/test nodes of each
    class after a seeded shuffle; the three sizes must fit in every class.
    """
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(num_nodes, dtype=np.int64) % num_classes)

    same = labels[:, None] == labels[None, :]
    prob = np.where(same, p_in, p_out)
    draw = rng.random((num_nodes, num_nodes))
    upper = np.triu(draw < prob, k=1)
    rows, cols = np.nonzero(upper)
    adjacency = SparseAdjacency.from_edges(num_nodes, list(zip(rows.tolist(),
                                                               cols.tolist())))

    means = rng.normal(0.0, 1.0, size=(num_classes, num_features))
    features = means[labels] + noise * rng.normal(0.0, 1.0,
                                                  size=(num_nodes, num_features))

    need = train_per_class + val_per_class + test_per_class
    train, val, test = [], [], []
    for cls in range(num_classes):
        members = np.nonzero(labels == cls)[0]
        if members.size < need:
            raise ValueError(f"class {cls} has {members.size} nodes, "
                             f"needs {need} for the requested splits")
        order = rng.permutation(members)
        train.extend(order[:train_per_class])
        val.extend(order[train_per_class:train_per_class + val_per_class])
        test.extend(order[train_per_class + val_per_class:need])

    return GraphDataset(name=f"planted-{seed}", adjacency=adjacency,
                        features=features, labels=labels,
                        num_classes=num_classes,
                        train_mask=np.sort(np.array(train, dtype=np.int64)),
                        val_mask=np.sort(np.array(val, dtype=np.int64)),
                        test_mask=np.sort(np.array(test, dtype=np.int64)))


def random_graph(seed, num_nodes, mean_degree):
    """Sparse random structure for kernel benchmarks (no features/labels).

    Samples roughly ``num_nodes * mean_degree / 2`` distinct undirected
    edges; duplicates and self-pairs from the oversample are dropped, so
    the realized edge count is approximate.
    """
    rng = np.random.default_rng(seed)
    target = int(num_nodes * mean_degree / 2)
    draw = rng.integers(0, num_nodes, size=(int(target * 1.3) + 16, 2))
    lo = draw.min(axis=1)
    hi = draw.max(axis=1)
    keep = lo < hi
    pairs = np.unique(np.stack([lo[keep], hi[keep]], axis=1), axis=0)[:target]
    return SparseAdjacency.from_edges(num_nodes,
                                      [(int(u), int(v)) for u, v in pairs])


def random_features(seed, num_nodes, num_features):
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, 1.0, size=(num_nodes, num_features))
