"""Dataset directory format: load, save, validate, summarize.

A dataset directory contains exactly:

* ``meta.json``        — ``{"name", "num_nodes", "num_features", "num_classes"}``
* ``graph.edges``      — one undirected edge per line, ``"u v"`` with u < v
* ``features.sparse``  — one line per node of ``col:value`` pairs with
                         strictly increasing columns; an empty line is a
                         zero row
* ``labels.txt``       — one integer class id per line, node order
* ``split.train`` / ``split.val`` / ``split.test``
                       — sorted node ids, one per line, pairwise disjoint

Loaders report the offending file and 1-based line number on every format
violation. Saving is deterministic: identical datasets produce identical
bytes, and save -> load is an exact round trip (float values are written
with shortest round-trip formatting).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace

import numpy as np

from bgnn.graph import SparseAdjacency

_SPLIT_FILES = {"train": "split.train", "val": "split.val", "test": "split.test"}


class DatasetFormatError(ValueError):
    """A dataset directory violates the on-disk format."""


@dataclass(frozen=True)
class GraphDataset:
    """An undirected graph with node features, labels, and a fixed split."""

    name: str
    adjacency: SparseAdjacency
    features: np.ndarray        # (N, F) float64
    labels: np.ndarray          # (N,) int64
    num_classes: int
    train_mask: np.ndarray      # sorted node ids
    val_mask: np.ndarray
    test_mask: np.ndarray

    @property
    def num_nodes(self):
        return self.adjacency.num_nodes

    @property
    def num_features(self):
        return self.features.shape[1]

    @property
    def num_edges(self):
        return self.adjacency.nnz // 2

    def with_train_mask(self, train_mask):
        """Same graph and labels with a different training split."""
        train_mask = np.asarray(train_mask, dtype=np.int64)
        return replace(self, train_mask=np.sort(train_mask))


def _parse_int(text, where):
    try:
        return int(text)
    except ValueError:
        raise DatasetFormatError(f"{where}: expected an integer, got {text!r}") from None


def _read_lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if text == "":
        return []
    if text.endswith("\n"):
        text = text[:-1]
    return text.split("\n")


def _load_split(path, num_nodes):
    ids = []
    prev = -1
    for lineno, line in enumerate(_read_lines(path), start=1):
        where = f"{os.path.basename(path)}:{lineno}"
        v = _parse_int(line.strip(), where)
        if not 0 <= v < num_nodes:
            raise DatasetFormatError(f"{where}: node id {v} out of range [0, {num_nodes})")
        if v <= prev:
            raise DatasetFormatError(f"{where}: ids must be sorted strictly increasing "
                                     f"({v} after {prev})")
        prev = v
        ids.append(v)
    return np.asarray(ids, dtype=np.int64)


def load_dataset(directory):
    """Parse a dataset directory, validating every format rule."""
    def path(name):
        return os.path.join(directory, name)

    try:
        with open(path("meta.json"), "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        raise DatasetFormatError(f"{directory}: missing meta.json") from None
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"meta.json: invalid JSON ({exc})") from None
    for key in ("name", "num_nodes", "num_features", "num_classes"):
        if key not in meta:
            raise DatasetFormatError(f"meta.json: missing key {key!r}")
    n = int(meta["num_nodes"])
    num_features = int(meta["num_features"])
    num_classes = int(meta["num_classes"])
    if n < 1 or num_features < 1 or num_classes < 1:
        raise DatasetFormatError("meta.json: counts must be positive")

    edges = []
    seen = set()
    for lineno, line in enumerate(_read_lines(path("graph.edges")), start=1):
        where = f"graph.edges:{lineno}"
        parts = line.split()
        if len(parts) != 2:
            raise DatasetFormatError(f"{where}: expected 'u v', got {line!r}")
        u, v = _parse_int(parts[0], where), _parse_int(parts[1], where)
        if not (0 <= u < n and 0 <= v < n):
            raise DatasetFormatError(f"{where}: endpoint out of range [0, {n})")
        if u >= v:
            raise DatasetFormatError(f"{where}: edges must satisfy u < v, got {u} {v}")
        if (u, v) in seen:
            raise DatasetFormatError(f"{where}: duplicate edge {u} {v}")
        seen.add((u, v))
        edges.append((u, v))
    adjacency = SparseAdjacency.from_edges(n, edges)

    feature_lines = _read_lines(path("features.sparse"))
    if len(feature_lines) != n:
        raise DatasetFormatError(f"features.sparse: expected {n} lines, "
                                 f"got {len(feature_lines)}")
    features = np.zeros((n, num_features))
    for lineno, line in enumerate(feature_lines, start=1):
        where = f"features.sparse:{lineno}"
        if line == "":
            continue
        prev_col = -1
        for token in line.split(" "):
            col_s, sep, val_s = token.partition(":")
            if not sep:
                raise DatasetFormatError(f"{where}: expected col:value, got {token!r}")
            col = _parse_int(col_s, where)
            if not 0 <= col < num_features:
                raise DatasetFormatError(f"{where}: column {col} out of range "
                                         f"[0, {num_features})")
            if col <= prev_col:
                raise DatasetFormatError(f"{where}: columns must increase strictly "
                                         f"({col} after {prev_col})")
            prev_col = col
            try:
                value = float(val_s)
            except ValueError:
                raise DatasetFormatError(f"{where}: bad value {val_s!r}") from None
            if not np.isfinite(value):
                raise DatasetFormatError(f"{where}: non-finite value {val_s!r}")
            features[lineno - 1, col] = value

    label_lines = _read_lines(path("labels.txt"))
    if len(label_lines) != n:
        raise DatasetFormatError(f"labels.txt: expected {n} lines, got {len(label_lines)}")
    labels = np.empty(n, dtype=np.int64)
    for lineno, line in enumerate(label_lines, start=1):
        where = f"labels.txt:{lineno}"
        label = _parse_int(line.strip(), where)
        if not 0 <= label < num_classes:
            raise DatasetFormatError(f"{where}: label {label} out of range "
                                     f"[0, {num_classes})")
        labels[lineno - 1] = label

    masks = {split: _load_split(path(fname), n) for split, fname in _SPLIT_FILES.items()}
    for a, b in (("train", "val"), ("train", "test"), ("val", "test")):
        overlap = np.intersect1d(masks[a], masks[b])
        if overlap.size:
            raise DatasetFormatError(f"split.{a}/split.{b}: overlapping node id "
                                     f"{int(overlap[0])}")

    return GraphDataset(name=str(meta["name"]), adjacency=adjacency,
                        features=features, labels=labels, num_classes=num_classes,
                        train_mask=masks["train"], val_mask=masks["val"],
                        test_mask=masks["test"])


def save_dataset(directory, data):
    """Write a dataset directory; output bytes depend only on the data."""
    os.makedirs(directory, exist_ok=True)

    def path(name):
        return os.path.join(directory, name)

    meta = {"name": data.name, "num_nodes": data.num_nodes,
            "num_features": data.num_features, "num_classes": data.num_classes}
    with open(path("meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")

    adj = data.adjacency
    with open(path("graph.edges"), "w", encoding="utf-8") as fh:
        for u in range(adj.num_nodes):
            for v in adj.neighbors(u):
                if u < v:
                    fh.write(f"{u} {v}\n")

    with open(path("features.sparse"), "w", encoding="utf-8") as fh:
        for row in data.features:
            cols = np.nonzero(row)[0]
            fh.write(" ".join(f"{c}:{float(row[c])!r}" for c in cols))
            fh.write("\n")

    with open(path("labels.txt"), "w", encoding="utf-8") as fh:
        for label in data.labels:
            fh.write(f"{int(label)}\n")

    for split, fname in _SPLIT_FILES.items():
        mask = getattr(data, f"{split}_mask")
        with open(path(fname), "w", encoding="utf-8") as fh:
            for v in mask:
                fh.write(f"{int(v)}\n")


def validate(data):
    """Return a list of consistency violations (empty means valid)."""
    problems = []
    n = data.num_nodes
    adj = data.adjacency
    if adj.values is not None:
        problems.append("adjacency must be binary (no stored values)")
    if not adj.is_structurally_symmetric():
        problems.append("adjacency is not symmetric")
    if adj.has_diagonal_entries():
        problems.append("adjacency has self-loops")
    if data.features.shape[0] != n:
        problems.append(f"features rows {data.features.shape[0]} != num_nodes {n}")
    if not np.all(np.isfinite(data.features)):
        problems.append("features contain non-finite values")
    if data.labels.shape != (n,):
        problems.append(f"labels shape {data.labels.shape} != ({n},)")
    elif data.labels.size and (data.labels.min() < 0
                               or data.labels.max() >= data.num_classes):
        problems.append("labels outside [0, num_classes)")
    for split in ("train", "val", "test"):
        mask = getattr(data, f"{split}_mask")
        if mask.size and (mask.min() < 0 or mask.max() >= n):
            problems.append(f"{split} mask references nodes outside [0, {n})")
        if np.unique(mask).size != mask.size:
            problems.append(f"{split} mask has duplicate ids")
        if not np.all(np.diff(mask) > 0):
            problems.append(f"{split} mask is not sorted")
    for a, b in (("train", "val"), ("train", "test"), ("val", "test")):
        if np.intersect1d(getattr(data, f"{a}_mask"), getattr(data, f"{b}_mask")).size:
            problems.append(f"{a} and {b} masks overlap")
    return problems


def stats(data):
    """Summary counters for reporting and sanity checks."""
    degrees = data.adjacency.row_lengths
    return {
        "name": data.name,
        "num_nodes": data.num_nodes,
        "num_edges": data.num_edges,
        "num_features": data.num_features,
        "num_classes": data.num_classes,
        "train_size": int(data.train_mask.size),
        "val_size": int(data.val_mask.size),
        "test_size": int(data.test_mask.size),
        "mean_degree": float(degrees.mean()) if data.num_nodes else 0.0,
        "max_degree": int(degrees.max()) if data.num_nodes else 0,
        "isolated_nodes": int(np.count_nonzero(degrees == 0)),
        "label_histogram": np.bincount(data.labels,
                                       minlength=data.num_classes).tolist(),
        "feature_nnz": int(np.count_nonzero(data.features)),
    }
