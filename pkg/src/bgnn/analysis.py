"""Neighborhood statistics and model-agreement breakdowns.

Explains where a bilinear model's predictions diverge from a plain model's
by grouping test nodes into four agreement categories (each model right or
wrong) and summarizing each group's two-hop neighborhood size and label
consistency. Nodes whose two-hop neighborhood is empty carry no ratio and
are excluded from ratio means.
"""

from __future__ import annotations

import numpy as np

from bgnn import backend
from bgnn.graph import khop_binarize

CATEGORIES = ("base_wrong_other_right", "base_right_other_wrong",
              "both_right", "both_wrong")


def neighborhood_stats(data):
    """Per-node two-hop degree and same-label ratio.

    The two-hop neighborhood is every node reachable in one or two steps
    (excluding the node itself). The ratio is the fraction of those
    neighbors sharing the node's label, NaN for empty neighborhoods.
    """
    two_hop = khop_binarize(data.adjacency, 2, cumulative=True)
    degree = two_hop.row_lengths.astype(np.float64)
    own = np.repeat(data.labels, two_hop.row_lengths)
    same = (data.labels[two_hop.indices] == own).astype(np.float64)
    same_counts = backend.segment_sum(two_hop.indptr, same)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(degree > 0, same_counts / degree, np.nan)
    return {"degree": degree, "ratio": ratio}


def agreement_table(data, base_logits, other_logits, mask=None):
    """Group masked nodes by which model classifies them correctly.

    Returns one record per category: count, mean two-hop degree, and mean
    same-label ratio (NaN-free nodes only). Categories follow the
    base-model-first convention, e.g. ``base_wrong_other_right`` holds the
    nodes only the other model gets right.
    """
    if mask is None:
        mask = data.test_mask
    stats = neighborhood_stats(data)
    y = data.labels[mask]
    base_right = base_logits[mask].argmax(axis=1) == y
    other_right = other_logits[mask].argmax(axis=1) == y
    members = {
        "base_wrong_other_right": ~base_right & other_right,
        "base_right_other_wrong": base_right & ~other_right,
        "both_right": base_right & other_right,
        "both_wrong": ~base_right & ~other_right,
    }
    records = []
    for category in CATEGORIES:
        nodes = mask[members[category]]
        degree = stats["degree"][nodes]
        ratio = stats["ratio"][nodes]
        ratio = ratio[~np.isnan(ratio)]
        records.append({
            "category": category,
            "count": int(nodes.size),
            "mean_degree": float(degree.mean()) if nodes.size else float("nan"),
            "mean_ratio": float(ratio.mean()) if ratio.size else float("nan"),
        })
    return records
