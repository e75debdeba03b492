"""Bilinear graph neural networks on CSR sparse kernels with exact autodiff.

Plain and attention-based neighborhood aggregation, bilinear neighbor
interaction terms, full-batch training with early stopping, and a small CLI.
Hot kernels run through a compiled extension when available and fall back to
pure numpy (see ``bgnn.backend``).
"""

__version__ = "0.1.0"

from bgnn.aggregators import (AttentionParams, BilinearScope, bilinear_fast,
                              bilinear_naive, linear_agg_gat, linear_agg_gcn)
from bgnn.autodiff import Tape, Variable, gradcheck
from bgnn.data import GraphDataset, load_dataset, save_dataset
from bgnn.graph import GraphStructureError, SparseAdjacency, add_self_loops
from bgnn.models import (ModelConfig, VARIANTS, build_context, forward,
                         init_params, load_checkpoint, parameter_count,
                         save_checkpoint)
from bgnn.training import TrainReport, evaluate, grid_search, train

__all__ = [
    "AttentionParams", "BilinearScope", "GraphDataset", "GraphStructureError",
    "ModelConfig", "SparseAdjacency", "Tape", "TrainReport", "VARIANTS",
    "Variable", "add_self_loops", "bilinear_fast", "bilinear_naive",
    "build_context", "evaluate", "forward", "gradcheck", "grid_search",
    "init_params", "linear_agg_gat", "linear_agg_gcn", "load_checkpoint",
    "load_dataset", "parameter_count", "save_checkpoint", "save_dataset",
    "train",
]
