"""Model assembly: configuration, initialization, forward passes, checkpoints.

A model is a linear aggregation stack (plain or attention-based) optionally
mixed with a weighted sum of bilinear interaction terms over k-hop extended
neighborhoods:

    out = (1 - alpha) * stack(X, A) + alpha * sum_k beta_k * BA(X, A_k)

where A_k is the binarized k-hop adjacency with self-loops, the beta_k sum
to 1, and each bilinear term consumes the raw features through its own
weight matrix. ``alpha = 0`` reduces exactly to the plain stack (that branch
is never built), ``alpha = 1`` to the pure bilinear model.

Parameters live in a plain ``dict[str, ndarray]``; each forward pass wraps
them as tape variables. Checkpoints use a fixed binary container (magic,
JSON header, raw little-endian float64 buffers) so identical state always
produces identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from bgnn import autodiff as ad
from bgnn.aggregators import (AttentionParams, BilinearScope, bilinear_fast,
                              linear_agg_gat, linear_agg_gcn)
from bgnn.graph import add_self_loops, gcn_normalize, khop_binarize

VARIANTS = ("gcn", "gat", "bgcn-a", "bgcn-t", "bgat-a", "bgat-t")

_SCOPES = {"a": BilinearScope.ALL_PAIRS, "t": BilinearScope.TARGET_ONLY}


@dataclass(frozen=True)
class ModelConfig:
    """Everything that determines a model and its training run."""

    variant: str
    layers: int = 2
    hidden_dim: int = 16
    alpha: float = 0.0
    beta: tuple = ()
    dropout: float = 0.5
    weight_decay: float = 5e-4
    learning_rate: float = 0.01
    max_epochs: int = 2000
    patience: int = 100
    seed: int = 0
    share_weights: bool = False   # 1-layer ablation: BA reuses the stack's W

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if self.layers > 1 and self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1 for multi-layer models")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.weight_decay < 0.0:
            raise ValueError("weight_decay must be >= 0")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be > 0")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")
        beta = tuple(float(b) for b in self.beta)
        if self.is_bilinear:
            if not beta:
                beta = (1.0,) + (0.0,) * (self.layers - 1)
            if len(beta) != self.layers:
                raise ValueError(f"beta needs one weight per layer "
                                 f"({self.layers}), got {len(beta)}")
            if any(b < 0.0 or b > 1.0 for b in beta):
                raise ValueError(f"beta weights must lie in [0, 1], got {beta}")
            if abs(sum(beta) - 1.0) > 1e-9:
                raise ValueError(f"beta weights must sum to 1, got sum={sum(beta)}")
        elif beta:
            raise ValueError(f"variant {self.variant!r} takes no beta weights")
        object.__setattr__(self, "beta", beta)
        if self.share_weights and not (self.is_bilinear and self.layers == 1):
            raise ValueError("share_weights requires a 1-layer bilinear model "
                             "(only there do the stack and BA transforms "
                             "have the same shape)")

    @property
    def is_bilinear(self):
        return self.variant.startswith("b")

    @property
    def uses_attention(self):
        return "gat" in self.variant

    @property
    def scope(self):
        return _SCOPES[self.variant[-1]] if self.is_bilinear else None

    @property
    def activation(self):
        """Hidden-layer nonlinearity: plain stacks use relu, attention elu."""
        return ad.elu if self.uses_attention else ad.relu


def beta_pair(second_hop_weight):
    """Two-hop beta vector (1 - b, b) from the scalar second-hop weight."""
    if not 0.0 <= second_hop_weight <= 1.0:
        raise ValueError(f"second-hop weight must be in [0, 1], got {second_hop_weight}")
    return (1.0 - second_hop_weight, second_hop_weight)


# ---------------------------------------------------------------------------
# parameters

def _glorot(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def stack_dims(cfg, num_features, num_classes):
    """(fan_in, fan_out) per linear-stack layer; single layer maps F -> C."""
    if cfg.layers == 1:
        return [(num_features, num_classes)]
    dims = [(num_features, cfg.hidden_dim)]
    dims += [(cfg.hidden_dim, cfg.hidden_dim)] * (cfg.layers - 2)
    dims.append((cfg.hidden_dim, num_classes))
    return dims


def init_params(cfg, num_features, num_classes, rng):
    """Glorot-uniform parameter dict; draw order is fixed for determinism.

    Stack weights come first (with the per-layer attention vectors right
    after their weight matrix), then the per-hop bilinear matrices.
    """
    params = {}
    for k, (fan_in, fan_out) in enumerate(stack_dims(cfg, num_features, num_classes)):
        params[f"gnn.w{k}"] = _glorot(rng, fan_in, fan_out)
        if cfg.uses_attention:
            params[f"gnn.att_src{k}"] = _glorot(rng, fan_out, 1)
            params[f"gnn.att_dst{k}"] = _glorot(rng, fan_out, 1)
    if cfg.is_bilinear and not cfg.share_weights:
        for k in range(cfg.layers):
            params[f"ba.w{k}"] = _glorot(rng, num_features, num_classes)
    return params


def weight_matrix_names(params):
    """Names of the weight matrices counted by the L2 penalty.

    Attention vectors are scored weights, not feature transforms, and stay
    out of the penalty.
    """
    return [name for name in params if ".w" in name]


def parameter_count(cfg, num_features, num_classes):
    """Closed-form total parameter count (cross-checked against init in tests)."""
    total = 0
    for fan_in, fan_out in stack_dims(cfg, num_features, num_classes):
        total += fan_in * fan_out
        if cfg.uses_attention:
            total += 2 * fan_out
    if cfg.is_bilinear and not cfg.share_weights:
        total += cfg.layers * num_features * num_classes
    return total


# ---------------------------------------------------------------------------
# graph context

@dataclass(frozen=True)
class GraphContext:
    """Structures derived from one adjacency, reused across epochs."""

    adjacency: object          # raw symmetric binary structure, no loops
    with_loops: object         # adjacency + I
    norm_adj: object           # with_loops scaled by 1/sqrt(deg_v deg_i)
    hop_adjs: tuple            # k-hop extended structures (bilinear models)


def build_context(adj, cfg):
    """Precompute every structure a forward pass of ``cfg`` needs."""
    with_loops = add_self_loops(adj)
    norm_adj = gcn_normalize(with_loops)
    hops = []
    if cfg.is_bilinear:
        for k in range(1, cfg.layers + 1):
            if cfg.alpha == 0.0 or cfg.beta[k - 1] == 0.0:
                hops.append(None)     # hop never evaluated; skip the SpGEMM
            elif k == 1:
                hops.append(with_loops)
            else:
                hops.append(add_self_loops(khop_binarize(adj, k)))
    return GraphContext(adjacency=adj, with_loops=with_loops,
                        norm_adj=norm_adj, hop_adjs=tuple(hops))


# ---------------------------------------------------------------------------
# forward passes

def _linear_stack(cfg, params, ctx, x, rng, training):
    h = x
    for k in range(cfg.layers):
        w = params[f"gnn.w{k}"]
        if cfg.uses_attention:
            att = AttentionParams(params[f"gnn.att_src{k}"],
                                  params[f"gnn.att_dst{k}"])
            h = linear_agg_gat(h, ctx.with_loops, w, att)
        else:
            h = linear_agg_gcn(h, ctx.norm_adj, w)
        if k < cfg.layers - 1:
            h = cfg.activation(h)
            h = ad.dropout(h, cfg.dropout, rng, training)
    return h


def _bilinear_sum(cfg, params, ctx, x):
    acc = None
    for k, b_k in enumerate(cfg.beta):
        if b_k == 0.0:
            continue
        w = params["gnn.w0"] if cfg.share_weights else params[f"ba.w{k}"]
        term = bilinear_fast(x, ctx.hop_adjs[k], w, cfg.scope)
        acc = ad.scale(term, b_k) if acc is None else ad.add_scaled(acc, term, 1.0, b_k)
    return acc


def forward(cfg, params, ctx, features, rng=None, training=False):
    """Logits for every node; ``params``/``features`` are tape variables.

    Input dropout is applied once and shared by the linear stack and the
    bilinear terms (both consume the same corrupted features, matching how
    a single model applies one input corruption per pass).
    """
    x = ad.dropout(features, cfg.dropout, rng, training) if training else features
    lin = _linear_stack(cfg, params, ctx, x, rng, training)
    if not cfg.is_bilinear or cfg.alpha == 0.0:
        return lin
    ba = _bilinear_sum(cfg, params, ctx, x)
    if cfg.alpha == 1.0:
        return ba
    return ad.add_scaled(lin, ba, 1.0 - cfg.alpha, cfg.alpha)


def forward_1layer(cfg, params, ctx, features, rng=None, training=False):
    if cfg.layers != 1:
        raise ValueError(f"config has layers={cfg.layers}, expected 1")
    return forward(cfg, params, ctx, features, rng, training)


def forward_2layer(cfg, params, ctx, features, rng=None, training=False):
    if cfg.layers != 2:
        raise ValueError(f"config has layers={cfg.layers}, expected 2")
    return forward(cfg, params, ctx, features, rng, training)


def predict(cfg, params_arrays, ctx, features_array):
    """Evaluation-mode logits as a plain array (no gradients recorded)."""
    tape = ad.Tape()
    params = {name: tape.constant(arr) for name, arr in params_arrays.items()}
    x = tape.constant(features_array)
    return forward(cfg, params, ctx, x, rng=None, training=False).value


# ---------------------------------------------------------------------------
# checkpoints

_MAGIC = b"BGNN\x00\x01"


def config_to_dict(cfg):
    return {
        "variant": cfg.variant, "layers": cfg.layers, "hidden_dim": cfg.hidden_dim,
        "alpha": cfg.alpha, "beta": list(cfg.beta), "dropout": cfg.dropout,
        "weight_decay": cfg.weight_decay, "learning_rate": cfg.learning_rate,
        "max_epochs": cfg.max_epochs, "patience": cfg.patience, "seed": cfg.seed,
        "share_weights": cfg.share_weights,
    }


def config_from_dict(d):
    d = dict(d)
    d["beta"] = tuple(d.get("beta", ()))
    return ModelConfig(**d)


def save_checkpoint(path, cfg, params):
    """Write config + parameters; identical state yields identical bytes."""
    names = sorted(params)
    header = {
        "config": config_to_dict(cfg),
        "tensors": [{"name": n, "shape": list(params[n].shape)} for n in names],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        for n in names:
            fh.write(np.ascontiguousarray(params[n], dtype="<f8").tobytes())


def load_checkpoint(path):
    """Read a checkpoint back into (config, parameter dict)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a model checkpoint (bad magic)")
        (hlen,) = (int.from_bytes(fh.read(8), "little"),)
        header = json.loads(fh.read(hlen).decode("utf-8"))
        cfg = config_from_dict(header["config"])
        params = {}
        for spec_ in header["tensors"]:
            shape = tuple(spec_["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise ValueError(f"{path}: truncated tensor {spec_['name']!r}")
            params[spec_["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
        extra = fh.read(1)
        if extra:
            raise ValueError(f"{path}: trailing bytes after last tensor")
    return cfg, params


def clone_params(params):
    return {name: arr.copy() for name, arr in params.items()}


def replace_config(cfg, **changes):
    """``dataclasses.replace`` wrapper so callers avoid the import."""
    return replace(cfg, **changes)
