"""Full-batch training loops for node classification and link prediction.

Both tasks share the same skeleton: a fresh tape per epoch, Adam with
coupled weight decay on the layer weights, and checkpoint selection on
the validation metric. Every random draw (init, dropout, negative
sampling) comes off a named stream of the run seed, so a run is
reproducible bit for bit.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tape
from .data import Dataset, EdgeSplit
from .graphs import normalized_laplacian
from .metrics import accuracy, roc_auc
from .model import ModelConfig, build_fixed_L2, init_params, model_forward, wrap_params
from .rng import stream


class TrainingDiverged(RuntimeError):
    """Raised when a loss or gradient stops being finite."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    dropout: float = 0.5
    max_epochs: int = 1000
    patience: int = 100
    eval_every: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.max_epochs < 1 or self.eval_every < 1:
            raise ValueError("max_epochs and eval_every must be positive")
        if not 1 <= self.patience <= self.max_epochs:
            raise ValueError("need 1 <= patience <= max_epochs")


class AdamState:
    """First/second moment accumulators mirroring the parameter tree."""

    BETA1 = 0.9
    BETA2 = 0.999
    EPS = 1e-8

    def __init__(self, params: list):
        self.m = [{k: np.zeros_like(v) for k, v in layer.items()} for layer in params]
        self.v = [{k: np.zeros_like(v) for k, v in layer.items()} for layer in params]
        self.t = 0


def adam_step(params: list, grads: list, state: AdamState, config: TrainConfig) -> list:
    """Bias-corrected Adam update in place; returns params for chaining.

    Weight decay enters as an L2 penalty added to the gradient (coupled
    form) and touches only the layer weights W; the feature-graph
    parameter U already carries its own L1 penalty through the loss.
    """
    state.t += 1
    b1, b2 = AdamState.BETA1, AdamState.BETA2
    scale1 = 1.0 - b1 ** state.t
    scale2 = 1.0 - b2 ** state.t
    for l, layer in enumerate(params):
        for name, value in layer.items():
            g = grads[l][name]
            if not np.all(np.isfinite(g)):
                raise TrainingDiverged(
                    f"non-finite gradient for parameter {l}.{name} at step {state.t}"
                )
            if name == "W":
                g = g + config.weight_decay * value
            m = state.m[l][name] = b1 * state.m[l][name] + (1 - b1) * g
            v = state.v[l][name] = b2 * state.v[l][name] + (1 - b2) * g * g
            step = config.learning_rate * (m / scale1) / (np.sqrt(v / scale2) + AdamState.EPS)
            layer[name] = value - step
    return params


def masked_cross_entropy(logits, labels, mask):
    """Mean negative log-likelihood over the masked rows of a logits node."""
    rows = np.flatnonzero(np.asarray(mask))
    if rows.size == 0:
        raise ValueError("empty mask")
    return ad.cross_entropy_logits(ad.row_slice(logits, rows), np.asarray(labels)[rows])


def link_logit(z_u: np.ndarray, z_v: np.ndarray) -> float:
    """Inner-product decoder score for one node pair."""
    z_u, z_v = np.asarray(z_u), np.asarray(z_v)
    if z_u.shape != z_v.shape:
        raise ValueError("embeddings must share a dimension")
    return float(z_u @ z_v)


bce_with_logits = ad.bce_logits


@dataclass
class TrainResult:
    params: list
    history: list = field(default_factory=list)  # (epoch, train_loss, val, test)
    best_epoch: int = 0
    val_metric: float = 0.0
    test_metric: float = 0.0


def history_csv(result: TrainResult) -> str:
    lines = ["epoch,train_loss,val_metric,test_metric"]
    for epoch, loss, val, test in result.history:
        lines.append(f"{epoch},{loss:.17g},{val:.17g},{test:.17g}")
    return "\n".join(lines) + "\n"


def _copy_params(params: list) -> list:
    return [{k: v.copy() for k, v in layer.items()} for layer in params]


def _grads_tree(tape: Tape, loss, wrapped: list) -> list:
    flat = [(l, name) for l, layer in enumerate(wrapped) for name in sorted(layer)]
    values = tape.gradients(loss, [wrapped[l][name] for l, name in flat])
    tree = [dict() for _ in wrapped]
    for (l, name), g in zip(flat, values):
        tree[l][name] = g
    return tree


def _regularized(loss, extras, l1_weight: float):
    for term in extras.l1_terms:
        if l1_weight > 0:
            loss = ad.add(loss, ad.scale(term, l1_weight))
    return loss


def _sample_negatives(gen, n: int, existing: set, count: int) -> np.ndarray:
    """Uniform non-edges (u < v) of the full graph, distinct within a batch."""
    if n * (n - 1) // 2 - len(existing) < count:
        raise ValueError("not enough non-edges to sample negatives")
    taken, out = set(), []
    while len(out) < count:
        u = int(gen.integers(0, n))
        v = int(gen.integers(0, n))
        if u == v:
            continue
        if u > v:
            u, v = v, u
        if (u, v) in existing or (u, v) in taken:
            continue
        taken.add((u, v))
        out.append((u, v))
    return np.array(out, dtype=np.int64)


def train(model_config: ModelConfig, data: Dataset, train_config: TrainConfig,
          split: EdgeSplit | None = None, baseline: bool = False) -> TrainResult:
    """Train on the node task, or on link prediction when `split` is given.

    Node task: full patience-based early stopping on validation accuracy;
    the returned test metric belongs to the best-validation epoch. Link
    task: fixed epoch budget, validation ROC-AUC checked every
    `eval_every` epochs, same best-checkpoint rule.
    """
    cfg = dataclasses.replace(model_config, dropout=train_config.dropout)
    if split is None:
        return _train_node(cfg, data, train_config, baseline)
    return _train_link(cfg, data, split, train_config, baseline)


def _forward_eval(params, X, L1, cfg, fixed_l2, baseline) -> np.ndarray:
    tape = Tape()
    wrapped = wrap_params(tape, params)
    out, _ = model_forward(tape, X, L1, wrapped, cfg, mode="eval",
                           fixed_l2=fixed_l2, baseline=baseline)
    return out.value


def _train_node(cfg: ModelConfig, ds: Dataset, tc: TrainConfig, baseline: bool) -> TrainResult:
    L1 = normalized_laplacian(ds.graph)
    fixed_l2 = None
    if cfg.l2_mode == "fixed_correlation" and not baseline:
        fixed_l2 = build_fixed_L2(ds.features)
    params = init_params(cfg, tc.seed)
    state = AdamState(params)
    train_mask = ds.mask("train")
    val_mask, test_mask = ds.mask("val"), ds.mask("test")

    result = TrainResult(params=_copy_params(params), val_metric=-np.inf)
    since_best = 0
    for epoch in range(1, tc.max_epochs + 1):
        tape = Tape()
        wrapped = wrap_params(tape, params)
        gen = stream(tc.seed, "dropout", epoch)
        out, extras = model_forward(tape, ds.features, L1, wrapped, cfg,
                                    mode="train", rng=gen, fixed_l2=fixed_l2,
                                    baseline=baseline)
        loss = _regularized(masked_cross_entropy(out, ds.labels, train_mask),
                            extras, cfg.l1_reg_weight)
        if not np.isfinite(loss.value):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
        adam_step(params, _grads_tree(tape, loss, wrapped), state, tc)

        logits = _forward_eval(params, ds.features, L1, cfg, fixed_l2, baseline)
        val = accuracy(logits, ds.labels, val_mask)
        test = accuracy(logits, ds.labels, test_mask)
        result.history.append((epoch, float(loss.value), val, test))
        if val > result.val_metric:
            result.val_metric = val
            result.test_metric = test
            result.best_epoch = epoch
            result.params = _copy_params(params)
            since_best = 0
        else:
            since_best += 1
            if since_best >= tc.patience:
                break
    return result


def _pair_scores(Z: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", Z[pairs[:, 0]], Z[pairs[:, 1]])


def _train_link(cfg: ModelConfig, ds: Dataset, split: EdgeSplit, tc: TrainConfig,
                baseline: bool) -> TrainResult:
    L1 = normalized_laplacian(split.message_graph)
    fixed_l2 = None
    if cfg.l2_mode == "fixed_correlation" and not baseline:
        fixed_l2 = build_fixed_L2(ds.features)
    params = init_params(cfg, tc.seed)
    state = AdamState(params)
    existing = {(int(u), int(v)) for u, v in ds.graph.edges()}
    train_pos = split.train_pos
    val_pairs = np.vstack([split.val_pos, split.val_neg])
    val_labels = np.concatenate([np.ones(len(split.val_pos)), np.zeros(len(split.val_neg))])
    test_pairs = np.vstack([split.test_pos, split.test_neg])
    test_labels = np.concatenate([np.ones(len(split.test_pos)), np.zeros(len(split.test_neg))])

    result = TrainResult(params=_copy_params(params), val_metric=-np.inf)
    for epoch in range(1, tc.max_epochs + 1):
        neg = _sample_negatives(stream(tc.seed, "negatives", epoch), ds.n,
                                existing, len(train_pos))
        pairs = np.vstack([train_pos, neg])
        labels = np.concatenate([np.ones(len(train_pos)), np.zeros(len(neg))])

        tape = Tape()
        wrapped = wrap_params(tape, params)
        gen = stream(tc.seed, "dropout", epoch)
        Z, extras = model_forward(tape, ds.features, L1, wrapped, cfg,
                                  mode="train", rng=gen, fixed_l2=fixed_l2,
                                  baseline=baseline)
        loss = _regularized(ad.bce_logits(ad.pairwise_dot(Z, pairs), labels),
                            extras, cfg.l1_reg_weight)
        if not np.isfinite(loss.value):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
        adam_step(params, _grads_tree(tape, loss, wrapped), state, tc)

        if epoch % tc.eval_every == 0 or epoch == tc.max_epochs:
            Z_eval = _forward_eval(params, ds.features, L1, cfg, fixed_l2, baseline)
            val = roc_auc(_pair_scores(Z_eval, val_pairs), val_labels)
            test = roc_auc(_pair_scores(Z_eval, test_pairs), test_labels)
            result.history.append((epoch, float(loss.value), val, test))
            if val > result.val_metric:
                result.val_metric = val
                result.test_metric = test
                result.best_epoch = epoch
                result.params = _copy_params(params)
    return result
