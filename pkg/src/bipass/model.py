"""Graph model layers built on the bi-directional filter.

A layer smooths its input jointly along the node graph (constant sparse
L1) and a feature graph (L2), then applies a dense weight and an
activation. Three feature-graph modes:

  learnable          L2 is built on the tape from a strictly upper
                     triangular parameter U via sigmoid weights, so it
                     trains jointly with the layer weights.
  fixed_correlation  L2 is a thresholded-correlation Laplacian computed
                     once from the dataset features (first layer only;
                     deeper layers see no feature graph).
  identity           no feature smoothing; the filter degenerates to the
                     single-direction case.

The in-layer filter is the unrolled taylor variant: its updates are
polynomials in L1, L2 and the input, so the tape differentiates through
all k iterations. The exact variant needs linear-solve adjoints the tape
does not implement; request it here and you get an error rather than a
silently non-differentiable path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import Node, Tape
from .bifilter import FilterParams
from .rng import stream

L2_MODES = ("learnable", "fixed_correlation", "identity")


@dataclass(frozen=True)
class ModelConfig:
    layer_dims: tuple
    filter: FilterParams
    l2_mode: str = "learnable"
    dropout: float = 0.5
    l1_reg_weight: float = 1e-4

    def __post_init__(self):
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        if len(self.layer_dims) < 2:
            raise ValueError("layer_dims needs at least input and output sizes")
        if any(d < 1 for d in self.layer_dims):
            raise ValueError("layer dimensions must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.l2_mode not in L2_MODES:
            raise ValueError(f"l2_mode must be one of {L2_MODES}")
        if self.l1_reg_weight < 0:
            raise ValueError("l1_reg_weight must be non-negative")

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1


def init_params(config: ModelConfig, seed: int) -> list:
    """Per-layer parameter arrays: Glorot-uniform W, zero U.

    Zero U starts the learnable feature graph at the uniform-correlation
    prior (all sigmoid weights 0.5). Returns a list of dicts so training
    can treat parameters generically.
    """
    layers = []
    for l in range(config.n_layers):
        d_in, d_out = config.layer_dims[l], config.layer_dims[l + 1]
        gen = stream(seed, "init", l, "W")
        limit = np.sqrt(6.0 / (d_in + d_out))
        layer = {"W": gen.uniform(-limit, limit, size=(d_in, d_out))}
        if config.l2_mode == "learnable":
            layer["U"] = np.zeros((d_in, d_in))
        layers.append(layer)
    return layers


def wrap_params(tape: Tape, params: list) -> list:
    """Lift parameter arrays onto a tape as trainable variables."""
    return [{name: tape.variable(value) for name, value in layer.items()} for layer in params]


def _strict_upper_mask(d: int) -> np.ndarray:
    return np.triu(np.ones((d, d)), k=1)


def upper_sigmoid(U: Node) -> Node:
    """Sigmoid weights on the strictly-upper entries of U, zero elsewhere.

    The mask multiplies after the sigmoid, so entries at or below the
    diagonal contribute nothing and receive zero gradient; they stay
    structurally zero for the whole of training.
    """
    d = U.value.shape[0]
    if U.value.ndim != 2 or U.value.shape != (d, d) or d < 2:
        raise ValueError(f"U must be square with d >= 2, got {U.value.shape}")
    mask = U.tape.constant(_strict_upper_mask(d))
    return ad.mul(ad.sigmoid(U), mask)


def build_learnable_L2(U: Node) -> Node:
    """Differentiable feature-graph Laplacian I - D^(-1/2) A D^(-1/2).

    A is the symmetrized sigmoid-weight matrix W2 + W2^T: symmetric, zero
    diagonal, entries in (0,1). Degree terms are guarded, so the result
    stays finite even when all of U is pushed far negative.
    """
    w2 = upper_sigmoid(U)
    a2 = ad.add(w2, ad.transpose(w2))
    eye = U.tape.constant(np.eye(U.value.shape[0]))
    return ad.sub(eye, ad.sym_normalize(a2))


def build_fixed_L2(X: np.ndarray) -> np.ndarray:
    """Thresholded-correlation feature-graph Laplacian, built once.

    Feature i is column i of X. P = row-softmax of all pairwise cosine
    similarities (self included); an edge (i,j) exists when P_ij exceeds
    the mean of P. The binary adjacency is symmetrized by max, the
    diagonal dropped, and the output is I minus its symmetric
    normalization. Not differentiable by design.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] < 2:
        raise ValueError("need an n x d feature matrix with d >= 2")
    norms = np.linalg.norm(X, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    cos = (X / safe).T @ (X / safe)  # zero-norm columns contribute cosine 0
    shifted = np.exp(cos - cos.max(axis=1, keepdims=True))
    P = shifted / shifted.sum(axis=1, keepdims=True)
    A = (P > P.mean()).astype(np.float64)
    A = np.maximum(A, A.T)
    np.fill_diagonal(A, 0.0)
    normalized, _, _ = ad._sym_normalize_value(A)
    return np.eye(X.shape[1]) - normalized


def unrolled_bifilter(F: Node, L1, L2: Node, params: FilterParams) -> Node:
    """Taylor-variant ADMM written in tape primitives, k iterations.

    Mirrors the numpy implementation update for update so gradients flow
    through every iterate into L2 (and anything upstream of F).
    """
    if params.variant != "taylor":
        raise ValueError("only the taylor variant is differentiable; use it for training")
    if not sp.issparse(L1):
        L1 = sp.csr_array(np.asarray(L1, dtype=np.float64))
    p, c1, c2 = params.p, params.c1, params.c2
    y1 = F
    y2 = F
    z = F.tape.constant(np.zeros(F.value.shape))
    for _ in range(params.k):
        rhs = ad.add(ad.add(F, ad.scale(y2, p)), z)
        y1 = ad.scale(ad.sub(rhs, ad.scale(ad.spmm(L1, rhs), c1)), 1.0 / (1.0 + p))
        rhs = ad.sub(ad.add(F, ad.scale(y1, p)), z)
        y2 = ad.scale(ad.sub(rhs, ad.scale(ad.matmul(rhs, L2), c2)), 1.0 / (1.0 + p))
        z = ad.add(z, ad.scale(ad.sub(y2, y1), p))
    return ad.scale(ad.add(y1, y2), 0.5)


def bigcn_layer(H: Node, L1, layer: dict, config: ModelConfig, fixed_l2=None,
                activation: str = "relu") -> Node:
    """One filtered layer: activation(ADMM(H, L1, L2) @ W)."""
    d_in = H.value.shape[1]
    if layer["W"].value.shape[0] != d_in:
        raise ValueError(
            f"weight rows {layer['W'].value.shape[0]} do not match input width {d_in}"
        )
    if config.l2_mode == "learnable":
        L2 = build_learnable_L2(layer["U"])
    elif config.l2_mode == "fixed_correlation" and fixed_l2 is not None:
        L2 = H.tape.constant(fixed_l2)
    else:
        L2 = H.tape.constant(np.eye(d_in))
    smoothed = unrolled_bifilter(H, L1, L2, config.filter)
    out = ad.matmul(smoothed, layer["W"])
    return ad.relu(out) if activation == "relu" else out


def gcn_baseline_layer(H: Node, L1, W: Node, lam: float, activation: str = "relu") -> Node:
    """Single-direction baseline: activation((I - lam*L1) H W)."""
    if not sp.issparse(L1):
        L1 = sp.csr_array(np.asarray(L1, dtype=np.float64))
    if W.value.shape[0] != H.value.shape[1]:
        raise ValueError(
            f"weight rows {W.value.shape[0]} do not match input width {H.value.shape[1]}"
        )
    h = ad.sub(H, ad.scale(ad.spmm(L1, H), lam))
    out = ad.matmul(h, W)
    return ad.relu(out) if activation == "relu" else out


@dataclass
class ForwardExtras:
    """Side outputs of a forward pass used by the training loss."""

    l1_terms: list = field(default_factory=list)


def model_forward(tape: Tape, X, L1, wrapped: list, config: ModelConfig,
                  mode: str = "train", rng=None, fixed_l2=None, baseline: bool = False):
    """Stacked forward pass; returns (output node, ForwardExtras).

    relu on hidden layers, identity on the last. In train mode each
    layer's input passes through an inverted-dropout mask drawn from
    `rng`; eval mode applies no mask. The baseline flag swaps every
    filtered layer for the single-direction GCN layer with the
    equivalent lambda = 2*lambda1/(1+p).
    """
    if mode not in ("train", "eval"):
        raise ValueError("mode must be train or eval")
    if mode == "train" and config.dropout > 0 and rng is None:
        raise ValueError("train mode with dropout needs a generator")
    if config.l2_mode == "fixed_correlation" and fixed_l2 is None and not baseline:
        raise ValueError("fixed_correlation mode needs a precomputed first-layer L2")
    h = tape.constant(np.asarray(X, dtype=np.float64))
    extras = ForwardExtras()
    for l, layer in enumerate(wrapped):
        if mode == "train" and config.dropout > 0:
            keep = rng.random(h.value.shape) >= config.dropout
            h = ad.mul(h, tape.constant(keep / (1.0 - config.dropout)))
        activation = "relu" if l < len(wrapped) - 1 else "identity"
        if baseline:
            h = gcn_baseline_layer(h, L1, layer["W"], config.filter.c1, activation)
        else:
            h = bigcn_layer(h, L1, layer, config, fixed_l2 if l == 0 else None, activation)
            if config.l2_mode == "learnable":
                extras.l1_terms.append(ad.abs_sum(upper_sigmoid(layer["U"])))
    return h, extras
