"""Reverse-mode autodiff over dense numpy matrices.

Define-by-run tape: every operation appends a node holding its value and
a closure that maps the node's adjoint to its parents' adjoint
contributions. The tape is rebuilt on every forward pass (unroll depth
and dropout masks change between steps), and backward() sweeps the node
list in reverse creation order, which is already a topological order.

Shapes are explicit everywhere; the only broadcasting allowed is
multiplication by a python scalar. Sparse matrices appear only as
constant left factors in spmm(), so no sparse adjoint is ever built.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class Node:
    """One tape entry: an operation result plus its backward closure."""

    __slots__ = ("tape", "value", "parents", "vjp", "adjoint")

    def __init__(self, tape, value, parents=(), vjp=None):
        self.tape = tape
        self.value = value
        self.parents = parents
        self.vjp = vjp
        self.adjoint = None
        tape.nodes.append(self)

    @property
    def shape(self):
        return self.value.shape


class Variable(Node):
    """Leaf node created directly on the tape; may be trainable."""

    __slots__ = ("trainable",)

    def __init__(self, tape, value, trainable=True):
        super().__init__(tape, value)
        self.trainable = trainable


class Tape:
    def __init__(self):
        self.nodes = []

    def variable(self, value, trainable=True) -> Variable:
        return Variable(self, np.asarray(value, dtype=np.float64), trainable)

    def constant(self, value) -> Variable:
        return Variable(self, np.asarray(value, dtype=np.float64), trainable=False)

    def backward(self, loss: Node) -> None:
        """Populate adjoints of every node reachable from `loss`."""
        if loss.tape is not self:
            raise ValueError("loss node belongs to a different tape")
        if loss.value.shape != ():
            raise ValueError(f"backward requires a scalar loss, got shape {loss.value.shape}")
        for node in self.nodes:
            node.adjoint = None
        loss.adjoint = np.ones(())
        for node in reversed(self.nodes):
            if node.adjoint is None or node.vjp is None:
                continue
            for parent, contribution in zip(node.parents, node.vjp(node.adjoint)):
                if contribution is None:
                    continue
                if parent.adjoint is None:
                    parent.adjoint = np.zeros_like(parent.value)
                parent.adjoint = parent.adjoint + contribution

    def gradients(self, loss: Node, variables) -> list:
        """Backward pass, then collect per-variable gradients (zeros if unused)."""
        self.backward(loss)
        return [
            v.adjoint if v.adjoint is not None else np.zeros_like(v.value) for v in variables
        ]


def _same_tape(*nodes) -> Tape:
    tape = nodes[0].tape
    for node in nodes[1:]:
        if node.tape is not tape:
            raise ValueError("operands belong to different tapes")
    return tape


def _require_shape(a: Node, b: Node) -> None:
    if a.value.shape != b.value.shape:
        raise ValueError(f"shape mismatch: {a.value.shape} vs {b.value.shape}")


# -- primitives ---------------------------------------------------------------


def matmul(a: Node, b: Node) -> Node:
    tape = _same_tape(a, b)
    if a.value.shape[-1] != b.value.shape[0]:
        raise ValueError(f"matmul mismatch: {a.value.shape} @ {b.value.shape}")
    av, bv = a.value, b.value
    return Node(tape, av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def spmm(S, x: Node) -> Node:
    """Constant sparse left factor times dense node. S is never differentiated."""
    if not sp.issparse(S):
        raise TypeError("spmm expects a sparse constant left operand")
    if S.shape[1] != x.value.shape[0]:
        raise ValueError(f"spmm mismatch: {S.shape} @ {x.value.shape}")
    ST = S.T.tocsr()
    return Node(x.tape, S @ x.value, (x,), lambda g: (ST @ g,))


def add(a: Node, b: Node) -> Node:
    tape = _same_tape(a, b)
    _require_shape(a, b)
    return Node(tape, a.value + b.value, (a, b), lambda g: (g, g))


def sub(a: Node, b: Node) -> Node:
    tape = _same_tape(a, b)
    _require_shape(a, b)
    return Node(tape, a.value - b.value, (a, b), lambda g: (g, -g))


def scale(x: Node, c: float) -> Node:
    c = float(c)
    return Node(x.tape, c * x.value, (x,), lambda g: (c * g,))


def transpose(x: Node) -> Node:
    return Node(x.tape, x.value.T.copy(), (x,), lambda g: (g.T,))


def _stable_sigmoid(v: np.ndarray) -> np.ndarray:
    # Split by sign so exp never overflows.
    e = np.exp(-np.abs(v))
    return np.where(v >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(x: Node) -> Node:
    out = _stable_sigmoid(x.value)
    return Node(x.tape, out, (x,), lambda g: (g * out * (1.0 - out),))


def relu(x: Node) -> Node:
    keep = x.value > 0
    return Node(x.tape, np.where(keep, x.value, 0.0), (x,), lambda g: (g * keep,))


def row_softmax(x: Node) -> Node:
    v = x.value
    shifted = v - v.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        inner = (g * out).sum(axis=1, keepdims=True)
        return (out * (g - inner),)

    return Node(x.tape, out, (x,), vjp)


def mul(a: Node, b: Node) -> Node:
    tape = _same_tape(a, b)
    _require_shape(a, b)
    av, bv = a.value, b.value
    return Node(tape, av * bv, (a, b), lambda g: (g * bv, g * av))


def row_slice(x: Node, rows) -> Node:
    rows = np.asarray(rows, dtype=np.intp)

    def vjp(g):
        dx = np.zeros_like(x.value)
        np.add.at(dx, rows, g)
        return (dx,)

    return Node(x.tape, x.value[rows], (x,), vjp)


def total_sum(x: Node) -> Node:
    return Node(x.tape, np.sum(x.value), (x,), lambda g: (g * np.ones_like(x.value),))


def mean(x: Node) -> Node:
    size = x.value.size
    return Node(x.tape, np.mean(x.value), (x,), lambda g: (g * np.ones_like(x.value) / size,))


def abs_sum(x: Node) -> Node:
    return Node(x.tape, np.sum(np.abs(x.value)), (x,), lambda g: (g * np.sign(x.value),))


def _sym_normalize_value(A: np.ndarray):
    d = A.sum(axis=1)
    dsafe = np.where(d > 0, d, 1.0)
    dinv = np.where(d > 0, dsafe**-0.5, 0.0)
    return dinv[:, None] * A * dinv[None, :], d, dinv


def sym_normalize(a: Node) -> Node:
    """D^(-1/2) A D^(-1/2) with D = diag(row sums); grads flow through both.

    Rows with zero sum map to zero rows (the d^(-1/2)=0 convention), and
    their entries receive zero gradient.
    """
    A = a.value
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"sym_normalize expects a square matrix, got {A.shape}")
    out, d, dinv = _sym_normalize_value(A)
    dsafe = np.where(d > 0, d, 1.0)

    def vjp(g):
        # d_i depends on row i of A only, so both d-terms of the product
        # rule land on row k: dA_kl = g_kl/sqrt(d_k d_l)
        #   - 1/(2 d_k) * (sum_j g_kj N_kj + sum_i g_ik N_ik).
        gn = g * out
        rowcol = gn.sum(axis=1) + gn.sum(axis=0)
        corr = np.where(d > 0, 0.5 * rowcol / dsafe, 0.0)
        return (dinv[:, None] * g * dinv[None, :] - corr[:, None],)

    return Node(a.tape, out, (a,), vjp)


# -- fused losses --------------------------------------------------------------
# The primitive list above has no elementwise log, so the two cross-entropy
# losses are single fused nodes with hand-derived stable adjoints.


def cross_entropy_logits(logits: Node, labels) -> Node:
    """Mean negative log-likelihood of integer labels under row softmax."""
    labels = np.asarray(labels, dtype=np.intp)
    v = logits.value
    if v.ndim != 2:
        raise ValueError("cross_entropy_logits expects a 2-D logits matrix")
    if labels.shape != (v.shape[0],):
        raise ValueError(f"labels shape {labels.shape} does not match {v.shape[0]} rows")
    if v.shape[0] == 0:
        raise ValueError("empty logits: nothing to average")
    if labels.min() < 0 or labels.max() >= v.shape[1]:
        raise ValueError("label outside [0, n_classes)")
    m = v.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(v - m).sum(axis=1))
    rows = np.arange(v.shape[0])
    value = np.mean(lse - v[rows, labels])

    def vjp(g):
        soft = np.exp(v - m)
        soft /= soft.sum(axis=1, keepdims=True)
        soft[rows, labels] -= 1.0
        return (g * soft / v.shape[0],)

    return Node(logits.tape, np.asarray(value), (logits,), vjp)


def bce_logits(scores: Node, labels) -> Node:
    """Mean binary cross-entropy of {0,1} labels under sigmoid(scores)."""
    labels = np.asarray(labels, dtype=np.float64)
    s = scores.value
    if labels.shape != s.shape:
        raise ValueError(f"labels shape {labels.shape} does not match scores {s.shape}")
    if s.size == 0:
        raise ValueError("empty scores: nothing to average")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0 or 1")
    # max(s,0) - s*y + log(1+exp(-|s|)) is the overflow-safe expansion.
    value = np.mean(np.maximum(s, 0.0) - s * labels + np.log1p(np.exp(-np.abs(s))))
    probs = _stable_sigmoid(s)

    def vjp(g):
        return (g * (probs - labels) / s.size,)

    return Node(scores.tape, np.asarray(value), (scores,), vjp)


def pairwise_dot(z: Node, pairs) -> Node:
    """Per-pair inner products dot(z[u], z[v]) as a vector node."""
    pairs = np.asarray(pairs, dtype=np.intp)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError("pairs must be an (m, 2) index array")
    u, v = pairs[:, 0], pairs[:, 1]
    Z = z.value

    def vjp(g):
        dz = np.zeros_like(Z)
        np.add.at(dz, u, g[:, None] * Z[v])
        np.add.at(dz, v, g[:, None] * Z[u])
        return (dz,)

    return Node(z.tape, np.sum(Z[u] * Z[v], axis=1), (z,), vjp)


# -- finite-difference checking --------------------------------------------------


def grad_check(build, params, h: float = 1e-6) -> float:
    """Compare reverse-mode gradients against central finite differences.

    `build(tape, *variables)` must construct and return a scalar loss node
    from the given leaf variables. Returns the max over all parameter
    entries of |g_ad - g_fd| / max(1, |g_fd|).
    """
    params = [np.asarray(p, dtype=np.float64) for p in params]
    tape = Tape()
    variables = [tape.variable(p) for p in params]
    loss = build(tape, *variables)
    grads = tape.gradients(loss, variables)

    def value_at(ps):
        t = Tape()
        return float(build(t, *[t.variable(p) for p in ps]).value)

    worst = 0.0
    for i, p in enumerate(params):
        flat = p.ravel()
        for j in range(flat.size):
            bumped = [q.copy() for q in params]
            bumped[i].ravel()[j] = flat[j] + h
            up = value_at(bumped)
            bumped[i].ravel()[j] = flat[j] - h
            down = value_at(bumped)
            g_fd = (up - down) / (2.0 * h)
            g_ad = grads[i].ravel()[j]
            worst = max(worst, abs(g_ad - g_fd) / max(1.0, abs(g_fd)))
    return worst
