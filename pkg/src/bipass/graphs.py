"""Sparse undirected graphs and their Laplacians.

Adjacency matrices are CSR (``scipy.sparse.csr_array``, float64) with
sorted, duplicate-free column indices per row. A :class:`Graph` is
validated at construction: symmetric adjacency, empty diagonal, strictly
positive finite edge weights. All operations here are pure functions;
treat constructed objects as immutable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp


def validate_csr(m: sp.csr_array) -> None:
    """Check structural CSR invariants; raises ValueError on violation."""
    indptr = m.indptr
    if indptr[0] != 0 or indptr[-1] != len(m.data) or np.any(np.diff(indptr) < 0):
        raise ValueError("malformed CSR index pointer")
    for i in range(m.shape[0]):
        cols = m.indices[indptr[i]:indptr[i + 1]]
        if cols.size and (np.any(np.diff(cols) <= 0) or cols[0] < 0 or cols[-1] >= m.shape[1]):
            raise ValueError(f"row {i}: column indices not strictly increasing in range")
    if not np.all(np.isfinite(m.data)):
        raise ValueError("non-finite entries in sparse matrix")


def _to_csr(matrix) -> sp.csr_array:
    m = sp.csr_array(matrix, dtype=np.float64)
    m.sum_duplicates()
    m.sort_indices()
    return m


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph with `n` nodes and a CSR adjacency."""

    n: int
    adjacency: sp.csr_array

    def __post_init__(self):
        a = self.adjacency
        if a.shape != (self.n, self.n):
            raise ValueError(f"adjacency shape {a.shape} does not match n={self.n}")
        validate_csr(a)
        if a.diagonal().any():
            raise ValueError("self-loops are not allowed")
        if a.nnz and np.any(a.data <= 0):
            raise ValueError("edge weights must be positive")
        asym = abs(a - a.T)
        if asym.nnz and asym.data.max() > 0:
            raise ValueError("adjacency must be symmetric")

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[tuple[int, int]],
        weights: Sequence[float] | None = None,
    ) -> "Graph":
        """Build a graph from unique undirected edges (u, v), u != v.

        An edge listed twice (in either orientation) is an error, not a merge.
        """
        edges = list(edges)
        if weights is None:
            weights = np.ones(len(edges))
        elif len(weights) != len(edges):
            raise ValueError("weights length does not match edges")
        seen = set()
        rows, cols, vals = [], [], []
        for (u, v), w in zip(edges, weights):
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate edge ({u}, {v})")
            seen.add(key)
            rows += [u, v]
            cols += [v, u]
            vals += [w, w]
        adj = sp.csr_array(
            (np.asarray(vals, dtype=np.float64), (rows, cols)), shape=(n, n)
        )
        return cls(n=n, adjacency=_to_csr(adj))

    def edges(self) -> list[tuple[int, int]]:
        """Unique undirected edges as (u, v) with u < v, sorted."""
        coo = self.adjacency.tocoo()
        return sorted((int(u), int(v)) for u, v in zip(coo.row, coo.col) if u < v)

    @property
    def n_edges(self) -> int:
        return self.adjacency.nnz // 2


def degree_vector(g: Graph) -> np.ndarray:
    """Weighted degree of every node: row sums of the adjacency."""
    return np.asarray(g.adjacency.sum(axis=1)).ravel()


def laplacian(g: Graph) -> sp.csr_array:
    """Combinatorial Laplacian D - A. Rows sum to zero; symmetric PSD."""
    d = degree_vector(g)
    return _to_csr(sp.diags_array(d) - g.adjacency)


def normalized_laplacian(g: Graph) -> sp.csr_array:
    """Symmetric normalized Laplacian I - D^{-1/2} A D^{-1/2}.

    Isolated nodes use the convention d^{-1/2} = 0, so their row reduces
    to the identity row and the matrix stays well defined.
    """
    d = degree_vector(g)
    with np.errstate(divide="ignore"):
        dinv = np.where(d > 0, d, 1.0) ** -0.5
    dinv[d == 0] = 0.0
    scaled = g.adjacency.multiply(dinv[:, None]).multiply(dinv[None, :])
    return _to_csr(sp.eye_array(g.n) - scaled)


def smoothness(L, X) -> float:
    """Quadratic form trace(X^T L X) measuring signal variation on the graph.

    For the combinatorial Laplacian this equals
    sum_{i,j} (1/2) a_ij ||X_i - X_j||^2. X may be a vector or an n-by-d
    matrix; L must be n-by-n.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 1 and L.shape[0] != 1:
        X = X.T
    if L.shape[0] != L.shape[1] or L.shape[1] != X.shape[0]:
        raise ValueError(f"dimension mismatch: L {L.shape}, X {X.shape}")
    return float(np.sum(X * (L @ X)))


def spmm(S, X: np.ndarray) -> np.ndarray:
    """Sparse-dense product S @ X with an explicit shape check."""
    X = np.asarray(X, dtype=np.float64)
    cols = X.shape[0] if X.ndim >= 1 else None
    if S.shape[1] != cols:
        raise ValueError(f"dimension mismatch: S {S.shape}, X {X.shape}")
    return S @ X
